"""Phase-error minimization over the reduced family parameter and coefficient solves.

Zero-dissipation two-stage schemes are fixed, phase-wise, by a single number
Y = a12 a21 - a11 a22; fourth-order zero-dissipation three-stage schemes by
X (sum of the principal 2x2 minors of A).  The workflow is:

1. pick a Gaussian weight exp(-alpha sigma^2) and minimise the weighted L2
   phase error over Y or X (:func:`minimize_param`);
2. add closure equations until the coefficient system is determined and
   solve it (:func:`solve_two_stage`, :func:`solve_three_stage`).
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .butcher import (
    ButcherTableau,
    builtin_scheme,
    order_of_accuracy,
    tree_density,
    trees_of_order,
)
from .spectral import (
    arg_three_stage,
    arg_two_stage,
    dispersion_norm,
    dispersive_order,
    dissipation_norm,
    dissipative_order,
    gauss_legendre,
    integrate_l2,
)

__all__ = [
    "ASYMPTOTIC",
    "BracketError",
    "ConstraintSet",
    "Family",
    "NoSolutionError",
    "WeightedObjective",
    "alpha_sweep",
    "minimize_param",
    "parse_closures",
    "solve_three_stage",
    "solve_two_stage",
    "verify_scheme",
    "weighted_phase_norm",
]

ASYMPTOTIC = "inf"

BRACKETS = {2: (-0.2, 0.0), 3: (0.0, 0.2)}
LIMITS = {2: -1.0 / 12.0, 3: 0.1}
PARAM_TOL = 1e-10

N_STARTS = 64
NEWTON_MAXITER = 100
RESIDUAL_TOL = {2: 1e-12, 3: 1e-11}
COEF_BOUND = 3.0


class Family(IntEnum):
    TWO_STAGE = 2
    THREE_STAGE = 3


class BracketError(ValueError):
    pass


class NoSolutionError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg if residual is None else f"{msg} (best residual {residual:.3e})")
        self.residual = residual


def _is_asymptotic(alpha) -> bool:
    if isinstance(alpha, str):
        if alpha.strip().lower() in ("inf", "infinity", "asymptotic"):
            return True
        raise ValueError(f"alpha must be a non-negative number or 'inf', got {alpha!r}")
    return math.isinf(alpha) and alpha > 0


# ----------------------------------------------------------- phase objective


@dataclass(frozen=True)
class WeightedObjective:
    """Weighted L2 phase error on [0, pi]; alpha may be ``ASYMPTOTIC``."""

    family: Family
    alpha: float | str = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(int(self.family)))
        if _is_asymptotic(self.alpha):
            object.__setattr__(self, "alpha", ASYMPTOTIC)
            return
        a = float(self.alpha)
        if not a >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def asymptotic(self) -> bool:
        return self.alpha == ASYMPTOTIC

    def weight(self, sigma):
        return np.exp(-self.alpha * np.asarray(sigma, dtype=float) ** 2)

    def upper(self) -> float:
        # exp(-2 alpha s^2) is below 1e-55 past this point
        if self.alpha == 0:
            return np.pi
        return min(np.pi, 8.0 / np.sqrt(self.alpha))

    def arg(self, param, sigma):
        if self.family == Family.TWO_STAGE:
            return arg_two_stage(param, sigma)
        return arg_three_stage(param, sigma)

    def darg(self, param, sigma):
        """Derivative of the closed-form phase with respect to the parameter."""
        s = np.asarray(sigma, dtype=float)
        if self.family == Family.TWO_STAGE:
            x = 1.0 + s ** 2 * param
            return -s ** 3 / (x ** 2 + s ** 2 / 4.0)
        num = 2.0 * (s ** 2 * param - 1.0)
        den = s - s ** 3 * (param - 1.0 / 12.0)
        return 2.0 * (den * 2.0 * s ** 2 + num * s ** 3) / (num ** 2 + den ** 2)


def weighted_phase_norm(obj: WeightedObjective, param: float) -> float:
    if obj.asymptotic:
        raise ValueError("the asymptotic objective has no finite weight; use minimize_param")
    return integrate_l2(lambda s: (s - obj.arg(param, s)) * obj.weight(s), 0.0, obj.upper())


def _gradient(obj: WeightedObjective, param: float, panels: int = 32) -> float:
    # d/dp of the squared norm, on the refined rule used by integrate_l2
    s, w = gauss_legendre(0.0, obj.upper(), panels)
    err = s - obj.arg(param, s)
    return float(-2.0 * np.sum(w * err * obj.darg(param, s) * obj.weight(s) ** 2))


def _golden(f, lo, hi, width):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > width:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = f(x2)
    return lo, hi


def minimize_param(obj: WeightedObjective, bracket=None, tol: float = PARAM_TOL) -> float:
    """Minimiser of the weighted phase error inside ``bracket``.

    Golden-section search narrows the bracket; the final digits come from
    the root of the analytic gradient.  The asymptotic objective returns the
    value that cancels the leading sigma^3 (sigma^5) term of the phase error.
    """
    if obj.asymptotic:
        return LIMITS[int(obj.family)]
    lo, hi = BRACKETS[int(obj.family)] if bracket is None else bracket
    f = lambda p: weighted_phase_norm(obj, p)
    a, b = _golden(f, lo, hi, width=1e-5 * (hi - lo))
    if a - lo < 1e-4 * (hi - lo) or hi - b < 1e-4 * (hi - lo):
        raise BracketError(f"no interior minimum in [{lo}, {hi}] for alpha={obj.alpha}")
    g = lambda p: _gradient(obj, p)
    a, b = a - 1e-4 * (hi - lo), b + 1e-4 * (hi - lo)
    if g(a) >= 0 or g(b) <= 0:
        return 0.5 * (a + b)
    return float(brentq(g, a, b, xtol=min(tol, 1e-14), rtol=4 * np.finfo(float).eps))


def alpha_sweep(family, alphas) -> list[tuple[float, float | BracketError]]:
    """(alpha, minimiser) for each alpha; failures are kept in place."""
    out = []
    for a in alphas:
        try:
            out.append((a, minimize_param(WeightedObjective(family, a))))
        except BracketError as exc:
            out.append((a, exc))
    return out


# ------------------------------------------------------------ closure parser


def _names(stages: int) -> list[str]:
    return [f"b{i}" for i in range(1, stages + 1)] + [
        f"a{i}{j}" for i in range(1, stages + 1) for j in range(1, stages + 1)
    ]


class _Linear:
    """Sparse linear form sum(coef * var) + const with rational coefficients."""

    def __init__(self, terms=None, const=Fraction(0)):
        self.terms = dict(terms or {})
        self.const = Fraction(const)

    def __add__(self, other):
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0) + v
        return _Linear(t, self.const + other.const)

    def scale(self, c):
        return _Linear({k: v * c for k, v in self.terms.items()}, self.const * c)

    def __sub__(self, other):
        return self + other.scale(-1)

    @property
    def constant(self) -> bool:
        return all(v == 0 for v in self.terms.values())


def _to_linear(node, names, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return _Linear(const=Fraction(str(node.value)))
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ValueError(f"unknown coefficient {node.id!r} in {text!r}")
        return _Linear({node.id: Fraction(1)})
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _to_linear(node.operand, names, text)
        return inner.scale(-1) if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp):
        left = _to_linear(node.left, names, text)
        right = _to_linear(node.right, names, text)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            if left.constant:
                return right.scale(left.const)
            if right.constant:
                return left.scale(right.const)
            raise ValueError(f"closure is not linear: {text!r}")
        if isinstance(node.op, ast.Div):
            if not right.constant or right.const == 0:
                raise ValueError(f"can only divide by a non-zero constant: {text!r}")
            return left.scale(1 / right.const)
    raise ValueError(f"cannot parse closure {text!r}")


@dataclass(frozen=True)
class Closure:
    """A linear equation ``sum(coefs[name] * name) = rhs``."""

    coefs: tuple
    rhs: Fraction
    text: str = ""

    def residual(self, values: dict):
        return sum(float(c) * values[k] for k, c in self.coefs) - float(self.rhs)


@dataclass(frozen=True)
class ConstraintSet:
    """Closure equations for an R-stage family plus an optional order bump."""

    stages: int
    closures: tuple = ()
    min_order: int | None = None
    lines: tuple = field(default=(), compare=False)

    @property
    def count(self) -> int:
        """Number of scalar equations contributed by the closures."""
        bump = 0
        if self.min_order is not None and self.stages == 2 and self.min_order >= 3:
            bump = 2
        return len(self.closures) + bump

    @property
    def required(self) -> int:
        return 2 if self.stages == 2 else 3

    def check(self):
        if self.count < self.required:
            raise ValueError(
                f"{self.stages}-stage system needs {self.required} closures, got {self.count}"
            )

    @classmethod
    def parse(cls, text: str, stages: int) -> ConstraintSet:
        """One constraint per line (or ';'-separated); '#' starts a comment.

        Accepted forms: ``b1 = b2``, ``a12 = 2*a22``, ``a13 + a31 = 5/18``,
        chains such as ``a13 = 0 = a23`` and ``order >= 3``.
        """
        if stages not in (2, 3):
            raise ValueError("closures are defined for 2 or 3 stages")
        names = set(_names(stages))
        closures, min_order, kept = [], None, []
        pieces = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            for part in raw.split("#", 1)[0].split(";"):
                if part.strip():
                    pieces.append((lineno, part.strip()))
        for lineno, line in pieces:
            kept.append(line)
            compact = line.replace(" ", "")
            if compact.startswith("order>="):
                try:
                    min_order = max(min_order or 0, int(compact[len("order>="):]))
                except ValueError:
                    raise ValueError(f"line {lineno}: bad order constraint {line!r}") from None
                continue
            sides = line.split("=")
            if len(sides) < 2 or any(not s.strip() for s in sides):
                raise ValueError(f"line {lineno}: expected an equation, got {line!r}")
            try:
                forms = [_to_linear(ast.parse(s.strip(), mode="eval").body, names, line)
                         for s in sides]
            except SyntaxError:
                raise ValueError(f"line {lineno}: cannot parse {line!r}") from None
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            for left, right in zip(forms[:-1], forms[1:]):
                diff = left - right
                terms = tuple(sorted((k, v) for k, v in diff.terms.items() if v != 0))
                if not terms:
                    raise ValueError(f"line {lineno}: equation has no unknowns: {line!r}")
                closures.append(Closure(terms, -diff.const, line))
        return cls(stages, tuple(closures), min_order, tuple(kept))

    @classmethod
    def from_lines(cls, lines, stages: int) -> ConstraintSet:
        return cls.parse("\n".join(lines), stages)

    def to_text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")


def parse_closures(text: str, stages: int) -> ConstraintSet:
    return ConstraintSet.parse(text, stages)


# ------------------------------------------------------- coefficient solving


def _unpack(x, R):
    b = x[..., :R]
    A = x[..., R:].reshape(x.shape[:-1] + (R, R))
    return A, b


def _pack(A, b):
    return np.concatenate([np.asarray(b, dtype=float), np.asarray(A, dtype=float).ravel()])


def _family_value(A, R):
    a = lambda i, j: A[..., i, j]
    if R == 2:
        return a(0, 1) * a(1, 0) - a(0, 0) * a(1, 1)
    return (a(0, 0) * a(1, 1) + a(1, 1) * a(2, 2) + a(2, 2) * a(0, 0)
            - a(0, 1) * a(1, 0) - a(1, 2) * a(2, 1) - a(2, 0) * a(0, 2))


def _stage_weights(t, A):
    g = np.ones(A.shape[:-1], dtype=A.dtype)
    for ch in t.children:
        g = g * (A @ _stage_weights(ch, A)[..., None])[..., 0]
    return g


def _system(param: float, cs: ConstraintSet):
    """Residuals of the packed unknowns (b, A row-major); batched over leading axes."""
    R = cs.stages
    index = {n: i for i, n in enumerate(_names(R))}
    order = 2 if R == 2 else 4
    if cs.min_order is not None:
        order = max(order, cs.min_order)
    trees = [(t, 1.0 / tree_density(t)) for n in range(1, order + 1) for t in trees_of_order(n)]
    closures = [([(index[k], float(c)) for k, c in cl.coefs], float(cl.rhs)) for cl in cs.closures]

    def F(x):
        A, b = _unpack(x, R)
        out = [np.sum(b * _stage_weights(t, A), axis=-1) - w for t, w in trees]
        out.append(np.trace(A, axis1=-2, axis2=-1) - 0.5)
        out.append(_family_value(A, R) - param)
        for terms, rhs in closures:
            out.append(sum(c * x[..., i] for i, c in terms) - rhs)
        return np.stack(out, axis=-1)

    return F


def _jacobian(F, x):
    """Jacobian by complex step, exact to rounding for polynomial residuals."""
    h = 1e-30
    dim = x.shape[-1]
    xc = x[..., None, :] + 1j * h * np.eye(dim)
    return np.swapaxes(F(xc).imag / h, -1, -2)


def _gauss_newton(F, x0, tol, maxiter=NEWTON_MAXITER):
    """Damped Gauss-Newton run on a batch of starting points at once."""
    x = np.array(x0, dtype=float, ndmin=2)
    r = F(x)
    live = np.ones(len(x), dtype=bool)
    for _ in range(maxiter):
        live &= np.max(np.abs(r), axis=-1) > tol
        if not live.any():
            break
        xs, rs = x[live], r[live]
        J = _jacobian(F, xs)
        dx = -(np.linalg.pinv(J) @ rs[..., None])[..., 0]
        nr = np.linalg.norm(rs, axis=-1)
        step = np.ones(len(xs))
        done = np.zeros(len(xs), dtype=bool)
        xn, rn = xs.copy(), rs.copy()
        for _ in range(20):
            trial = xs + step[:, None] * dx
            rt = F(trial)
            ok = ~done & (np.linalg.norm(rt, axis=-1) < nr)
            xn[ok], rn[ok] = trial[ok], rt[ok]
            done |= ok
            if done.all():
                break
            step[~done] *= 0.5
        idx = np.flatnonzero(live)
        x[idx], r[idx] = xn, rn
        live[idx[~done]] = False
    return x, r


def _starts(dim: int, n: int, seed: int):
    sob = qmc.Sobol(dim, scramble=True, seed=seed)
    return 2.0 * sob.random(n) - 1.0


def _select(roots, reference, R):
    if reference is not None:
        ref = _pack(reference.A, reference.b)
        return min(roots, key=lambda x: (np.linalg.norm(x - ref), tuple(x)))
    bounded = [x for x in roots if np.max(np.abs(x)) <= COEF_BOUND] or roots
    return min(bounded, key=lambda x: (round(np.max(np.abs(x[R:])), 12), tuple(np.round(x, 12))))


def _solve(param, cs, reference, n_starts, seed, name):
    cs.check()
    R = cs.stages
    F = _system(param, cs)
    tol = RESIDUAL_TOL[R]
    guesses = _starts(R + R * R, n_starts, seed)
    if reference is not None:
        guesses = np.vstack([guesses, _pack(reference.A, reference.b)])
    xs, rs = _gauss_newton(F, guesses, tol)
    res = np.max(np.abs(rs), axis=-1)
    roots = []
    for x in xs[res <= tol]:
        if not any(np.max(np.abs(x - y)) < 1e-8 for y in roots):
            roots.append(x)
    if not roots:
        raise NoSolutionError(f"no root of the {R}-stage system for parameter {param!r}",
                              float(res.min()))
    A, b = _unpack(_select(roots, reference, R), R)
    return ButcherTableau(A, b, name=name)


def _reference(reference):
    if reference is None or isinstance(reference, ButcherTableau):
        return reference
    return builtin_scheme(reference)


def solve_two_stage(Y: float, closures: ConstraintSet, reference=None,
                    n_starts: int = N_STARTS, seed: int = 0, name: str = "") -> ButcherTableau:
    """Two-stage zero-dissipation tableau with a12 a21 - a11 a22 = Y.

    ``reference`` (a tableau or registry name) picks the nearest root when the
    system has several; otherwise the bounded root with the smallest
    max|a_rs| wins.
    """
    if closures.stages != 2:
        raise ValueError("closures were parsed for a different stage count")
    return _solve(float(Y), closures, _reference(reference), n_starts, seed, name)


def solve_three_stage(X: float, closures: ConstraintSet, reference=None,
                      n_starts: int = N_STARTS, seed: int = 0, name: str = "") -> ButcherTableau:
    """Fourth-order zero-dissipation three-stage tableau with parameter X."""
    if closures.stages != 3:
        raise ValueError("closures were parsed for a different stage count")
    return _solve(float(X), closures, _reference(reference), n_starts, seed, name)


def system_residual(tab: ButcherTableau, param: float, closures: ConstraintSet) -> float:
    """Max residual of the defining equations at a given tableau."""
    F = _system(param, closures)
    return float(np.max(np.abs(F(_pack(tab.A, tab.b)))))


# ------------------------------------------------------------------- report


def verify_scheme(tab: ButcherTableau) -> dict:
    report = {
        "name": tab.name,
        "stages": tab.stages,
        "order": order_of_accuracy(tab),
        "dissipative_order": dissipative_order(tab),
        "dispersive_order": dispersive_order(tab),
        "phi_norm": dispersion_norm(tab),
        "a_norm": dissipation_norm(tab),
    }
    p = tab.family_parameter()
    if p is not None:
        report["Y" if tab.stages == 2 else "X"] = p
    return report
