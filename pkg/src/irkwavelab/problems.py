"""Benchmark problems with exact solutions and error metrics.

Each ``problemN`` function returns a :class:`ProblemSetup` holding the
semi-discrete system, the initial state, the time span and step, and the
error metric evaluated on the final state.  :func:`run` marches a setup with
a tableau.

1. u' = [[0, -lam], [lam, 0]] u (rotation), error vector norm at t = 0.768
2. forced oscillator u'' = -k^2 u + (k^2 - w^2) sin(w t), |u - sin(w t)| at 0.768
3. periodic 1D convection of a Gaussian wave packet, Lele6 in space
4. 1D convection of a two-wave packet on a large Dirichlet domain
5. inviscid Burgers equation from a ramp, compact scheme with closed boundaries
6. 2D periodic convection of a Gaussian-modulated plane wave
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .butcher import ButcherTableau, builtin_scheme
from .spatial import build_operator, stencil_symbol
from .timeloop import SemiDiscreteSystem, StepReport, integrate

__all__ = [
    "PROBLEMS",
    "ProblemSetup",
    "RunResult",
    "adjusted_step",
    "ProblemSpec",
    "build_problem",
    "reference_table",
    "run_cell",
    "burgers_exact",
    "l2_error",
    "problem1",
    "problem2",
    "problem3",
    "problem4",
    "problem5",
    "problem6",
    "run",
]

METRIC_TIME = 0.768


@dataclass
class ProblemSetup:
    problem: int
    system: SemiDiscreteSystem
    u0: np.ndarray
    t_end: float
    dt: float
    exact: object
    error: object
    t0: float = 0.0
    solver: str = "direct"
    x: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))


@dataclass
class RunResult:
    problem: int
    scheme: str
    dt: float
    t_end: float
    error: float
    u: np.ndarray
    report: StepReport
    params: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {"problem": self.problem, "scheme": self.scheme, "dt": self.dt,
               "t_end": self.t_end, "error": self.error, "steps": self.report.steps,
               "wall_time": self.report.wall_time}
        out.update({k: v for k, v in self.params.items() if np.isscalar(v)})
        return out


def adjusted_step(t_span: float, dt: float) -> float:
    """Largest dt' <= dt that divides t_span into a whole number of steps."""
    if t_span <= 0:
        return dt
    n = int(np.ceil(t_span / dt - 1e-9))
    return t_span / n


def l2_error(u, v) -> float:
    """Root-mean-square difference over grid nodes."""
    d = np.asarray(u) - np.asarray(v)
    return float(np.sqrt(np.mean(d ** 2)))


def run(setup: ProblemSetup, tab: ButcherTableau, recorder=None, solver: str | None = None) -> RunResult:
    u, report = integrate(setup.system, tab, setup.u0, setup.t0, setup.t_end, setup.dt,
                          recorder=recorder, solver=solver or setup.solver)
    return RunResult(setup.problem, tab.name, setup.dt, setup.t_end,
                     float(setup.error(u)), u, report, dict(setup.params))


# ------------------------------------------------------------------ ODE tests


def problem1(dt: float = 0.008, lam: float = 10.0, t_end: float = METRIC_TIME) -> ProblemSetup:
    L = np.array([[0.0, -lam], [lam, 0.0]])
    exact = lambda t: np.array([np.cos(lam * t), np.sin(lam * t)])
    system = SemiDiscreteSystem.linear(L, exact=exact, name="rotation")
    err = lambda u: float(np.linalg.norm(u - exact(t_end)))
    return ProblemSetup(1, system, np.array([1.0, 0.0]), t_end, adjusted_step(t_end, dt),
                        exact, err, params={"lam": lam})


def problem2(dt: float = 0.016, omega: float = 10.0, k: float = 15.0,
             t_end: float = METRIC_TIME) -> ProblemSetup:
    L = np.array([[0.0, 1.0], [-k * k, 0.0]])
    forcing = lambda t: np.array([0.0, (k * k - omega * omega) * np.sin(omega * t)])
    exact = lambda t: np.array([np.sin(omega * t), omega * np.cos(omega * t)])
    system = SemiDiscreteSystem.linear(L, forcing=forcing, exact=exact, name="forced oscillator")
    err = lambda u: float(abs(u[0] - np.sin(omega * t_end)))
    return ProblemSetup(2, system, np.array([0.0, omega]), t_end, adjusted_step(t_end, dt),
                        exact, err, params={"omega": omega, "k": k})


# ------------------------------------------------------------- 1D convection


def _convection_1d(op, speed=1.0, dirichlet=False):
    M1, M2 = op.M1.tolil(), op.M2.tolil()
    if dirichlet:
        for i in (0, op.n - 1):
            M1[i, :] = 0.0
            M2[i, :] = 0.0
            M1[i, i] = 1.0
    M1, M2 = sp.csr_matrix(M1), sp.csr_matrix(M2)
    mass = None if op.explicit else M1
    L = -speed * (M2 if mass is not None else M1 @ M2)
    return SemiDiscreteSystem.linear(L, mass=mass)


def _packet(x, xm, b, k):
    return np.exp(-(x - xm) ** 2 / b) * np.cos(k * (x - xm))


def problem3(nc: float = 4.0, k: float = 4.0, t_end: float = 20.0, h: float = 0.01,
             length: float = 30.0, xm: float = 5.0, b: float = 2.0, kind: str = "Lele6",
             boundary: str = "periodic") -> ProblemSetup:
    """Wave packet on [0, length]; ``boundary="closed"`` pins both ends to zero instead."""
    periodic = boundary == "periodic"
    n = int(round(length / h)) + (0 if periodic else 1)
    op = build_operator(kind, n, h, boundary)
    x = op.x
    if periodic:
        exact = lambda t: _packet((x - t) % length, xm, b, k)
    else:
        exact = lambda t: _packet(x - t, xm, b, k)
    system = _convection_1d(op, dirichlet=not periodic)
    system.exact = exact
    dt = adjusted_step(t_end, nc * h)
    err = lambda u: l2_error(u, exact(t_end))
    return ProblemSetup(3, system, exact(0.0), t_end, dt, exact, err, x=x,
                        params={"nc": nc, "k": k, "n": n, "h": h, "boundary": boundary})


def problem4(nc: float = 1.0, t_end: float = 300.0, h: float = 0.5, length: float = 600.0,
             xm: float = 90.0, b: float = 400.0, k1: float = 0.125, k2: float = 0.0625,
             kind: str = "Lele6") -> ProblemSetup:
    n = int(round(length / h)) + 1
    op = build_operator(kind, n, h, "closed")
    x = op.x

    def exact(t):
        s = x - t - xm
        return np.exp(-s ** 2 / b) * (np.cos(2 * np.pi * k1 * s) + np.cos(2 * np.pi * k2 * s))

    system = _convection_1d(op, dirichlet=True)
    system.exact = exact
    dt = adjusted_step(t_end, nc * h)
    err = lambda u: l2_error(u, exact(t_end))
    return ProblemSetup(4, system, exact(0.0), t_end, dt, exact, err, x=x,
                        params={"nc": nc, "n": n, "h": h})


# -------------------------------------------------------------------- Burgers


def burgers_ramp(x):
    x = np.asarray(x, dtype=float)
    return np.clip(2.5 - x, 0.0, 1.0)


def burgers_exact(x, t):
    """Characteristics solution for the ramp datum, valid up to the shock time t = 1."""
    if t >= 1.0:
        raise ValueError("the ramp steepens into a shock at t = 1; exact form given for t < 1")
    x = np.asarray(x, dtype=float)
    return np.clip((2.5 - x) / (1.0 - t), 0.0, 1.0)


def front_position(x, u, level: float = 0.5) -> float:
    """Downstream-most x where u crosses ``level``, linearly interpolated."""
    above = np.flatnonzero(u >= level)
    i = above[-1]
    if i + 1 >= len(x):
        return float(x[i])
    u0, u1 = u[i], u[i + 1]
    return float(x[i] + (u0 - level) / (u0 - u1) * (x[i + 1] - x[i]))


def problem5(nc: float = 1.0, t_end: float = 0.9, h: float = 0.005, length: float = 5.0,
             kind: str = "Lele6", window: float = 0.05) -> ProblemSetup:
    n = int(round(length / h)) + 1
    op = build_operator(kind, n, h, "closed")
    x = op.x
    M1, M2 = op.M1.tolil(), op.M2.tolil()
    for i in (0, n - 1):
        M1[i, :] = 0.0
        M2[i, :] = 0.0
        M1[i, i] = 1.0
    M1, M2 = sp.csr_matrix(M1), sp.csr_matrix(M2)
    mass = None if op.explicit else M1
    D = M2 if mass is not None else M1 @ M2

    rhs = lambda t, u: -D @ (0.5 * u * u)
    jac = lambda t, u: -D @ sp.diags(u)
    exact = lambda t: burgers_exact(x, t)
    system = SemiDiscreteSystem(n, rhs, jacobian=jac, mass=mass, exact=exact, name="burgers")
    u0 = burgers_ramp(x)
    dt = adjusted_step(t_end, nc * h / np.abs(u0).max())
    front = 2.5 - 0.5 * (1.0 - t_end)

    def err(u):
        away = np.abs(x - front) > window
        return float(h * np.sum(np.abs(u - exact(t_end))[away]))

    return ProblemSetup(5, system, u0, t_end, dt, exact, err, x=x,
                        params={"nc": nc, "n": n, "h": h, "front": front})


# ------------------------------------------------------------- 2D convection


def _periodic_gaussian(x, y, xm, ym, b, length, images=2):
    g = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for i in range(-images, images + 1):
        for j in range(-images, images + 1):
            g += np.exp(-((x - xm + i * length) ** 2 + (y - ym + j * length) ** 2) / b)
    return g


def problem6(nc: float = 0.5, family: int = 2, t_end: float | None = None, length: float = 60.0,
             h: float = 0.1, speed: float = 0.5, b: float | None = None, kind: str | None = None,
             kx: float = 2 * np.pi, ky: float = 2 * np.pi) -> ProblemSetup:
    """2D convection on a periodic square; defaults follow the stage count."""
    if family not in (2, 3):
        raise ValueError("family is the stage count, 2 or 3")
    b = (0.2 if family == 2 else 20.0) if b is None else b
    kind = ("FDo13p" if family == 2 else "FDs13p") if kind is None else kind
    t_end = (3.0 if family == 2 else 7.2) if t_end is None else t_end
    n = int(round(length / h))
    op = build_operator(kind, n, h, "periodic")
    D = op.M2
    eye = sp.identity(n, format="csr")
    L = -speed * sp.kron(D, eye, format="csr") - speed * sp.kron(eye, D, format="csr")
    X, Y = np.meshgrid(op.x, op.x, indexing="ij")
    mid = 0.5 * length

    def exact(t):
        xs, ys = (X - speed * t) % length, (Y - speed * t) % length
        env = _periodic_gaussian(xs, ys, mid, mid, b, length)
        return (env * np.sin(kx * xs + ky * ys)).ravel()

    system = SemiDiscreteSystem.linear(L, exact=exact, name="convection 2d")
    dt = adjusted_step(t_end, nc * h / speed)
    err = lambda u: l2_error(u, exact(t_end))
    setup = ProblemSetup(6, system, exact(0.0), t_end, dt, exact, err, solver="krylov",
                         x=op.x, params={"nc": nc, "n": n, "h": h, "b": b, "kind": kind})
    setup.params["semidiscrete"] = lambda t: _semidiscrete_2d(exact(0.0), kind, h, n, speed, t)
    return setup


def _semidiscrete_2d(u0, kind, h, n, speed, t):
    """Exact solution of the spatially discretised system (time-exact reference)."""
    kh = 2 * np.pi * np.fft.fftfreq(n)
    sym = stencil_symbol(kind, kh) / h
    U = np.fft.fft2(u0.reshape(n, n))
    ph = np.exp(-1j * speed * t * (sym[:, None] + sym[None, :]))
    return np.real(np.fft.ifft2(U * ph)).ravel()


@dataclass(frozen=True)
class ProblemSpec:
    id: int
    name: str
    builder: object
    metric: str
    step_param: str

    def build(self, **params) -> ProblemSetup:
        return self.builder(**params)


PROBLEMS = {
    1: ProblemSpec(1, "rotation", problem1, "abs", "dt"),
    2: ProblemSpec(2, "forced oscillator", problem2, "abs", "dt"),
    3: ProblemSpec(3, "wave packet", problem3, "l2", "nc"),
    4: ProblemSpec(4, "two-wave packet", problem4, "l2", "nc"),
    5: ProblemSpec(5, "burgers", problem5, "l1-outside-front", "nc"),
    6: ProblemSpec(6, "convection 2d", problem6, "l2", "nc"),
}


def build_problem(problem: int, **params) -> ProblemSetup:
    if problem not in PROBLEMS:
        raise KeyError(f"unknown problem {problem!r}; choose 1-6")
    return PROBLEMS[problem].build(**params)


# ------------------------------------------------------------ reference grids

REDUCED_LENGTH = 20.0


@lru_cache(maxsize=None)
def _tables() -> dict:
    path = Path(__file__).with_name("data") / "tables.json"
    return json.loads(path.read_text())


def reference_table(table: int) -> dict:
    """Published error grid ``{problem, param, columns, schemes: {name: {errors, ...}}}``."""
    tabs = _tables()
    if str(table) not in tabs:
        raise KeyError(f"no reference table {table}; choose one of {sorted(map(int, tabs))}")
    return tabs[str(table)]


def run_cell(table: int, scheme: str, value: float, reduced: bool = True) -> RunResult:
    """Run one (scheme, dt or N_c) cell of a reference table.

    Tables for the 2D problem run on the reduced periodic square unless
    ``reduced`` is False.
    """
    ref = reference_table(table)
    kw = {ref["param"]: value}
    if ref["problem"] == 6:
        kw["family"] = ref["family"]
        if reduced:
            kw["length"] = REDUCED_LENGTH
    setup = build_problem(ref["problem"], **kw)
    return run(setup, builtin_scheme(scheme))
