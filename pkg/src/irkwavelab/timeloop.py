"""Implicit Runge-Kutta time stepping for semi-discrete systems ``M u' = f(t, u)``.

Stage slopes F_r solve

    M F_r = f(t + c_r dt, u + dt sum_s a_rs F_s),   r = 1..R

and the step is u + dt sum_r b_r F_r.  For linear f = L u + g(t) the R stage
equations form one sparse system (I_R (x) M - dt A (x) L) F = rhs, solved by
a cached sparse LU or by preconditioned BiCGSTAB.  Nonlinear f uses Newton
iteration on the same block structure.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, splu

from .butcher import ButcherTableau

__all__ = [
    "NewtonError",
    "SemiDiscreteSystem",
    "StepReport",
    "IRKStepper",
    "SolverError",
    "convergence_study",
    "integrate",
    "irk_step",
    "step_count",
]

TOL_NEWTON = 1e-12
MAX_NEWTON = 50
TOL_KRYLOV = 1e-12
STEP_RTOL = 1e-9


class SolverError(RuntimeError):
    pass


class NewtonError(SolverError):
    def __init__(self, msg, residual, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"{msg}{where} (residual {residual:.3e})")
        self.residual = residual
        self.step = step


def _as_sparse(m, n):
    if m is None:
        return None
    if sp.issparse(m):
        return sp.csr_matrix(m)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape != (n, n):
        raise ValueError(f"matrix has shape {m.shape}, expected ({n}, {n})")
    return sp.csr_matrix(m)


@dataclass(eq=False)
class SemiDiscreteSystem:
    """``M u' = rhs(t, u)`` with optional Jacobian, mass matrix and exact solution.

    Linear systems carry ``L`` (sparse) and an optional forcing ``g(t)``;
    use :meth:`linear` to build them.
    """

    n: int
    rhs: object
    jacobian: object = None
    is_linear: bool = False
    mass: object = None
    exact: object = None
    L: object = None
    forcing: object = None
    name: str = ""

    def __post_init__(self):
        self.mass = _as_sparse(self.mass, self.n)
        if self.L is not None:
            self.L = _as_sparse(self.L, self.n)

    @classmethod
    def linear(cls, L, forcing=None, mass=None, exact=None, name="") -> SemiDiscreteSystem:
        Ls = sp.csr_matrix(L) if sp.issparse(L) else sp.csr_matrix(np.atleast_2d(np.asarray(L, float)))
        n = Ls.shape[0]

        def rhs(t, u):
            out = Ls @ u
            if forcing is not None:
                out = out + forcing(t)
            return out

        return cls(n, rhs, jacobian=lambda t, u: Ls, is_linear=True, mass=mass,
                   exact=exact, L=Ls, forcing=forcing, name=name)

    def jac(self, t, u):
        if self.jacobian is None:
            raise SolverError("nonlinear system needs a Jacobian")
        return _as_sparse(self.jacobian(t, u), self.n)

    def check_linearity(self, rng=None, tol: float = 1e-12) -> bool:
        """Spot test f(u+v) - f(u) - f(v) + f(0) = 0 on random vectors."""
        rng = np.random.default_rng(0) if rng is None else rng
        u, v = rng.standard_normal(self.n), rng.standard_normal(self.n)
        t = float(rng.random())
        d = self.rhs(t, u + v) - self.rhs(t, u) - self.rhs(t, v) + self.rhs(t, np.zeros(self.n))
        scale = max(1.0, np.abs(self.rhs(t, u)).max())
        return bool(np.abs(d).max() <= tol * scale)


@dataclass
class StepReport:
    steps: int = 0
    newton_iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    solver: str = "direct"

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "newton_iterations": list(self.newton_iterations),
            "max_residual": max(self.residuals, default=0.0),
            "wall_time": self.wall_time,
            "solver": self.solver,
        }


class IRKStepper:
    """Advance one system with one tableau at a fixed dt, reusing factorizations."""

    def __init__(self, system: SemiDiscreteSystem, tab: ButcherTableau, dt: float,
                 solver: str = "direct", tol_newton: float = TOL_NEWTON,
                 max_newton: int = MAX_NEWTON, tol_krylov: float = TOL_KRYLOV):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if solver not in ("direct", "krylov"):
            raise ValueError(f"solver must be 'direct' or 'krylov', got {solver!r}")
        self.system, self.tab, self.dt = system, tab, float(dt)
        self.solver = solver
        self.tol_newton, self.max_newton, self.tol_krylov = tol_newton, max_newton, tol_krylov
        self.retry = True
        n, R = system.n, tab.stages
        self._eye_m = sp.identity(n, format="csr") if system.mass is None else system.mass
        self._mass_lu = None if system.mass is None else splu(sp.csc_matrix(system.mass))
        self._kron_m = sp.kron(sp.identity(R), self._eye_m, format="csr")
        self._lin = None
        if system.is_linear:
            self._lin = self._factor(self._stage_matrix([system.L] * R))

    # -- linear algebra ------------------------------------------------------

    def _stage_matrix(self, jacs):
        A, dt = self.tab.A, self.dt
        R = self.tab.stages
        blocks = [[(self._eye_m if r == s else None) for s in range(R)] for r in range(R)]
        for r in range(R):
            for s in range(R):
                if A[r, s] != 0.0:
                    term = -dt * A[r, s] * jacs[r]
                    blocks[r][s] = term if blocks[r][s] is None else blocks[r][s] + term
        n = self.system.n
        for r in range(R):
            for s in range(R):
                if blocks[r][s] is None:
                    blocks[r][s] = sp.csr_matrix((n, n))
        return sp.bmat(blocks, format="csc")

    def _factor(self, K):
        if self.solver == "direct":
            lu = splu(K)
            return lambda b, x0=None: lu.solve(b)
        d = K.diagonal()
        d[d == 0] = 1.0
        pre = LinearOperator(K.shape, matvec=lambda v: v / d)
        Kc = sp.csr_matrix(K)

        def solve(b, x0=None):
            x, info = bicgstab(Kc, b, x0=x0, rtol=self.tol_krylov, atol=0.0, M=pre, maxiter=5000)
            if info != 0:
                raise SolverError(f"BiCGSTAB did not converge (info={info})")
            return x

        return solve

    def _mass_solve(self, v):
        return v if self._mass_lu is None else self._mass_lu.solve(v)

    # -- stepping ------------------------------------------------------------

    def _initial_slopes(self, t, u):
        return np.concatenate([self._mass_solve(self.system.rhs(t + c * self.dt, u))
                               for c in self.tab.c])

    def _stage_values(self, u, F):
        R, n = self.tab.stages, self.system.n
        return u[None, :] + self.dt * (self.tab.A @ F.reshape(R, n))

    def _residual(self, t, u, F):
        Y = self._stage_values(u, F)
        f = np.concatenate([self.system.rhs(t + c * self.dt, y) for c, y in zip(self.tab.c, Y)])
        return self._kron_m @ F - f, f

    def step(self, t: float, u: np.ndarray, report: StepReport | None = None) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self._lin is not None:
            F = self._linear_slopes(t, u)
            if report is not None:
                report.newton_iterations.append(0)
                report.residuals.append(float(np.abs(self._residual(t, u, F)[0]).max()))
        else:
            try:
                F = self._newton(t, u, report)
            except NewtonError:
                if not self.retry:
                    raise
                # one retry with two half steps; the halves do not subdivide again
                half = IRKStepper(self.system, self.tab, 0.5 * self.dt, self.solver,
                                  self.tol_newton, self.max_newton, self.tol_krylov)
                half.retry = False
                mid = half.step(t, u, report)
                return half.step(t + half.dt, mid, report)
        R, n = self.tab.stages, self.system.n
        return u + self.dt * (self.tab.b @ F.reshape(R, n))

    def _linear_slopes(self, t, u):
        sys = self.system
        Lu = sys.L @ u
        parts = []
        for c in self.tab.c:
            parts.append(Lu if sys.forcing is None else Lu + sys.forcing(t + c * self.dt))
        b = np.concatenate(parts)
        x0 = None if self.solver == "direct" else self._initial_slopes(t, u)
        return self._lin(b, x0)

    def _newton(self, t, u, report):
        F = self._initial_slopes(t, u)
        res, f = self._residual(t, u, F)
        scale = max(1.0, float(np.abs(f).max()))
        err = float(np.abs(res).max())
        it = 0
        while err > self.tol_newton * scale:
            if it >= self.max_newton or not np.isfinite(err):
                raise NewtonError("Newton iteration did not converge", err)
            Y = self._stage_values(u, F)
            jacs = [self.system.jac(t + c * self.dt, y) for c, y in zip(self.tab.c, Y)]
            solve = self._factor(self._stage_matrix(jacs))
            dF = solve(-res, np.zeros_like(res))
            F = F + dF
            res, f = self._residual(t, u, F)
            err = float(np.abs(res).max())
            it += 1
            if np.abs(dF).max() <= 1e-15 * max(1.0, np.abs(F).max()):
                break
        if report is not None:
            report.newton_iterations.append(it)
            report.residuals.append(err)
        return F


def irk_step(system: SemiDiscreteSystem, tab: ButcherTableau, t: float, u, dt: float,
             solver: str = "direct", **kw) -> np.ndarray:
    """One step of size dt from (t, u)."""
    return IRKStepper(system, tab, dt, solver, **kw).step(t, np.asarray(u, dtype=float))


def step_count(t0: float, t_end: float, dt: float) -> int:
    """Number of steps from t0 to t_end; the span must be a whole number of dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    span = t_end - t0
    if span < 0:
        raise ValueError("t_end precedes t0")
    m = span / dt
    n = int(round(m))
    if abs(m - n) > STEP_RTOL * max(1.0, m):
        raise ValueError(f"(t_end - t0)/dt = {m!r} is not a whole number of steps; adjust dt")
    return n


def integrate(system: SemiDiscreteSystem, tab: ButcherTableau, u0, t0: float, t_end: float,
              dt: float, recorder=None, solver: str = "direct", **kw):
    """March from t0 to t_end; returns (final state, StepReport).

    ``recorder(t, u)`` is called after every step.
    """
    clock = time.perf_counter()
    nsteps = step_count(t0, t_end, dt)
    report = StepReport(solver=solver)
    u = np.array(u0, dtype=float, copy=True)
    if nsteps == 0:
        report.wall_time = time.perf_counter() - clock
        return u, report
    stepper = IRKStepper(system, tab, dt, solver, **kw)
    for i in range(nsteps):
        t = t0 + i * dt
        try:
            u = stepper.step(t, u, report)
        except NewtonError as exc:
            raise NewtonError("step failed", exc.residual, step=i) from exc
        report.steps += 1
        if recorder is not None:
            recorder(t0 + (i + 1) * dt, u)
    report.wall_time = time.perf_counter() - clock
    return u, report


def convergence_study(system: SemiDiscreteSystem, tab: ButcherTableau, dts, u0, t0: float,
                      t_end: float, error=None, solver: str = "direct"):
    """[(dt, error, rate)] with rate = log(e_i/e_{i-1}) / log(dt_i/dt_{i-1}).

    ``error(u, t)`` defaults to the Euclidean distance from the exact solution.
    The first rate, and any rate between equal dts, is reported as 0.
    """
    if error is None:
        if system.exact is None:
            raise ValueError("system has no exact solution")
        error = lambda u, t: float(np.linalg.norm(u - system.exact(t)))
    out = []
    for i, dt in enumerate(dts):
        u, _ = integrate(system, tab, u0, t0, t_end, dt, solver=solver)
        e = error(u, t_end)
        rate = 0.0
        if i > 0:
            dprev, eprev = out[-1][0], out[-1][1]
            if dt != dprev and e > 0 and eprev > 0:
                rate = float(np.log(e / eprev) / np.log(dt / dprev))
        out.append((float(dt), e, rate))
    return out
