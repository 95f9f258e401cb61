"""Amplification factor, dissipation and dispersion errors on u' = I*lambda*u.

``sigma = lambda * dt``.  The per-step amplification of a tableau is

    G(sigma) = 1 + I sigma b^T (I_R - I sigma A)^{-1} 1

and the errors are ``a = 1 - |G|`` (dissipation) and ``phi = sigma - arg G``
(dispersion).  ``arg G`` always means the continuous branch that starts at
zero for sigma = 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Union

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss

from .butcher import ButcherTableau

__all__ = [
    "INFINITE",
    "QuadratureError",
    "SingularStageError",
    "SpectralCurve",
    "amplification",
    "arg_three_stage",
    "arg_two_stage",
    "crossover",
    "dispersion_norm",
    "dispersive_order",
    "dissipation_norm",
    "dissipative_order",
    "gauss_legendre",
    "integrate_l2",
    "phase",
    "phase_along",
    "phase_rays",
    "sample_curve",
    "series_coefficient",
]

INFINITE = "infinite"
ABOVE_MEASURABLE = "above measurable order"

SINGULAR_TOL = 1e-14
GL_NODES = 64
GL_PANELS = 16
QUAD_TOL = 1e-12
# a(sigma) of a rounded zero-dissipation tableau stays tiny near zero, so the
# dissipative fit looks close in.  The dispersive fit must look further out:
# coefficients carried in double precision leave O(eps * sigma) defects in
# phi, which swamp a sigma^7 leading term below sigma ~ 1e-2.
DISSIPATIVE_WINDOW = (1e-4, 1e-2)
DISPERSIVE_WINDOW = (0.03, 0.3)
FIT_SAMPLES = 20
FIT_DIGITS = 60
# errors are evaluated with FIT_DIGITS digits, so anything below this is noise
DEGENERATE_FLOOR = 1e-45


class SingularStageError(ArithmeticError):
    def __init__(self, sigma):
        super().__init__(f"stage matrix I - I*sigma*A is singular at sigma={sigma!r}")
        self.sigma = sigma


class QuadratureError(ArithmeticError):
    def __init__(self, estimate, change):
        super().__init__(f"quadrature did not settle: estimate {estimate!r}, last change {change:.3e}")
        self.estimate = estimate


def amplification(tab: ButcherTableau, sigma) -> complex:
    """G(sigma) for a single (real or complex) sigma."""
    R = tab.stages
    M = np.eye(R) - 1j * sigma * tab.A
    scale = max(np.linalg.norm(M, 1), 1.0) ** R
    if abs(np.linalg.det(M)) < SINGULAR_TOL * scale:
        raise SingularStageError(sigma)
    x = np.linalg.solve(M, np.ones(R))
    return complex(1.0 + 1j * sigma * (tab.b @ x))


def _amplification_array(tab: ButcherTableau, sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma)
    R = tab.stages
    M = np.eye(R)[None] - 1j * sigma.reshape(-1, 1, 1) * tab.A[None]
    det = np.linalg.det(M)
    scale = np.maximum(np.linalg.norm(M, 1, axis=(1, 2)), 1.0) ** R
    bad = np.abs(det) < SINGULAR_TOL * scale
    if np.any(bad):
        raise SingularStageError(sigma.ravel()[np.argmax(bad)])
    x = np.linalg.solve(M, np.ones((sigma.size, R, 1)))[..., 0]
    return (1.0 + 1j * sigma.ravel() * (x @ tab.b)).reshape(sigma.shape)


def phase(tab: ButcherTableau, sigma, max_step: float = 0.01) -> np.ndarray:
    """Unwrapped arg G along real sigma (any order, any sign).

    The phase is continued from sigma = 0 on a grid no coarser than
    ``max_step`` so that adjacent samples never jump by pi or more.
    """
    sigma = np.asarray(sigma, dtype=float)
    flat = sigma.ravel()
    out = np.empty_like(flat)
    for sign in (1.0, -1.0):
        sel = flat * sign > 0 if sign > 0 else flat < 0
        if not np.any(sel):
            continue
        mag = np.abs(flat[sel])
        top = mag.max()
        grid = np.linspace(0.0, top, int(np.ceil(top / max_step)) + 2)
        pts, inv = np.unique(np.concatenate([grid, mag]), return_inverse=True)
        ph = np.unwrap(np.angle(_amplification_array(tab, sign * pts)))
        ph -= ph[0]
        out[sel] = ph[inv[grid.size:]]
    out[flat == 0] = 0.0
    return out.reshape(sigma.shape)


def phase_along(tab: ButcherTableau, sigma: complex, n: int | None = None) -> float:
    """Continuous arg G at a complex sigma, continued along the ray from 0."""
    if sigma == 0:
        return 0.0
    if n is None:
        n = int(np.ceil(abs(sigma) / 0.01)) + 2
    path = np.linspace(0.0, 1.0, n) * sigma
    ph = np.unwrap(np.angle(_amplification_array(tab, path)))
    return float(ph[-1] - ph[0])


def phase_rays(tab: ButcherTableau, sigma):
    """Continuous arg G for an array of complex sigma, each continued along its ray.

    G(s) = det(I - Is(A - 1 b^T)) / det(I - IsA) factors over the eigenvalues
    of the two matrices into linear terms 1 - Is*lam.  Along a ray from 0 such
    a term reaches the branch cut only by passing through zero, so the sum of
    principal arguments is already the continued phase.

    Returns ``(phase, valid)``; ``valid`` is False where the stage matrix is
    singular somewhere on the ray.
    """
    z = 1j * np.asarray(sigma, dtype=complex)[..., None]
    poles = np.linalg.eigvals(tab.A)
    zeros = np.linalg.eigvals(tab.A - np.outer(np.ones(tab.stages), tab.b))
    w = z * poles
    # distance from 1 to the segment [0, w]
    t = np.clip(w.real / np.maximum(np.abs(w) ** 2, 1e-300), 0.0, 1.0)
    valid = np.all(np.abs(1.0 - t * w) > SINGULAR_TOL, axis=-1)
    out = np.angle(1.0 - z * zeros).sum(-1) - np.angle(1.0 - w).sum(-1)
    return np.where(valid, out, np.nan), valid


@dataclass(frozen=True)
class SpectralCurve:
    sigma: np.ndarray
    g: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    a_err: np.ndarray
    phi_err: np.ndarray

    def to_csv(self, path_or_file) -> None:
        header = ["sigma", "re_g", "im_g", "amplitude", "phase", "a_err", "phi_err"]
        cols = [self.sigma, self.g.real, self.g.imag, self.amplitude, self.phase, self.a_err, self.phi_err]

        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])

        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)


def sample_curve(tab: ButcherTableau, n_samples: int = 1024) -> SpectralCurve:
    if n_samples < 16:
        raise ValueError(f"n_samples must be at least 16, got {n_samples}")
    sigma = np.linspace(0.0, np.pi, n_samples)
    g = _amplification_array(tab, sigma)
    ph = np.unwrap(np.angle(g))
    ph -= ph[0]
    amp = np.abs(g)
    return SpectralCurve(sigma, g, amp, ph, 1.0 - amp, sigma - ph)


# ------------------------------------------------------------------ quadrature


def gauss_legendre(lo: float, hi: float, panels: int = GL_PANELS, nodes: int = GL_NODES):
    """Composite Gauss-Legendre nodes and weights, nodes in increasing order."""
    x, w = leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def integrate_l2(fn, lo: float = 0.0, hi: float = np.pi, panels: int = GL_PANELS,
                 tol: float = QUAD_TOL, max_refinements: int = 3) -> float:
    """sqrt of the integral of fn(s)^2 over [lo, hi].

    ``fn`` takes an increasing array of nodes.  The panel count is doubled
    until two successive estimates differ by less than ``tol``.
    """
    def est(p):
        s, w = gauss_legendre(lo, hi, p)
        return float(np.sqrt(np.sum(w * np.asarray(fn(s)) ** 2)))

    prev = est(panels)
    change = np.inf
    for _ in range(max_refinements):
        panels *= 2
        cur = est(panels)
        change = abs(cur - prev)
        if change < tol:
            return cur
        prev = cur
    raise QuadratureError(prev, change)


def dispersion_norm(tab: ButcherTableau, upper: float = np.pi, panels: int = GL_PANELS) -> float:
    """L2 norm over [0, upper] of sigma - arg G(sigma)."""
    return integrate_l2(lambda s: s - phase(tab, s), 0.0, upper, panels)


def dissipation_norm(tab: ButcherTableau, upper: float = np.pi, panels: int = GL_PANELS) -> float:
    """L2 norm over [0, upper] of 1 - |G(sigma)|."""
    return integrate_l2(lambda s: 1.0 - np.abs(_amplification_array(tab, s)), 0.0, upper, panels)


# ---------------------------------------------------------- empirical orders


def _mp_errors(tab: ButcherTableau, sigmas):
    """(|a|, |phi|) at each sigma, evaluated in extended precision."""
    out = []
    with mpmath.workdps(FIT_DIGITS):
        R = tab.stages
        A = mpmath.matrix([[mpmath.mpf(float(v)) for v in row] for row in tab.A])
        b = [mpmath.mpf(float(v)) for v in tab.b]
        ones = mpmath.matrix([1] * R)
        for s in sigmas:
            s = mpmath.mpf(s)
            M = mpmath.eye(R) - 1j * s * A
            x = mpmath.lu_solve(M, ones)
            g = 1 + 1j * s * mpmath.fsum(b[i] * x[i] for i in range(R))
            out.append((abs(1 - abs(g)), abs(s - mpmath.arg(g))))
    return np.array([[float(a), float(p)] for a, p in out])


def _fit_order(values: np.ndarray, sigmas: np.ndarray) -> float:
    slope, _ = np.polyfit(np.log(sigmas), np.log(values), 1)
    return slope


def _fit_sigmas(window):
    return np.geomspace(window[0], window[1], FIT_SAMPLES)


def dispersive_order(tab: ButcherTableau) -> Union[int, str]:
    """q such that phi(sigma) = O(sigma^{q+1}), from a log-log fit."""
    s = _fit_sigmas(DISPERSIVE_WINDOW)
    phi = _mp_errors(tab, s)[:, 1]
    if np.any(phi < DEGENERATE_FLOOR):
        return ABOVE_MEASURABLE
    return int(round(_fit_order(phi, s))) - 1


def dissipative_order(tab: ButcherTableau) -> Union[int, str]:
    """p such that a(sigma) = O(sigma^{p+1}); "infinite" when a vanishes."""
    s = _fit_sigmas(DISSIPATIVE_WINDOW)
    a = _mp_errors(tab, s)[:, 0]
    if a.max() < 1e-13:
        return INFINITE
    return int(round(_fit_order(a, s))) - 1


# ---------------------------------------------------- reduced-family phases


def arg_two_stage(Y, sigma):
    """Continuous arg G for a zero-dissipation two-stage scheme with parameter Y."""
    sigma = np.asarray(sigma, dtype=float)
    return 2.0 * np.arctan2(sigma / 2.0, 1.0 + sigma ** 2 * Y)


def arg_three_stage(X, sigma):
    """Continuous arg G for a zero-dissipation fourth-order three-stage scheme.

    atan2 replaces the quotient inside the arctangent: the denominator
    sigma - sigma^3 (X - 1/12) stays positive on (0, pi] for the X values of
    interest, so the branch is the one with arg -> 0 as sigma -> 0+.
    """
    sigma = np.asarray(sigma, dtype=float)
    num = 2.0 * (sigma ** 2 * X - 1.0)
    den = sigma - sigma ** 3 * (X - 1.0 / 12.0)
    out = 2.0 * np.arctan2(num, den) + np.pi
    return np.where(sigma == 0, 0.0, out)


def _family_phase_error_mp(stages: int, param, s):
    """phi = sigma - arg G for a reduced family, in the current mpmath precision."""
    p, s = mpmath.mpf(param), mpmath.mpf(s)
    if stages == 2:
        arg = 2 * mpmath.atan2(s / 2, 1 + s ** 2 * p)
    else:
        arg = 2 * mpmath.atan2(2 * (s ** 2 * p - 1), s - s ** 3 * (p - mpmath.mpf(1) / 12)) + mpmath.pi
    return s - arg


def series_coefficient(stages: int, param: float, sigmas=(1e-3, 2e-3)) -> float:
    """Leading coefficient of phi(sigma) for a reduced family, from two samples.

    phi is odd with leading power m = 3 (two-stage) or 5 (three-stage); the
    two samples fix c and d in phi = c sigma^m + d sigma^(m+2).  Evaluation
    runs in extended precision since the three-stage term is ~1e-21 at 1e-3.
    """
    if stages not in (2, 3):
        raise ValueError("stages must be 2 or 3")
    m = 3 if stages == 2 else 5
    with mpmath.workdps(FIT_DIGITS):
        s1, s2 = (mpmath.mpf(v) for v in sigmas)
        f1, f2 = (_family_phase_error_mp(stages, param, v) for v in (s1, s2))
        # c s1^m + d s1^(m+2) = f1 ; c s2^m + d s2^(m+2) = f2
        c = (f1 * s2 ** (m + 2) - f2 * s1 ** (m + 2)) / (s1 ** m * s2 ** (m + 2) - s2 ** m * s1 ** (m + 2))
        return float(c)


# ----------------------------------------------------------------- crossover


def crossover(tab_a: ButcherTableau, tab_b: ButcherTableau, tol: float = 1e-3,
              n_scan: int = 4096, floor: float = 1e-12):
    """Smallest sigma in (0, pi) where |phi_a| = |phi_b|, or None.

    Samples where both phase errors sit below ``floor`` are ignored: there
    the difference is rounding noise rather than a genuine crossing.
    """
    s = np.linspace(0.0, np.pi, n_scan + 1)[1:-1]

    def diff(x):
        x = np.atleast_1d(x)
        return np.abs(x - phase(tab_a, x)) - np.abs(x - phase(tab_b, x))

    def loud(x):
        x = np.atleast_1d(x)
        return np.maximum(np.abs(x - phase(tab_a, x)), np.abs(x - phase(tab_b, x))) > floor

    d = diff(s)
    ok = loud(s)
    sign = np.sign(d)
    for i in range(len(s) - 1):
        if ok[i] and ok[i + 1] and sign[i] != sign[i + 1] and sign[i] != 0:
            lo, hi = s[i], s[i + 1]
            dlo = d[i]
            while hi - lo > tol * 1e-3:
                mid = 0.5 * (lo + hi)
                dm = diff(mid)[0]
                if np.sign(dm) == np.sign(dlo):
                    lo, dlo = mid, dm
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        if ok[i] and sign[i] == 0 and 0 < i and sign[i - 1] * sign[i + 1] < 0:
            return float(s[i])
    return None
