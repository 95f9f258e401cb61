"""First-derivative operators on uniform 1D grids and their wave properties.

An operator approximates ``u'`` by solving ``M1 u' = M2 u``; explicit kinds
have ``M1 = I``.  Stencil coefficients live in ``data/spatial.json``.

The equivalent wavenumber at node j is the k_eq that makes the discrete
derivative of exp(I k x) equal I k_eq exp(I k x_j).  Combined with a time
integrator it gives the per-step phase of the fully discrete scheme and from
that the scaled numerical phase and group velocities.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .butcher import ButcherTableau, data_dir
from .spectral import phase_rays

__all__ = [
    "KINDS",
    "DimensionError",
    "SpatialOperator",
    "UnsupportedConfiguration",
    "VelocityMap",
    "build_operator",
    "keq",
    "qwave_threshold",
    "stencil_symbol",
    "velocity_map",
]

KINDS = ("Lele6", "CD6", "FDs13p", "FDo13p")
BOUNDARIES = ("periodic", "closed")


class DimensionError(ValueError):
    pass


class UnsupportedConfiguration(ValueError):
    pass


@lru_cache(maxsize=4)
def _load(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)["kinds"]


def stencil_data(kind: str) -> dict:
    kinds = _load(str(data_dir() / "spatial.json"))
    if kind not in kinds:
        raise KeyError(f"unknown operator kind {kind!r}; known: {', '.join(kinds)}")
    return kinds[kind]


def _num(v) -> float:
    return float(Fraction(str(v)))


def _interior(kind: str):
    """(lhs offsets/values, rhs offsets/values) of the interior stencil in units of 1/h."""
    d = stencil_data(kind)
    if d["type"] == "compact":
        al, a, b = _num(d["alpha"]), _num(d["a"]), _num(d["b"])
        lhs = {-1: al, 0: 1.0, 1: al}
        rhs = {-2: -b / 4, -1: -a / 2, 1: a / 2, 2: b / 4}
    else:
        w = [_num(v) for v in d["weights"]]
        lhs = {0: 1.0}
        rhs = {}
        for j, wj in enumerate(w, 1):
            rhs[j], rhs[-j] = wj, -wj
    return lhs, rhs


def stencil_symbol(kind: str, kh):
    """Modified wavenumber k_eq h of the interior stencil at wavenumber kh."""
    lhs, rhs = _interior(kind)
    kh = np.asarray(kh, dtype=float)
    num = sum(v * np.exp(1j * d * kh) for d, v in rhs.items())
    den = sum(v * np.exp(1j * d * kh) for d, v in lhs.items())
    return (-1j * num / den).real


def _one_sided(nodes, at):
    """Weights of the derivative at ``at`` from values at ``nodes`` (spacing 1)."""
    nodes = np.asarray(nodes, dtype=float) - at
    m = len(nodes)
    V = np.vander(nodes, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def _banded(n, stencil, periodic):
    rows, cols, vals = [], [], []
    idx = np.arange(n)
    for d, v in stencil.items():
        c = idx + d
        if periodic:
            keep = np.ones(n, dtype=bool)
            c = c % n
        else:
            keep = (c >= 0) & (c < n)
        rows.append(idx[keep])
        cols.append(c[keep])
        vals.append(np.full(keep.sum(), v))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


@dataclass(frozen=True, eq=False)
class SpatialOperator:
    """``M1 u' = M2 u`` on n nodes spaced h apart; M2 already carries 1/h."""

    kind: str
    n: int
    h: float
    boundary: str
    M1: sp.csr_matrix
    M2: sp.csr_matrix

    @property
    def explicit(self) -> bool:
        return stencil_data(self.kind)["type"] == "explicit"

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    @cached_property
    def _lu(self):
        return None if self.explicit else splu(sp.csc_matrix(self.M1))

    def solve_lhs(self, rhs):
        """M1^{-1} rhs (rhs may have several columns)."""
        if self._lu is None:
            return np.array(rhs, dtype=float, copy=True)
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def __call__(self, u):
        """Discrete derivative of nodal values ``u``."""
        return self.solve_lhs(self.M2 @ np.asarray(u, dtype=float))

    def row(self, j: int) -> np.ndarray:
        """Row j of C = M1^{-1} M2 (dense, length n), from one solve with M1^T."""
        if not 0 <= j < self.n:
            raise IndexError(f"node {j} outside 0..{self.n - 1}")
        e = np.zeros(self.n)
        e[j] = 1.0
        if self._lu is None:
            y = e
        else:
            y = self._lu.solve(e, trans="T")
        return np.asarray(self.M2.T @ y).ravel()

    def offsets(self, j: int) -> np.ndarray:
        """x_l - x_j, wrapped into [-L/2, L/2) on periodic grids."""
        d = np.arange(self.n) - j
        if self.periodic:
            d = (d + self.n // 2) % self.n - self.n // 2
        return d * self.h

    def to_config(self) -> dict:
        return {"kind": self.kind, "n": self.n, "h": self.h, "boundary": self.boundary}


def build_operator(kind: str, n: int, h: float, boundary: str = "periodic") -> SpatialOperator:
    if kind not in KINDS:
        raise KeyError(f"unknown operator kind {kind!r}; known: {', '.join(KINDS)}")
    boundary = boundary.lower()
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    lhs, rhs = _interior(kind)
    width = 2 * max(rhs) + 1
    if n < width:
        raise DimensionError(f"{kind} needs at least {width} nodes, got {n}")
    periodic = boundary == "periodic"
    if not periodic and kind in ("FDs13p", "FDo13p"):
        raise UnsupportedConfiguration(f"{kind} has no boundary closure; use a periodic grid")

    r, c, v = _banded(n, lhs, periodic)
    M1 = sp.coo_matrix((v, (r, c)), shape=(n, n)).tolil()
    r, c, v = _banded(n, rhs, periodic)
    M2 = sp.coo_matrix((v, (r, c)), shape=(n, n)).tolil()

    if not periodic:
        half = max(rhs)
        if kind == "Lele6":
            # third-order compact closure, then fourth-order Pade
            for i, sign in ((0, 1.0), (n - 1, -1.0)):
                M1[i, :] = 0.0
                M2[i, :] = 0.0
                inward = i + int(sign)
                M1[i, i] = 1.0
                M1[i, inward] = 2.0
                M2[i, i] = -2.5 * sign
                M2[i, inward] = 2.0 * sign
                M2[i, i + 2 * int(sign)] = 0.5 * sign
            for i in (1, n - 2):
                M1[i, :] = 0.0
                M2[i, :] = 0.0
                M1[i, i - 1] = M1[i, i + 1] = 0.25
                M1[i, i] = 1.0
                M2[i, i - 1] = -0.75
                M2[i, i + 1] = 0.75
        else:
            width = 2 * half + 1
            for i in range(half):
                for rr, nodes in ((i, np.arange(width)), (n - 1 - i, np.arange(n - width, n))):
                    M2[rr, :] = 0.0
                    w = _one_sided(nodes, rr)
                    for col, wv in zip(nodes, w):
                        M2[rr, int(col)] = wv
    M1 = sp.csr_matrix(M1)
    M2 = sp.csr_matrix(M2) / h
    M1.eliminate_zeros()
    M2.eliminate_zeros()
    return SpatialOperator(kind, int(n), float(h), boundary, M1, M2)


def keq(op: SpatialOperator, k, j: int):
    """Equivalent wavenumber at node j for wavenumber(s) k."""
    return _keq_from_row(op.row(j), op.offsets(j), k)


def _keq_from_row(row, offsets, k):
    nz = np.flatnonzero(np.abs(row) > 1e-300)
    k = np.asarray(k, dtype=float)
    ph = np.exp(1j * np.multiply.outer(k, offsets[nz]))
    return -1j * (ph @ row[nz])


# ---------------------------------------------------------------- velocity maps


@dataclass(frozen=True)
class VelocityMap:
    """Scaled phase/group velocity over (N_c, kh); arrays are indexed [nc, kh]."""

    nc_grid: np.ndarray
    kh_grid: np.ndarray
    vp: np.ndarray
    vg: np.ndarray
    valid: np.ndarray

    def to_csv(self, path_or_file) -> None:
        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nc", "kh", "vp", "vg", "valid"])
            for i, nc in enumerate(self.nc_grid):
                for j, kh in enumerate(self.kh_grid):
                    w.writerow([repr(float(nc)), repr(float(kh)), repr(float(self.vp[i, j])),
                                repr(float(self.vg[i, j])), int(self.valid[i, j])])

        if hasattr(path_or_file, "write"):
            _write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                _write(fh)

    def band(self, tol: float = 1e-3) -> np.ndarray:
        """Cells where both velocities are within ``tol`` of one."""
        return self.valid & (np.abs(self.vp - 1) <= tol) & (np.abs(self.vg - 1) <= tol)


def _fd_step(kh_grid) -> float:
    kh = np.unique(np.asarray(kh_grid, dtype=float))
    if kh.size < 2:
        return 1e-4
    return min(1e-4, 0.5 * float(np.min(np.diff(kh))))


def velocity_map(op: SpatialOperator, tab: ButcherTableau, nc_grid, kh_grid,
                 probe: int | None = None) -> VelocityMap:
    """Phase and group velocity at node ``probe`` (default: mid node)."""
    nc = np.atleast_1d(np.asarray(nc_grid, dtype=float))
    kh = np.atleast_1d(np.asarray(kh_grid, dtype=float))
    if np.any(nc <= 0) or np.any(kh <= 0) or np.any(kh > np.pi + 1e-12):
        raise ValueError("need N_c > 0 and 0 < kh <= pi")
    j = op.n // 2 if probe is None else int(probe)
    row, off = op.row(j), op.offsets(j)
    dk = _fd_step(kh)
    khs = np.stack([kh - dk, kh, kh + dk])
    keh = _keq_from_row(row, off, khs / op.h) * op.h          # k_eq h, shape (3, nkh)
    sigma = nc[:, None, None] * keh[None]                     # (nnc, 3, nkh)
    beta, ok = phase_rays(tab, sigma)
    valid = ok.all(axis=1)
    vp = beta[:, 1, :] / (nc[:, None] * kh[None, :])
    vg = (beta[:, 2, :] - beta[:, 0, :]) / (2 * dk) / nc[:, None]
    return VelocityMap(nc, kh, vp, vg, valid)


def qwave_threshold(op: SpatialOperator, tab: ButcherTableau, nc_grid, probe: int | None = None,
                    n_scan: int = 2048, tol: float = 1e-8):
    """Smallest kh at which the group velocity turns negative, over the given N_c.

    Returns None when vg stays positive on (0, pi] for every N_c.
    """
    kh = np.linspace(np.pi / n_scan, np.pi, n_scan)
    best = None
    for nc in np.atleast_1d(nc_grid):
        vg = velocity_map(op, tab, [nc], kh, probe).vg[0]
        neg = np.flatnonzero(vg < 0)
        if neg.size == 0:
            continue
        i = neg[0]
        lo, hi = (kh[i - 1] if i > 0 else 0.0), kh[i]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _vg_at(op, tab, nc, mid, probe, 1e-5) < 0:
                hi = mid
            else:
                lo = mid
        val = 0.5 * (lo + hi)
        best = val if best is None else min(best, val)
    return best


def _vg_at(op, tab, nc, kh, probe, dk):
    j = op.n // 2 if probe is None else int(probe)
    keh = _keq_from_row(op.row(j), op.offsets(j), np.array([kh - dk, kh + dk]) / op.h) * op.h
    beta, _ = phase_rays(tab, nc * keh)
    return (beta[1] - beta[0]) / (2 * dk) / nc
