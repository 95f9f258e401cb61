"""Butcher tableaux, rooted trees and the built-in scheme registry.

A tableau holds the coefficient matrix ``A``, weights ``b`` and abscissae
``c`` of an ``R``-stage Runge-Kutta method.  Order conditions are generated
from rooted trees: a method has order ``p`` when the elementary weight of
every tree with at most ``p`` nodes equals the reciprocal of its density.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "ButcherTableau",
    "RootedTree",
    "SchemeLookupError",
    "TableauError",
    "builtin_scheme",
    "data_dir",
    "elementary_weight",
    "enumerate_trees",
    "order_of_accuracy",
    "read_tableau",
    "registry_names",
    "scheme_info",
    "tree_density",
    "trees_of_order",
    "write_tableau",
]

ROW_SUM_TOL = 1e-12
MAX_TREE_ORDER = 10
MAX_CHECKED_ORDER = 8


class TableauError(ValueError):
    pass


class SchemeLookupError(KeyError):
    pass


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients of an R-stage Runge-Kutta method.

    ``c`` defaults to the row sums of ``A``.  When given explicitly it must
    agree with the row sums to ``ROW_SUM_TOL``.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        A = _frozen(self.A)
        b = _frozen(self.b)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise TableauError(f"A must be square, got shape {A.shape}")
        R = A.shape[0]
        if R < 1:
            raise TableauError("a tableau needs at least one stage")
        if b.shape != (R,):
            raise TableauError(f"b has shape {b.shape}, expected ({R},)")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise TableauError("coefficients must be finite")
        rows = A.sum(axis=1)
        if self.c is None:
            c = _frozen(rows)
        else:
            c = _frozen(self.c)
            if c.shape != (R,):
                raise TableauError(f"c has shape {c.shape}, expected ({R},)")
            if np.max(np.abs(c - rows)) > ROW_SUM_TOL:
                raise TableauError("c_r must equal the row sums of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size

    R = stages

    def __repr__(self):
        return f"ButcherTableau(name={self.name!r}, stages={self.stages})"

    def __eq__(self, other):
        if not isinstance(other, ButcherTableau):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )

    __hash__ = object.__hash__

    def renamed(self, name: str) -> ButcherTableau:
        return ButcherTableau(self.A, self.b, self.c, name=name)

    def family_parameter(self) -> float | None:
        """Y for two stages, X for three stages, None otherwise.

        Y = a12 a21 - a11 a22; X is the sum of the 2x2 principal minors of A.
        """
        A = self.A
        if self.stages == 2:
            return float(A[0, 1] * A[1, 0] - A[0, 0] * A[1, 1])
        if self.stages == 3:
            return float(
                A[0, 0] * A[1, 1] + A[1, 1] * A[2, 2] + A[2, 2] * A[0, 0]
                - A[0, 1] * A[1, 0] - A[1, 2] * A[2, 1] - A[2, 0] * A[0, 2]
            )
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "R": self.stages,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ButcherTableau:
        try:
            A, b = d["A"], d["b"]
        except KeyError as exc:
            raise TableauError(f"tableau JSON is missing field {exc}") from None
        tab = cls(A, b, d.get("c"), name=str(d.get("name", "")))
        if "R" in d and int(d["R"]) != tab.stages:
            raise TableauError(f"R={d['R']} disagrees with {tab.stages} stages")
        return tab


def write_tableau(tab: ButcherTableau, path) -> None:
    Path(path).write_text(json.dumps(tab.to_dict(), indent=2) + "\n")


def read_tableau(path) -> ButcherTableau:
    return ButcherTableau.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- rooted trees


@dataclass(frozen=True)
class RootedTree:
    """Unordered rooted tree; ``children`` is kept in canonical order."""

    children: tuple = field(default=())

    def __post_init__(self):
        kids = tuple(sorted(self.children, key=lambda t: (t.order, t.encoding)))
        object.__setattr__(self, "children", kids)

    @property
    def order(self) -> int:
        return 1 + sum(ch.order for ch in self.children)

    @property
    def encoding(self) -> str:
        return "[" + "".join(ch.encoding for ch in self.children) + "]"

    def __repr__(self):
        return f"RootedTree({self.encoding})"

    @classmethod
    def leaf(cls) -> RootedTree:
        return cls(())

    @classmethod
    def chain(cls, n: int) -> RootedTree:
        t = cls.leaf()
        for _ in range(n - 1):
            t = cls((t,))
        return t

    @classmethod
    def bush(cls, n: int) -> RootedTree:
        return cls(tuple(cls.leaf() for _ in range(n - 1)))

    def _grafts(self):
        # every tree obtained by attaching one leaf to some node
        yield RootedTree(self.children + (RootedTree.leaf(),))
        for i, ch in enumerate(self.children):
            for g in ch._grafts():
                yield RootedTree(self.children[:i] + (g,) + self.children[i + 1:])


@lru_cache(maxsize=None)
def trees_of_order(n: int) -> tuple[RootedTree, ...]:
    if n < 1:
        raise ValueError("tree order must be positive")
    if n == 1:
        return (RootedTree.leaf(),)
    seen = {}
    for t in trees_of_order(n - 1):
        for g in t._grafts():
            seen.setdefault(g.encoding, g)
    return tuple(seen[k] for k in sorted(seen))


def enumerate_trees(max_order: int) -> list[list[RootedTree]]:
    """All non-isomorphic rooted trees, grouped by order 1..max_order."""
    if not isinstance(max_order, (int, np.integer)) or not 1 <= max_order <= MAX_TREE_ORDER:
        raise ValueError(f"max_order must be an integer in [1, {MAX_TREE_ORDER}], got {max_order!r}")
    return [list(trees_of_order(n)) for n in range(1, max_order + 1)]


def tree_density(t: RootedTree) -> int:
    gamma = t.order
    for ch in t.children:
        gamma *= tree_density(ch)
    return gamma


def _stage_weights(t: RootedTree, A: np.ndarray) -> np.ndarray:
    g = np.ones(A.shape[0], dtype=A.dtype)
    for ch in t.children:
        g = g * (A @ _stage_weights(ch, A))
    return g


def elementary_weight(t: RootedTree, tab: ButcherTableau) -> float:
    """Phi(t) = b . g(t) with g(leaf) = 1 and g(t) = prod over children of A g(child)."""
    return float(tab.b @ _stage_weights(t, tab.A))


def elementary_weight_raw(t: RootedTree, A, b):
    """Same as :func:`elementary_weight` on bare (possibly complex) arrays."""
    return b @ _stage_weights(t, A)


def order_of_accuracy(tab: ButcherTableau, tol: float = 1e-10) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = 0
    for n in range(1, MAX_CHECKED_ORDER + 1):
        for t in trees_of_order(n):
            if abs(elementary_weight(t, tab) - 1.0 / tree_density(t)) > tol:
                return p
        p = n
    return p


# -------------------------------------------------------------------- registry


def data_dir() -> Path:
    """Directory holding coefficient data; ``IRKWAVELAB_DATA`` overrides it."""
    env = os.environ.get("IRKWAVELAB_DATA")
    if env:
        return Path(env)
    return Path(str(resources.files("irkwavelab") / "data"))


@lru_cache(maxsize=4)
def _load_registry(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)["schemes"]


def _table_rows() -> dict:
    return _load_registry(str(data_dir() / "schemes.json"))


def irk24() -> ButcherTableau:
    r = np.sqrt(3.0)
    A = [[0.25, 0.25 - r / 6], [0.25 + r / 6, 0.25]]
    return ButcherTableau(A, [0.5, 0.5], [0.5 - r / 6, 0.5 + r / 6], name="IRK24")


def irk36() -> ButcherTableau:
    r = np.sqrt(15.0)
    A = [
        [5 / 36, 2 / 9 - r / 15, 5 / 36 - r / 30],
        [5 / 36 + r / 24, 2 / 9, 5 / 36 - r / 24],
        [5 / 36 + r / 30, 2 / 9 + r / 15, 5 / 36],
    ]
    return ButcherTableau(A, [5 / 18, 4 / 9, 5 / 18], [0.5 - r / 10, 0.5, 0.5 + r / 10], name="IRK36")


_CLOSED_FORM = {
    "IRK24": irk24,
    "IRK36": irk36,
    "BE": lambda: ButcherTableau([[1.0]], [1.0], name="BE"),
    "FE": lambda: ButcherTableau([[0.0]], [1.0], name="FE"),
}

_CLOSED_FORM_INFO = {
    "IRK24": {"family": "IRK24", "stages": 2, "alpha": "inf", "order": 4},
    "IRK36": {"family": "IRK36", "stages": 3, "alpha": "inf", "order": 6},
    "BE": {"family": "BE", "stages": 1, "alpha": None, "order": 1},
    "FE": {"family": "FE", "stages": 1, "alpha": None, "order": 1},
}


def registry_names() -> list[str]:
    return list(_table_rows()) + list(_CLOSED_FORM)


def scheme_info(name: str) -> dict:
    """Family, alpha, claimed order and closures recorded for a registry name."""
    rows = _table_rows()
    if name in rows:
        return {k: v for k, v in rows[name].items() if k not in ("A", "b")}
    if name in _CLOSED_FORM_INFO:
        return dict(_CLOSED_FORM_INFO[name], closures=[])
    raise SchemeLookupError(_unknown(name))


def _unknown(name: str) -> str:
    return f"unknown scheme {name!r}; known schemes: {', '.join(registry_names())}"


def builtin_scheme(name: str) -> ButcherTableau:
    if name in _CLOSED_FORM:
        return _CLOSED_FORM[name]()
    rows = _table_rows()
    if name not in rows:
        raise SchemeLookupError(_unknown(name))
    row = rows[name]
    return ButcherTableau(row["A"], row["b"], name=name)
