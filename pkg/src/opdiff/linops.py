"""Symmetric tridiagonal matrices and quadratic polynomials in them.

Every operator in the package is ``c0*I + c1*D + c2*D**2`` for one shared
symmetric tridiagonal ``D``.  Linear solves go through shifted tridiagonal
sweeps: a quadratic with real roots factors as ``c2*(D + r1*I)(D + r2*I)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# fixed, not configurable
SOLVE_RTOL = 1e-12
DISC_TIE = 1e-14


class NotSPDError(ValueError):
    """Raised when an operator that must be positive definite is not."""


class ComplexRootError(ValueError):
    """Raised when a real two-factor split is requested for complex roots."""


@dataclass(frozen=True, eq=False)
class SymTridiag:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float).ravel()
        e = np.asarray(self.offdiag, dtype=float).ravel()
        if d.size < 1:
            raise ValueError("SymTridiag needs n >= 1")
        if e.size != d.size - 1:
            raise ValueError(f"offdiag must have length {d.size - 1}, got {e.size}")
        d.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def squared_bands(self) -> list[np.ndarray]:
        """Upper bands (main, first, second) of ``D @ D``."""
        d, e = self.diag, self.offdiag
        main = d * d
        main[:-1] += e * e
        main[1:] += e * e
        first = e * (d[:-1] + d[1:])
        second = e[:-1] * e[1:]
        return [main, first, second]


def tridiag_factor(diag, off):
    """Forward-elimination pivots and multipliers of a symmetric tridiagonal
    matrix (no pivoting).  Arguments are plain sequences."""
    n = len(diag)
    piv = [0.0] * n
    cp = [0.0] * n
    p = diag[0]
    for i in range(n):
        if i > 0:
            p = diag[i] - off[i - 1] * cp[i - 1]
        if p == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal sweep")
        piv[i] = p
        if i < n - 1:
            cp[i] = off[i] / p
    return piv, cp


def tridiag_solve(piv, cp, off, b):
    """Thomas sweep with precomputed pivots; returns a list."""
    n = len(piv)
    x = [0.0] * n
    prev = 0.0
    for i in range(n):
        v = b[i]
        if i > 0:
            v -= off[i - 1] * prev
        prev = v / piv[i]
        x[i] = prev
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def thomas(diag, off, b):
    """Solve a symmetric tridiagonal system; all arguments plain sequences."""
    piv, cp = tridiag_factor(diag, off)
    return tridiag_solve(piv, cp, off, b)


def shifted_solve(D: SymTridiag, scale: float, shift: float, b: np.ndarray) -> np.ndarray:
    """Solve ``(scale*D + shift*I) x = b``."""
    diag = (scale * D.diag + shift).tolist()
    off = (scale * D.offdiag).tolist()
    return np.array(thomas(diag, off, np.asarray(b, dtype=float).tolist()))


def banded_ldl(bands: list[np.ndarray], *, stop_at_nonpositive: bool = False):
    """LDL^T factorization of a symmetric band matrix given by its upper bands.

    Returns ``(pivots, L)`` with ``L[i][k]`` the multiplier of row ``i``
    against row ``i - k - 1``.  With ``stop_at_nonpositive`` the factorization
    ends at the first pivot <= 0 (the remaining pivots are left as nan).
    """
    p = len(bands) - 1
    n = bands[0].size
    a = [band.tolist() for band in bands]
    piv = [math.nan] * n
    L = [[0.0] * p for _ in range(n)]
    for j in range(n):
        s = a[0][j]
        Lj = L[j]
        for k in range(1, min(p, j) + 1):
            s -= Lj[k - 1] * Lj[k - 1] * piv[j - k]
        piv[j] = s
        if s <= 0.0 and stop_at_nonpositive:
            return piv, L
        if s == 0.0:
            raise ZeroDivisionError("zero pivot in banded LDL^T")
        for i in range(j + 1, min(n - 1, j + p) + 1):
            Li = L[i]
            t = a[i - j][j]
            # shared columns k < j inside both bands
            for k in range(max(0, i - p), j):
                t -= Li[i - k - 1] * Lj[j - k - 1] * piv[k]
            Li[i - j - 1] = t / s
    return piv, L


def banded_ldl_solve(piv, L, b: np.ndarray) -> np.ndarray:
    n = len(piv)
    p = len(L[0]) if n else 0
    z = np.asarray(b, dtype=float).tolist()
    for i in range(n):
        Li = L[i]
        for k in range(1, min(p, i) + 1):
            z[i] -= Li[k - 1] * z[i - k]
    for i in range(n):
        z[i] /= piv[i]
    for i in range(n - 1, -1, -1):
        for k in range(1, min(p, n - 1 - i) + 1):
            z[i] -= L[i + k][k - 1] * z[i + k]
    return np.array(z)


@dataclass(frozen=True, eq=False)
class PolyOperator:
    """``c0*I + c1*D + c2*D**2`` for a symmetric tridiagonal ``D``."""

    base: SymTridiag
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        for name in ("c0", "c1", "c2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def identity(cls, base: SymTridiag, scale: float = 1.0) -> "PolyOperator":
        return cls(base, c0=scale)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def coeffs(self) -> tuple[float, float, float]:
        return (self.c0, self.c1, self.c2)

    def _check_same_base(self, other: "PolyOperator"):
        if other.base is self.base:
            return
        if (other.base.n != self.base.n
                or not np.array_equal(other.base.diag, self.base.diag)
                or not np.array_equal(other.base.offdiag, self.base.offdiag)):
            raise ValueError("operators are polynomials in different base matrices")

    def __add__(self, other: "PolyOperator") -> "PolyOperator":
        if not isinstance(other, PolyOperator):
            return NotImplemented
        self._check_same_base(other)
        return PolyOperator(self.base, self.c0 + other.c0, self.c1 + other.c1,
                            self.c2 + other.c2)

    def __sub__(self, other: "PolyOperator") -> "PolyOperator":
        return self + (-1.0) * other

    def __mul__(self, s: float) -> "PolyOperator":
        if isinstance(s, PolyOperator):
            return NotImplemented
        s = float(s)
        return PolyOperator(self.base, s * self.c0, s * self.c1, s * self.c2)

    __rmul__ = __mul__

    def __repr__(self):
        return f"PolyOperator(n={self.n}, c0={self.c0!r}, c1={self.c1!r}, c2={self.c2!r})"

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size != self.n:
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return x

    def apply(self, x) -> np.ndarray:
        x = self._vec(x)
        out = self.c0 * x
        if self.c1 != 0.0 or self.c2 != 0.0:
            Dx = self.base.matvec(x)
            if self.c2 != 0.0:
                out = out + self.c1 * Dx + self.c2 * self.base.matvec(Dx)
            else:
                out = out + self.c1 * Dx
        return out

    __matmul__ = apply

    def bands(self) -> list[np.ndarray]:
        """Upper bands of the assembled matrix, as few as the degree needs."""
        D = self.base
        n = D.n
        main = self.c0 + self.c1 * D.diag
        first = self.c1 * D.offdiag
        if self.c2 == 0.0:
            return [main, first] if (self.c1 != 0.0 and n > 1) else [main]
        sq = D.squared_bands()
        main = main + self.c2 * sq[0]
        first = first + self.c2 * sq[1]
        if n == 1:
            return [main]
        if n == 2:
            return [main, first]
        return [main, first, self.c2 * sq[2]]

    def to_dense(self) -> np.ndarray:
        Dd = self.base.to_dense()
        return self.c0 * np.eye(self.n) + self.c1 * Dd + self.c2 * (Dd @ Dd)

    def real_factors(self) -> list[tuple[float, float]]:
        """Split into shifted factors ``(scale, shift)``, each meaning
        ``scale*D + shift*I``, whose product is this operator.

        Degree 0 and 1 give one factor; degree 2 needs real roots.
        """
        c0, c1, c2 = self.coeffs
        if c2 == 0.0:
            return [(c1, c0)]
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < -DISC_TIE * (c1 * c1 + abs(4.0 * c2 * c0)):
            raise ComplexRootError(
                f"quadratic {c2}*l^2 + {c1}*l + {c0} has complex roots (disc={disc:.3e})")
        if disc < 0.0:
            r = c1 / (2.0 * c2)
            return [(c2, c2 * r), (1.0, r)]
        sq = math.sqrt(disc)
        # roots of c2*l^2 + c1*l + c0 without cancellation
        q = -0.5 * (c1 + math.copysign(sq, c1)) if c1 != 0.0 else 0.5 * sq
        if q == 0.0:
            # c0 == 0 and c1 == 0: c2*D^2
            return [(c2, 0.0), (1.0, 0.0)]
        # roots l1 = q/c2, l2 = c0/q; c2*(D - l1) = c2*D - q without dividing by c2
        return [(c2, -q), (1.0, -c0 / q)]

    def solve(self, b, method: str = "auto", check: bool = True) -> np.ndarray:
        """Solve ``op x = b``.

        ``method="factored"`` insists on real shifted factors and raises
        :class:`ComplexRootError` otherwise; ``"banded"`` runs a symmetric
        band LDL^T; ``"auto"`` prefers the factored route and falls back to
        the band solve when the roots are complex.  ``check=False`` skips the
        positivity test for operators that are SPD by construction.
        """
        b = self._vec(b)
        if method not in ("auto", "factored", "banded"):
            raise ValueError(f"unknown solve method {method!r}")
        if check and not self.is_spd():
            raise NotSPDError(f"{self!r} is not positive definite")
        if method == "banded":
            return self._banded_solve(b)
        kind, plan = self._plan
        if method == "factored" and kind != "factored":
            self.real_factors()  # raises ComplexRootError
        if kind == "factored":
            x = b.tolist()
            for kind, data in plan:
                if kind == "scale":
                    x = [v / data for v in x]
                else:
                    piv, cp, off = data
                    x = tridiag_solve(piv, cp, off, x)
            return np.array(x)
        return self._banded_solve(b)

    @cached_property
    def _plan(self):
        try:
            return ("factored", self._factored_plan())
        except ComplexRootError:
            return ("banded", None)

    def _factored_plan(self):
        plan = []
        for scale, shift in self.real_factors():
            if scale == 0.0:
                if shift == 0.0:
                    raise NotSPDError("operator is singular (zero)")
                plan.append(("scale", shift))
            else:
                diag = (scale * self.base.diag + shift).tolist()
                off = (scale * self.base.offdiag).tolist()
                piv, cp = tridiag_factor(diag, off)
                plan.append(("sweep", (piv, cp, off)))
        return plan

    @cached_property
    def _ldl(self):
        piv, L = banded_ldl(self.bands(), stop_at_nonpositive=True)
        if not all(p > 0.0 for p in piv):
            raise NotSPDError("band LDL^T met a non-positive pivot")
        return piv, L

    def _banded_solve(self, b: np.ndarray) -> np.ndarray:
        piv, L = self._ldl
        return banded_ldl_solve(piv, L, b)

    def pivots(self) -> list[float]:
        piv, _ = banded_ldl(self.bands(), stop_at_nonpositive=True)
        return piv

    @cached_property
    def _spd(self) -> bool:
        return all(p > 0.0 for p in self.pivots())

    def is_spd(self) -> bool:
        return self._spd

    def quad(self, u) -> float:
        u = self._vec(u)
        return float(np.dot(self.apply(u), u))

    def norm(self, u) -> float:
        q = self.quad(u)
        if q < 0.0:
            raise NotSPDError(f"negative quadratic form {q:.3e}")
        return math.sqrt(q)

    def inv_norm(self, u, check: bool = True) -> float:
        u = self._vec(u)
        q = float(np.dot(self.solve(u, check=check), u))
        if q < 0.0:
            raise NotSPDError(f"negative quadratic form {q:.3e}")
        return math.sqrt(q)


def apply(op: PolyOperator, x) -> np.ndarray:
    return op.apply(x)


def solve(op: PolyOperator, b, method: str = "auto") -> np.ndarray:
    return op.solve(b, method=method)


def weighted_norm(op: PolyOperator, u) -> float:
    """``sqrt((op u, u))``; raises :class:`NotSPDError` on a negative form."""
    return op.norm(u)


def inv_weighted_norm(op: PolyOperator, u) -> float:
    """``sqrt((op^{-1} u, u))`` via one solve."""
    return op.inv_norm(u)


def spd_check(op: PolyOperator) -> bool:
    return op.is_spd()
