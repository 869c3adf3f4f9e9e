"""Pauli strings and sparse weighted Pauli sums.

A string is stored as two bit masks ``(x, z)``; qubit ``j`` is bit ``j``.
The operator is ``i^{|x & z|} X^x Z^z`` so that x=z=1 on a qubit is ``Y``.
Text form lists qubit 0 first, e.g. ``"XIZY"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

PRUNE_TOL = 1e-12

_I_POW = (1, 1j, -1, -1j)


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    n: int
    x: int
    z: int

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for j, ch in enumerate(label.upper()):
            if ch not in "IXYZ":
                raise ValueError(f"invalid Pauli letter {ch!r}")
            if ch in "XY":
                x |= 1 << j
            if ch in "ZY":
                z |= 1 << j
        return cls(len(label), x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @property
    def label(self) -> str:
        out = []
        for j in range(self.n):
            xb, zb = (self.x >> j) & 1, (self.z >> j) & 1
            out.append("IXZY"[xb + 2 * zb])
        return "".join(out)

    def __str__(self) -> str:
        return self.label

    def letter(self, j: int) -> str:
        return "IXZY"[((self.x >> j) & 1) + 2 * ((self.z >> j) & 1)]

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def is_diagonal(self) -> bool:
        return self.x == 0

    def commutes(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def qubitwise_commutes(self, other: "PauliString") -> bool:
        both = self.support & other.support
        return (self.x & both) == (other.x & both) and (self.z & both) == (other.z & both)

    def multiply(self, other: "PauliString") -> tuple[complex, "PauliString"]:
        """Return ``(phase, P)`` with ``self @ other == phase * P``."""
        phase, x, z = mul_masks(self.x, self.z, other.x, other.z)
        return phase, PauliString(self.n, x, z)

    def to_matrix(self) -> np.ndarray:
        return PauliSum({(self.x, self.z): 1.0}, self.n).to_matrix()


def mul_masks(x1: int, z1: int, x2: int, z2: int) -> tuple[complex, int, int]:
    x3, z3 = x1 ^ x2, z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) - _popcount(x3 & z3) + 2 * _popcount(z1 & x2)
    return _I_POW[k % 4], x3, z3


class PauliSum:
    """Map from Pauli string masks to complex coefficients on ``n`` qubits."""

    __slots__ = ("n", "terms")

    def __init__(self, terms: Mapping[tuple[int, int], complex] | None = None, n: int = 0,
                 prune: float = PRUNE_TOL):
        self.n = n
        self.terms: dict[tuple[int, int], complex] = {}
        if terms:
            for key, c in terms.items():
                if abs(c) > prune:
                    self.terms[key] = complex(c)

    # construction -----------------------------------------------------
    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[str, complex]] | Mapping[str, complex]) -> "PauliSum":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        acc: dict[tuple[int, int], complex] = {}
        n = 0
        for label, c in items:
            ps = PauliString.from_label(label)
            n = ps.n
            acc[ps.x, ps.z] = acc.get((ps.x, ps.z), 0) + c
        return cls(acc, n)

    @classmethod
    def constant(cls, c: complex, n: int) -> "PauliSum":
        return cls({(0, 0): c}, n)

    @classmethod
    def from_string(cls, ps: PauliString, c: complex = 1.0) -> "PauliSum":
        return cls({(ps.x, ps.z): c}, ps.n)

    # container protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        for (x, z), c in self.terms.items():
            yield PauliString(self.n, x, z), c

    def strings(self) -> list[PauliString]:
        return [PauliString(self.n, x, z) for (x, z) in self.terms]

    def coefficient(self, label: str | PauliString) -> complex:
        ps = PauliString.from_label(label) if isinstance(label, str) else label
        return self.terms.get((ps.x, ps.z), 0.0)

    # arithmetic -----------------------------------------------------------
    def _check(self, other: "PauliSum"):
        if self.n != other.n and self.terms and other.terms:
            raise ValueError(f"qubit counts differ: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, PauliSum):
            return self + PauliSum.constant(other, self.n)
        self._check(other)
        acc = dict(self.terms)
        for k, c in other.terms.items():
            acc[k] = acc.get(k, 0) + c
        return PauliSum(acc, max(self.n, other.n))

    __radd__ = __add__

    def __neg__(self):
        return PauliSum({k: -c for k, c in self.terms.items()}, self.n)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return self @ other
        return PauliSum({k: c * other for k, c in self.terms.items()}, self.n)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc: dict[tuple[int, int], complex] = {}
        for (x1, z1), c1 in self.terms.items():
            for (x2, z2), c2 in other.terms.items():
                ph, x3, z3 = mul_masks(x1, z1, x2, z2)
                acc[x3, z3] = acc.get((x3, z3), 0) + ph * c1 * c2
        return PauliSum(acc, max(self.n, other.n))

    def adjoint(self) -> "PauliSum":
        return PauliSum({k: c.conjugate() for k, c in self.terms.items()}, self.n)

    def hermitian_part(self) -> "PauliSum":
        return (self + self.adjoint()) * 0.5

    def antihermitian_part(self) -> "PauliSum":
        """B such that self = hermitian_part + i B, with B Hermitian."""
        return (self - self.adjoint()) * (-0.5j)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in self.terms.values())

    def real(self) -> "PauliSum":
        return PauliSum({k: c.real for k, c in self.terms.items()}, self.n)

    def prune(self, tol: float = PRUNE_TOL) -> "PauliSum":
        return PauliSum(self.terms, self.n, prune=tol)

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return self @ other - other @ self

    def equals(self, other: "PauliSum", tol: float = 1e-10) -> bool:
        return len((self - other).prune(tol)) == 0

    def __repr__(self) -> str:
        return f"PauliSum(n={self.n}, terms={len(self)})"

    # numerics -------------------------------------------------------------
    def to_sparse(self) -> sp.csr_matrix:
        dim = 1 << self.n
        idx = np.arange(dim)
        mat = sp.csr_matrix((dim, dim), dtype=complex)
        rows, cols, vals = [], [], []
        for (x, z), c in self.terms.items():
            sign = 1 - 2 * (_parity_array(idx & z))
            rows.append(idx ^ x)
            cols.append(idx)
            vals.append(c * _I_POW[_popcount(x & z) % 4] * sign)
        if rows:
            mat = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
            )
        return mat

    def to_matrix(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def dump(self) -> str:
        """Sorted ``coeff  LABEL`` lines for debugging and golden files."""
        lines = []
        for ps, c in sorted(self, key=lambda t: t[0].label):
            if abs(c.imag) <= 1e-15:
                coeff = f"{c.real:+.15e}"
            else:
                coeff = f"({c.real:+.15e}{c.imag:+.15e}j)"
            lines.append(f"{coeff}  {ps.label}")
        return "\n".join(lines) + ("\n" if lines else "")


def _parity_array(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.int64)
    out = np.zeros_like(a)
    while np.any(a):
        out ^= a & 1
        a = a >> 1
    return out


def parity_array(a: np.ndarray) -> np.ndarray:
    return _parity_array(np.asarray(a))
