"""Fermion-to-qubit mappings (Jordan-Wigner, parity) and two-qubit tapering.

Spin orbitals are blocked: alpha orbital ``p`` is mode ``p`` and beta
orbital ``p`` is mode ``n_orb + p``. Under the parity mapping qubit
``n_orb - 1`` then holds the alpha-number parity and qubit ``2 n_orb - 1``
the total-number parity; both are constants of motion and are removed by
:func:`taper`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import SymmetryViolation
from .hamiltonian import ActiveSpaceHamiltonian
from .pauli import PauliSum, mul_masks

SCHEMES = ("jordan_wigner", "parity")


def _check_scheme(scheme: str) -> str:
    scheme = scheme.lower().replace("-", "_")
    if scheme in ("jw", "jordan_wigner"):
        return "jordan_wigner"
    if scheme == "parity":
        return "parity"
    raise ValueError(f"unknown mapping scheme {scheme!r}")


@lru_cache(maxsize=None)
def _majorana_masks(scheme: str, n_qubits: int) -> tuple[tuple, tuple]:
    """(x, z) masks of c_j = a_j + a_j^+ and d_j = i(a_j^+ - a_j)."""
    cs, ds = [], []
    for j in range(n_qubits):
        if scheme == "jordan_wigner":
            zs = (1 << j) - 1
            cs.append((1 << j, zs))
            ds.append((1 << j, zs | (1 << j)))
        else:
            upper = ((1 << n_qubits) - 1) ^ ((1 << j) - 1)   # qubits j..n-1
            zc = (1 << (j - 1)) if j > 0 else 0
            cs.append((upper, zc))
            ds.append((upper, 1 << j))
    return tuple(cs), tuple(ds)


def ladder(j: int, dagger: bool, scheme: str, n_qubits: int) -> PauliSum:
    """Qubit image of a_j (``dagger=False``) or a_j^+."""
    scheme = _check_scheme(scheme)
    cs, ds = _majorana_masks(scheme, n_qubits)
    sign = -1 if dagger else 1
    return PauliSum({cs[j]: 0.5, ds[j]: 0.5j * sign}, n_qubits)


def fermion_product(ops: Sequence[tuple[int, bool]], scheme: str, n_qubits: int) -> PauliSum:
    """Qubit image of a product of ladder operators, leftmost applied last."""
    out = PauliSum.constant(1.0, n_qubits)
    for j, dag in ops:
        out = out @ ladder(j, dag, scheme, n_qubits)
    return out


def _accumulate(acc: dict, a: dict, b: dict, coeff: complex):
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            ph, x3, z3 = mul_masks(x1, z1, x2, z2)
            acc[x3, z3] = acc.get((x3, z3), 0) + coeff * ph * c1 * c2


def _hopping_table(scheme: str, n_qubits: int) -> list[list[dict]]:
    """a_i^+ a_j images as raw term dicts."""
    table = []
    for i in range(n_qubits):
        row = []
        for j in range(n_qubits):
            row.append(fermion_product([(i, True), (j, False)], scheme, n_qubits).terms)
        table.append(row)
    return table


def map_hamiltonian(h: ActiveSpaceHamiltonian, scheme: str = "parity", tol: float = 1e-14) -> PauliSum:
    """Hermitian qubit Hamiltonian on ``2 n_orb`` qubits (untapered)."""
    scheme = _check_scheme(scheme)
    n = h.n_orb
    nq = 2 * n
    hop = _hopping_table(scheme, nq)
    acc: dict = {(0, 0): complex(h.e_core)}
    spins = (0, n)
    # one-body part, with the -delta_qr term of the normal-ordered two-body part
    h1p = h.h1 - 0.5 * np.einsum("prrq->pq", h.h2)
    for off in spins:
        for p in range(n):
            for q in range(n):
                if abs(h1p[p, q]) > tol:
                    for k, c in hop[off + p][off + q].items():
                        acc[k] = acc.get(k, 0) + h1p[p, q] * c
    # 1/2 sum (pq|rs) E_pq E_rs
    for s1 in spins:
        for s2 in spins:
            for p in range(n):
                for q in range(n):
                    epq = hop[s1 + p][s1 + q]
                    for r in range(n):
                        for s in range(n):
                            g = h.h2[p, q, r, s]
                            if abs(g) > tol:
                                _accumulate(acc, epq, hop[s2 + r][s2 + s], 0.5 * g)
    out = PauliSum(acc, nq)
    return out.real()


@dataclass(frozen=True)
class SectorLabel:
    """Eigenvalues (+1/-1) of the alpha-parity and total-parity qubits."""

    alpha_parity: int
    total_parity: int

    @classmethod
    def from_counts(cls, n_alpha: int, n_beta: int) -> "SectorLabel":
        return cls((-1) ** n_alpha, (-1) ** (n_alpha + n_beta))

    def __post_init__(self):
        if self.alpha_parity not in (1, -1) or self.total_parity not in (1, -1):
            raise ValueError("parities must be +1 or -1")

    def consistent_with(self, n_alpha: int, n_beta: int) -> bool:
        return self == SectorLabel.from_counts(n_alpha, n_beta)


def symmetry_qubits(n_qubits: int) -> tuple[int, int]:
    return n_qubits // 2 - 1, n_qubits - 1


def _drop_bits(mask: int, drop: Sequence[int]) -> int:
    for q in sorted(drop, reverse=True):
        low = mask & ((1 << q) - 1)
        mask = ((mask >> (q + 1)) << q) | low
    return mask


def _insert_bits(mask: int, positions: Sequence[int], values: Sequence[int]) -> int:
    for q, v in sorted(zip(positions, values)):
        low = mask & ((1 << q) - 1)
        mask = ((mask >> q) << (q + 1)) | (v << q) | low
    return mask


def taper(h_pauli: PauliSum, sector: SectorLabel) -> PauliSum:
    """Remove the two parity qubits, replacing Z on them by the sector eigenvalues."""
    n = h_pauli.n
    qa, qt = symmetry_qubits(n)
    acc: dict = {}
    for (x, z), c in h_pauli.terms.items():
        if (x >> qa) & 1 or (x >> qt) & 1:
            raise SymmetryViolation("term acts with X/Y on a symmetry qubit")
        if (z >> qa) & 1:
            c = c * sector.alpha_parity
        if (z >> qt) & 1:
            c = c * sector.total_parity
        key = (_drop_bits(x, (qa, qt)), _drop_bits(z, (qa, qt)))
        acc[key] = acc.get(key, 0) + c
    return PauliSum(acc, n - 2)


@dataclass(frozen=True)
class QubitEncoding:
    """How an ``n_orb``-orbital problem is laid out on a qubit register.

    ``tapered`` is only valid for the parity scheme; the sector is fixed by
    ``n_alpha``/``n_beta``.
    """

    scheme: str
    n_orb: int
    n_alpha: int
    n_beta: int
    tapered: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", _check_scheme(self.scheme))
        if self.tapered and self.scheme != "parity":
            raise ValueError("tapering requires the parity mapping")

    @classmethod
    def for_hamiltonian(cls, h: ActiveSpaceHamiltonian, scheme: str = "parity", tapered: bool | None = None):
        scheme = _check_scheme(scheme)
        if tapered is None:
            tapered = scheme == "parity"
        return cls(scheme, h.n_orb, h.n_alpha, h.n_beta, tapered)

    @property
    def n_modes(self) -> int:
        return 2 * self.n_orb

    @property
    def n_qubits(self) -> int:
        return self.n_modes - (2 if self.tapered else 0)

    @property
    def sector(self) -> SectorLabel:
        return SectorLabel.from_counts(self.n_alpha, self.n_beta)

    def spin_of(self, mode: int) -> int:
        return 0 if mode < self.n_orb else 1

    def finish(self, op: PauliSum) -> PauliSum:
        """Taper a full-register operator if this encoding is tapered."""
        return taper(op, self.sector) if self.tapered else op

    def map_hamiltonian(self, h: ActiveSpaceHamiltonian) -> PauliSum:
        return self.finish(map_hamiltonian(h, self.scheme))

    def map_operator(self, ops: Sequence[tuple[int, bool]], coeff: complex = 1.0) -> PauliSum:
        self._check_conserving(ops)
        return self.finish(fermion_product(ops, self.scheme, self.n_modes) * coeff)

    def _check_conserving(self, ops: Iterable[tuple[int, bool]]):
        delta = [0, 0]
        for j, dag in ops:
            if not 0 <= j < self.n_modes:
                raise ValueError(f"mode {j} outside the active space")
            delta[self.spin_of(j)] += 1 if dag else -1
        if delta != [0, 0]:
            raise SymmetryViolation("operator changes the alpha or beta electron count")

    # basis-state bookkeeping ---------------------------------------------
    def occupation_to_index(self, alpha_mask: int, beta_mask: int) -> int:
        occ = alpha_mask | (beta_mask << self.n_orb)
        if self.scheme == "jordan_wigner":
            return occ
        bits, par = 0, 0
        for j in range(self.n_modes):
            par ^= (occ >> j) & 1
            bits |= par << j
        if self.tapered:
            bits = _drop_bits(bits, symmetry_qubits(self.n_modes))
        return bits

    def index_to_occupation(self, index: int) -> tuple[int, int]:
        if self.scheme == "jordan_wigner":
            occ = index
        else:
            bits = index
            if self.tapered:
                qa, qt = symmetry_qubits(self.n_modes)
                va = self.n_alpha % 2
                vt = (self.n_alpha + self.n_beta) % 2
                bits = _insert_bits(bits, (qa, qt), (va, vt))
            occ, prev = 0, 0
            for j in range(self.n_modes):
                b = (bits >> j) & 1
                occ |= (b ^ prev) << j
                prev = b
        mask = (1 << self.n_orb) - 1
        return occ & mask, occ >> self.n_orb


def sector_indices(encoding: QubitEncoding) -> np.ndarray:
    """Register basis states holding exactly n_alpha / n_beta electrons."""
    from .fci import DeterminantBasis

    basis = DeterminantBasis(encoding.n_orb, encoding.n_alpha, encoding.n_beta)
    return np.array([encoding.occupation_to_index(a, b) for a, b in basis.determinants], dtype=np.int64)


def sector_ground_energy(op: PauliSum, encoding: QubitEncoding) -> float:
    """Lowest eigenvalue of ``op`` restricted to the encoding's particle-number sector."""
    idx = sector_indices(encoding)
    mat = op.to_sparse()[idx][:, idx].toarray()
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])


def map_excitation(
    op: Sequence[int],
    encoding: QubitEncoding,
) -> PauliSum:
    """Anti-Hermitian generator T - T^+ for a spin-orbital excitation.

    ``op = (p, q)`` is a+_p a_q; ``op = (p, q, r, s)`` is a+_p a+_q a_r a_s.
    """
    if len(op) == 2:
        p, q = op
        ops = [(p, True), (q, False)]
    elif len(op) == 4:
        p, q, r, s = op
        ops = [(p, True), (q, True), (r, False), (s, False)]
    else:
        raise ValueError("excitation needs 2 or 4 mode indices")
    encoding._check_conserving(ops)
    full = fermion_product(ops, encoding.scheme, encoding.n_modes)
    gen = full - full.adjoint()
    return encoding.finish(gen.prune())


def number_operator(mode: int, encoding: QubitEncoding) -> PauliSum:
    return encoding.map_operator([(mode, True), (mode, False)])
