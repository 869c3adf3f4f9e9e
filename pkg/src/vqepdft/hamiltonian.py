"""Active-space (CASCI) Hamiltonian shared by the FCI, mapping and PDFT code."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .io_formats import FcidumpRecord


@dataclass
class ActiveOrbitals:
    """Orbital provenance of an active space built from an SCF solution.

    ``core`` and ``active`` are basis-by-orbital coefficient blocks. They are
    needed to put densities on a grid; FCIDUMP-only problems have none.
    """

    core: np.ndarray
    active: np.ndarray
    e_nuc: float


@dataclass
class ActiveSpaceHamiltonian:
    """H = E_core + sum h_pq E_pq + 1/2 sum (pq|rs) (E_pq E_rs - delta_qr E_ps).

    ``h1`` already contains the mean field of any inactive (doubly occupied)
    orbitals; ``e_core`` holds their energy plus nuclear repulsion.
    """

    h1: np.ndarray
    h2: np.ndarray
    e_core: float
    n_alpha: int
    n_beta: int
    orbitals: ActiveOrbitals | None = field(default=None, repr=False)

    def __post_init__(self):
        self.h1 = np.asarray(self.h1, dtype=float)
        self.h2 = np.asarray(self.h2, dtype=float)
        n = self.h1.shape[0]
        if self.h1.shape != (n, n) or self.h2.shape != (n, n, n, n):
            raise ValueError("integral shapes are inconsistent")
        if not (0 <= self.n_beta <= n and 0 <= self.n_alpha <= n):
            raise ValueError("electron counts do not fit the orbital count")

    @property
    def n_orb(self) -> int:
        return self.h1.shape[0]

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_orb

    def is_consistent(self, tol: float = 1e-10) -> bool:
        h1, h2 = self.h1, self.h2
        return bool(
            np.allclose(h1, h1.T, atol=tol)
            and np.allclose(h2, h2.transpose(1, 0, 2, 3), atol=tol)
            and np.allclose(h2, h2.transpose(0, 1, 3, 2), atol=tol)
            and np.allclose(h2, h2.transpose(2, 3, 0, 1), atol=tol)
        )

    @classmethod
    def from_fcidump(cls, rec: FcidumpRecord) -> "ActiveSpaceHamiltonian":
        return cls(
            h1=rec.one_body.copy(),
            h2=rec.two_body.copy(),
            e_core=rec.core_energy,
            n_alpha=rec.n_alpha,
            n_beta=rec.n_beta,
        )

    def to_fcidump(self) -> FcidumpRecord:
        return FcidumpRecord(
            n_orbitals=self.n_orb,
            n_electrons=self.n_electrons,
            spin_2s=self.n_alpha - self.n_beta,
            core_energy=float(self.e_core),
            one_body=self.h1.copy(),
            two_body=self.h2.copy(),
            point_group_irreps=[1] * self.n_orb,
        )

    def with_electrons(self, n_alpha: int, n_beta: int) -> "ActiveSpaceHamiltonian":
        return ActiveSpaceHamiltonian(self.h1, self.h2, self.e_core, n_alpha, n_beta, self.orbitals)
