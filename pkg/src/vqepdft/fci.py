"""Determinant-basis full CI for small active spaces (the reference oracle).

Determinants are ``(alpha_mask, beta_mask)`` pairs; bit ``p`` of a mask is
spatial orbital ``p``. Fermionic signs follow the spin-orbital order used by
the qubit mappings: all alpha orbitals (ascending) before all beta orbitals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import DimensionError, SizeExceeded
from .hamiltonian import ActiveSpaceHamiltonian

DENSE_LIMIT = 2000
MAX_DETERMINANTS = 1_000_000


def _strings(n_orb: int, n_el: int) -> list[int]:
    return sorted(sum(1 << i for i in occ) for occ in combinations(range(n_orb), n_el))


def _popcount(x: int) -> int:
    return bin(x).count("1")


def excite(string: int, p: int, q: int) -> tuple[int, int] | None:
    """Apply a+_p a_q to an occupation string; return (new_string, sign) or None."""
    if not (string >> q) & 1:
        return None
    sign = -1 if _popcount(string & ((1 << q) - 1)) % 2 else 1
    string ^= 1 << q
    if (string >> p) & 1:
        return None
    if _popcount(string & ((1 << p) - 1)) % 2:
        sign = -sign
    return string | (1 << p), sign


@dataclass
class DeterminantBasis:
    n_orb: int
    n_alpha: int
    n_beta: int

    def __post_init__(self):
        size = comb(self.n_orb, self.n_alpha) * comb(self.n_orb, self.n_beta)
        if size > MAX_DETERMINANTS:
            raise SizeExceeded(f"{size} determinants exceed the limit of {MAX_DETERMINANTS}")

    @cached_property
    def alpha_strings(self) -> list[int]:
        return _strings(self.n_orb, self.n_alpha)

    @cached_property
    def beta_strings(self) -> list[int]:
        return _strings(self.n_orb, self.n_beta)

    @property
    def size(self) -> int:
        return len(self.alpha_strings) * len(self.beta_strings)

    def __len__(self) -> int:
        return self.size

    @cached_property
    def determinants(self) -> list[tuple[int, int]]:
        return [(a, b) for a in self.alpha_strings for b in self.beta_strings]

    def index(self, alpha: int, beta: int) -> int:
        ia = self.alpha_strings.index(alpha)
        ib = self.beta_strings.index(beta)
        return ia * len(self.beta_strings) + ib

    @staticmethod
    def _string_ops(strings: list[int], n_orb: int) -> list[sp.csr_matrix]:
        pos = {s: i for i, s in enumerate(strings)}
        ops = []
        for p in range(n_orb):
            for q in range(n_orb):
                rows, cols, vals = [], [], []
                for j, s in enumerate(strings):
                    res = excite(s, p, q)
                    if res is not None:
                        rows.append(pos[res[0]])
                        cols.append(j)
                        vals.append(float(res[1]))
                ops.append(sp.csr_matrix((vals, (rows, cols)), shape=(len(strings),) * 2))
        return ops

    @cached_property
    def spin_excitations(self) -> tuple[list[sp.csr_matrix], list[sp.csr_matrix]]:
        """Per-spin E^sigma_pq on the full determinant space, index p*n+q."""
        na, nb = len(self.alpha_strings), len(self.beta_strings)
        ea = self._string_ops(self.alpha_strings, self.n_orb)
        eb = self._string_ops(self.beta_strings, self.n_orb)
        ia, ib = sp.identity(na, format="csr"), sp.identity(nb, format="csr")
        return (
            [sp.kron(a, ib, format="csr") for a in ea],
            [sp.kron(ia, b, format="csr") for b in eb],
        )

    @cached_property
    def excitations(self) -> list[sp.csr_matrix]:
        """Spin-summed E_pq = sum_sigma a+_p,sigma a_q,sigma, index p*n+q."""
        ea, eb = self.spin_excitations
        return [(a + b).tocsr() for a, b in zip(ea, eb)]


def _h1_prime(h: ActiveSpaceHamiltonian) -> np.ndarray:
    return h.h1 - 0.5 * np.einsum("prrq->pq", h.h2)


def apply_hamiltonian(vec: np.ndarray, h: ActiveSpaceHamiltonian, basis: DeterminantBasis) -> np.ndarray:
    """Matrix-free sigma = H vec."""
    vec = np.asarray(vec)
    if vec.shape != (basis.size,):
        raise DimensionError(f"vector of length {vec.shape} does not match {basis.size} determinants")
    n = h.n_orb
    ops = basis.excitations
    w = np.array([op @ vec for op in ops])                       # (n^2, N)
    z = h.h2.reshape(n * n, n * n) @ w                           # (n^2, N)
    hp = _h1_prime(h).ravel()
    sigma = h.e_core * vec + hp @ w
    for pq, op in enumerate(ops):
        sigma = sigma + 0.5 * (op @ z[pq])
    return sigma


def hamiltonian_matrix(h: ActiveSpaceHamiltonian, basis: DeterminantBasis) -> np.ndarray:
    n = h.n_orb
    ops = basis.excitations
    hp = _h1_prime(h)
    mat = h.e_core * sp.identity(basis.size, format="csr")
    g = h.h2.reshape(n * n, n * n)
    for pq, op in enumerate(ops):
        mat = mat + hp.flat[pq] * op
        inner = sum((g[pq, rs] * ops[rs] for rs in range(n * n) if g[pq, rs] != 0.0),
                    sp.csr_matrix((basis.size, basis.size)))
        mat = mat + 0.5 * (op @ inner)
    dense = mat.toarray()
    return 0.5 * (dense + dense.T)


@dataclass
class RDMPair:
    """Spin-summed 1- and 2-RDM over spatial orbitals.

    ``big_gamma[p, q, r, s] = <a+_p a+_r a_s a_q>`` summed over spins, so the
    energy is ``E_core + sum h_pq gamma_pq + 1/2 sum Gamma_pqrs (pq|rs)``.
    """

    gamma: np.ndarray
    big_gamma: np.ndarray

    @property
    def n_orb(self) -> int:
        return self.gamma.shape[0]

    def energy(self, h: ActiveSpaceHamiltonian) -> float:
        return float(h.e_core + np.sum(h.h1 * self.gamma) + 0.5 * np.sum(h.h2 * self.big_gamma))

    def n_electrons(self) -> float:
        return float(np.trace(self.gamma))


def rdms_from_vector(vec: np.ndarray, basis: DeterminantBasis) -> RDMPair:
    """Exact spin-summed RDMs of a real or complex CI vector."""
    vec = np.asarray(vec)
    n = basis.n_orb
    ops = basis.excitations
    w = np.array([op @ vec for op in ops])                       # E_rs |c>
    gamma = np.einsum("i,ki->k", vec.conj(), w).reshape(n, n)
    # <c|E_pq E_rs|c> = (E_qp |c>)^dagger (E_rs |c>)
    wt = w.reshape(n, n, -1).transpose(1, 0, 2).reshape(n * n, -1)
    ee = (wt.conj() @ w.T).reshape(n, n, n, n)
    big = ee - np.einsum("qr,ps->pqrs", np.eye(n), gamma)
    if np.iscomplexobj(vec):
        if np.max(np.abs(gamma.imag)) < 1e-10 and np.max(np.abs(big.imag)) < 1e-10:
            gamma, big = gamma.real, big.real
    return RDMPair(np.asarray(gamma), np.asarray(big))


def spin_rdm1(vec: np.ndarray, basis: DeterminantBasis) -> tuple[np.ndarray, np.ndarray]:
    n = basis.n_orb
    ea, eb = basis.spin_excitations
    ga = np.array([vec.conj() @ (op @ vec) for op in ea]).reshape(n, n)
    gb = np.array([vec.conj() @ (op @ vec) for op in eb]).reshape(n, n)
    return ga.real, gb.real


@dataclass
class FciResult:
    energy: float
    vector: np.ndarray
    rdms: RDMPair
    basis: DeterminantBasis
    residual: float


def fci_ground(h: ActiveSpaceHamiltonian, n_alpha: int | None = None, n_beta: int | None = None,
               dense_limit: int = DENSE_LIMIT, tol: float = 1e-12) -> FciResult:
    """Lowest eigenpair in the (n_alpha, n_beta) sector with its RDMs."""
    na = h.n_alpha if n_alpha is None else n_alpha
    nb = h.n_beta if n_beta is None else n_beta
    basis = DeterminantBasis(h.n_orb, na, nb)
    if basis.size <= dense_limit:
        evals, evecs = np.linalg.eigh(hamiltonian_matrix(h, basis))
        energy, vec = float(evals[0]), evecs[:, 0]
    else:
        op = LinearOperator((basis.size,) * 2, matvec=lambda v: apply_hamiltonian(v, h, basis), dtype=float)
        v0 = np.zeros(basis.size)
        v0[0] = 1.0
        v0 += 1e-3 * np.random.default_rng(0).standard_normal(basis.size)
        evals, evecs = eigsh(op, k=1, which="SA", v0=v0, tol=tol)
        energy, vec = float(evals[0]), evecs[:, 0]
    # fix the sign so that the largest component is positive
    vec = vec * np.sign(vec[np.argmax(np.abs(vec))])
    residual = float(np.linalg.norm(apply_hamiltonian(vec, h, basis) - energy * vec))
    return FciResult(energy, vec, rdms_from_vector(vec, basis), basis, residual)


def fci_spectrum(h: ActiveSpaceHamiltonian, n_alpha: int, n_beta: int) -> np.ndarray:
    basis = DeterminantBasis(h.n_orb, n_alpha, n_beta)
    return np.linalg.eigvalsh(hamiltonian_matrix(h, basis))


def fock_spectrum(h: ActiveSpaceHamiltonian) -> np.ndarray:
    """All eigenvalues over every (n_alpha, n_beta) sector, sorted."""
    vals = [fci_spectrum(h, a, b) for a in range(h.n_orb + 1) for b in range(h.n_orb + 1)]
    return np.sort(np.concatenate(vals))
