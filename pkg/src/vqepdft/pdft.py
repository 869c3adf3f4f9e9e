"""MC-PDFT energies with the translated PBE (tPBE) on-top functional.

E = V_nn + sum h_pq D_pq + 1/2 sum D_pq D_rs (pq|rs) + E_ot[rho, Pi]

with D the full (core + active) spin-summed 1-RDM. Pi is built from the
2-RDM as Pi = 1/2 sum Gamma_pqrs phi_p phi_q phi_r phi_s, which gives
Pi = rho^2 / 4 for a closed-shell determinant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, VqePdftError
from .fci import RDMPair
from .grid import GridData, build_grid, orbitals_on_grid
from .hamiltonian import ActiveSpaceHamiltonian
from .integrals import Geometry, Integrals, SBasis

RHO_CUTOFF = 1e-14
R_CUTOFF = 1e-12


@dataclass
class OnTopFields:
    rho: np.ndarray
    grad_rho: np.ndarray          # (N, 3)
    pi: np.ndarray
    ratio: np.ndarray             # R = 4 Pi / rho^2
    zeta_t: np.ndarray


def _pair_products(phi: np.ndarray) -> np.ndarray:
    n = phi.shape[1]
    return (phi[:, :, None] * phi[:, None, :]).reshape(-1, n * n)


def translated_zeta(ratio: np.ndarray) -> np.ndarray:
    ratio = np.asarray(ratio, dtype=float)
    return np.sqrt(np.clip(1.0 - ratio, 0.0, None))


def densities_on_grid(rdms: RDMPair, grid: GridData) -> OnTopFields:
    """rho, grad rho, Pi, R and zeta_t at every grid point."""
    if grid.orbital_values is None:
        raise DimensionError("grid carries no orbital values")
    n = rdms.n_orb
    if grid.n_orbitals != n:
        raise DimensionError(f"grid has {grid.n_orbitals} orbitals, RDMs have {n}")
    phi, dphi = grid.orbital_values, grid.orbital_gradients
    g = 0.5 * (rdms.gamma + rdms.gamma.T)
    rho = np.einsum("np,pq,nq->n", phi, g, phi)
    grad = 2.0 * np.einsum("np,pq,nqx->nx", phi, g, dphi)
    pp = _pair_products(phi)
    pi = 0.5 * np.einsum("na,ab,nb->n", pp, rdms.big_gamma.reshape(n * n, n * n), pp)
    rho = np.where(rho < 0.0, 0.0, rho)
    ratio = np.ones_like(rho)
    ok = rho > R_CUTOFF
    ratio[ok] = 4.0 * pi[ok] / rho[ok] ** 2
    return OnTopFields(rho, grad, pi, ratio, translated_zeta(ratio))


def translate(fields: OnTopFields) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Effective (rho_up, rho_dn, grad_up, grad_dn) of the "t" translation."""
    z = fields.zeta_t
    up = 0.5 * fields.rho * (1 + z)
    dn = 0.5 * fields.rho * (1 - z)
    gup = 0.5 * fields.grad_rho * (1 + z)[:, None]
    gdn = 0.5 * fields.grad_rho * (1 - z)[:, None]
    return up, dn, gup, gdn


# --- PBE ----------------------------------------------------------------------------

KAPPA = 0.804
MU = 0.2195149727645171
BETA = 0.06672455060314922
GAMMA = (1.0 - np.log(2.0)) / np.pi ** 2
# PW92 parameters (A, alpha1, beta1..beta4) for ec(zeta=0), ec(zeta=1), -alpha_c
_PW92 = (
    (0.0310907, 0.21370, 7.5957, 3.5876, 1.6382, 0.49294),
    (0.01554535, 0.20548, 14.1189, 6.1977, 3.3662, 0.62517),
    (0.0168869, 0.11125, 10.357, 3.6231, 0.88026, 0.49671),
)
_FZ20 = 1.709920934161365617563962776245


def lda_exchange(rho: np.ndarray) -> np.ndarray:
    """Unpolarized Slater exchange energy density per volume."""
    return -0.75 * (3.0 / np.pi) ** (1.0 / 3.0) * np.asarray(rho) ** (4.0 / 3.0)


def _pbe_x_unpolarized(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    ok = rho > RHO_CUTOFF
    r = rho[ok]
    kf = (3.0 * np.pi ** 2 * r) ** (1.0 / 3.0)
    s2 = sigma[ok] / (2.0 * kf * r) ** 2
    fx = 1.0 + KAPPA - KAPPA / (1.0 + MU * s2 / KAPPA)
    out[ok] = lda_exchange(r) * fx
    return out


def pbe_exchange(rho_up, rho_dn, grad_up, grad_dn) -> np.ndarray:
    """Spin-scaled PBE exchange: E_x[u, d] = (E_x[2u] + E_x[2d]) / 2."""
    su = np.einsum("nx,nx->n", grad_up, grad_up)
    sd = np.einsum("nx,nx->n", grad_dn, grad_dn)
    return 0.5 * (_pbe_x_unpolarized(2.0 * rho_up, 4.0 * su) + _pbe_x_unpolarized(2.0 * rho_dn, 4.0 * sd))


def _pw92_g(rs, a, a1, b1, b2, b3, b4):
    den = 2.0 * a * (b1 * np.sqrt(rs) + b2 * rs + b3 * rs ** 1.5 + b4 * rs ** 2)
    return -2.0 * a * (1.0 + a1 * rs) * np.log1p(1.0 / den)


def pw92(rs: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """PW92 correlation energy per electron."""
    ec0 = _pw92_g(rs, *_PW92[0])
    ec1 = _pw92_g(rs, *_PW92[1])
    ac = -_pw92_g(rs, *_PW92[2])
    fz = ((1 + zeta) ** (4.0 / 3.0) + (1 - zeta) ** (4.0 / 3.0) - 2.0) / (2.0 ** (4.0 / 3.0) - 2.0)
    z4 = zeta ** 4
    return ec0 + ac * fz / _FZ20 * (1 - z4) + (ec1 - ec0) * fz * z4


def pbe_correlation(rho_up, rho_dn, grad_up, grad_dn) -> np.ndarray:
    rho = rho_up + rho_dn
    out = np.zeros_like(rho)
    ok = rho > RHO_CUTOFF
    r = rho[ok]
    zeta = np.clip((rho_up[ok] - rho_dn[ok]) / r, -1.0, 1.0)
    g = grad_up[ok] + grad_dn[ok]
    sigma = np.einsum("nx,nx->n", g, g)
    rs = (3.0 / (4.0 * np.pi * r)) ** (1.0 / 3.0)
    ec = pw92(rs, zeta)
    phi = 0.5 * ((1 + zeta) ** (2.0 / 3.0) + (1 - zeta) ** (2.0 / 3.0))
    kf = (3.0 * np.pi ** 2 * r) ** (1.0 / 3.0)
    ks = np.sqrt(4.0 * kf / np.pi)
    t2 = sigma / (2.0 * phi * ks * r) ** 2
    with np.errstate(over="ignore"):
        a = BETA / GAMMA / np.expm1(-ec / (GAMMA * phi ** 3))
    at2 = a * t2
    h = GAMMA * phi ** 3 * np.log1p(BETA / GAMMA * t2 * (1 + at2) / (1 + at2 + at2 ** 2))
    out[ok] = r * (ec + h)
    return out


def pbe_xc(rho_up, rho_dn, grad_up, grad_dn) -> np.ndarray:
    """PBE exchange-correlation energy per unit volume at each point."""
    rho_up = np.clip(np.asarray(rho_up, dtype=float), 0.0, None)
    rho_dn = np.clip(np.asarray(rho_dn, dtype=float), 0.0, None)
    grad_up = np.asarray(grad_up, dtype=float).reshape(-1, 3)
    grad_dn = np.asarray(grad_dn, dtype=float).reshape(-1, 3)
    return pbe_exchange(rho_up, rho_dn, grad_up, grad_dn) + pbe_correlation(rho_up, rho_dn, grad_up, grad_dn)


def on_top_energy(fields: OnTopFields, grid: GridData) -> float:
    return grid.integrate(pbe_xc(*translate(fields)))


# --- energy assembly ------------------------------------------------------------------

def embed_rdms(active: RDMPair, n_core: int) -> RDMPair:
    """RDMs over (core + active) orbitals for a doubly occupied core."""
    na = active.n_orb
    n = n_core + na
    gc = np.zeros((n, n))
    gc[:n_core, :n_core] = 2.0 * np.eye(n_core)
    ga = np.zeros((n, n))
    ga[n_core:, n_core:] = active.gamma
    big = np.zeros((n, n, n, n))
    big[n_core:, n_core:, n_core:, n_core:] = active.big_gamma

    def pair(a, b):
        return np.einsum("pq,rs->pqrs", a, b) - 0.5 * np.einsum("ps,rq->pqrs", a, b)

    big += pair(gc, gc) + pair(gc, ga) + pair(ga, gc)
    return RDMPair(gc + ga, big)


@dataclass
class PdftProblem:
    """Bare integrals over the core + active orbitals, plus what the grid needs."""

    h_full: ActiveSpaceHamiltonian        # unfolded: e_core = V_nn
    n_core: int
    geometry: Geometry | None = None
    basis: SBasis | None = None
    mo_coeff: np.ndarray | None = None    # basis x (core + active)

    @classmethod
    def from_active_space(cls, h: ActiveSpaceHamiltonian, ints: Integrals) -> "PdftProblem":
        if h.orbitals is None:
            raise VqePdftError("active space carries no orbital coefficients; on-top energy unavailable")
        c = np.hstack([h.orbitals.core, h.orbitals.active])
        ncore = h.orbitals.core.shape[1]
        h1 = c.T @ ints.hcore @ c
        h2 = np.einsum("pqrs,pi,qj,rk,sl->ijkl", ints.eri, c, c, c, c, optimize=True)
        full = ActiveSpaceHamiltonian(h1, h2, ints.e_nuc, h.n_alpha + ncore, h.n_beta + ncore)
        return cls(full, ncore, ints.geometry, ints.basis, c)

    def grid(self, radial_points: int = 60, angular_points: int = 14) -> GridData:
        if self.geometry is None:
            raise VqePdftError("no geometry/basis: cannot place orbitals on a grid")
        g = build_grid(self.geometry, radial_points, angular_points)
        return orbitals_on_grid(self.geometry, self.basis, self.mo_coeff, g)


def assemble_energy(h: ActiveSpaceHamiltonian, rdms: RDMPair, grid: GridData | None = None,
                    v_nn: float | None = None) -> dict:
    """Energy breakdown for an unfolded Hamiltonian (``h.e_core`` = V_nn) and matching RDMs.

    Keys: ``T+V_ne``, ``V_nn``, ``V_ee_classical``, ``E_ot``, ``total`` and
    ``wavefunction``. Without a grid the on-top terms are ``None``.
    """
    n = h.n_orb
    if rdms.gamma.shape != (n, n) or rdms.big_gamma.shape != (n,) * 4:
        raise DimensionError(f"RDMs of size {rdms.n_orb} do not match {n} orbitals")
    g = rdms.gamma
    one = float(np.sum(h.h1 * g))
    vee = 0.5 * float(np.einsum("pq,pqrs,rs->", g, h.h2, g))
    vnn = float(h.e_core if v_nn is None else v_nn)
    wf = float(h.e_core + one + 0.5 * np.sum(h.h2 * rdms.big_gamma))
    out = {"T+V_ne": one, "V_nn": vnn, "V_ee_classical": vee, "E_ot": None, "total": None, "wavefunction": wf}
    if grid is not None:
        eot = on_top_energy(densities_on_grid(rdms, grid), grid)
        out["E_ot"] = eot
        out["total"] = vnn + one + vee + eot
    return out


def pdft_energy(problem: PdftProblem, active_rdms: RDMPair, grid: GridData | None = None) -> dict:
    """Embed active RDMs with the core, then assemble the breakdown."""
    full = embed_rdms(active_rdms, problem.n_core)
    if grid is None and problem.geometry is not None:
        grid = problem.grid()
    return assemble_energy(problem.h_full, full, grid)
