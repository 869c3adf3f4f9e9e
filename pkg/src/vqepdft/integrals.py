"""Integral engine for contracted s-type Gaussians, RHF and active spaces.

All integrals use the closed forms available for s functions (Boys F0 for
the Coulomb-type terms). Coordinates are in Bohr.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.special import erf

from .errors import DimensionError, InvalidWindow, ParseError, ScfNotConverged, UnsupportedBasis
from .hamiltonian import ActiveOrbitals, ActiveSpaceHamiltonian

ANGSTROM_TO_BOHR = 1.0 / 0.52917721092

_SYMBOLS = {"H": 1, "HE": 2}

# contracted s shells: (exponents, coefficients for normalised primitives)
BASIS_TABLES: dict[str, dict[int, list[tuple[list[float], list[float]]]]] = {
    "sto-3g": {
        1: [([3.42525091, 0.62391373, 0.16885540], [0.15432897, 0.53532814, 0.44463454])],
        2: [([6.36242139, 1.15892300, 0.31364979], [0.15432897, 0.53532814, 0.44463454])],
    },
    "6-31g": {
        1: [
            ([18.7311370, 2.8253937, 0.6401217], [0.03349460, 0.23472695, 0.81375733]),
            ([0.1612778], [1.0]),
        ],
        2: [
            ([38.4216340, 5.7780300, 1.2417740], [0.0237660, 0.1546790, 0.4696300]),
            ([0.2979640], [1.0]),
        ],
    },
}
_BASIS_ALIASES = {"sto3g": "sto-3g", "sto-3g": "sto-3g", "631g": "6-31g", "6-31g": "6-31g"}


@dataclass(frozen=True)
class Geometry:
    charges: tuple[int, ...]
    coords: np.ndarray  # (natom, 3) Bohr

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "coords", coords)
        if len(self.charges) == 0 or len(self.charges) != len(coords):
            raise ValueError("geometry needs at least one atom and one position per atom")
        for i in range(len(coords)):
            for j in range(i):
                if np.linalg.norm(coords[i] - coords[j]) <= 1e-8:
                    raise ValueError(f"atoms {j} and {i} coincide")

    @property
    def natom(self) -> int:
        return len(self.charges)

    def nuclear_repulsion(self) -> float:
        e = 0.0
        for i in range(self.natom):
            for j in range(i):
                e += self.charges[i] * self.charges[j] / np.linalg.norm(self.coords[i] - self.coords[j])
        return e

    def translated(self, shift) -> "Geometry":
        return Geometry(self.charges, self.coords + np.asarray(shift, dtype=float))

    @property
    def n_electrons_neutral(self) -> int:
        return int(sum(self.charges))


def parse_xyz(text: str, unit: str | None = None) -> Geometry:
    """Read ``symbol|charge x y z`` lines.

    A standard XYZ count/comment header is tolerated. Units come from the
    ``unit`` argument, else a ``unit bohr|angstrom`` line, else Angstrom.
    """
    charges: list[int] = []
    coords: list[list[float]] = []
    file_unit = None
    lines = text.splitlines()
    if lines and lines[0].strip().isdigit():
        lines = lines[2:]
        offset = 3
    else:
        offset = 1
    for i, line in enumerate(lines):
        fields = line.split("#")[0].split()
        if not fields:
            continue
        if fields[0].lower() in ("unit", "units"):
            if len(fields) != 2 or fields[1].lower() not in ("bohr", "angstrom"):
                raise ParseError("unit line must be 'unit bohr' or 'unit angstrom'", i + offset)
            file_unit = fields[1].lower()
            continue
        if len(fields) != 4:
            raise ParseError("expected 'symbol x y z'", i + offset)
        label = fields[0]
        if re.fullmatch(r"\d+", label):
            z = int(label)
        else:
            z = _SYMBOLS.get(label.upper())
            if z is None:
                raise ParseError(f"unsupported element {label!r}", i + offset)
        try:
            xyz = [float(f) for f in fields[1:]]
        except ValueError:
            raise ParseError("coordinates must be numbers", i + offset) from None
        charges.append(z)
        coords.append(xyz)
    if not charges:
        raise ParseError("no atoms found", 1)
    scale = ANGSTROM_TO_BOHR if (unit or file_unit or "angstrom").lower() == "angstrom" else 1.0
    try:
        return Geometry(tuple(charges), np.array(coords) * scale)
    except ValueError as exc:
        raise ParseError(str(exc), 1) from None


def h_chain(n_atoms: int, spacing: float | list[float]) -> Geometry:
    """Linear hydrogen chain along z (Bohr)."""
    gaps = [spacing] * (n_atoms - 1) if np.isscalar(spacing) else list(spacing)
    z = np.concatenate([[0.0], np.cumsum(gaps)])
    coords = np.zeros((n_atoms, 3))
    coords[:, 2] = z - z.mean()
    return Geometry((1,) * n_atoms, coords)


@dataclass(frozen=True)
class Shell:
    """Contracted s function; ``coefficients`` include primitive normalisation."""

    center: np.ndarray
    exponents: np.ndarray
    coefficients: np.ndarray
    atom: int
    angular_momentum: int = 0


class SBasis:
    """Flat list of contracted s shells, each normalised to unit self-overlap."""

    def __init__(self, shells: list[Shell]):
        for sh in shells:
            if sh.angular_momentum != 0:
                raise UnsupportedBasis("only s-type functions are supported")
        self.shells = [_normalise(sh) for sh in shells]

    def __len__(self) -> int:
        return len(self.shells)

    @classmethod
    def from_name(cls, geom: Geometry, name: str) -> "SBasis":
        key = _BASIS_ALIASES.get(name.lower().replace("_", "-"))
        if key is None:
            raise UnsupportedBasis(f"unknown basis {name!r}")
        table = BASIS_TABLES[key]
        shells = []
        for a, (z, pos) in enumerate(zip(geom.charges, geom.coords)):
            if z not in table:
                raise UnsupportedBasis(f"basis {key} has no entry for Z={z}")
            for exps, coefs in table[z]:
                e = np.array(exps, dtype=float)
                c = np.array(coefs, dtype=float) * (2.0 * e / math.pi) ** 0.75
                shells.append(Shell(np.array(pos, dtype=float), e, c, a))
        return cls(shells)


def _normalise(sh: Shell) -> Shell:
    e, c = sh.exponents, sh.coefficients
    p = e[:, None] + e[None, :]
    self_overlap = float(np.einsum("i,j,ij->", c, c, (math.pi / p) ** 1.5))
    return Shell(np.asarray(sh.center, float), e, c / math.sqrt(self_overlap), sh.atom)


def boys_f0(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 1e-12
    out[small] = 1.0 - t[small] / 3.0
    ts = t[~small]
    out[~small] = 0.5 * np.sqrt(math.pi / ts) * erf(np.sqrt(ts))
    return out


def _pair(a: Shell, b: Shell):
    """Gaussian product data for every primitive pair of two shells."""
    p = a.exponents[:, None] + b.exponents[None, :]
    mu = a.exponents[:, None] * b.exponents[None, :] / p
    r2 = float(np.sum((a.center - b.center) ** 2))
    centre = (a.exponents[:, None, None] * a.center + b.exponents[None, :, None] * b.center) / p[..., None]
    cc = a.coefficients[:, None] * b.coefficients[None, :]
    return p, mu, r2, centre, cc


def overlap_kinetic_nuclear(geom: Geometry, basis: SBasis):
    """Overlap, kinetic and nuclear-attraction matrices."""
    n = len(basis)
    s = np.zeros((n, n))
    t = np.zeros((n, n))
    v = np.zeros((n, n))
    charges = np.array(geom.charges, dtype=float)
    for i, a in enumerate(basis.shells):
        for j in range(i + 1):
            b = basis.shells[j]
            p, mu, r2, centre, cc = _pair(a, b)
            sprim = (math.pi / p) ** 1.5 * np.exp(-mu * r2)
            s[i, j] = np.sum(cc * sprim)
            t[i, j] = np.sum(cc * mu * (3.0 - 2.0 * mu * r2) * sprim)
            pc2 = np.sum((centre[:, :, None, :] - geom.coords[None, None, :, :]) ** 2, axis=-1)
            vprim = -2.0 * math.pi / p * np.exp(-mu * r2)
            v[i, j] = np.sum(cc * vprim * np.sum(charges * boys_f0(p[..., None] * pc2), axis=-1))
            s[j, i], t[j, i], v[j, i] = s[i, j], t[i, j], v[i, j]
    return s, t, v


def eri(geom: Geometry, basis: SBasis) -> np.ndarray:
    """Two-electron integrals (pq|rs) in chemist notation, 8-fold symmetric."""
    n = len(basis)
    pairs = {}
    for i in range(n):
        for j in range(i + 1):
            p, mu, r2, centre, cc = _pair(basis.shells[i], basis.shells[j])
            pairs[i, j] = (p.ravel(), centre.reshape(-1, 3), (cc * np.exp(-mu * r2)).ravel())
    g = np.zeros((n, n, n, n))
    keys = sorted(pairs)
    for x, (i, j) in enumerate(keys):
        p, pc, kp = pairs[i, j]
        for (k, l) in keys[: x + 1]:
            q, qc, kq = pairs[k, l]
            pq = p[:, None] + q[None, :]
            rho = p[:, None] * q[None, :] / pq
            r2 = np.sum((pc[:, None, :] - qc[None, :, :]) ** 2, axis=-1)
            val = np.sum(
                kp[:, None] * kq[None, :] * 2.0 * math.pi**2.5
                / (p[:, None] * q[None, :] * np.sqrt(pq)) * boys_f0(rho * r2)
            )
            for idx in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)):
                g[idx] = val
    return g


def dipole_ao(geom: Geometry, basis: SBasis) -> np.ndarray:
    """<mu|r|nu> for the three Cartesian components, shape (3, n, n)."""
    n = len(basis)
    d = np.zeros((3, n, n))
    for i, a in enumerate(basis.shells):
        for j in range(i + 1):
            p, mu, r2, centre, cc = _pair(a, basis.shells[j])
            sprim = (math.pi / p) ** 1.5 * np.exp(-mu * r2)
            d[:, i, j] = d[:, j, i] = np.einsum("ab,ab,abx->x", cc, sprim, centre)
    return d


@dataclass
class Integrals:
    """AO integrals for one geometry/basis pair."""

    geometry: Geometry
    basis: SBasis
    overlap: np.ndarray
    kinetic: np.ndarray
    nuclear: np.ndarray
    eri: np.ndarray
    e_nuc: float

    @property
    def hcore(self) -> np.ndarray:
        return self.kinetic + self.nuclear

    @classmethod
    def compute(cls, geom: Geometry, basis: SBasis) -> "Integrals":
        s, t, v = overlap_kinetic_nuclear(geom, basis)
        return cls(geom, basis, s, t, v, eri(geom, basis), geom.nuclear_repulsion())


@dataclass
class MoSet:
    coefficients: np.ndarray          # basis x orbital
    orbital_energies: np.ndarray
    n_occ_alpha: int
    n_occ_beta: int
    energy: float
    iterations: int = 0

    @property
    def density(self) -> np.ndarray:
        """Spin-summed AO density matrix of the occupied orbitals."""
        c = self.coefficients
        return c[:, : self.n_occ_alpha] @ c[:, : self.n_occ_alpha].T + c[:, : self.n_occ_beta] @ c[:, : self.n_occ_beta].T


def _fock(hcore, g, dens):
    j = np.einsum("pqrs,rs->pq", g, dens)
    k = np.einsum("prqs,rs->pq", g, dens)
    return hcore + j - 0.5 * k


def rhf(
    ints: Integrals,
    n_electrons: int,
    max_iter: int = 200,
    conv: float = 1e-8,
    mixing: float = 0.5,
    guess: np.ndarray | None = None,
) -> MoSet:
    """Closed-shell SCF with damped density mixing.

    Converged when the density produced by the current Fock matrix differs
    from the input density by less than ``conv`` (max norm).
    """
    if n_electrons <= 0 or n_electrons % 2:
        raise ValueError("restricted SCF needs a positive, even electron count")
    nocc = n_electrons // 2
    if nocc > len(ints.basis):
        raise ValueError("not enough basis functions for the electron count")
    hcore, g, s = ints.hcore, ints.eri, ints.overlap

    def solve(dens):
        eps, c = eigh(_fock(hcore, g, dens), s)
        return eps, c, 2.0 * c[:, :nocc] @ c[:, :nocc].T

    def energy(dens):
        return 0.5 * float(np.sum(dens * (hcore + _fock(hcore, g, dens)))) + ints.e_nuc

    if guess is None:
        eps, c = eigh(hcore, s)
        dens = 2.0 * c[:, :nocc] @ c[:, :nocc].T
    else:
        dens = np.asarray(guess, dtype=float)
    for it in range(1, max_iter + 1):
        eps, c, new = solve(dens)
        if np.max(np.abs(new - dens)) < conv:
            eps, c, dens = solve(new)
            return MoSet(c, eps, nocc, nocc, energy(dens), it)
        dens = mixing * new + (1.0 - mixing) * dens
    raise ScfNotConverged(f"RHF not converged in {max_iter} iterations", energy(dens))


def make_active_space(
    mos: MoSet,
    ints: Integrals,
    n_active_orb: int,
    n_active_elec: int,
    spin_2s: int | None = None,
    n_electrons: int | None = None,
) -> ActiveSpaceHamiltonian:
    """Fold inactive orbitals into an effective CASCI Hamiltonian.

    Inactive orbitals are the lowest ``(N - n_active_elec)/2`` MOs; the active
    window follows them. ``N`` defaults to the electron count of ``mos``;
    pass ``n_electrons`` to describe an ionised state in the same orbitals.
    ``spin_2s`` defaults to the lowest spin compatible with the active
    electron count.
    """
    nmo = mos.coefficients.shape[1]
    n_total = mos.n_occ_alpha + mos.n_occ_beta if n_electrons is None else n_electrons
    if n_active_orb < 1 or n_active_elec < 0:
        raise InvalidWindow("active window must have at least one orbital")
    if n_active_elec > 2 * n_active_orb:
        raise InvalidWindow("too many active electrons for the active orbitals")
    if n_active_elec > n_total:
        raise InvalidWindow("more active electrons than electrons in the system")
    if (n_total - n_active_elec) % 2:
        raise InvalidWindow("inactive electron count must be even")
    ncore = (n_total - n_active_elec) // 2
    if ncore + n_active_orb > nmo:
        raise InvalidWindow(f"window of {n_active_orb} orbitals after {ncore} core orbitals exceeds basis size {nmo}")
    if spin_2s is None:
        spin_2s = n_active_elec % 2
    if (n_active_elec + spin_2s) % 2 or spin_2s > n_active_elec:
        raise InvalidWindow("spin inconsistent with active electron count")

    c = mos.coefficients
    c_core, c_act = c[:, :ncore], c[:, ncore: ncore + n_active_orb]
    hcore = ints.hcore
    d_core = 2.0 * c_core @ c_core.T
    f_core = _fock(hcore, ints.eri, d_core) if ncore else hcore
    e_core = ints.e_nuc + 0.5 * float(np.sum(d_core * (hcore + f_core)))
    h1 = c_act.T @ f_core @ c_act
    h2 = np.einsum("pqrs,pi,qj,rk,sl->ijkl", ints.eri, c_act, c_act, c_act, c_act, optimize=True)
    n_alpha = (n_active_elec + spin_2s) // 2
    n_beta = n_active_elec - n_alpha
    return ActiveSpaceHamiltonian(
        h1=0.5 * (h1 + h1.T),
        h2=_symmetrise_eri(h2),
        e_core=e_core,
        n_alpha=n_alpha,
        n_beta=n_beta,
        orbitals=ActiveOrbitals(core=c_core.copy(), active=c_act.copy(), e_nuc=ints.e_nuc),
    )


def _symmetrise_eri(g: np.ndarray) -> np.ndarray:
    g = 0.5 * (g + g.transpose(1, 0, 2, 3))
    g = 0.5 * (g + g.transpose(0, 1, 3, 2))
    return 0.5 * (g + g.transpose(2, 3, 0, 1))


def dipole_matrices(geom: Geometry, basis: SBasis, mo_coeff: np.ndarray) -> np.ndarray:
    """Orbital dipole matrices <p|r|q> (Bohr), shape (3, norb, norb)."""
    c = np.asarray(mo_coeff, dtype=float)
    if c.shape[0] != len(basis):
        raise DimensionError(f"MO coefficients have {c.shape[0]} rows, basis has {len(basis)} functions")
    d = dipole_ao(geom, basis)
    out = np.einsum("pi,xpq,qj->xij", c, d, c)
    return 0.5 * (out + out.transpose(0, 2, 1))


def fragment_midpoints(geom: Geometry, pairs) -> np.ndarray:
    return np.array([0.5 * (geom.coords[i] + geom.coords[j]) for i, j in pairs])
