"""Becke-partitioned molecular quadrature grids and orbital values on them.

Radial: Gauss-Chebyshev (second kind) with the Becke map r = R (1+x)/(1-x).
Angular: Gauss-Legendre in cos(theta) times a uniform azimuthal rule with
twice as many points. Atomic cells use Becke's fuzzy partition (three
iterations of the smoothing polynomial).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParseError
from .integrals import Geometry, SBasis

DEFAULT_RADIAL = 60
DEFAULT_ANGULAR = 14
RADIAL_SCALE = 1.0   # Bohr; H/He-sized atoms


@dataclass
class GridData:
    points: np.ndarray                      # (N, 3) Bohr
    weights: np.ndarray                     # (N,) Bohr^3
    orbital_values: np.ndarray | None = None      # (N, norb)
    orbital_gradients: np.ndarray | None = None   # (N, norb, 3)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.shape[0] != self.points.shape[0]:
            raise DimensionError("points and weights differ in length")
        if self.orbital_values is not None:
            self.orbital_values = np.asarray(self.orbital_values, dtype=float)
            if self.orbital_values.shape[0] != self.npoints:
                raise DimensionError("orbital values do not match the point count")
            if self.orbital_gradients is None:
                raise DimensionError("orbital gradients missing")
            self.orbital_gradients = np.asarray(self.orbital_gradients, dtype=float)
            if self.orbital_gradients.shape != self.orbital_values.shape + (3,):
                raise DimensionError("orbital gradient array has the wrong shape")

    @property
    def npoints(self) -> int:
        return self.points.shape[0]

    @property
    def n_orbitals(self) -> int:
        return 0 if self.orbital_values is None else self.orbital_values.shape[1]

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, f))


def radial_grid(n: int, scale: float = RADIAL_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """Nodes r_i and weights with sum w_i f(r_i) ~ int_0^inf f(r) r^2 dr."""
    i = np.arange(1, n + 1)
    x = np.cos(i * np.pi / (n + 1))
    wx = np.pi / (n + 1) * np.sin(i * np.pi / (n + 1)) ** 2
    r = scale * (1 + x) / (1 - x)
    drdx = 2 * scale / (1 - x) ** 2
    w = wx / np.sqrt(1 - x ** 2) * drdx * r ** 2
    return r, w


def angular_grid(n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights summing to 4 pi."""
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct ** 2)
    dirs = np.stack([
        np.outer(st, np.cos(phi)).ravel(),
        np.outer(st, np.sin(phi)).ravel(),
        np.repeat(ct, n_phi),
    ], axis=1)
    w = np.repeat(wt, n_phi) * (2 * np.pi / n_phi)
    return dirs, w


def _becke_step(mu: np.ndarray) -> np.ndarray:
    for _ in range(3):
        mu = 1.5 * mu - 0.5 * mu ** 3
    return 0.5 * (1 - mu)


def becke_weights(points: np.ndarray, coords: np.ndarray, owner: int) -> np.ndarray:
    """Fraction of each point assigned to atom ``owner``."""
    natm = coords.shape[0]
    if natm == 1:
        return np.ones(points.shape[0])
    dist = np.linalg.norm(points[:, None, :] - coords[None, :, :], axis=2)   # (N, natm)
    cell = np.ones((points.shape[0], natm))
    for a in range(natm):
        for b in range(natm):
            if a != b:
                rab = np.linalg.norm(coords[a] - coords[b])
                cell[:, a] *= _becke_step((dist[:, a] - dist[:, b]) / rab)
    return cell[:, owner] / cell.sum(axis=1)


def build_grid(geom: Geometry, radial_points: int = DEFAULT_RADIAL, angular_points: int = DEFAULT_ANGULAR,
               scale: float = RADIAL_SCALE) -> GridData:
    """Atom-centred product grid; ``angular_points`` is the Gauss-Legendre order in theta."""
    if radial_points < 8:
        raise ValueError("radial_points must be at least 8")
    if angular_points < 2:
        raise ValueError("angular_points must be at least 2")
    r, wr = radial_grid(radial_points, scale)
    dirs, wa = angular_grid(angular_points)
    shell = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    wshell = (wr[:, None] * wa[None, :]).ravel()
    pts, wts = [], []
    for a, center in enumerate(geom.coords):
        p = shell + center
        w = wshell * becke_weights(p, geom.coords, a)
        keep = w > 0
        pts.append(p[keep])
        wts.append(w[keep])
    return GridData(np.concatenate(pts), np.concatenate(wts))


def basis_on_grid(basis: SBasis, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (N, nbas) and analytic gradients (N, nbas, 3) of the s functions."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    vals = np.zeros((points.shape[0], len(basis)))
    grads = np.zeros((points.shape[0], len(basis), 3))
    for mu, sh in enumerate(basis.shells):
        d = points - sh.center
        r2 = np.einsum("ij,ij->i", d, d)
        e = np.exp(-np.outer(r2, sh.exponents))               # (N, nprim)
        vals[:, mu] = e @ sh.coefficients
        radial = e @ (sh.coefficients * -2.0 * sh.exponents)
        grads[:, mu, :] = d * radial[:, None]
    return vals, grads


def orbitals_on_grid(geom: Geometry, basis: SBasis, mo_coeff: np.ndarray, grid: GridData) -> GridData:
    """Grid carrying the values and gradients of the given orbital columns."""
    c = np.asarray(mo_coeff, dtype=float)
    if c.ndim != 2 or c.shape[0] != len(basis):
        raise DimensionError(f"orbital matrix has {c.shape[0] if c.ndim == 2 else '?'} rows, basis has {len(basis)}")
    vals, grads = basis_on_grid(basis, grid.points)
    return GridData(grid.points, grid.weights, vals @ c, np.einsum("nmx,mp->npx", grads, c))


# --- grid file ------------------------------------------------------------------

def write_grid(grid: GridData) -> str:
    if grid.orbital_values is None:
        raise DimensionError("grid has no orbital values to write")
    norb = grid.n_orbitals
    lines = [f"grid v1 {grid.npoints} {norb}"]
    for i in range(grid.npoints):
        row = list(grid.points[i]) + [grid.weights[i]] + list(grid.orbital_values[i])
        row += list(grid.orbital_gradients[i].ravel())
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_grid(text: str) -> GridData:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty grid file", 1)
    head = lines[0].split()
    if len(head) != 4 or head[:2] != ["grid", "v1"]:
        raise ParseError("expected header 'grid v1 npoints norb'", 1)
    try:
        npts, norb = int(head[2]), int(head[3])
    except ValueError:
        raise ParseError("grid header counts are not integers", 1) from None
    if len(lines) - 1 != npts:
        raise ParseError(f"header announces {npts} points, found {len(lines) - 1}", len(lines))
    width = 4 + 4 * norb
    data = np.empty((npts, width))
    for i, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != width:
            raise ParseError(f"expected {width} columns, found {len(parts)}", i + 2)
        try:
            data[i] = [float(v) for v in parts]
        except ValueError:
            raise ParseError("non-numeric grid entry", i + 2) from None
    if np.any(data[:, 3] <= 0):
        raise ParseError("grid weights must be positive", None)
    return GridData(data[:, :3], data[:, 3], data[:, 4:4 + norb], data[:, 4 + norb:].reshape(npts, norb, 3))
