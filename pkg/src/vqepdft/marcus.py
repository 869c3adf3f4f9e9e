"""Marcus electron-transfer kinetics.

Four-point reorganisation energy and driving force, Boys localisation,
direct-coupling transfer integrals, the nonadiabatic rate and
conformational-ensemble averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOverlap, EmptyTable, MaxSweepsExceeded
from .io_formats import FourPointEnergies, FrameTable

HARTREE_TO_EV = 27.211386
HBAR_EV_S = 6.582119569e-16
KB_EV_PER_K = 8.617333262e-5
DEFAULT_TEMPERATURE = 300.0


@dataclass(frozen=True)
class MarcusParams:
    lambda_: float
    delta_g: float
    h_da_sq_mean: float
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValueError("reorganisation energy must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.h_da_sq_mean < 0:
            raise ValueError("<|H_DA|^2> must be non-negative")


@dataclass(frozen=True)
class DcInputs:
    t_da: float
    s_da: float
    e_d: float
    e_a: float


def four_point(e: FourPointEnergies) -> dict[str, float]:
    """Driving force and reorganisation energy (eV) from Hartree energies."""
    delta_g = abs(e.e_ii - e.e_ff) * HARTREE_TO_EV
    lam = (abs(e.e_fi - e.e_ii) + abs(e.e_if - e.e_ff)) * HARTREE_TO_EV
    return {"delta_g": delta_g, "lambda": lam}


def four_point_from_sites(sites: dict[str, list[float]]) -> FourPointEnergies:
    """Sum the fragment energies of sites a/b/c/d into a four-point record.

    a = initial state at initial geometry, b = final state at initial
    geometry, c = final state at final geometry, d = initial state at final
    geometry.
    """
    total = {k: float(sum(v)) for k, v in sites.items() if k in "abcd"}
    return FourPointEnergies(e_ii=total["a"], e_fi=total["b"], e_ff=total["c"], e_if=total["d"])


def direct_coupling(inp: DcInputs) -> float:
    """Orthogonalised transfer integral H_DA = [T - (e_D+e_A) S/2] / (1 - S^2)."""
    if abs(inp.s_da) >= 1.0:
        raise DegenerateOverlap(f"|S_DA| = {abs(inp.s_da)} must be < 1")
    return (inp.t_da - (inp.e_d + inp.e_a) * inp.s_da / 2.0) / (1.0 - inp.s_da**2)


def rate(p: MarcusParams) -> float:
    """Nonadiabatic Marcus rate in s^-1.

    The driving force enters with the sign it is tabulated with (positive),
    i.e. the exponent is -(dG + lambda)^2 / (4 lambda kT).
    """
    kt = KB_EV_PER_K * p.temperature
    prefactor = 2.0 * math.pi / HBAR_EV_S * p.h_da_sq_mean / math.sqrt(4.0 * math.pi * p.lambda_ * kt)
    return prefactor * math.exp(-((p.delta_g + p.lambda_) ** 2) / (4.0 * p.lambda_ * kt))


def ensemble_stats(frames: FrameTable, temperature: float = DEFAULT_TEMPERATURE) -> dict[str, float]:
    """Arithmetic means over frames and the rate evaluated at those means.

    Columns absent from every row are skipped; the rate is reported only when
    lambda, delta_g and |H_DA|^2 (or H_DA) means are all available.
    """
    if len(frames) == 0:
        raise EmptyTable("frame table has no rows")

    def mean(values):
        vals = [v for v in values if v is not None]
        return float(np.mean(vals)) if vals else None

    lam = mean(r.lambda_ for r in frames)
    dg = mean(r.delta_g for r in frames)
    h_abs = mean(abs(r.h_da) if r.h_da is not None else None for r in frames)
    h_sq = mean(r.h_da_sq if r.h_da_sq is not None else (r.h_da**2 if r.h_da is not None else None)
                for r in frames)
    out: dict[str, float] = {"n_frames": len(frames), "temperature": float(temperature)}
    for key, val in (("lambda_mean", lam), ("delta_g_mean", dg), ("h_da_abs_mean", h_abs),
                     ("h_da_sq_mean", h_sq)):
        if val is not None:
            out[key] = val
    if lam is not None and dg is not None and h_sq is not None:
        out["k_et"] = rate(MarcusParams(lam, dg, h_sq, temperature))
    return out


# ---------------------------------------------------------------------------
# Boys localisation
# ---------------------------------------------------------------------------


@dataclass
class BoysResult:
    rotation: np.ndarray        # columns: localised orbitals in the input basis
    centroids: np.ndarray       # (n_sub, 3) localised <i|r|i>
    objective_trace: list[float]
    converged: bool


def _boys_objective(d: np.ndarray) -> float:
    return float(sum(np.sum(np.diag(dx) ** 2) for dx in d))


def boys_localize(dipoles, subset=None, max_sweeps: int = 200, tol: float = 1e-10) -> BoysResult:
    """Maximise sum_i |<i|r|i>|^2 over rotations of ``subset`` by Jacobi sweeps.

    Each 2x2 rotation angle is the exact maximiser of the pair objective, so
    the objective never decreases. Raises :class:`MaxSweepsExceeded` (carrying
    the best result) if the per-sweep gain is still above ``tol``.
    """
    d_full = np.asarray(dipoles, dtype=float)
    if d_full.ndim != 3 or d_full.shape[0] != 3:
        raise ValueError("dipoles must have shape (3, n, n)")
    idx = list(range(d_full.shape[1])) if subset is None else list(subset)
    d = d_full[:, idx][:, :, idx].copy()
    n = len(idx)
    u = np.eye(n)
    trace = [_boys_objective(d)]
    converged = False
    for _ in range(max_sweeps):
        for i in range(n - 1):
            for j in range(i + 1, n):
                diff = 0.5 * (d[:, i, i] - d[:, j, j])
                off = d[:, i, j]
                a = float(np.sum(diff**2 - off**2))
                b = float(np.sum(2.0 * diff * off))
                if abs(b) < 1e-15 and a >= 0:
                    continue
                theta = 0.25 * math.atan2(b, a)
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(n)
                rot[i, i], rot[i, j], rot[j, i], rot[j, j] = c, -s, s, c
                d = np.einsum("pi,xpq,qj->xij", rot, d, rot)
                u = u @ rot
        trace.append(_boys_objective(d))
        if trace[-1] - trace[-2] < tol:
            converged = True
            break
    result = BoysResult(
        rotation=u,
        centroids=np.stack([np.diag(dx) for dx in d], axis=1),
        objective_trace=trace,
        converged=converged,
    )
    if not converged:
        raise MaxSweepsExceeded("Boys localisation did not converge", result)
    return result
