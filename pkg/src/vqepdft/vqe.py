"""Variational optimization on the exact expectation path, plus parameter files."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .ansatz import Ansatz
from .errors import DimensionError, MaxIterExceeded, ParseError
from .pauli import PauliSum
from .simulator import Circuit, Observable, energy_and_gradient, make_rng, run

OPTIMIZERS = ("gradient_lbfgs", "nelder_mead")


@dataclass
class VqeOptions:
    optimizer: str = "gradient_lbfgs"
    restarts: int = 10
    tol_grad: float = 1e-6
    tol_energy: float = 1e-9
    max_iter: int = 1000
    seed: int = 0
    perturbation: float = 0.1
    raise_on_max_iter: bool = True

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.restarts < 1:
            raise ValueError("need at least one restart")


@dataclass
class VqeResult:
    energy: float
    parameters: np.ndarray
    iterations: int
    converged: bool
    restart_index: int
    gradient_norm: float = float("nan")
    trace: list[float] = field(default_factory=list, repr=False)
    restart_energies: list[float] = field(default_factory=list)


def start_points(reference: np.ndarray, options: VqeOptions) -> list[np.ndarray]:
    """Restart 0 is the reference; later ones add uniform(+-perturbation) noise."""
    ref = np.asarray(reference, dtype=float)
    pts = [ref.copy()]
    for r in range(1, options.restarts):
        rng = make_rng(options.seed * 1_000_003 + r)
        pts.append(ref + rng.uniform(-options.perturbation, options.perturbation, ref.size))
    return pts


def minimize(h: PauliSum | Observable, ansatz: Ansatz | Circuit, options: VqeOptions | None = None,
             initial: np.ndarray | None = None) -> VqeResult:
    """Best-of-restarts minimization of <psi(theta)|h|psi(theta)>."""
    options = options or VqeOptions()
    circuit = ansatz.circuit if isinstance(ansatz, Ansatz) else ansatz
    if initial is None:
        initial = ansatz.reference_parameters if isinstance(ansatz, Ansatz) else np.zeros(circuit.n_params)
    obs = h if isinstance(h, Observable) else Observable(h)
    if obs.n != circuit.n_qubits:
        raise DimensionError(f"Hamiltonian acts on {obs.n} qubits, circuit on {circuit.n_qubits}")

    trace: list[float] = []
    best_seen = [np.inf]

    def record(e):
        best_seen[0] = min(best_seen[0], e)
        trace.append(best_seen[0])

    def fun_grad(p):
        e, g = energy_and_gradient(circuit, p, obs)
        record(e)
        return e, g

    def fun(p):
        e = obs.expectation(run(circuit, p))
        record(e)
        return e

    best: VqeResult | None = None
    energies = []
    hit_limit = False
    for r, p0 in enumerate(start_points(initial, options)):
        if circuit.n_params == 0:
            e = fun(p0)
            res_x, nit, gmax = p0, 0, 0.0
        else:
            if options.optimizer == "gradient_lbfgs":
                res = _scipy_minimize(fun_grad, p0, jac=True, method="L-BFGS-B",
                                      options={"maxiter": options.max_iter, "gtol": options.tol_grad,
                                               "ftol": 1e-15})
            else:
                res = _scipy_minimize(fun, p0, method="Nelder-Mead",
                                      options={"maxiter": options.max_iter, "xatol": 1e-10,
                                               "fatol": options.tol_energy, "adaptive": True})
            res_x, nit = np.asarray(res.x), int(res.nit)
            e, g = energy_and_gradient(circuit, res_x, obs)
            gmax = float(np.max(np.abs(g)))
            hit_limit |= nit >= options.max_iter
        energies.append(float(e))
        cand = VqeResult(float(e), res_x, nit, gmax < options.tol_grad, r, gmax)
        if best is None or cand.energy < best.energy:
            best = cand
    best.trace = trace
    best.restart_energies = energies
    if not best.converged and hit_limit and options.raise_on_max_iter:
        raise MaxIterExceeded(f"no restart converged within {options.max_iter} iterations", best)
    return best


HEADER = "vqe-params v1"


def export_parameters(res: VqeResult | np.ndarray) -> str:
    params = res.parameters if isinstance(res, VqeResult) else np.asarray(res, dtype=float)
    lines = [f"{HEADER} {params.size}"] + [repr(float(x)) for x in params]
    return "\n".join(lines) + "\n"


def import_parameters(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise ParseError("empty parameter file", 1)
    head = lines[0].split()
    if len(head) != 3 or " ".join(head[:2]) != HEADER:
        raise ParseError(f"expected header '{HEADER} <n>'", 1)
    try:
        n = int(head[2])
    except ValueError:
        raise ParseError("parameter count is not an integer", 1) from None
    body = lines[1:]
    if len(body) != n:
        raise ParseError(f"header announces {n} parameters, found {len(body)}", len(lines))
    out = np.empty(n)
    for i, ln in enumerate(body):
        try:
            out[i] = float(ln)
        except ValueError:
            raise ParseError(f"bad parameter value {ln!r}", i + 2) from None
    return out
