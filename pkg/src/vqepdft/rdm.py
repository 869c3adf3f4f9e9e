"""RDM measurement: operator preparation, grouping, execution, mitigation, assembly.

Spin-summed spatial RDMs use ``gamma[p, q] = <E_pq>`` and
``big_gamma[p, q, r, s] = sum_{s,t} <a+_{p s} a+_{r t} a_{s t} a_{q s}>``.
Every element is a linear combination of Pauli expectations; all distinct
strings are grouped qubit-wise, each group is measured once in its cover
basis, and elements are reassembled from the string estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, MitigationFailure, ParseError, SymmetryViolation
from .fci import DeterminantBasis, RDMPair, rdms_from_vector
from .mapping import QubitEncoding, fermion_product
from .pauli import PauliString, PauliSum, parity_array
from .simulator import (Circuit, Gate, ReadoutModel, apply_gate, apply_readout_noise, counts_to_histogram,
                        histogram_to_counts, index_to_bits, run, sample_counts, probabilities)

__all__ = [
    "RDMPair", "MeasurementGroup", "MeasurementPlan", "CalibrationData",
    "rdm_element_operators", "group", "measure_rdms", "calibrate", "mitigate",
    "statevector_rdms", "rdms_to_text", "rdms_from_text", "plan_size", "estimate_paulis",
    "register_to_ci", "symmetrize", "project_simplex",
]


# --- step 1: operators ---------------------------------------------------------

def rdm_element_operators(indices: Sequence[int], encoding: QubitEncoding,
                          spins: Sequence[int] | None = None) -> tuple[PauliSum, PauliSum]:
    """Hermitian (A, B) with A + iB the image of an RDM element operator.

    ``indices`` = (p, q) gives E_pq; (p, q, r, s) gives the Gamma_pqrs operator
    a+_p a+_r a_s a_q. Without ``spins`` the operator is spin-summed; with
    ``spins`` (0 = alpha, 1 = beta, one per index) it is a single spin block
    and must conserve both spin counts.
    """
    n = encoding.n_orb
    idx = tuple(int(i) for i in indices)
    if any(not 0 <= i < n for i in idx):
        raise ValueError(f"orbital index outside the {n}-orbital active space")
    if len(idx) == 2:
        p, q = idx
        blocks = [(s, s) for s in (0, 1)] if spins is None else [tuple(spins)]
        ops_list = [[(p + n * sp, True), (q + n * sq, False)] for sp, sq in blocks]
    elif len(idx) == 4:
        p, q, r, s = idx
        if spins is None:
            blocks = [(a, a, b, b) for a in (0, 1) for b in (0, 1)]
        else:
            blocks = [tuple(spins)]
        ops_list = [[(p + n * sp, True), (r + n * sr, True), (s + n * ss, False), (q + n * sq, False)]
                    for sp, sq, sr, ss in blocks]
    else:
        raise ValueError("RDM elements need 2 or 4 indices")
    total = PauliSum({}, encoding.n_qubits)
    for ops in ops_list:
        delta = [0, 0]
        for mode, dag in ops:
            delta[encoding.spin_of(mode)] += 1 if dag else -1
        if delta != [0, 0]:
            raise SymmetryViolation("element changes the alpha or beta count; it is structurally zero")
        full = fermion_product(ops, encoding.scheme, encoding.n_modes)
        total = total + encoding.finish(full)
    return total.hermitian_part().real(), total.antihermitian_part().real()


@lru_cache(maxsize=32)
def _element_table(encoding: QubitEncoding):
    """Real parts of every 1- and 2-RDM element operator, as term dicts."""
    n = encoding.n_orb
    one, two, imag = {}, {}, {}
    for p in range(n):
        for q in range(n):
            a, b = rdm_element_operators((p, q), encoding)
            one[p, q] = a
            imag[p, q] = b
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    a, b = rdm_element_operators((p, q, r, s), encoding)
                    two[p, q, r, s] = a
                    imag[p, q, r, s] = b
    return one, two, imag


def _measured_strings(encoding: QubitEncoding) -> list[PauliString]:
    one, two, _ = _element_table(encoding)
    keys = set()
    for op in list(one.values()) + list(two.values()):
        keys.update(op.terms)
    keys.discard((0, 0))
    return sorted(PauliString(encoding.n_qubits, x, z) for x, z in keys)


# --- step 2: grouping ------------------------------------------------------------

@dataclass
class MeasurementGroup:
    members: list[PauliString]
    cover: PauliString

    def is_valid(self) -> bool:
        return all(m.qubitwise_commutes(self.cover) and (m.support & ~self.cover.support) == 0
                   for m in self.members)

    def rotation(self) -> list[Gate]:
        """Gates taking the cover basis to the computational basis."""
        gates = []
        for q in range(self.cover.n):
            letter = self.cover.letter(q)
            if letter == "X":
                gates.append(Gate("H", (q,)))
            elif letter == "Y":
                gates += [Gate("Rz", (q,), angle=-np.pi / 2), Gate("H", (q,))]
        return gates


def _merge(cover: PauliString, p: PauliString) -> PauliString:
    return PauliString(cover.n, cover.x | p.x, cover.z | p.z)


def group(operators: Iterable[PauliString]) -> list[MeasurementGroup]:
    """Greedy qubit-wise commuting grouping (heaviest strings placed first)."""
    ops = sorted(set(operators), key=lambda p: (-p.weight, p.label))
    groups: list[MeasurementGroup] = []
    for p in ops:
        for g in groups:
            if g.cover.qubitwise_commutes(p):
                g.members.append(p)
                g.cover = _merge(g.cover, p)
                break
        else:
            groups.append(MeasurementGroup([p], p))
    return groups


# --- readout calibration and mitigation ---------------------------------------------

MAX_CALIBRATION_QUBITS = 6


@dataclass
class CalibrationData:
    """Empirical confusion matrix, column k = observed distribution for prepared |k>."""

    matrix: np.ndarray
    shots: int

    @property
    def n_qubits(self) -> int:
        return int(self.matrix.shape[0]).bit_length() - 1


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1, np.uint64)[0])


def calibrate(model: ReadoutModel, shots: int = 8192, seed: int = 0) -> CalibrationData:
    n = model.n_qubits
    if n > MAX_CALIBRATION_QUBITS:
        raise DimensionError(f"calibration of {n} qubits needs {1 << n} circuits; limit is {MAX_CALIBRATION_QUBITS}")
    dim = 1 << n
    est = np.zeros((dim, dim))
    for k in range(dim):
        # prepare |k>, read it out ``shots`` times through the noisy channel
        hist = apply_readout_noise({index_to_bits(k, n): shots}, model, _derived_seed(seed, k, 7))
        est[:, k] = histogram_to_counts(hist, n) / shots
    return CalibrationData(est, shots)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def mitigate(hist: dict[str, int] | np.ndarray, cal: CalibrationData, cond_limit: float = 1e12) -> np.ndarray:
    """Least-squares inversion of the calibration matrix, projected onto the simplex."""
    n = cal.n_qubits
    counts = histogram_to_counts(hist, n) if isinstance(hist, dict) else np.asarray(hist, dtype=float)
    if counts.shape != (1 << n,):
        raise DimensionError("histogram does not match the calibration register")
    observed = counts / counts.sum()
    if not np.isfinite(np.linalg.cond(cal.matrix)) or np.linalg.cond(cal.matrix) > cond_limit:
        raise MitigationFailure("calibration matrix is singular")
    x = np.linalg.lstsq(cal.matrix, observed, rcond=None)[0]
    return project_simplex(x)


# --- steps 3-6: execution and assembly ----------------------------------------------

MODES = ("exact", "shots", "shots+readout")


@dataclass
class MeasurementPlan:
    mode: str = "exact"
    shots: int = 2048
    seed: int = 0
    readout: ReadoutModel | None = None
    mitigation: bool = True
    calibration: CalibrationData | None = None
    calibration_shots: int = 8192

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "shots+readout" and self.readout is None:
            raise ValueError("shots+readout mode needs a readout model")


def _string_signs(strings: list[PauliString], n: int) -> np.ndarray:
    """(n_strings, 2^n) matrix of +-1 eigenvalues on computational outcomes."""
    idx = np.arange(1 << n)
    return np.array([1 - 2 * parity_array(idx & p.support) for p in strings], dtype=float)


def estimate_paulis(state: np.ndarray, strings: Sequence[PauliString], plan: MeasurementPlan
                    ) -> tuple[dict[PauliString, float], list[MeasurementGroup]]:
    """Expectation of every string, one measured circuit per group."""
    state = np.asarray(state, dtype=complex)
    n = int(np.log2(state.size))
    groups = group(strings)
    cal = plan.calibration
    if plan.mode == "shots+readout" and plan.mitigation and cal is None:
        cal = calibrate(plan.readout, plan.calibration_shots, _derived_seed(plan.seed, 1))
    out: dict[PauliString, float] = {}
    for gi, g in enumerate(groups):
        psi = state.copy()
        for gate in g.rotation():
            apply_gate(psi, n, gate, gate.angle)
        probs = probabilities(psi)
        if plan.mode != "exact":
            counts = sample_counts(probs, plan.shots, _derived_seed(plan.seed, gi, 2))
            if plan.mode == "shots+readout":
                hist = apply_readout_noise(counts_to_histogram(counts, n), plan.readout,
                                           _derived_seed(plan.seed, gi, 3))
                counts = histogram_to_counts(hist, n)
                probs = mitigate(counts, cal) if plan.mitigation else counts / counts.sum()
            else:
                probs = counts / counts.sum()
        vals = _string_signs(g.members, n) @ probs
        for p, v in zip(g.members, vals):
            out[p] = float(v)
    return out, groups


def _contract(op: PauliSum, values: dict[PauliString, float]) -> float:
    total = 0.0
    for (x, z), c in op.terms.items():
        v = 1.0 if (x, z) == (0, 0) else values[PauliString(op.n, x, z)]
        total += c.real * v
    return total


def symmetrize(rdms: RDMPair) -> RDMPair:
    """Average Hermitian partners; impose the real-wavefunction 2-RDM symmetries."""
    g = 0.5 * (rdms.gamma + rdms.gamma.T)
    big = rdms.big_gamma
    big = 0.25 * (big + big.transpose(2, 3, 0, 1) + big.transpose(1, 0, 3, 2) + big.transpose(3, 2, 1, 0))
    return RDMPair(g, big)


def measure_rdms(circuit: Circuit, params: Sequence[float], encoding: QubitEncoding,
                 plan: MeasurementPlan | None = None, check_imaginary: float = 1e-8) -> RDMPair:
    """Spin-summed 1-/2-RDMs of the frozen circuit state."""
    plan = plan or MeasurementPlan()
    if circuit.n_qubits != encoding.n_qubits:
        raise DimensionError("circuit and encoding registers differ")
    state = run(circuit, params)
    one, two, imag = _element_table(encoding)
    values, _ = estimate_paulis(state, _measured_strings(encoding), plan)
    n = encoding.n_orb
    gamma = np.zeros((n, n))
    big = np.zeros((n, n, n, n))
    for key, op in one.items():
        gamma[key] = _contract(op, values)
    for key, op in two.items():
        big[key] = _contract(op, values)
    if plan.mode == "exact" and check_imaginary is not None:
        from .simulator import expectation
        worst = max((abs(expectation(state, b)) for b in imag.values() if len(b)), default=0.0)
        if worst > check_imaginary:
            raise SymmetryViolation(f"RDM has an imaginary part of {worst:.2e}; the state is not real")
    return symmetrize(RDMPair(gamma, big))


def plan_size(encoding: QubitEncoding) -> dict[str, int]:
    strings = _measured_strings(encoding)
    return {"pauli_strings": len(strings), "groups": len(group(strings))}


# --- oracle and text export -----------------------------------------------------------

def register_to_ci(state: np.ndarray, encoding: QubitEncoding) -> tuple[np.ndarray, DeterminantBasis]:
    """Amplitudes of the register state on the sector's determinant basis."""
    basis = DeterminantBasis(encoding.n_orb, encoding.n_alpha, encoding.n_beta)
    vec = np.array([state[encoding.occupation_to_index(a, b)] for a, b in basis.determinants])
    return vec, basis


def statevector_rdms(state: np.ndarray, encoding: QubitEncoding) -> RDMPair:
    """Direct contraction through the determinant expansion (no Pauli algebra)."""
    vec, basis = register_to_ci(np.asarray(state), encoding)
    if abs(np.vdot(vec, vec) - 1.0) > 1e-8:
        raise SymmetryViolation("state has weight outside the particle-number sector")
    return rdms_from_vector(vec, basis)


def _fmt_rows(mat: np.ndarray) -> list[str]:
    return [" ".join(repr(float(v)) for v in row) for row in mat]


def rdms_to_text(rdms: RDMPair) -> str:
    n = rdms.n_orb
    lines = [f"rdm1 {n}"] + _fmt_rows(rdms.gamma)
    lines += [f"rdm2 {n}"] + _fmt_rows(rdms.big_gamma.reshape(n * n, n * n))
    return "\n".join(lines) + "\n"


def rdms_from_text(text: str) -> RDMPair:
    lines = [ln for ln in text.splitlines() if ln.strip()]

    def block(start: int, tag: str, rows: int | None = None):
        head = lines[start].split()
        if len(head) != 2 or head[0] != tag:
            raise ParseError(f"expected '{tag} <n>'", start + 1)
        n = int(head[1])
        nrow = n if rows is None else rows(n)
        try:
            data = np.array([[float(v) for v in lines[start + 1 + i].split()] for i in range(nrow)])
        except (ValueError, IndexError):
            raise ParseError(f"malformed {tag} block", start + 1) from None
        return n, data, start + 1 + nrow

    if not lines:
        raise ParseError("empty RDM file", 1)
    n, g, nxt = block(0, "rdm1")
    m, big, _ = block(nxt, "rdm2", lambda k: k * k)
    if m != n or g.shape != (n, n) or big.shape != (n * n, n * n):
        raise ParseError("RDM block dimensions disagree", nxt + 1)
    return RDMPair(g, big.reshape(n, n, n, n))
