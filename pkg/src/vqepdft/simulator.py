"""Dense statevector simulator with shot sampling and readout noise.

Qubit ``j`` is bit ``j`` of the amplitude index. Bitstrings in histograms
list qubit 0 first, matching Pauli labels.

Parameterized gates take the angle ``coeff * params[slot]``; gates without
a slot use their fixed ``angle``. ``PauliRot`` is exp(-i angle/2 P) and is
compiled to basis changes, a CNOT ladder and one Rz for depth accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, InvalidObservable
from .pauli import PauliString, PauliSum, parity_array

GATE_KINDS = ("X", "H", "Ry", "Rz", "CNOT", "CZ", "CRy", "PauliRot")
PARAMETRIC = ("Ry", "Rz", "CRy", "PauliRot")
_TWO_QUBIT = ("CNOT", "CZ", "CRy")


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    slot: int | None = None
    coeff: float = 1.0
    angle: float = 0.0
    pauli: PauliString | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("control and target must differ")
        want = 2 if self.kind in _TWO_QUBIT else 1
        if self.kind == "PauliRot":
            if self.pauli is None or self.pauli.weight == 0:
                raise ValueError("PauliRot needs a non-identity Pauli string")
            want = self.pauli.weight
        if len(self.targets) != want:
            raise ValueError(f"{self.kind} acts on {want} qubit(s)")
        if self.slot is not None and self.kind not in PARAMETRIC:
            raise ValueError(f"{self.kind} takes no parameter")

    def theta(self, params: Sequence[float]) -> float:
        if self.slot is None:
            return self.angle
        return self.coeff * float(params[self.slot])

    def text(self) -> str:
        name = self.kind if self.pauli is None else f"{self.kind}[{self.pauli.label}]"
        out = f"{name} {','.join(map(str, self.targets))}"
        if self.slot is not None:
            out += f" [{self.slot}]"
        elif self.kind in PARAMETRIC:
            out += f" ({self.angle!r})"
        return out


def pauli_rot(p: PauliString, slot: int | None = None, coeff: float = 1.0, angle: float = 0.0) -> Gate:
    targets = tuple(j for j in range(p.n) if (p.support >> j) & 1)
    return Gate("PauliRot", targets, slot, coeff, angle, p)


@dataclass
class Circuit:
    """Ordered gate list; the first ``n_prefix`` gates prepare the reference."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    n_params: int = 0
    n_prefix: int = 0

    def append(self, gate: Gate) -> "Circuit":
        if any(t >= self.n_qubits or t < 0 for t in gate.targets):
            raise ValueError(f"gate {gate.text()} outside a {self.n_qubits}-qubit register")
        if gate.pauli is not None and gate.pauli.n != self.n_qubits:
            raise ValueError("Pauli string length does not match the register")
        if gate.slot is not None:
            self.n_params = max(self.n_params, gate.slot + 1)
        self.gates.append(gate)
        return self

    def add(self, kind: str, *targets: int, slot: int | None = None, coeff: float = 1.0,
            angle: float = 0.0) -> "Circuit":
        return self.append(Gate(kind, targets, slot, coeff, angle))

    def extend(self, gates: Sequence[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def compiled(self) -> "Circuit":
        """Expand PauliRot macros into the native alphabet."""
        out = Circuit(self.n_qubits, [], self.n_params, 0)
        for i, g in enumerate(self.gates):
            if i == self.n_prefix:
                out.n_prefix = len(out.gates)
            if g.kind == "PauliRot":
                out.gates.extend(_expand_pauli_rot(g))
            else:
                out.gates.append(g)
        if self.n_prefix >= len(self.gates):
            out.n_prefix = len(out.gates)
        return out

    def depth(self, include_prefix: bool = False, compiled: bool = True) -> int:
        """Longest dependency chain of gates.

        With ``compiled=False`` every PauliRot counts as one logical gate on
        its support.
        """
        c = self.compiled() if compiled else self
        level = [0] * self.n_qubits
        for g in c.gates[0 if include_prefix else c.n_prefix:]:
            d = max(level[t] for t in g.targets) + 1
            for t in g.targets:
                level[t] = d
        return max(level, default=0)

    def count_ops(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.compiled().gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def dump(self) -> str:
        return "".join(g.text() + "\n" for g in self.gates)


def _expand_pauli_rot(g: Gate) -> list[Gate]:
    p = g.pauli
    qs = list(g.targets)
    pre, post = [], []
    for q in qs:
        letter = p.letter(q)
        if letter == "X":
            pre.append(Gate("H", (q,)))
            post.append(Gate("H", (q,)))
        elif letter == "Y":
            # (H S^+) Y (S H) = Z; Rz differs from S only by a global phase
            pre += [Gate("Rz", (q,), angle=-np.pi / 2), Gate("H", (q,))]
            post += [Gate("H", (q,)), Gate("Rz", (q,), angle=np.pi / 2)]
    ladder = [Gate("CNOT", (qs[k], qs[k + 1])) for k in range(len(qs) - 1)]
    rz = Gate("Rz", (qs[-1],), g.slot, g.coeff, g.angle)
    return pre + ladder + [rz] + ladder[::-1] + post


# --- state evolution -------------------------------------------------------

@lru_cache(maxsize=4096)
def _pair_indices(n: int, target: int, control: int = -1) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n)
    mask = ((idx >> target) & 1) == 0
    if control >= 0:
        mask &= ((idx >> control) & 1) == 1
    i0 = idx[mask]
    return i0, i0 | (1 << target)


@lru_cache(maxsize=4096)
def _pauli_action(n: int, x: int, z: int) -> tuple[np.ndarray, np.ndarray]:
    """P|k> = phase[k] |k ^ x>."""
    idx = np.arange(1 << n)
    sign = 1 - 2 * parity_array(idx & z)
    phase = sign * (1j ** (bin(x & z).count("1") % 4))
    return idx ^ x, phase.astype(complex)


def _apply_1q(psi, n, q, m, control=-1):
    i0, i1 = _pair_indices(n, q, control)
    a0, a1 = psi[i0], psi[i1]
    psi[i0] = m[0, 0] * a0 + m[0, 1] * a1
    psi[i1] = m[1, 0] * a0 + m[1, 1] * a1


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def _rz(theta):
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def apply_gate(psi: np.ndarray, n: int, g: Gate, theta: float = 0.0) -> None:
    """In-place application of ``g`` at angle ``theta``."""
    k = g.kind
    if k == "X":
        _apply_1q(psi, n, g.targets[0], _X)
    elif k == "H":
        _apply_1q(psi, n, g.targets[0], _H)
    elif k == "Ry":
        _apply_1q(psi, n, g.targets[0], _ry(theta))
    elif k == "Rz":
        _apply_1q(psi, n, g.targets[0], _rz(theta))
    elif k == "CNOT":
        _apply_1q(psi, n, g.targets[1], _X, g.targets[0])
    elif k == "CRy":
        _apply_1q(psi, n, g.targets[1], _ry(theta), g.targets[0])
    elif k == "CZ":
        idx = np.arange(1 << n)
        both = ((idx >> g.targets[0]) & 1) & ((idx >> g.targets[1]) & 1)
        psi[both == 1] *= -1
    elif k == "PauliRot":
        perm, phase = _pauli_action(n, g.pauli.x, g.pauli.z)
        p_psi = np.empty_like(psi)
        p_psi[perm] = phase * psi
        psi *= np.cos(theta / 2)
        psi += -1j * np.sin(theta / 2) * p_psi


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params if params is not None else [], dtype=float).ravel()
    if params.size != circuit.n_params:
        raise DimensionError(f"circuit has {circuit.n_params} parameters, got {params.size}")
    return params


def run(circuit: Circuit, params: Sequence[float] | None = None, initial: np.ndarray | None = None,
        shifts: Mapping[int, float] | None = None) -> np.ndarray:
    """Statevector after the circuit; ``shifts`` adds offsets to single gate angles."""
    params = _check_params(circuit, params)
    n = circuit.n_qubits
    psi = zero_state(n) if initial is None else np.array(initial, dtype=complex)
    if psi.shape != (1 << n,):
        raise DimensionError("initial state does not match the register")
    for i, g in enumerate(circuit.gates):
        theta = g.theta(params)
        if shifts and i in shifts:
            theta += shifts[i]
        apply_gate(psi, n, g, theta)
    return psi


# --- observables ------------------------------------------------------------

class Observable:
    """Hermitian PauliSum with its sparse matrix cached for repeated use."""

    def __init__(self, op: PauliSum, tol: float = 1e-10):
        if not op.is_hermitian(tol):
            raise InvalidObservable("observable has complex Pauli coefficients")
        self.op = op.real()
        self.n = op.n
        m = self.op.to_sparse().tocsr()
        # real storage only when no odd-Y string contributes an imaginary entry
        self.matrix = m.real if not np.any(m.data.imag) else m

    def expectation(self, psi: np.ndarray) -> float:
        if psi.shape != (1 << self.n,):
            raise DimensionError("state does not match the observable register")
        val = np.vdot(psi, self.matrix @ psi)
        return float(val.real)


def expectation(state: np.ndarray, obs: PauliSum | Observable) -> float:
    if not isinstance(obs, Observable):
        obs = Observable(obs)
    return obs.expectation(np.asarray(state))


def energy_and_gradient(circuit: Circuit, params: Sequence[float], obs: PauliSum | Observable
                        ) -> tuple[float, np.ndarray]:
    """Exact energy and its parameter-shift gradient.

    Two-term rule for Ry, Rz and PauliRot; four-term rule for CRy, whose
    generator has eigenvalues {0, +-1/2}.
    """
    if not isinstance(obs, Observable):
        obs = Observable(obs)
    params = _check_params(circuit, params)
    n = circuit.n_qubits
    gates = circuit.gates
    # cache forward states so each shifted run restarts at the shifted gate
    states = []
    psi = zero_state(n)
    for g in gates:
        states.append(psi.copy())
        apply_gate(psi, n, g, g.theta(params))
    energy = obs.expectation(psi)
    grad = np.zeros(circuit.n_params)

    def shifted(i, delta):
        phi = states[i].copy()
        apply_gate(phi, n, gates[i], gates[i].theta(params) + delta)
        for g in gates[i + 1:]:
            apply_gate(phi, n, g, g.theta(params))
        return obs.expectation(phi)

    for i, g in enumerate(gates):
        if g.slot is None:
            continue
        if g.kind == "CRy":
            c_plus = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
            c_minus = (np.sqrt(2) - 1) / (4 * np.sqrt(2))
            d = (c_plus * (shifted(i, np.pi / 2) - shifted(i, -np.pi / 2))
                 - c_minus * (shifted(i, 3 * np.pi / 2) - shifted(i, -3 * np.pi / 2)))
        else:
            d = 0.5 * (shifted(i, np.pi / 2) - shifted(i, -np.pi / 2))
        grad[g.slot] += g.coeff * d
    return energy, grad


# --- sampling and readout noise ----------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; every sampling call takes an explicit seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def index_to_bits(index: int, n: int) -> str:
    return "".join(str((index >> j) & 1) for j in range(n))


def bits_to_index(bits: str) -> int:
    return sum(1 << j for j, b in enumerate(bits) if b == "1")


def probabilities(state: np.ndarray) -> np.ndarray:
    p = np.abs(np.asarray(state)) ** 2
    return p / p.sum()


def sample_counts(probs: np.ndarray, shots: int, seed: int) -> np.ndarray:
    if shots < 1:
        raise ValueError("shots must be at least 1")
    return make_rng(seed).multinomial(int(shots), np.clip(probs, 0.0, None) / np.sum(probs))


def counts_to_histogram(counts: np.ndarray, n: int) -> dict[str, int]:
    return {index_to_bits(i, n): int(c) for i, c in enumerate(counts) if c}


def histogram_to_counts(hist: Mapping[str, int], n: int) -> np.ndarray:
    out = np.zeros(1 << n, dtype=np.int64)
    for bits, c in hist.items():
        if len(bits) != n:
            raise DimensionError(f"bitstring {bits!r} does not match {n} qubits")
        out[bits_to_index(bits)] += c
    return out


def sample(state: np.ndarray, shots: int, seed: int, basis: PauliString | None = None) -> dict[str, int]:
    """Computational-basis histogram; ``basis`` (I/Z pattern) restricts recorded qubits."""
    state = np.asarray(state)
    n = int(np.log2(state.size))
    counts = sample_counts(probabilities(state), shots, seed)
    hist = counts_to_histogram(counts, n)
    if basis is None:
        return hist
    if basis.x:
        raise ValueError("sampling basis must be a diagonal (I/Z) pattern")
    keep = [j for j in range(n) if (basis.z >> j) & 1]
    out: dict[str, int] = {}
    for bits, c in hist.items():
        key = "".join(bits[j] for j in keep)
        out[key] = out.get(key, 0) + c
    return out


@dataclass
class ReadoutModel:
    """Column-stochastic confusion matrix M[observed, true] on ``n`` qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        dim = m.shape[0]
        if m.shape != (dim, dim) or dim & (dim - 1):
            raise DimensionError("confusion matrix must be square with power-of-two size")
        if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
            raise ValueError("confusion entries must lie in [0, 1]")
        if not np.allclose(m.sum(axis=0), 1.0, atol=1e-10):
            raise ValueError("confusion columns must sum to 1")
        self.matrix = m

    @property
    def n_qubits(self) -> int:
        return int(self.matrix.shape[0]).bit_length() - 1

    @classmethod
    def identity(cls, n: int) -> "ReadoutModel":
        return cls(np.eye(1 << n))

    @classmethod
    def from_fidelities(cls, fidelities: Sequence[tuple[float, float]]) -> "ReadoutModel":
        """Tensor product of per-qubit models; f0 = P(read 0 | 0), f1 = P(read 1 | 1)."""
        m = np.ones((1, 1))
        for f0, f1 in fidelities:
            q = np.array([[f0, 1 - f1], [1 - f0, f1]])
            m = np.kron(q, m)           # later qubits are more significant bits
        return cls(m)

    @classmethod
    def uniform(cls, n: int, f0: float, f1: float) -> "ReadoutModel":
        return cls.from_fidelities([(f0, f1)] * n)


HARDWARE_F0 = 0.9835
HARDWARE_F1 = 0.9588


def apply_readout_noise(hist: Mapping[str, int], model: ReadoutModel, seed: int) -> dict[str, int]:
    """Relabel every shot independently by the confusion column of its true outcome."""
    n = model.n_qubits
    counts = histogram_to_counts(hist, n)
    rng = make_rng(seed)
    out = np.zeros_like(counts)
    for k in np.nonzero(counts)[0]:
        out += rng.multinomial(int(counts[k]), model.matrix[:, k])
    return counts_to_histogram(out, n)
