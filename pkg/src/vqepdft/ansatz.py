"""Reference states and ansatz circuits: UCCSD, ROUCCSD and the two shallow HEAs.

Excitation generators are mapped (and tapered) exactly like the Hamiltonian,
then exponentiated term by term as Pauli rotations (first-order Trotter).
The hardware-efficient circuits work on the tapered 4-qubit register of a
3-orbital problem and never leave its 9-state particle-number sector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import InvalidSpec
from .mapping import QubitEncoding, map_excitation, sector_indices
from .simulator import Circuit, Gate, pauli_rot

FAMILIES = ("uccsd", "rouccsd", "chea", "ohea")


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    n_alpha: int
    n_beta: int
    n_orb: int
    scheme: str = "parity"
    tapered: bool | None = None

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise InvalidSpec(f"unknown ansatz family {self.family!r}")
        if not (0 <= self.n_beta <= self.n_orb and 0 <= self.n_alpha <= self.n_orb):
            raise InvalidSpec("electron counts do not fit the active orbitals")
        if fam in ("uccsd", "chea") and self.n_alpha != self.n_beta:
            raise InvalidSpec(f"{fam} needs a closed-shell sector (n_alpha == n_beta)")
        if fam == "ohea" and self.n_alpha != self.n_beta + 1:
            raise InvalidSpec("ohea needs n_alpha == n_beta + 1")
        if fam == "rouccsd" and self.n_alpha < self.n_beta:
            raise InvalidSpec("rouccsd puts unpaired electrons in alpha orbitals")
        try:
            enc = self.encoding
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from exc
        if fam in ("chea", "ohea") and (self.n_orb != 3 or enc.n_qubits != 4):
            raise InvalidSpec("hardware-efficient circuits need the tapered 4-qubit register of 3 orbitals")

    @property
    def encoding(self) -> QubitEncoding:
        tapered = self.tapered
        if tapered is None:
            tapered = self.scheme.lower() == "parity"
        return QubitEncoding(self.scheme, self.n_orb, self.n_alpha, self.n_beta, tapered)

    @classmethod
    def for_hamiltonian(cls, family: str, h, scheme: str = "parity", tapered: bool | None = None):
        return cls(family, h.n_alpha, h.n_beta, h.n_orb, scheme, tapered)


@dataclass(frozen=True)
class ReachableManifold:
    """Computational basis states (register indices) the circuit may populate."""

    states: tuple[int, ...]
    n_qubits: int

    def __len__(self) -> int:
        return len(self.states)

    @property
    def bitstrings(self) -> list[str]:
        return ["".join(str((s >> j) & 1) for j in range(self.n_qubits)) for s in self.states]

    def outside_probability(self, state: np.ndarray) -> float:
        p = np.abs(np.asarray(state)) ** 2
        mask = np.ones(p.size, dtype=bool)
        mask[list(self.states)] = False
        return float(p[mask].sum())


@dataclass
class Ansatz:
    spec: AnsatzSpec
    circuit: Circuit
    reference_parameters: np.ndarray
    excitations: list[tuple[int, ...]] = field(default_factory=list)
    manifold: ReachableManifold | None = None

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    @property
    def depth(self) -> int:
        return self.circuit.depth()


def manifold_for(spec: AnsatzSpec) -> ReachableManifold:
    enc = spec.encoding
    return ReachableManifold(tuple(sorted(int(i) for i in sector_indices(enc))), enc.n_qubits)


def reference_occupations(spec: AnsatzSpec) -> tuple[int, int]:
    """Aufbau (restricted open-shell) determinant as alpha/beta bit masks."""
    return (1 << spec.n_alpha) - 1, (1 << spec.n_beta) - 1


def reference_state(spec: AnsatzSpec) -> Circuit:
    enc = spec.encoding
    index = enc.occupation_to_index(*reference_occupations(spec))
    circ = Circuit(enc.n_qubits)
    for q in range(enc.n_qubits):
        if (index >> q) & 1:
            circ.add("X", q)
    circ.n_prefix = len(circ.gates)
    return circ


# --- unitary coupled cluster --------------------------------------------------

def _excitation_groups(spec: AnsatzSpec, spin_adapted: bool) -> list[list[tuple[int, ...]]]:
    """Spin-orbital excitations grouped by shared parameter.

    Modes: alpha p -> p, beta p -> n + p. Singles ``(a, i)`` mean a+_a a_i;
    doubles ``(a, b, j, i)`` mean a+_a a+_b a_j a_i. Singles come before
    doubles, each class in lexicographic order of its first member.
    """
    n = spec.n_orb
    occ_a, occ_b = range(spec.n_alpha), range(spec.n_beta)
    vir_a, vir_b = range(spec.n_alpha, n), range(spec.n_beta, n)
    singles: list[list[tuple[int, ...]]] = []
    doubles: list[list[tuple[int, ...]]] = []
    if spin_adapted:
        for i in occ_a:
            for a in vir_a:
                singles.append([(a, i), (n + a, n + i)])
        for i, j in combinations(occ_a, 2):
            for a, b in combinations(vir_a, 2):
                doubles.append([(a, b, j, i), (n + a, n + b, n + j, n + i)])
        seen = set()
        for i in occ_a:
            for j in occ_b:
                for a in vir_a:
                    for b in vir_b:
                        key = (i, j, a, b)
                        if key in seen:
                            continue
                        partner = (j, i, b, a)
                        seen.update({key, partner})
                        grp = [(a, n + b, n + j, i)]
                        if partner != key:
                            grp.append((b, n + a, n + i, j))
                        doubles.append(grp)
    else:
        for i in occ_a:
            for a in vir_a:
                singles.append([(a, i)])
        for i in occ_b:
            for a in vir_b:
                singles.append([(n + a, n + i)])
        for i, j in combinations(occ_a, 2):
            for a, b in combinations(vir_a, 2):
                doubles.append([(a, b, j, i)])
        for i, j in combinations(occ_b, 2):
            for a, b in combinations(vir_b, 2):
                doubles.append([(n + a, n + b, n + j, n + i)])
        for i in occ_a:
            for j in occ_b:
                for a in vir_a:
                    for b in vir_b:
                        doubles.append([(a, n + b, n + j, i)])
    return singles + doubles


def _exponentials(spec: AnsatzSpec, groups) -> Circuit:
    enc = spec.encoding
    circ = reference_state(spec)
    for slot, grp in enumerate(groups):
        gen = None
        for exc in grp:
            g = map_excitation(exc, enc)
            gen = g if gen is None else gen + g
        # gen = sum_k (i c_k) P_k ; exp(theta gen) = prod_k exp(-i (-2 c_k theta)/2 P_k)
        for ps, c in sorted(gen.prune(), key=lambda t: t[0].label):
            if abs(c.real) > 1e-12:
                raise InvalidSpec("excitation generator is not anti-Hermitian")
            circ.append(pauli_rot(ps, slot=slot, coeff=-2.0 * c.imag))
        circ.n_params = max(circ.n_params, slot + 1)
    return circ


def build_uccsd(spec: AnsatzSpec) -> Ansatz:
    """Closed-shell UCCSD with alpha/beta partner excitations sharing one parameter."""
    if spec.family != "uccsd":
        raise InvalidSpec("build_uccsd needs family 'uccsd'")
    groups = _excitation_groups(spec, spin_adapted=True)
    circ = _exponentials(spec, groups)
    excs = [e for g in groups for e in g]
    return Ansatz(spec, circ, np.zeros(circ.n_params), excs)


def build_rouccsd(spec: AnsatzSpec) -> Ansatz:
    """Spin-orbital UCCSD on the restricted open-shell reference.

    Singly occupied orbitals are occupied for alpha and virtual for beta,
    so excitations into and out of them are all present.
    """
    if spec.family != "rouccsd":
        raise InvalidSpec("build_rouccsd needs family 'rouccsd'")
    groups = _excitation_groups(spec, spin_adapted=False)
    circ = _exponentials(spec, groups)
    excs = [e for g in groups for e in g]
    return Ansatz(spec, circ, np.zeros(circ.n_params), excs)


# --- hardware-efficient circuits ----------------------------------------------
# Tapered register: qubits (0, 1) carry the alpha pair, (2, 3) the beta pair.
# Each entry is (kind, targets, parameterized).

#
# CHEA: a general state of the alpha pair over {10, 11, 01} (Ry, CRy), copied
# onto the beta pair by CNOTs (pair-diagonal, i.e. paired double excitations),
# then one layer of in-pair CRy rotations for the off-diagonal amplitudes.
_CHEA_PREFIX = (0, 1)
_CHEA_LAYOUT = [
    ("Ry", (1,), True),
    ("CRy", (1, 0), True),
    ("CNOT", (0, 2), False),
    ("CNOT", (1, 3), False),
    ("CRy", (2, 3), True),
    ("CRy", (1, 0), True),
]
# OHEA: built in a pre-image frame where qubit 0 flags the (alpha 11, beta 01)
# configuration and qubits 1/2 are alpha/beta "rails" for the remaining 2x2
# block; the final CNOT layer decodes the frame onto the sector states.
_OHEA_PREFIX = (0, 1, 3)
_OHEA_LAYOUT = [
    ("Ry", (0,), True),
    ("CRy", (0, 2), True),
    ("CNOT", (2, 1), False),
    ("CNOT", (0, 3), False),
    ("CRy", (0, 2), True),
    ("CRy", (0, 1), True),
    ("CNOT", (1, 0), False),
    ("CNOT", (2, 3), False),
]


def _hea_circuit(prefix, layout) -> Circuit:
    circ = Circuit(4)
    for q in prefix:
        circ.add("X", q)
    circ.n_prefix = len(circ.gates)
    slot = 0
    for kind, targets, param in layout:
        if param:
            circ.append(Gate(kind, targets, slot))
            slot += 1
        else:
            circ.append(Gate(kind, targets))
    return circ


def _reference_angles(spec: AnsatzSpec, circ: Circuit, n_restarts: int = 64) -> np.ndarray:
    """Parameters that reproduce the reference determinant (found by search)."""
    from .simulator import run

    enc = spec.encoding
    target = enc.occupation_to_index(*reference_occupations(spec))
    grid = [0.0, np.pi, -np.pi]
    rng = np.random.default_rng(0)
    best, best_p = -1.0, np.zeros(circ.n_params)
    for _ in range(n_restarts):
        p = rng.choice(grid, size=circ.n_params)
        prob = abs(run(circ, p)[target]) ** 2
        if prob > best:
            best, best_p = prob, p
        if prob > 1 - 1e-12:
            break
    return best_p


def build_hea(spec: AnsatzSpec) -> Ansatz:
    if spec.family == "chea":
        circ = _hea_circuit(_CHEA_PREFIX, _CHEA_LAYOUT)
    elif spec.family == "ohea":
        circ = _hea_circuit(_OHEA_PREFIX, _OHEA_LAYOUT)
    else:
        raise InvalidSpec("build_hea needs family 'chea' or 'ohea'")
    return Ansatz(spec, circ, _reference_angles(spec, circ), [], manifold_for(spec))


def build_ansatz(spec: AnsatzSpec) -> Ansatz:
    return {
        "uccsd": build_uccsd,
        "rouccsd": build_rouccsd,
        "chea": build_hea,
        "ohea": build_hea,
    }[spec.family](spec)
