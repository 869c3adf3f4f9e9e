from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from vqepdft.errors import DimensionError, InvalidObservable
from vqepdft.pauli import PauliString, PauliSum
from vqepdft.simulator import (
    HARDWARE_F0,
    HARDWARE_F1,
    Circuit,
    Gate,
    Observable,
    ReadoutModel,
    apply_readout_noise,
    bits_to_index,
    counts_to_histogram,
    energy_and_gradient,
    expectation,
    histogram_to_counts,
    index_to_bits,
    make_rng,
    pauli_rot,
    run,
    sample,
    zero_state,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
P0, P1 = np.diag([1, 0]), np.diag([0, 1])


def embed(ops: dict, n: int) -> np.ndarray:
    """Dense operator with ``ops[q]`` on qubit q (qubit 0 = least significant)."""
    return reduce(np.kron, [ops.get(q, I2) for q in reversed(range(n))])


def ry(t):
    return np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])


def rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def controlled(u, c, t, n):
    return embed({c: P0}, n) + embed({c: P1, t: u}, n)


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("gate, ref", [
    (Gate("X", (1,)), lambda n: embed({1: X}, n)),
    (Gate("H", (2,)), lambda n: embed({2: H}, n)),
    (Gate("Ry", (0,), angle=0.7), lambda n: embed({0: ry(0.7)}, n)),
    (Gate("Rz", (2,), angle=-1.1), lambda n: embed({2: rz(-1.1)}, n)),
    (Gate("CNOT", (2, 0)), lambda n: controlled(X, 2, 0, n)),
    (Gate("CNOT", (0, 1)), lambda n: controlled(X, 0, 1, n)),
    (Gate("CZ", (0, 2)), lambda n: controlled(Z, 0, 2, n)),
    (Gate("CRy", (1, 2), angle=0.4), lambda n: controlled(ry(0.4), 1, 2, n)),
])
def test_gates_match_dense_matrices(gate, ref):
    psi = random_state(3, 1)
    out = psi.copy()
    c = Circuit(3).append(gate)
    out = run(c, [], initial=psi)
    assert np.allclose(out, ref(3) @ psi, atol=1e-13)


@pytest.mark.parametrize("label", ["XIY", "ZZZ", "IYI", "YXZ"])
def test_pauli_rotation_and_its_compilation(label):
    p = PauliString.from_label(label)
    theta = 0.83
    ref = expm(-0.5j * theta * p.to_matrix())
    psi = random_state(3, 2)
    c = Circuit(3).append(pauli_rot(p, angle=theta))
    direct = run(c, [], initial=psi)
    assert np.allclose(direct, ref @ psi, atol=1e-12)
    compiled = run(c.compiled(), [], initial=psi)
    # equal up to a global phase
    overlap = np.vdot(direct, compiled)
    assert abs(abs(overlap) - 1) < 1e-12
    assert set(g.kind for g in c.compiled().gates) <= {"H", "Rz", "CNOT"}


def random_circuit(n, n_gates, seed):
    rng = np.random.default_rng(seed)
    c = Circuit(n)
    for _ in range(n_gates):
        kind = rng.choice(["Ry", "Rz", "CRy", "CNOT", "H", "PauliRot"])
        q = rng.choice(n, size=2, replace=False)
        slot = int(rng.integers(0, 4))
        if kind == "CNOT" or kind == "H":
            c.add(str(kind), *(q if kind == "CNOT" else q[:1]))
        elif kind == "CRy":
            c.add("CRy", *q, slot=slot, coeff=float(rng.uniform(0.5, 1.5)))
        elif kind == "PauliRot":
            label = "".join(rng.choice(list("IXYZ"), size=n))
            if label == "I" * n:
                label = "Z" + label[1:]
            c.append(pauli_rot(PauliString.from_label(label), slot=slot, coeff=-0.5))
        else:
            c.add(str(kind), int(q[0]), slot=slot)
    c.n_params = 4
    return c


@pytest.mark.parametrize("seed", range(5))
def test_unitarity(seed):
    c = random_circuit(4, 30, seed)
    params = np.random.default_rng(seed).uniform(-3, 3, 4)
    psi = random_state(4, seed)
    assert np.linalg.norm(run(c, params, initial=psi)) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(run(c.compiled(), params, initial=psi)) == pytest.approx(1.0, abs=1e-12)


def test_single_ry_parameter_shift():
    c = Circuit(1).add("Ry", 0, slot=0)
    obs = PauliSum.from_labels({"Z": 1.0, "X": 0.3})
    for theta in (-2.0, 0.3, 1.9):
        e, g = energy_and_gradient(c, [theta], obs)
        h = 1e-5
        fd = (expectation(run(c, [theta + h]), obs) - expectation(run(c, [theta - h]), obs)) / (2 * h)
        assert g[0] == pytest.approx(fd, abs=1e-7)
        assert e == pytest.approx(np.cos(theta) + 0.3 * np.sin(theta), abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_parameter_shift_matches_finite_differences(seed):
    c = random_circuit(3, 14, seed)
    rng = np.random.default_rng(100 + seed)
    obs = PauliSum.from_labels({"ZIZ": 0.7, "XXI": -0.4, "IYY": 0.2, "IIZ": 1.1})
    params = rng.uniform(-np.pi, np.pi, 4)
    _, grad = energy_and_gradient(c, params, obs)
    h = 1e-5
    fd = np.zeros(4)
    for k in range(4):
        d = np.zeros(4)
        d[k] = h
        fd[k] = (expectation(run(c, params + d), obs) - expectation(run(c, params - d), obs)) / (2 * h)
    assert np.allclose(grad, fd, atol=1e-6)


def test_depth_and_dump():
    c = Circuit(3)
    c.add("X", 1)
    c.n_prefix = 1
    c.add("Ry", 1, slot=0).add("CNOT", 0, 1).add("CRy", 1, 2, slot=1).add("H", 0)
    assert c.depth() == 3
    assert c.depth(include_prefix=True) == 4
    assert c.dump() == "X 1\nRy 1 [0]\nCNOT 0,1\nCRy 1,2 [1]\nH 0\n"
    rot = Circuit(3).append(pauli_rot(PauliString.from_label("XYZ"), slot=0))
    assert rot.depth(compiled=False) == 1
    # basis change, two ladder CNOTs, Rz, two CNOTs, basis change back (Y uses two gates)
    assert rot.depth() == 2 + 2 + 1 + 2 + 2
    assert rot.count_ops() == {"H": 4, "Rz": 3, "CNOT": 4}


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", (1, 1))
    with pytest.raises(ValueError):
        Gate("X", (0,), slot=0)
    with pytest.raises(ValueError):
        Gate("Toffoli", (0, 1, 2))
    with pytest.raises(ValueError):
        Circuit(2).add("X", 2)
    with pytest.raises(DimensionError):
        run(Circuit(1).add("Ry", 0, slot=0), [0.1, 0.2])


def test_observable_validation():
    with pytest.raises(InvalidObservable):
        Observable(PauliSum.from_labels({"X": 1j}))
    with pytest.raises(DimensionError):
        Observable(PauliSum.from_labels({"ZZ": 1.0})).expectation(zero_state(3))


def test_sampled_z_converges():
    c = Circuit(2).add("Ry", 0, angle=1.0).add("CNOT", 0, 1)
    psi = run(c)
    shots = 1 << 16
    hist = sample(psi, shots, seed=5)
    counts = histogram_to_counts(hist, 2)
    z0 = sum(c * (1 - 2 * (i & 1)) for i, c in enumerate(counts)) / shots
    exact = np.cos(1.0)
    sigma = np.sqrt((1 - exact**2) / shots)
    assert abs(z0 - exact) < 3 * sigma
    assert sample(psi, 100, seed=5) == sample(psi, 100, seed=5)
    assert sample(psi, 1000, seed=5) != sample(psi, 1000, seed=6)
    # recording only qubit 1 (perfectly correlated with qubit 0 here)
    marginal = sample(psi, shots, seed=5, basis=PauliString.from_label("IZ"))
    assert marginal["1"] == counts[3]


def test_bit_order():
    assert index_to_bits(1, 3) == "100"
    assert bits_to_index("001") == 4
    assert counts_to_histogram(np.array([0, 2, 0, 1]), 2) == {"10": 2, "11": 1}
    with pytest.raises(DimensionError):
        histogram_to_counts({"1": 3}, 2)


def test_readout_flip_rate_single_qubit():
    model = ReadoutModel.uniform(1, HARDWARE_F0, HARDWARE_F1)
    noisy = apply_readout_noise({"0": 10000}, model, seed=3)
    flips = noisy.get("1", 0)
    mean = 10000 * (1 - HARDWARE_F0)
    assert mean == pytest.approx(165, abs=1e-9)
    assert abs(flips - mean) < 5 * np.sqrt(10000 * HARDWARE_F0 * (1 - HARDWARE_F0))
    assert sum(noisy.values()) == 10000


def test_readout_model_tensor_order():
    # qubit 0 perfect, qubit 1 always misread
    model = ReadoutModel.from_fidelities([(1.0, 1.0), (0.0, 0.0)])
    assert apply_readout_noise({"10": 50}, model, seed=0) == {"11": 50}
    assert model.n_qubits == 2
    assert np.allclose(ReadoutModel.identity(2).matrix, np.eye(4))
    with pytest.raises(ValueError):
        ReadoutModel(np.array([[0.9, 0.0], [0.2, 1.0]]))
    with pytest.raises(DimensionError):
        ReadoutModel(np.eye(3))


def test_rng_is_philox_and_seeded():
    a = make_rng(42).integers(0, 1 << 30, 5)
    b = make_rng(42).integers(0, 1 << 30, 5)
    assert np.array_equal(a, b)
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)


def test_observable_keeps_imaginary_pauli_entries():
    rng = np.random.default_rng(3)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    v /= np.linalg.norm(v)
    y = np.array([[0, -1j], [1j, 0]])
    dense = np.kron(np.eye(4), y)          # Y on qubit 0 (least significant bit)
    obs = Observable(PauliSum.from_labels({"YII": 1.0}))
    assert obs.expectation(v) == pytest.approx(np.vdot(v, dense @ v).real, abs=1e-12)
    assert abs(obs.expectation(v)) > 1e-3
