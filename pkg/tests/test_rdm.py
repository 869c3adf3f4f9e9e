import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqepdft.ansatz import AnsatzSpec, build_ansatz
from vqepdft.errors import DimensionError, MitigationFailure, ParseError, SymmetryViolation
from vqepdft.fci import fci_ground
from vqepdft.mapping import QubitEncoding
from vqepdft.pauli import PauliString, PauliSum
from vqepdft.rdm import (
    CalibrationData,
    _measured_strings,
    MeasurementPlan,
    calibrate,
    estimate_paulis,
    group,
    measure_rdms,
    mitigate,
    plan_size,
    project_simplex,
    rdm_element_operators,
    rdms_from_text,
    rdms_to_text,
    statevector_rdms,
)
from vqepdft.simulator import (
    HARDWARE_F0,
    HARDWARE_F1,
    Observable,
    ReadoutModel,
    apply_readout_noise,
    counts_to_histogram,
    expectation,
    histogram_to_counts,
    probabilities,
    run,
    sample_counts,
)
from vqepdft.vqe import VqeOptions, minimize

from conftest import H4_FIXTURES, load_fixture

CASES = [(name, fam) for name in H4_FIXTURES
         for fam in (("uccsd", "rouccsd", "chea") if "4e" in name else ("rouccsd", "ohea"))]


def optimized(name, family, restarts=10):
    h = load_fixture(name)
    a = build_ansatz(AnsatzSpec.for_hamiltonian(family, h))
    hq = a.spec.encoding.map_hamiltonian(h)
    return h, a, hq, minimize(hq, a, VqeOptions(restarts=restarts)).parameters


@pytest.mark.parametrize("name, family", CASES)
def test_exact_path_matches_statevector(name, family):
    h = load_fixture(name)
    a = build_ansatz(AnsatzSpec.for_hamiltonian(family, h))
    enc = a.spec.encoding
    params = np.random.default_rng(1).uniform(-1, 1, a.n_params)
    psi = run(a.circuit, params)
    measured = measure_rdms(a.circuit, params, enc)
    direct = statevector_rdms(psi, enc)
    assert np.max(np.abs(measured.gamma - direct.gamma)) < 1e-10
    assert np.max(np.abs(measured.big_gamma - direct.big_gamma)) < 1e-10
    assert measured.energy(h) == pytest.approx(expectation(psi, enc.map_hamiltonian(h)), abs=1e-10)


def test_h2_optimized_gamma_matches_fci(h2):
    _, _, h = h2
    a = build_ansatz(AnsatzSpec.for_hamiltonian("uccsd", h))
    enc = a.spec.encoding
    res = minimize(enc.map_hamiltonian(h), a)
    r = measure_rdms(a.circuit, res.parameters, enc)
    ref = fci_ground(h).rdms
    assert np.max(np.abs(r.gamma - ref.gamma)) < 1e-8
    assert r.energy(h) == pytest.approx(expectation(run(a.circuit, res.parameters), enc.map_hamiltonian(h)),
                                        abs=1e-10)


def test_grouping_example():
    g = group([PauliString.from_label("ZZII"), PauliString.from_label("IIZZ")])
    assert len(g) == 1
    assert g[0].cover.label == "ZZZZ"


def test_grouping_soundness():
    enc = QubitEncoding("parity", 3, 2, 2, True)
    strings = _measured_strings(enc)
    groups = group(strings)
    assert all(g.is_valid() for g in groups)
    members = [m for g in groups for m in g.members]
    assert sorted(members) == sorted(strings)
    assert plan_size(enc) == {"pauli_strings": len(strings), "groups": len(groups)}
    assert len(groups) < len(strings)


@pytest.mark.parametrize("seed", range(4))
def test_grouped_and_ungrouped_exact_expectations(seed):
    rng = np.random.default_rng(seed)
    labels = {"".join(rng.choice(list("IXYZ"), 4)) for _ in range(20)} - {"IIII"}
    strings = [PauliString.from_label(s) for s in labels]
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    v /= np.linalg.norm(v)
    values, groups = estimate_paulis(v, strings, MeasurementPlan())
    for p in strings:
        assert values[p] == pytest.approx(expectation(v, PauliSum.from_labels({p.label: 1.0})), abs=1e-12)


def test_shot_trace_within_binomial_error():
    h, a, hq, params = optimized("h4_631g_r1p8_4e3o.fcidump", "chea", restarts=2)
    enc = a.spec.encoding
    shots = 2048
    psi = run(a.circuit, params)
    trace_op = sum((rdm_element_operators((p, p), enc)[0] for p in range(3)), PauliSum({}, 4))
    # groups are sampled independently; covariance is exact inside a group
    var = 0.0
    for g in group(_measured_strings(enc)):
        part = PauliSum({(m.x, m.z): trace_op.terms[(m.x, m.z)] for m in g.members
                         if (m.x, m.z) in trace_op.terms}, 4)
        if len(part):
            var += (expectation(psi, part @ part) - expectation(psi, part) ** 2) / shots
    sigma = max(np.sqrt(var), 1e-12)
    for seed in range(3):
        r = measure_rdms(a.circuit, params, enc, MeasurementPlan("shots", shots, seed))
        assert abs(np.trace(r.gamma) - 4) < 5 * sigma


def test_readout_bias_and_mitigation():
    h, a, hq, params = optimized("h4_631g_r1p8_4e3o.fcidump", "chea", restarts=3)
    enc = a.spec.encoding
    exact = measure_rdms(a.circuit, params, enc).energy(h)
    model = ReadoutModel.uniform(4, HARDWARE_F0, HARDWARE_F1)
    shots = 1 << 14
    raw, mit = [], []
    for seed in range(10):
        raw.append(measure_rdms(a.circuit, params, enc,
                                MeasurementPlan("shots+readout", shots, seed, model, mitigation=False)).energy(h) - exact)
        mit.append(measure_rdms(a.circuit, params, enc,
                                MeasurementPlan("shots+readout", shots, seed, model, calibration_shots=shots)
                                ).energy(h) - exact)
    raw, mit = np.array(raw), np.array(mit)
    # unmitigated: a systematic shift far outside its own scatter
    assert abs(raw.mean()) > 10 * raw.std()
    # mitigated: remaining bias below the single-run shot noise
    assert abs(mit.mean()) < mit.std()
    assert abs(mit.mean()) < 0.05 * abs(raw.mean())


def test_noisy_shift_has_consistent_sign():
    model = ReadoutModel.uniform(4, HARDWARE_F0, HARDWARE_F1)
    shifts = []
    for name, family in CASES:
        if family == "uccsd":
            continue
        h, a, hq, params = optimized(name, family, restarts=2)
        enc = a.spec.encoding
        exact = measure_rdms(a.circuit, params, enc).energy(h)
        noisy = measure_rdms(a.circuit, params, enc,
                             MeasurementPlan("shots+readout", 2048, 11, model, mitigation=False)).energy(h)
        shifts.append(noisy - exact)
    assert len(shifts) == 8
    assert all(s > 0 for s in shifts) or all(s < 0 for s in shifts)


def test_calibration_diagonal_matches_fidelity_products():
    model = ReadoutModel.uniform(4, HARDWARE_F0, HARDWARE_F1)
    shots = 8192
    cal = calibrate(model, shots, seed=2)
    for k in range(16):
        ones = bin(k).count("1")
        p = HARDWARE_F0 ** (4 - ones) * HARDWARE_F1**ones
        assert abs(cal.matrix[k, k] - p) < 5 * np.sqrt(p * (1 - p) / shots)
    assert np.allclose(cal.matrix.sum(axis=0), 1.0)


def test_calibrate_then_mitigate_recovers_clean_distribution():
    rng = np.random.default_rng(4)
    m = np.abs(rng.normal(size=(8, 8))) * 0.05 + np.eye(8)
    model = ReadoutModel(m / m.sum(axis=0))
    clean = rng.dirichlet(np.ones(8))
    shots = 1 << 16
    cal = calibrate(model, shots, seed=1)
    hist = apply_readout_noise(counts_to_histogram(sample_counts(clean, shots, 3), 3), model, seed=4)
    fixed = mitigate(hist, cal)
    noisy = histogram_to_counts(hist, 3) / shots
    assert np.max(np.abs(fixed - clean)) < 5 * np.sqrt(0.25 / shots) * 3
    assert np.max(np.abs(fixed - clean)) < np.max(np.abs(noisy - clean))


def test_mitigated_zzzz_beats_unmitigated():
    h, a, hq, params = optimized("h4_631g_r2p4_4e3o.fcidump", "chea", restarts=2)
    psi = run(a.circuit, params)
    z = PauliString.from_label("ZZZZ")
    exact = expectation(psi, PauliSum.from_labels({"ZZZZ": 1.0}))
    signs = np.array([1 - 2 * (bin(i & z.support).count("1") % 2) for i in range(16)])
    model = ReadoutModel.uniform(4, HARDWARE_F0, HARDWARE_F1)
    wins = 0
    for trial in range(100):
        cal = calibrate(model, 8192, seed=1000 + trial)
        hist = apply_readout_noise(counts_to_histogram(sample_counts(probabilities(psi), 2048, trial), 4),
                                   model, seed=5000 + trial)
        raw = signs @ (histogram_to_counts(hist, 4) / 2048)
        mit = signs @ mitigate(hist, cal)
        wins += abs(mit - exact) < abs(raw - exact)
    assert wins >= 95


def test_mitigation_errors():
    with pytest.raises(MitigationFailure):
        mitigate({"0": 5, "1": 5}, CalibrationData(np.array([[0.5, 0.5], [0.5, 0.5]]), 10))
    with pytest.raises(DimensionError):
        mitigate(np.ones(4), CalibrationData(np.eye(2), 10))
    with pytest.raises(DimensionError):
        calibrate(ReadoutModel.identity(7))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12))
def test_simplex_projection(values):
    v = np.array(values)
    x = project_simplex(v)
    assert np.all(x >= 0)
    assert x.sum() == pytest.approx(1.0, abs=1e-9)
    # optimality: projection of a point already on the simplex is itself
    assert np.allclose(project_simplex(x), x, atol=1e-9)


def test_element_operators_and_symmetry_errors():
    enc = QubitEncoding("jordan_wigner", 2, 1, 1)
    a, b = rdm_element_operators((0, 1), enc)
    assert a.is_hermitian() and b.is_hermitian()
    with pytest.raises(SymmetryViolation):
        rdm_element_operators((0, 1), enc, spins=(0, 1))
    with pytest.raises(ValueError):
        rdm_element_operators((0, 2), enc)
    with pytest.raises(ValueError):
        rdm_element_operators((0, 1, 1), enc)


def test_text_round_trip_and_errors():
    h = load_fixture("h4_631g_r2p4_3e3o.fcidump")
    r = fci_ground(h).rdms
    back = rdms_from_text(rdms_to_text(r))
    assert np.array_equal(back.gamma, r.gamma)
    assert np.array_equal(back.big_gamma, r.big_gamma)
    for bad in ("", "rdm1 2\n1 0\n", "rdm1 1\n1.0\nrdm2 2\n1 2\n"):
        with pytest.raises(ParseError):
            rdms_from_text(bad)


def test_plan_validation():
    with pytest.raises(ValueError):
        MeasurementPlan(mode="tomography")
    with pytest.raises(ValueError):
        MeasurementPlan(mode="shots+readout")
    enc = QubitEncoding("parity", 3, 2, 2, True)
    assert plan_size(enc)["groups"] < plan_size(enc)["pauli_strings"]


def test_statevector_oracle_rejects_leaky_state():
    enc = QubitEncoding("parity", 3, 2, 2, True)
    psi = np.zeros(16)
    psi[0] = 1.0          # not in the (2, 2) sector
    with pytest.raises(SymmetryViolation):
        statevector_rdms(psi, enc)
    assert Observable(PauliSum.from_labels({"ZIII": 1.0})).expectation(psi) == 1.0
