"""Acceptance criteria 1-10, each reported as a single PASS/FAIL line."""

import json
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from vqepdft import data_path
from vqepdft.ansatz import AnsatzSpec, build_ansatz
from vqepdft.cli import main
from vqepdft.fci import DeterminantBasis, fci_ground, rdms_from_vector
from vqepdft.io_formats import merge_frame_tables, parse_results, read_frame_table
from vqepdft.mapping import QubitEncoding, map_hamiltonian, sector_ground_energy, taper
from vqepdft.marcus import MarcusParams, ensemble_stats, four_point, four_point_from_sites, rate
from vqepdft.pdft import PdftProblem, densities_on_grid, embed_rdms, on_top_energy
from vqepdft.rdm import MeasurementPlan, measure_rdms, statevector_rdms
from vqepdft.simulator import HARDWARE_F0, HARDWARE_F1, ReadoutModel, expectation, run
from vqepdft.vqe import VqeOptions, minimize

from conftest import ACCEPTANCE_LINES, H4_FIXTURES, h2_system, load_fixture

H_DA_SQ_2071 = 4.11059e-6


@contextmanager
def criterion(number, title):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        line = f"criterion {number:2d}: FAIL  {title} ({time.perf_counter() - t0:.2f} s)"
        ACCEPTANCE_LINES[number] = line
        print(line)
        raise
    line = f"criterion {number:2d}: PASS  {title} ({time.perf_counter() - t0:.2f} s)"
    ACCEPTANCE_LINES[number] = line
    print(line)


def frame2071():
    return json.loads(data_path("frame2071_single_points.json").read_text())


def test_criterion_01_ensemble_reproduction():
    with criterion(1, "ensemble averages and rate from the shipped frame tables"):
        t0 = time.perf_counter()
        frames = merge_frame_tables(read_frame_table(data_path("ensemble_hea.csv")),
                                    read_frame_table(data_path("ensemble_coupling.csv")))
        out = ensemble_stats(frames, 300.0)
        elapsed = time.perf_counter() - t0
        assert out["lambda_mean"] == pytest.approx(0.4356, abs=5e-4)
        assert out["delta_g_mean"] == pytest.approx(0.0724, abs=5e-4)
        assert out["h_da_abs_mean"] == pytest.approx(6.352e-3, rel=1e-3)
        assert out["h_da_sq_mean"] == pytest.approx(1.1431e-4, rel=1e-3)
        assert out["k_et"] == pytest.approx(0.944e10, rel=0.02)
        assert elapsed < 1.0


def test_criterion_02_single_conformation_rate():
    with criterion(2, "single-conformation rate from its tabulated parameters"):
        t0 = time.perf_counter()
        k = rate(MarcusParams(0.47021, 0.06764, H_DA_SQ_2071, 300.0))
        assert time.perf_counter() - t0 < 1.0
        assert k == pytest.approx(2.617e8, rel=0.02)
        assert k == pytest.approx(frame2071()["hardware_hea"]["published"]["k_et"], rel=0.02)


def test_criterion_03_four_point_arithmetic():
    with criterion(3, "four-point arithmetic on the hardware energies (lambda deviation documented)"):
        out = four_point(four_point_from_sites(frame2071()["hardware_hea"]))
        assert out["delta_g"] == pytest.approx(0.0675, abs=1e-3)
        assert out["lambda"] == pytest.approx(0.4615, abs=1e-3)
        # recorded, not asserted: the tabulated lambda is 0.47021 eV
        print(f"  lambda from listed energies {out['lambda']:.5f} eV vs tabulated 0.47021 eV")


def test_criterion_04_noiseless_parameter_cross_check():
    with criterion(4, "noiseless HEA and ROUCCSD parameters and rates from their site energies"):
        data = frame2071()
        hea_sites = dict(data["noiseless_hea"])
        # the HEA column's b and d site energies are listed in exchanged rows;
        # read as tabulated they give lambda = 0.0686 eV
        literal = four_point(four_point_from_sites(hea_sites))
        assert literal["lambda"] == pytest.approx(0.0686, abs=5e-4)
        hea_sites["b"], hea_sites["d"] = data["noiseless_hea"]["d"], data["noiseless_hea"]["b"]
        for sites, key in ((hea_sites, "noiseless_hea"), (data["rouccsd"], "rouccsd")):
            pub = data[key]["published"]
            out = four_point(four_point_from_sites(sites))
            assert out["lambda"] == pytest.approx(pub["lambda_ev"], abs=5e-4)
            assert out["delta_g"] == pytest.approx(pub["delta_g_ev"], abs=5e-4)
            k = rate(MarcusParams(out["lambda"], out["delta_g"], H_DA_SQ_2071, 300.0))
            assert k == pytest.approx(pub["k_et"], rel=0.02)
        assert pub["k_et"] == pytest.approx(2.49e8, rel=0.02)
        assert data["noiseless_hea"]["published"]["k_et"] == pytest.approx(1.89e8, rel=0.02)


def test_criterion_05_two_electron_exactness():
    with criterion(5, "H2/STO-3G UCCSD-VQE equals FCI; RDM energy equals <H>"):
        t0 = time.perf_counter()
        _, _, h = h2_system(1.4, "sto-3g")
        a = build_ansatz(AnsatzSpec.for_hamiltonian("uccsd", h))
        hq = a.spec.encoding.map_hamiltonian(h)
        res = minimize(hq, a)
        assert res.energy == pytest.approx(fci_ground(h).energy, abs=1e-8)
        r = measure_rdms(a.circuit, res.parameters, a.spec.encoding)
        assert r.energy(h) == pytest.approx(expectation(run(a.circuit, res.parameters), hq), abs=1e-10)
        assert time.perf_counter() - t0 < 10.0


def test_criterion_06_expressibility():
    with criterion(6, "ROUCCSD within 1e-4 Ha and CHEA/OHEA within 5e-3 Ha of FCI on four fixtures"):
        t0 = time.perf_counter()
        errors = {}
        for name in H4_FIXTURES:
            h = load_fixture(name)
            e_fci = fci_ground(h).energy
            hea = "chea" if h.n_alpha == h.n_beta else "ohea"
            for family in ("rouccsd", hea):
                a = build_ansatz(AnsatzSpec.for_hamiltonian(family, h))
                res = minimize(a.spec.encoding.map_hamiltonian(h), a, VqeOptions(restarts=10))
                errors[name, family] = res.energy - e_fci
        for (name, family), err in sorted(errors.items()):
            print(f"  {name:28s} {family:8s} error {err:.3e} Ha")
            assert err > -1e-10
            assert err < (1e-4 if family == "rouccsd" else 5e-3)
        assert time.perf_counter() - t0 < 300.0


def test_criterion_07_tapering():
    with criterion(7, "parity tapering 6 -> 4 qubits keeps the sector ground energy"):
        h = load_fixture("h4_631g_r2p4_3e3o.fcidump")
        full = map_hamiltonian(h, "parity")
        assert full.n == 6
        enc = QubitEncoding("parity", 3, h.n_alpha, h.n_beta, True)
        tapered = taper(full, enc.sector)
        assert tapered.n == 4
        assert sector_ground_energy(tapered, enc) == pytest.approx(fci_ground(h).energy, abs=1e-10)


def test_criterion_08_measurement_protocol():
    with criterion(8, "exact-path RDMs and readout mitigation win rate over 100 trials"):
        h = load_fixture("h4_631g_r1p8_4e3o.fcidump")
        a = build_ansatz(AnsatzSpec.for_hamiltonian("chea", h))
        enc = a.spec.encoding
        params = minimize(enc.map_hamiltonian(h), a, VqeOptions(restarts=3)).parameters
        exact = measure_rdms(a.circuit, params, enc)
        direct = statevector_rdms(run(a.circuit, params), enc)
        assert np.max(np.abs(exact.gamma - direct.gamma)) < 1e-10
        assert np.max(np.abs(exact.big_gamma - direct.big_gamma)) < 1e-10
        e_exact = exact.energy(h)
        model = ReadoutModel.uniform(enc.n_qubits, HARDWARE_F0, HARDWARE_F1)
        wins = 0
        for seed in range(100):
            plan = dict(mode="shots+readout", shots=2048, seed=seed, readout=model, calibration_shots=8192)
            raw = measure_rdms(a.circuit, params, enc, MeasurementPlan(**plan, mitigation=False)).energy(h)
            mit = measure_rdms(a.circuit, params, enc, MeasurementPlan(**plan)).energy(h)
            wins += abs(mit - e_exact) < abs(raw - e_exact)
        print(f"  mitigated closer in {wins}/100 trials")
        assert wins >= 95


def test_criterion_09_pdft_identities():
    with criterion(9, "closed-shell Pi = rho^2/4, density normalization, radial refinement drift"):
        ints, mos, h = h2_system(1.4, "sto-3g")
        prob = PdftProblem.from_active_space(h, ints)
        grid = prob.grid()
        basis = DeterminantBasis(h.n_orb, 1, 1)
        v = np.zeros(basis.size)
        v[basis.index(1, 1)] = 1.0
        hf = densities_on_grid(embed_rdms(rdms_from_vector(v, basis), prob.n_core), grid)
        ok = hf.rho > 1e-8
        assert np.max(np.abs(hf.pi[ok] / (hf.rho[ok] ** 2 / 4) - 1)) < 1e-10
        rdms = embed_rdms(fci_ground(h).rdms, prob.n_core)
        f = densities_on_grid(rdms, grid)
        assert grid.integrate(f.rho) == pytest.approx(2.0, abs=1e-4)
        fine = prob.grid(2 * 60)
        drift = on_top_energy(densities_on_grid(rdms, fine), fine) - on_top_energy(f, grid)
        print(f"  E_ot drift on doubling radial points {drift:.2e} Ha")
        assert abs(drift) < 1e-4


def test_criterion_10_pipeline_shape(tmp_path):
    with criterion(10, "protein-scale energies out of scope; pipeline runs VQE -> RDMs -> PDFT in order"):
        # Absolute tryptophan energies and benchmark-set errors need QM/MM
        # systems far beyond a desk-scale simulator; the property suites above
        # stand in for them, and this checks the workflow ordering end to end.
        out = tmp_path / "pipeline.json"
        assert main(["pipeline", "--geom", str(data_path("h2.xyz")), "--basis", "sto3g",
                     "--ansatz", "uccsd", "--mode", "exact", "--output", str(out)]) == 0
        doc = parse_results(Path(out).read_text())
        stages = doc["stages"]
        assert stages.index("vqe") < stages.index("rdm") < stages.index("pdft")
        assert doc["rdm"]["energy"] == pytest.approx(doc["vqe"]["energy"], abs=1e-10)
        assert doc["pdft"]["wavefunction"] == pytest.approx(doc["vqe"]["energy"], abs=1e-10)
        assert doc["pdft"]["total"] is not None
