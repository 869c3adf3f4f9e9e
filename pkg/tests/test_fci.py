import numpy as np
import pytest

from vqepdft.errors import DimensionError, SizeExceeded
from vqepdft.fci import (
    DeterminantBasis,
    apply_hamiltonian,
    excite,
    fci_ground,
    fci_spectrum,
    hamiltonian_matrix,
    rdms_from_vector,
    spin_rdm1,
)
from vqepdft.hamiltonian import ActiveSpaceHamiltonian

from conftest import random_hamiltonian


def two_orbital_h():
    h1 = np.array([[-1.25, 0.08], [0.08, -0.47]])
    g = np.zeros((2, 2, 2, 2))
    vals = {(0, 0, 0, 0): 0.67, (1, 1, 1, 1): 0.70, (0, 0, 1, 1): 0.66, (0, 1, 0, 1): 0.18,
            (0, 1, 0, 0): 0.05, (0, 1, 1, 1): -0.03}
    for (p, q, r, s), v in vals.items():
        for idx in ((p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                    (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)):
            g[idx] = v
    return ActiveSpaceHamiltonian(h1, g, 0.71, 1, 1)


def test_slater_condon_two_orbitals():
    h = two_orbital_h()
    basis = DeterminantBasis(2, 1, 1)
    assert basis.determinants == [(1, 1), (1, 2), (2, 1), (2, 2)]
    m = hamiltonian_matrix(h, basis)
    e0, h1, g = h.e_core, h.h1, h.h2
    single_0 = h1[0, 1] + g[0, 1, 0, 0]     # spectator in orbital 0
    single_1 = h1[0, 1] + g[0, 1, 1, 1]     # spectator in orbital 1
    expected = np.array([
        [e0 + 2 * h1[0, 0] + g[0, 0, 0, 0], single_0, single_0, g[0, 1, 0, 1]],
        [single_0, e0 + h1[0, 0] + h1[1, 1] + g[0, 0, 1, 1], g[0, 1, 0, 1], single_1],
        [single_0, g[0, 1, 0, 1], e0 + h1[0, 0] + h1[1, 1] + g[0, 0, 1, 1], single_1],
        [g[0, 1, 0, 1], single_1, single_1, e0 + 2 * h1[1, 1] + g[1, 1, 1, 1]],
    ])
    assert np.allclose(m, expected, atol=1e-14)


def test_excite_signs():
    assert excite(0b011, 2, 0) == (0b110, -1)
    assert excite(0b011, 2, 1) == (0b101, 1)
    assert excite(0b001, 0, 1) is None
    assert excite(0b011, 1, 0) is None


@pytest.mark.parametrize("n, na, nb, seed", [(2, 1, 1, 0), (3, 2, 1, 1), (4, 2, 2, 2)])
def test_dense_and_matrix_free_agree(n, na, nb, seed):
    h = random_hamiltonian(n, na, nb, seed)
    basis = DeterminantBasis(n, na, nb)
    m = hamiltonian_matrix(h, basis)
    eye = np.eye(basis.size)
    cols = np.array([apply_hamiltonian(eye[i], h, basis) for i in range(basis.size)]).T
    assert np.allclose(cols, m, atol=1e-12)


def test_iterative_path_matches_dense():
    h = random_hamiltonian(5, 2, 2, 4)
    dense = fci_ground(h)
    sparse = fci_ground(h, dense_limit=10)
    assert sparse.energy == pytest.approx(dense.energy, abs=1e-10)
    assert abs(abs(sparse.vector @ dense.vector) - 1) < 1e-8
    assert sparse.residual < 1e-9 and dense.residual < 1e-9


@pytest.mark.parametrize("n, na, nb", [(3, 2, 2), (3, 2, 1), (4, 3, 1)])
def test_rdm_identities(n, na, nb):
    h = random_hamiltonian(n, na, nb, 11)
    res = fci_ground(h)
    r = res.rdms
    ne = na + nb
    assert np.trace(r.gamma) == pytest.approx(ne, abs=1e-12)
    assert np.einsum("pprr->", r.big_gamma) == pytest.approx(ne * (ne - 1), abs=1e-12)
    # partial trace: sum_r Gamma_pqrr = (N - 1) gamma_pq
    assert np.allclose(np.einsum("pqrr->pq", r.big_gamma), (ne - 1) * r.gamma, atol=1e-12)
    assert r.energy(h) == pytest.approx(res.energy, abs=1e-12)
    ga, gb = spin_rdm1(res.vector, res.basis)
    assert np.trace(ga) == pytest.approx(na, abs=1e-12)
    assert np.trace(gb) == pytest.approx(nb, abs=1e-12)


def test_complex_vector_rdms_are_real_when_phase_is_global():
    h = random_hamiltonian(3, 1, 1, 5)
    res = fci_ground(h)
    r = rdms_from_vector(res.vector * np.exp(0.3j), res.basis)
    assert not np.iscomplexobj(r.gamma)
    assert np.allclose(r.gamma, res.rdms.gamma, atol=1e-12)


def test_spectrum_lowest_is_ground():
    h = random_hamiltonian(3, 2, 1, 9)
    assert fci_spectrum(h, 2, 1)[0] == pytest.approx(fci_ground(h).energy, abs=1e-12)


def test_errors():
    with pytest.raises(SizeExceeded):
        DeterminantBasis(40, 10, 10)
    h = random_hamiltonian(2, 1, 1, 0)
    with pytest.raises(DimensionError):
        apply_hamiltonian(np.ones(3), h, DeterminantBasis(2, 1, 1))


FIXTURE_FCI = {
    "h4_631g_r1p8_4e3o.fcidump": -2.1833225461344434,
    "h4_631g_r1p8_3e3o.fcidump": -1.7515126149603444,
    "h4_631g_r2p4_4e3o.fcidump": -2.1015753324520237,
    "h4_631g_r2p4_3e3o.fcidump": -1.6971702977906102,
}


@pytest.mark.parametrize("name", sorted(FIXTURE_FCI))
def test_fixture_fci_energies(name):
    from conftest import load_fixture

    h = load_fixture(name)
    res = fci_ground(h)
    assert res.energy == pytest.approx(FIXTURE_FCI[name], abs=1e-10)
    fci = pytest.importorskip("pyscf.fci")
    e, _ = fci.direct_spin1.kernel(h.h1, h.h2, h.n_orb, (h.n_alpha, h.n_beta), ecore=h.e_core, tol=1e-12)
    assert e == pytest.approx(FIXTURE_FCI[name], abs=1e-9)
