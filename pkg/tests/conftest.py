import numpy as np
import pytest

from vqepdft import data_path
from vqepdft.hamiltonian import ActiveSpaceHamiltonian
from vqepdft.integrals import Integrals, SBasis, h_chain, make_active_space, rhf
from vqepdft.io_formats import read_fcidump

H4_FIXTURES = [
    "h4_631g_r1p8_4e3o.fcidump",
    "h4_631g_r1p8_3e3o.fcidump",
    "h4_631g_r2p4_4e3o.fcidump",
    "h4_631g_r2p4_3e3o.fcidump",
]


def load_fixture(name: str) -> ActiveSpaceHamiltonian:
    return ActiveSpaceHamiltonian.from_fcidump(read_fcidump(data_path(name)))


def h2_system(r: float = 1.4, basis: str = "sto-3g"):
    geom = h_chain(2, r)
    ints = Integrals.compute(geom, SBasis.from_name(geom, basis))
    mos = rhf(ints, 2)
    return ints, mos, make_active_space(mos, ints, len(ints.basis), 2)


def random_hamiltonian(n_orb: int, n_alpha: int, n_beta: int, seed: int, scale: float = 0.3):
    """Real Hamiltonian with the full 8-fold integral symmetry."""
    rng = np.random.default_rng(seed)
    h1 = rng.normal(size=(n_orb, n_orb)) * scale
    h1 = 0.5 * (h1 + h1.T) + np.diag(np.arange(n_orb, dtype=float))
    # (pq|rs) from a positive semidefinite pair-space matrix
    npair = n_orb * n_orb
    a = rng.normal(size=(npair, npair)) * scale
    m = a @ a.T / npair
    h2 = m.reshape(n_orb, n_orb, n_orb, n_orb)
    h2 = (h2 + h2.transpose(1, 0, 2, 3) + h2.transpose(0, 1, 3, 2) + h2.transpose(1, 0, 3, 2)) / 4
    h2 = 0.5 * (h2 + h2.transpose(2, 3, 0, 1))
    return ActiveSpaceHamiltonian(h1, h2, float(rng.normal()), n_alpha, n_beta)


@pytest.fixture(scope="session")
def h2():
    return h2_system()


@pytest.fixture(scope="session")
def h4_fixtures():
    return {name: load_fixture(name) for name in H4_FIXTURES}


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
