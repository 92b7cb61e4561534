import numpy as np
import pytest

from nqsdyn import RbmParameters, SpinBasis, SpinHamiltonian, tfim_chain


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def zero_rbm_n1():
    return RbmParameters(a=np.zeros(1), b=np.zeros(1), w=np.zeros((1, 1)))


@pytest.fixture
def tfim2():
    """N=2 open TFIM: Jz=-1 on bond (0,1), hx=-0.5 both sites."""
    return tfim_chain(2, j=1.0, hx=0.5)


@pytest.fixture
def basis2():
    return SpinBasis(2)


def random_hamiltonian(rng, n_sites, n_bonds=None, with_y=True):
    """Random bond-list Hamiltonian for property tests."""
    if n_bonds is None:
        n_bonds = max(1, n_sites)
    bonds = []
    for _ in range(n_bonds):
        i = int(rng.integers(0, n_sites))
        j = int(rng.integers(0, n_sites - 1))
        if j >= i:
            j += 1
        jy = rng.normal() if with_y else 0.0
        bonds.append((i, j, rng.normal(), jy, rng.normal()))
    return SpinHamiltonian(
        n_sites, tuple(bonds), hx=rng.normal(size=n_sites), hz=rng.normal(size=n_sites)
    )


def random_rbm(rng, n, m, scale=0.2):
    return RbmParameters(
        a=scale * (rng.normal(size=n) + 1j * rng.normal(size=n)),
        b=scale * (rng.normal(size=m) + 1j * rng.normal(size=m)),
        w=scale * (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))),
    )
