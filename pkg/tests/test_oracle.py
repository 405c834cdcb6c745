import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quditmc.channels import compose, dephasing, depolarizing, identity_channel, random_channel, unitary_channel
from quditmc.gates import fourier, haar_unitary, phase_gate
from quditmc.mub import mubs_explicit, mubs_from_partition
from quditmc.operator_basis import QupitDims, gell_mann_basis, gen_pauli, hermitize
from quditmc.oracle import (
    average_fidelity,
    average_fidelity_2design,
    characteristic_matrices,
    classical_fidelities,
    entanglement_fidelity,
    entanglement_fidelity_kraus,
    fav_from_fe,
    process_purity,
    state_fidelities,
)

Q3 = QupitDims(3)
F3 = fourier(3)


def noisy_fourier(q):
    return compose(unitary_channel(F3), depolarizing(q, Q3))


def test_depolarized_fourier_values():
    ch = noisy_fourier(0.1)
    assert entanglement_fidelity(ch, F3, gen_pauli(3)) == pytest.approx(0.91111111, abs=1e-8)
    assert average_fidelity(ch, F3, gen_pauli(3)) == pytest.approx(0.93333333, abs=1e-8)


def test_ideal_channel_is_perfect():
    assert entanglement_fidelity(unitary_channel(F3), F3, gen_pauli(3)) == pytest.approx(1.0)
    assert average_fidelity_2design(unitary_channel(F3), F3, mubs_explicit(3)) == pytest.approx(1.0)


def test_fully_depolarizing_floor():
    ch = depolarizing(1.0, Q3)
    assert entanglement_fidelity(ch, np.eye(3), gen_pauli(3)) == pytest.approx(1 / 9)
    assert average_fidelity(ch, np.eye(3), gen_pauli(3)) == pytest.approx(1 / 3)


@pytest.mark.parametrize("basis", [gen_pauli(3), gell_mann_basis(), hermitize(gen_pauli(3))])
def test_fidelity_is_basis_independent(basis):
    ch = random_channel(3, 3, 11)
    u = haar_unitary(3, 12)
    assert entanglement_fidelity(ch, u, basis) == pytest.approx(entanglement_fidelity_kraus(ch, u), abs=1e-12)


def test_characteristic_matrices_of_identity():
    b = gen_pauli(3)
    alpha, beta = characteristic_matrices(identity_channel(3), np.eye(3), b)
    assert np.allclose(alpha, np.eye(9))
    assert np.allclose(beta, np.eye(9))


def test_state_fidelities_of_dephasing():
    m = mubs_explicit(3)
    f = state_fidelities(dephasing(0.3, Q3), np.eye(3), m.states())
    assert np.allclose(f[:3], 1.0)
    assert np.all(f[3:] < 1)


@pytest.mark.parametrize("p,n", [(2, 1), (3, 1), (5, 1), (2, 2)])
def test_two_design_route_matches(p, n):
    dims = QupitDims(p, n)
    rng = np.random.default_rng(p * 10 + n)
    u = haar_unitary(dims.d, rng)
    ch = compose(random_channel(dims.d, 2, rng), depolarizing(0.2, dims))
    m = mubs_from_partition(gen_pauli(p, n))
    assert average_fidelity_2design(ch, u, m) == pytest.approx(average_fidelity(ch, u, gen_pauli(p, n)), abs=1e-9)


def test_classical_bounds_for_dephased_phase_gate():
    u = phase_gate(3)
    ch = compose(unitary_channel(u), dephasing(0.2, Q3))
    m = mubs_explicit(3)
    cf = classical_fidelities(ch, u, m.bases[0], m.bases[1])
    fe = entanglement_fidelity(ch, u, gen_pauli(3))
    assert cf.contains_fe(fe)
    assert cf.contains_fav(fav_from_fe(fe, 3))
    assert cf.lower <= cf.upper


def test_classical_needs_unbiased_pair():
    with pytest.raises(ValueError, match="unbiased"):
        classical_fidelities(identity_channel(3), np.eye(3), np.eye(3), np.eye(3))


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        entanglement_fidelity(identity_channel(2), np.eye(3), gen_pauli(3))


def test_fidelity_decreases_with_noise():
    qs = np.linspace(0, 1, 6)
    f = [average_fidelity(noisy_fourier(q), F3, gen_pauli(3)) for q in qs]
    assert np.all(np.diff(f) < 0)


def test_process_purity():
    q = 0.1
    assert process_purity(depolarizing(q, Q3), gen_pauli(3)) == pytest.approx((1 - q + q / 9) ** 2 + 8 * (q / 9) ** 2)
    assert process_purity(unitary_channel(haar_unitary(3, 0)), gen_pauli(3)) == pytest.approx(1.0)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_oracle_routes_agree(seed, rank):
    rng = np.random.default_rng(seed)
    u = haar_unitary(3, rng)
    ch = random_channel(3, rank, rng)
    fav = average_fidelity(ch, u, gen_pauli(3))
    assert fav == pytest.approx(average_fidelity_2design(ch, u, mubs_explicit(3)), abs=1e-9)
    assert 0 <= fav <= 1 + 1e-12
    cf = classical_fidelities(ch, u, mubs_explicit(3).bases[0], mubs_explicit(3).bases[2])
    assert cf.contains_fav(fav)
