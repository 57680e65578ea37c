import numpy as np
import pytest
from numpy.testing import assert_allclose

from thermopepo.exceptions import OracleArgumentError
from thermopepo.models import hardcore_bh, ising_model, softcore_bh
from thermopepo.reference_oracle import (
    SmallLattice, exact_thermal_expectation, lattice_hamiltonian, thermal_state, trotter_slice_error,
    trotterized_thermal_expectation, trotterized_thermal_state, vectorized_trotter_state,
)
from thermopepo.thermal_pepo import SWEEP_ORDER, Bond

SZ = np.diag([1.0, -1.0])
N = np.diag([0.0, 1.0])


class TestSmallLattice:
    def test_bond_orientation(self):
        assert SmallLattice(2, 2).bonds() == [
            (0, 1, Bond.A_RIGHT), (0, 2, Bond.A_DOWN), (1, 3, Bond.B_DOWN), (2, 3, Bond.B_RIGHT),
        ]

    def test_coordination(self):
        lat = SmallLattice(1, 3)
        assert [lat.coordination(s) for s in range(3)] == [1, 2, 1]

    def test_ordered_bonds_follow_sweep(self):
        lat = SmallLattice(2, 2)
        assert [b for _, _, b in lat.ordered_bonds(SWEEP_ORDER)] == list(SWEEP_ORDER)
        reverse = tuple(reversed(SWEEP_ORDER))
        assert [b for _, _, b in lat.ordered_bonds(reverse)] == list(reverse)

    def test_needs_a_site(self):
        with pytest.raises(OracleArgumentError):
            SmallLattice(0, 2)


class TestExactThermalState:
    def test_ising_pair_correlation(self):
        lat = SmallLattice(1, 2)
        value = exact_thermal_expectation(ising_model(0.0), lat, 1.0, np.kron(SZ, SZ), (0, 1))
        assert value == pytest.approx(np.tanh(1.0), abs=1e-12)

    def test_infinite_temperature(self):
        assert exact_thermal_expectation(hardcore_bh(1.0, 0.7), SmallLattice(2, 2), 0.0, N, 3) == pytest.approx(0.5)
        n3 = np.diag([0.0, 1.0, 2.0])
        assert exact_thermal_expectation(softcore_bh(1.0, 2.0, 5.0), SmallLattice(1, 2), 0.0, n3, 0) == \
            pytest.approx(1.0)

    def test_half_filling_at_zero_mu(self):
        value = exact_thermal_expectation(hardcore_bh(1.0, 0.0), SmallLattice(2, 2), 1.0, N, 0)
        assert value == pytest.approx(0.5, abs=1e-12)

    def test_edge_sites_get_full_one_site_weight(self):
        model = hardcore_bh(0.0, 1.2)
        lat = SmallLattice(1, 3)
        h = lattice_hamiltonian(model, lat)
        # no hopping: H = -μ Σ n + const
        diagonal = np.diag(h).real
        assert diagonal[0b001] - diagonal[0b000] == pytest.approx(-1.2)
        assert diagonal[0b010] - diagonal[0b000] == pytest.approx(-1.2)

    def test_two_site_operator_order(self):
        model = hardcore_bh(1.0, 0.4)
        lat = SmallLattice(1, 3)
        swapped = exact_thermal_expectation(model, lat, 0.8, np.kron(N, np.eye(2)), (2, 0))
        single = exact_thermal_expectation(model, lat, 0.8, N, 2)
        assert swapped == pytest.approx(single, abs=1e-12)

    def test_state_is_hermitian_positive(self):
        rho = thermal_state(hardcore_bh(1.0, 0.3), SmallLattice(2, 2), 2.0)
        assert_allclose(rho, rho.conj().T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-12

    def test_dimension_cap(self):
        with pytest.raises(OracleArgumentError):
            exact_thermal_expectation(softcore_bh(1.0, 0.0, 10.0), SmallLattice(3, 3), 1.0, np.eye(3), 0)

    def test_bad_site(self):
        with pytest.raises(OracleArgumentError):
            exact_thermal_expectation(ising_model(), SmallLattice(1, 2), 1.0, SZ, 5)


class TestTrotterizedState:
    def test_small_steps_reproduce_commuting_model(self):
        lat = SmallLattice(2, 2)
        model = ising_model()
        exact = exact_thermal_expectation(model, lat, 0.1, SZ, 0)
        trotter = trotterized_thermal_expectation(model, lat, 0.1, 1e-5, SZ, 0)
        assert trotter == pytest.approx(exact, abs=1e-8)

    def test_first_order_slice_error(self):
        lat = SmallLattice(1, 3)
        model = hardcore_bh(1.0, 0.3)
        ratio = trotter_slice_error(model, lat, 0.01) / trotter_slice_error(model, lat, 0.005)
        assert 3.5 <= ratio <= 4.5

    def test_sweep_order_independence(self):
        lat = SmallLattice(2, 2)
        model = hardcore_bh(1.0, 0.3)
        reverse = tuple(reversed(SWEEP_ORDER))
        forward = trotterized_thermal_expectation(model, lat, 0.1, 1e-4, N, 0)
        backward = trotterized_thermal_expectation(model, lat, 0.1, 1e-4, N, 0, sweep_order=reverse)
        assert abs(forward - backward) < 1e-6

    def test_vectorized_evolution_agrees(self):
        lat = SmallLattice(2, 2)
        model = hardcore_bh(1.0, -0.4)
        dense = trotterized_thermal_state(model, lat, 0.1, 0.01)
        vectorized = vectorized_trotter_state(model, lat, 0.1, 0.01)
        assert_allclose(vectorized, dense, atol=1e-12 * np.max(np.abs(dense)))

    def test_positive_semidefinite(self):
        rho = trotterized_thermal_state(hardcore_bh(1.0, 0.2), SmallLattice(2, 2), 0.5, 1e-2)
        assert_allclose(rho, rho.conj().T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-10 * np.max(np.abs(rho))

    def test_vectorized_dimension_cap(self):
        with pytest.raises(OracleArgumentError):
            vectorized_trotter_state(hardcore_bh(1.0, 0.0), SmallLattice(2, 4), 0.1, 0.01)

    def test_step_must_be_positive(self):
        with pytest.raises(OracleArgumentError):
            trotterized_thermal_state(ising_model(), SmallLattice(1, 2), 0.1, 0.0)
