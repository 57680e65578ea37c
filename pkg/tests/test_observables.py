import logging

import numpy as np
import pytest

from thermopepo.ctm_env import ctm_converge
from thermopepo.exceptions import EnvironmentDegenerateError, TensorDimensionError
from thermopepo.models import hardcore_bh, ising_model, softcore_bh
from thermopepo.observables import BETA_C, expect_one_site, measure, onsager_magnetization
from thermopepo.tensor_core import DenseTensor
from thermopepo.thermal_pepo import SITE_LABELS, Bond, VectorizedPepo, identity_pepo

SZ = np.diag([1.0, -1.0])


class TestExpectOneSite:
    def test_maximally_mixed(self):
        assert expect_one_site(np.eye(2) / 2, SZ) == pytest.approx(0.0)

    def test_occupied_state(self):
        rdm = np.diag([0.0, 1.0, 0.0])
        assert expect_one_site(rdm, np.diag([0.0, 1.0, 2.0])) == pytest.approx(1.0)

    def test_population_imbalance(self):
        # σᶻ = diag(1, -1): the |1> weight 0.75 outweighs |0> by 0.5
        value = expect_one_site(np.diag([0.25, 0.75]), SZ)
        assert value.real == pytest.approx(-0.5)
        assert abs(value) == pytest.approx(0.5)

    def test_unnormalized_input(self):
        assert expect_one_site(np.diag([2.0, 6.0]), SZ) == pytest.approx(-0.5)

    def test_vanishing_trace(self):
        with pytest.raises(EnvironmentDegenerateError):
            expect_one_site(np.zeros((2, 2)), SZ)

    def test_shape_mismatch(self):
        with pytest.raises(TensorDimensionError):
            expect_one_site(np.eye(2), np.eye(3))


class TestMeasure:
    def test_infinite_temperature_hardcore(self):
        p = identity_pepo(2)
        record = measure(hardcore_bh(1.0, 0.0), ctm_converge(p, 4), p, 1e-3)
        assert record.values['density'] == pytest.approx(0.5)
        assert record.values['sf_param'] == pytest.approx(0.0)
        assert record.values['var_n'] == pytest.approx(0.25)
        assert record.meta['converged'] and not record.meta['sublattice_flag']
        assert record.temperature * record.beta == pytest.approx(1.0)

    def test_infinite_temperature_softcore(self):
        p = identity_pepo(3)
        record = measure(softcore_bh(1.0, 0.0, 10.0), ctm_converge(p, 4), p, 1e-3)
        assert record.values['density'] == pytest.approx(1.0)
        assert record.values['var_n'] == pytest.approx(2.0 / 3.0)

    def test_infinite_temperature_ising(self):
        p = identity_pepo(2)
        record = measure(ising_model(), ctm_converge(p, 4), p, 1e-3)
        assert record.values['magnetization'] == pytest.approx(0.0)
        assert set(record.per_sublattice) == {'A', 'B'}
        assert record.meta['chi'] == 4 and record.meta['D'] == 1

    def test_sublattice_mismatch_is_flagged(self, caplog):
        empty = np.diag([1.0, 0.0]).reshape(2, 2, 1, 1, 1, 1)
        full = np.diag([0.0, 1.0]).reshape(2, 2, 1, 1, 1, 1)
        p = VectorizedPepo(local_dim=2, site_a=DenseTensor(empty, SITE_LABELS),
                           site_b=DenseTensor(full, SITE_LABELS),
                           lambdas={bond: np.ones(1) for bond in Bond}, d_max=1)
        with caplog.at_level(logging.WARNING):
            record = measure(hardcore_bh(1.0, 0.0), ctm_converge(p, 4), p, 1.0)
        assert record.meta['sublattice_flag']
        assert record.meta['sublattice_mismatch'] == pytest.approx(2.0)
        assert record.values['density'] == pytest.approx(0.5)
        assert 'sublattices disagree' in caplog.text


class TestOnsager:
    def test_disordered_phase(self):
        assert onsager_magnetization(0.3) == 0.0
        assert onsager_magnetization(BETA_C) == 0.0

    def test_reference_value(self):
        assert onsager_magnetization(0.5) == pytest.approx(0.9113, abs=1e-4)

    def test_saturates(self):
        assert onsager_magnetization(3.0) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_and_continuous(self):
        betas = np.linspace(BETA_C + 1e-9, 1.0, 200)
        values = [onsager_magnetization(b) for b in betas]
        assert np.all(np.diff(values) >= 0)
        assert values[0] < 0.2
