import textwrap

import numpy as np
import pytest

from thermopepo.datastructures import AnnealSchedule
from thermopepo.evolution import anneal
from thermopepo.models import hardcore_bh
from thermopepo.thermal_pepo import identity_pepo


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_config(tmp_path):
    """Writes a KEY=VALUE run document and returns its path."""
    def write(text: str, name: str = 'run.env'):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text).strip() + '\n', encoding='utf-8')
        return path
    return write


@pytest.fixture(scope='session')
def hardcore_state():
    """A short D=2 hard-core anneal; entangled enough to exercise every bond."""
    model = hardcore_bh(1.0, 0.3)
    schedule = AnnealSchedule(delta_beta=0.05, beta_max=0.5, checkpoints=(0.5,))
    snapshot = next(anneal(identity_pepo(2), model, schedule, d_max=2))
    return model, snapshot
