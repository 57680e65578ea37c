# thermopepo/datastructures.py
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from thermopepo.exceptions import ConfigError
from thermopepo.tensor_core import DenseTensor
from thermopepo.thermal_pepo import (
    SWEEP_ORDER, Bond, VectorizedPepo, devectorize_two_site, vectorize_two_site,
)


@dataclass(frozen=True, eq=False)
class TwoSiteGate:
    """Vectorized Trotter gate g ⊗ conj(g) with axes (out1, out2, in1, in2), each of extent d²."""
    tensor: DenseTensor
    delta_beta: float
    local_dim: int

    @property
    def matrix(self) -> np.ndarray:
        n = self.local_dim ** 4
        return self.tensor.data.reshape(n, n)

    def apply_two_site(self, rho: np.ndarray) -> np.ndarray:
        """Acts on a two-site operator ρ[(k1 k2), (b1 b2)] through its vectorized form."""
        d = self.local_dim
        vec = vectorize_two_site(rho, d).reshape(-1)
        return devectorize_two_site((self.matrix @ vec).reshape(d * d, d * d), d)


@dataclass(frozen=True)
class AnnealSchedule:
    """Slices of width delta_beta up to beta_max; checkpoints snap to the nearest slice."""
    delta_beta: float
    beta_max: float
    checkpoints: tuple[float, ...] = ()
    sweep_order: tuple[Bond, ...] = SWEEP_ORDER

    def __post_init__(self):
        object.__setattr__(self, 'checkpoints', tuple(float(b) for b in self.checkpoints))
        object.__setattr__(self, 'sweep_order', tuple(Bond(b) for b in self.sweep_order))
        if not self.delta_beta > 0 or not self.beta_max > 0:
            raise ConfigError(f"delta_beta and beta_max must be positive, got {self.delta_beta}, {self.beta_max}")
        if sorted(self.sweep_order) != sorted(Bond):
            raise ConfigError(f"sweep order {self.sweep_order} is not a permutation of the four bonds")
        if list(self.checkpoints) != sorted(self.checkpoints):
            raise ConfigError(f"checkpoints must be ascending: {self.checkpoints}")
        if any(b <= 0 or self.slice_of(b) > self.n_slices for b in self.checkpoints):
            raise ConfigError(f"checkpoints must lie in (0, {self.beta_max}]")

    @property
    def n_slices(self) -> int:
        return int(round(self.beta_max / self.delta_beta))

    def slice_of(self, beta: float) -> int:
        return max(1, int(round(beta / self.delta_beta)))

    def checkpoint_slices(self) -> list[tuple[int, float]]:
        """(slice, requested β) per checkpoint, or just the final slice if none were given."""
        if not self.checkpoints:
            return [(self.n_slices, self.beta_max)]
        return [(self.slice_of(b), b) for b in self.checkpoints]


@dataclass(frozen=True, eq=False)
class AnnealSnapshot:
    """One checkpoint of an anneal: the state and what the evolution cost to get there."""
    beta: float
    requested_beta: float
    step: int
    pepo: VectorizedPepo
    trunc_err_sum: float
    trunc_err_max: float
    herm_dev: float
    wall_time: float
    warnings: tuple[str, ...] = ()

    def runlog_row(self) -> dict:
        return {
            'beta': self.beta,
            'requested_beta': self.requested_beta,
            'slice': self.step,
            'trunc_err_sum': self.trunc_err_sum,
            'trunc_err_max': self.trunc_err_max,
            'herm_dev': self.herm_dev,
            'wall_time': self.wall_time,
            'warnings': '; '.join(self.warnings),
        }


@dataclass
class ObservableRecord:
    """Measured one-site quantities at one inverse temperature."""
    beta: float
    values: dict[str, float]
    meta: dict = field(default_factory=dict)
    per_sublattice: dict[str, dict[str, complex]] = field(default_factory=dict)
    temperature: Optional[float] = None

    def __post_init__(self):
        if self.temperature is None:
            self.temperature = 1.0 / self.beta if self.beta > 0 else float('inf')

    def get(self, name: str, default: float = float('nan')) -> float:
        return self.values.get(name, default)


@dataclass
class ScanPoint:
    """One (μ, T) result of a parameter scan; `error` is set when the point failed."""
    mu: float
    temperature: float
    bond_dim: int
    record: Optional[ObservableRecord] = None
    snapped_beta: Optional[float] = None
    snapshot: Optional[AnnealSnapshot] = None
    error: Optional[str] = None
