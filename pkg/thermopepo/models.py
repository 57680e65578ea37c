# thermopepo/models.py
"""
Local operator data for the three lattice models.

Bond terms are d²×d² Hermitian matrices stored as (out1, out2, in1, in2)
tensors. One-site pieces (field, chemical potential, on-site repulsion) are
spread over the four bonds touching a site, so each bond carries 1/4 of the
one-site term of both of its ends.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from thermopepo.config import config
from thermopepo.exceptions import ModelError
from thermopepo.tensor_core import DTYPE, DenseTensor

COORDINATION = 4

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=DTYPE)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=DTYPE)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=DTYPE)
IDENTITY_2 = np.eye(2, dtype=DTYPE)


def _frozen(matrix: np.ndarray) -> np.ndarray:
    array = np.array(matrix, dtype=DTYPE)
    array.setflags(write=False)
    return array


def hermiticity_error(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


@dataclass(frozen=True, eq=False)
class Model:
    """A square-lattice model expressed through its bond term and local operators."""
    name: str
    local_dim: int
    two_site_term: DenseTensor
    one_site_term: np.ndarray
    observables: dict[str, np.ndarray]
    params: dict[str, float] = field(default_factory=dict)
    # physical contraction used to seed CTM boundaries; None means the trace
    boundary_seed: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return self.local_dim

    @property
    def bond_matrix(self) -> np.ndarray:
        d = self.local_dim
        return self.two_site_term.data.reshape(d * d, d * d)

    def observable(self, name: str) -> np.ndarray:
        try:
            return self.observables[name]
        except KeyError:
            raise KeyError(f"model {self.name!r} has no observable {name!r}; "
                           f"available: {sorted(self.observables)}") from None


def _build(name: str, bond: np.ndarray, one_site: np.ndarray, observables: dict,
           params: dict, seed: Optional[np.ndarray]) -> Model:
    d = one_site.shape[0]
    deviation = hermiticity_error(bond)
    if deviation > 1e-12:
        logging.warning(f"MODELS: {name} bond term deviates from Hermitian by {deviation:.3e}")
    return Model(
        name=name,
        local_dim=d,
        two_site_term=DenseTensor(bond.reshape(d, d, d, d)),
        one_site_term=_frozen(one_site),
        observables={key: _frozen(op) for key, op in observables.items()},
        params=dict(params),
        boundary_seed=None if seed is None else _frozen(seed),
    )


def split_one_site(one_site: np.ndarray) -> np.ndarray:
    """Bond share of a one-site term: (o⊗I + I⊗o) / 4."""
    eye = np.eye(one_site.shape[0], dtype=DTYPE)
    return (np.kron(one_site, eye) + np.kron(eye, one_site)) / COORDINATION


def ising_model(h_pin: Optional[float] = None) -> Model:
    """H = -Σ σᶻσᶻ - h_pin Σ σᶻ; the tiny pinning field picks the up branch."""
    h_pin = config.H_PIN if h_pin is None else float(h_pin)
    one_site = -h_pin * SIGMA_Z
    bond = -np.kron(SIGMA_Z, SIGMA_Z) + split_one_site(one_site)
    up = np.diag([1.0, 0.0]).astype(DTYPE)
    return _build(
        'ising', bond, one_site,
        observables={'sz': SIGMA_Z, 'sx': SIGMA_X},
        params={'h_pin': h_pin},
        seed=up,
    )


def bosonic_operators(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated annihilation and number operators on {|0>, ..., |d-1>}."""
    a = np.diag(np.sqrt(np.arange(1, d)), k=1).astype(DTYPE)
    n = np.diag(np.arange(d)).astype(DTYPE)
    return a, n


def _uniform_projector(d: int) -> np.ndarray:
    phi = np.ones(d, dtype=DTYPE) / np.sqrt(d)
    return np.outer(phi, phi.conj())


def hardcore_bh(J: float, mu: float) -> Model:
    """
    Hard-core bosons as a spin-1/2 XY model in the Fock basis {|0>, |1>}:
    h = -(J/2)(σˣσˣ + σʸσʸ) - (μ/8)(sᶻ⊗I + I⊗sᶻ) with sᶻ = 2n - I, which is
    -J(a†a + a a†) - μ n per site up to a constant.
    """
    a, n = bosonic_operators(2)
    sz = 2 * n - IDENTITY_2
    one_site = -(mu / 2) * sz
    hopping = -(J / 2) * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y))
    bond = hopping + split_one_site(one_site)
    return _build(
        'hardcore', bond, one_site,
        observables={'n': n, 'a': a, 'adag': a.conj().T, 'n2': n @ n, 'sz': sz},
        params={'J': float(J), 'mu': float(mu)},
        seed=_uniform_projector(2),
    )


def softcore_bh(J: float, mu: float, U: float) -> Model:
    """Bose-Hubbard model truncated to at most two bosons per site."""
    a, n = bosonic_operators(3)
    eye = np.eye(3, dtype=DTYPE)
    adag = a.conj().T
    one_site = -mu * n + (U / 2) * (n @ (n - eye))
    bond = -J * (np.kron(adag, a) + np.kron(a, adag)) + split_one_site(one_site)
    return _build(
        'softcore', bond, one_site,
        observables={'n': n, 'a': a, 'adag': adag, 'n2': n @ n},
        params={'J': float(J), 'mu': float(mu), 'U': float(U)},
        seed=_uniform_projector(3),
    )


MODEL_BUILDERS = {
    'ising': lambda p: ising_model(p.get('h_pin')),
    'hardcore': lambda p: hardcore_bh(p.get('J', 1.0), p.get('mu', 0.0)),
    'softcore': lambda p: softcore_bh(p.get('J', 1.0), p.get('mu', 0.0), p.get('U', 100.0)),
}


def build_model(name: str, params: dict) -> Model:
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(MODEL_BUILDERS)}") from None
    return builder(params)
