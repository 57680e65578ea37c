# thermopepo/thermal_pepo.py
"""
Vectorized PEPO on a two-sublattice (checkerboard) infinite square lattice.

Site tensors carry indices (k, b, u, r, dn, l): ket, bra, then the four bonds
clockwise from up. Bond weights live on the four inequivalent bonds of the
unit cell; A sits on even x+y, B on odd x+y, so every neighbour of A is B.

    A.u -- B_DOWN      A.r -- A_RIGHT     A.dn -- A_DOWN     A.l -- B_RIGHT
    B.u -- A_DOWN      B.r -- B_RIGHT     B.dn -- B_DOWN     B.l -- A_RIGHT

Vectorization follows the row-major convention of `tensor_core`:
vec(op)[s * d + s'] = op[s, s'], so that vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ).
"""
import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from thermopepo.exceptions import ConfigError, NumericalError, TensorArgumentError
from thermopepo.tensor_core import DTYPE, DenseTensor

CHECKPOINT_FORMAT = 'thermopepo-vectorized-pepo'
CHECKPOINT_VERSION = 1

SITE_LABELS = ('k', 'b', 'u', 'r', 'dn', 'l')


class Sublattice(str, Enum):
    A = 'A'
    B = 'B'

    @property
    def other(self) -> "Sublattice":
        return Sublattice.B if self is Sublattice.A else Sublattice.A


class Bond(str, Enum):
    A_RIGHT = 'A_RIGHT'
    A_DOWN = 'A_DOWN'
    B_RIGHT = 'B_RIGHT'
    B_DOWN = 'B_DOWN'


SWEEP_ORDER = (Bond.A_RIGHT, Bond.A_DOWN, Bond.B_RIGHT, Bond.B_DOWN)

# bond attached to legs (u, r, dn, l) of each sublattice
LEG_BONDS = {
    Sublattice.A: (Bond.B_DOWN, Bond.A_RIGHT, Bond.A_DOWN, Bond.B_RIGHT),
    Sublattice.B: (Bond.A_DOWN, Bond.B_RIGHT, Bond.B_DOWN, Bond.A_RIGHT),
}

# bond -> (first site, its leg, second site, its leg); legs numbered u=0, r=1, dn=2, l=3
BOND_ENDS = {
    Bond.A_RIGHT: (Sublattice.A, 1, Sublattice.B, 3),
    Bond.A_DOWN: (Sublattice.A, 2, Sublattice.B, 0),
    Bond.B_RIGHT: (Sublattice.B, 1, Sublattice.A, 3),
    Bond.B_DOWN: (Sublattice.B, 2, Sublattice.A, 0),
}


@dataclass(frozen=True, eq=False)
class VectorizedPepo:
    """Thermal state e^{-βH} in simple-update gauge: site tensors plus bond weights."""
    local_dim: int
    site_a: DenseTensor
    site_b: DenseTensor
    lambdas: dict[Bond, np.ndarray]
    d_max: int
    beta: float = 0.0
    step: int = 0

    @property
    def d(self) -> int:
        return self.local_dim

    def site(self, sublattice: Sublattice) -> DenseTensor:
        return self.site_a if Sublattice(sublattice) is Sublattice.A else self.site_b

    def with_sites(self, sites: dict, lambdas: dict, **changes) -> "VectorizedPepo":
        return replace(
            self,
            site_a=sites.get(Sublattice.A, self.site_a),
            site_b=sites.get(Sublattice.B, self.site_b),
            lambdas={**self.lambdas, **lambdas},
            **changes,
        )

    def bond_dims(self) -> dict[Bond, int]:
        return {bond: len(weights) for bond, weights in self.lambdas.items()}

    def check(self):
        """Raises if the weights or bond extents break the gauge invariants."""
        for bond, weights in self.lambdas.items():
            if np.any(weights <= 0) or np.any(np.diff(weights) > 1e-14) or abs(weights[0] - 1) > 1e-12:
                raise TensorArgumentError(f"bond {bond.value} weights not positive/descending/unit-max: {weights}")
        for sub in Sublattice:
            tensor = self.site(sub)
            if tensor.shape[:2] != (self.d, self.d):
                raise TensorArgumentError(f"site {sub.value} has physical shape {tensor.shape[:2]}")
            for leg, bond in enumerate(LEG_BONDS[sub]):
                if tensor.shape[2 + leg] != len(self.lambdas[bond]):
                    raise TensorArgumentError(
                        f"site {sub.value} leg {SITE_LABELS[2 + leg]} has extent {tensor.shape[2 + leg]}, "
                        f"bond {bond.value} has {len(self.lambdas[bond])} weights")
            if not tensor.is_finite():
                raise NumericalError(f"site {sub.value} has non-finite elements", beta=self.beta)


def vectorize(op: np.ndarray) -> np.ndarray:
    op = np.asarray(op, dtype=DTYPE)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise TensorArgumentError(f"expected a square operator, got shape {op.shape}")
    return op.reshape(-1).copy()


def devectorize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=DTYPE)
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise TensorArgumentError(f"vector of length {vec.size} is not a vectorized square operator")
    return vec.reshape(d, d).copy()


def vectorize_two_site(rho: np.ndarray, d: int) -> np.ndarray:
    """Two-site operator ρ[(k1 k2), (b1 b2)] -> R[(k1 b1), (k2 b2)]."""
    rho = np.asarray(rho, dtype=DTYPE).reshape(d, d, d, d)
    return rho.transpose(0, 2, 1, 3).reshape(d * d, d * d)


def devectorize_two_site(vec: np.ndarray, d: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=DTYPE).reshape(d, d, d, d)
    return vec.transpose(0, 2, 1, 3).reshape(d * d, d * d)


def identity_pepo(d: int, d_max: int = 2) -> VectorizedPepo:
    """Infinite-temperature state 𝕀: unit bond dimension, δ_{kb} on every site."""
    if d < 2:
        raise TensorArgumentError(f"local dimension must be >= 2, got {d}")
    site = DenseTensor(np.eye(d, dtype=DTYPE).reshape(d, d, 1, 1, 1, 1), SITE_LABELS)
    lambdas = {bond: np.ones(1) for bond in Bond}
    return VectorizedPepo(local_dim=d, site_a=site, site_b=site, lambdas=lambdas, d_max=d_max)


def exact_ising_pepo(beta: float) -> VectorizedPepo:
    """
    Exact D=2 PEPO of exp(β Σ σᶻσᶻ). Each link factor cosh β 𝕀 + sinh β σᶻσᶻ is
    split as Σ_k w_k P_k ⊗ P_k with P_0 = 𝕀, P_1 = σᶻ, and the four half-links
    around a site fuse into σᶻ raised to the number of odd legs.
    """
    if not beta > 0:
        raise TensorArgumentError(f"beta must be positive, got {beta}")
    z = np.array([1.0, -1.0])
    parity = np.indices((2, 2, 2, 2)).sum(axis=0)
    site = np.zeros((2, 2, 2, 2, 2, 2), dtype=DTYPE)
    for s in range(2):
        site[s, s] = z[s] ** parity
    weights = np.array([1.0, np.tanh(beta)])
    tensor = DenseTensor(site, SITE_LABELS)
    return VectorizedPepo(
        local_dim=2, site_a=tensor, site_b=tensor,
        lambdas={bond: weights.copy() for bond in Bond},
        d_max=2, beta=float(beta),
    )


def hermiticity_deviation(p: VectorizedPepo) -> float:
    """max over sublattices of ‖A[k,b] - conj(A[b,k])‖_F / ‖A‖_F."""
    worst = 0.0
    for sub in Sublattice:
        data = p.site(sub).data
        norm = np.linalg.norm(data)
        if norm == 0:
            continue
        swapped = np.swapaxes(data, 0, 1).conj()
        worst = max(worst, float(np.linalg.norm(data - swapped) / norm))
    return worst


def save_pepo(p: VectorizedPepo, path: str | Path, delta_beta: float | None = None) -> Path:
    """Writes a self-describing .npz snapshot: JSON header plus raw complex arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'd': p.d,
        'd_max': p.d_max,
        'beta': p.beta,
        'step': p.step,
        'delta_beta': delta_beta,
        'shapes': {sub.value: list(p.site(sub).shape) for sub in Sublattice},
        'bonds': [bond.value for bond in Bond],
    }
    arrays = {f'lambda_{bond.value}': p.lambdas[bond] for bond in Bond}
    with open(path, 'wb') as handle:
        np.savez(handle, header=np.array(json.dumps(header)),
                 site_A=p.site_a.data, site_B=p.site_b.data, **arrays)
    logging.info(f"Saved PEPO snapshot at beta={p.beta:.6g} (step {p.step}) to {path}")
    return path


def load_pepo(path: str | Path) -> tuple[VectorizedPepo, dict]:
    """Reads a snapshot written by `save_pepo`; returns the state and its header."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"snapshot {path} not found")
    with np.load(path, allow_pickle=False) as archive:
        try:
            header = json.loads(str(archive['header']))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"{path} is not a PEPO snapshot: {e}") from None
        if header.get('format') != CHECKPOINT_FORMAT or header.get('version') != CHECKPOINT_VERSION:
            raise ConfigError(f"{path}: unsupported snapshot format "
                              f"{header.get('format')!r} version {header.get('version')!r}")
        pepo = VectorizedPepo(
            local_dim=int(header['d']),
            site_a=DenseTensor(archive['site_A'], SITE_LABELS),
            site_b=DenseTensor(archive['site_B'], SITE_LABELS),
            lambdas={bond: np.array(archive[f'lambda_{bond.value}'], dtype=float) for bond in Bond},
            d_max=int(header['d_max']),
            beta=float(header['beta']),
            step=int(header['step']),
        )
    pepo.check()
    return pepo, header
