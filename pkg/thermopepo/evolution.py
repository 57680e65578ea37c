# thermopepo/evolution.py
"""
Trotter gates and the simple-update anneal.

One gate built at step δ evolves ket and bra by e^{-δh} each, so the anneal
builds its gate at δ = Δβ/2 and a full sweep over the four bonds advances the
state e^{-βH/2} 𝕀 e^{-βH/2} by one slice Δβ.
"""
import logging
import time
from dataclasses import replace
from typing import Iterator, Optional

import numpy as np
import scipy.linalg

from thermopepo.config import config
from thermopepo.datastructures import AnnealSchedule, AnnealSnapshot, TwoSiteGate
from thermopepo.exceptions import ModelError, NumericalError, TensorArgumentError
from thermopepo.models import Model, hermiticity_error
from thermopepo.tensor_core import DenseTensor, truncated_svd
from thermopepo.thermal_pepo import (
    BOND_ENDS, LEG_BONDS, SITE_LABELS, Bond, Sublattice, VectorizedPepo, hermiticity_deviation,
)

HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-10
REFERENCE_TOL = 1e-8


def bond_exponential(model: Model, delta_beta: float) -> np.ndarray:
    """exp(-δ h) of the bond term by Hermitian eigendecomposition, as a d²×d² matrix."""
    h = model.bond_matrix
    deviation = hermiticity_error(h)
    if deviation > HERMITIAN_TOL:
        raise ModelError(f"bond term of {model.name} is not Hermitian (deviation {deviation:.3e})")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-delta_beta * w)) @ v.conj().T


def build_gate(model: Model, delta_beta: float) -> TwoSiteGate:
    if delta_beta < 0:
        raise TensorArgumentError(f"delta_beta must be non-negative, got {delta_beta}")
    d = model.d
    g = bond_exponential(model, delta_beta).reshape(d, d, d, d)
    # (k1' k2' k1 k2) x (b1' b2' b1 b2) -> ((k1' b1'), (k2' b2'), (k1 b1), (k2 b2))
    gate = np.einsum('pqrs,tuvw->ptqurvsw', g, g.conj()).reshape(d * d, d * d, d * d, d * d)
    return TwoSiteGate(tensor=DenseTensor(gate), delta_beta=float(delta_beta), local_dim=d)


def _pseudo_inverse(weights: np.ndarray, floor: float) -> np.ndarray:
    inverse = np.zeros_like(weights)
    keep = weights > floor
    inverse[keep] = 1.0 / weights[keep]
    return inverse


def _open_site(p: VectorizedPepo, sub: Sublattice, leg: int) -> tuple[np.ndarray, list[int], list[np.ndarray]]:
    """
    Site tensor with environment weights absorbed, arranged as
    (env1, env2, env3, k·b, bond). Returns it with the environment leg
    numbers and their weights.
    """
    data = p.site(sub).data
    d = p.d
    env_legs = [j for j in range(4) if j != leg]
    env_weights = [p.lambdas[LEG_BONDS[sub][j]] for j in env_legs]
    for j, weights in zip(env_legs, env_weights):
        shape = [1] * 6
        shape[2 + j] = len(weights)
        data = data * weights.reshape(shape)
    data = data.reshape((d * d,) + data.shape[2:])
    order = [1 + j for j in env_legs] + [0, 1 + leg]
    return data.transpose(order), env_legs, env_weights


def _close_site(block: np.ndarray, env_legs: list[int], env_weights: list[np.ndarray],
                d: int, floor: float) -> np.ndarray:
    """Inverse of `_open_site`: strips the environment weights and restores (k, b, u, r, dn, l)."""
    for axis, weights in enumerate(env_weights):
        shape = [1] * block.ndim
        shape[axis] = len(weights)
        block = block * _pseudo_inverse(weights, floor).reshape(shape)
    leg = ({0, 1, 2, 3} - set(env_legs)).pop()
    source = {1 + j: axis for axis, j in enumerate(env_legs)}
    source[0] = 3
    source[1 + leg] = 4
    block = block.transpose([source[i] for i in range(5)])
    site = block.reshape((d, d) + block.shape[1:])
    scale = np.max(np.abs(site))
    if not np.isfinite(scale) or scale == 0:
        raise NumericalError("site tensor vanished or diverged in simple update")
    return site / scale


def _swap_ket_bra(block: np.ndarray, axis: int, d: int) -> np.ndarray:
    """Antiunitary ket↔bra exchange on the fused physical axis: conj(X[.., (b k), ..])."""
    shape = block.shape
    split = shape[:axis] + (d, d) + shape[axis + 1:]
    return np.swapaxes(block.reshape(split), axis, axis + 1).reshape(shape).conj()


def _degenerate_blocks(s: np.ndarray) -> Iterator[tuple[int, int]]:
    start = 0
    while start < len(s):
        stop = start + 1
        while stop < len(s) and s[start] - s[stop] <= DEGENERACY_TOL * s[0]:
            stop += 1
        yield start, stop
        start = stop


def _hermitian_gauge(u: np.ndarray, s: np.ndarray, vh: np.ndarray, d: int,
                     keep: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Rotates singular vectors inside each degenerate block so that every column
    of U and every row of V† is invariant under the ket↔bra exchange H.
    W = U† H(U) is symmetric unitary on a complete block, and U √W is a fixed
    point of H.

    `u` and `vh` must hold the untruncated spectrum. When `keep` cuts through a
    block, the block is turned by a real rotation so that its leading column
    is the projection of the uniform vector; that is the combination the
    truncation retains. Real rotations preserve H-invariance.
    """
    left = u.reshape(-1, len(s)).copy()
    mirrored = _swap_ket_bra(u, u.ndim - 2, d).reshape(-1, len(s))
    right = vh.reshape(len(s), -1).copy()
    uniform = np.ones(left.shape[0]) / np.sqrt(left.shape[0])
    for start, stop in _degenerate_blocks(s):
        block = slice(start, stop)
        w = left[:, block].conj().T @ mirrored[:, block]
        x = np.sqrt(w) if w.shape == (1, 1) else scipy.linalg.sqrtm(w)
        left[:, block] = left[:, block] @ x
        right[block, :] = x.conj().T @ right[block, :]
        if keep is not None and start < keep < stop:
            # overlaps of H-invariant vectors with an H-invariant vector are real
            overlap = (left[:, block].conj().T @ uniform).real
            if np.linalg.norm(overlap) > REFERENCE_TOL:
                rotation, _ = np.linalg.qr(np.column_stack([overlap, np.eye(stop - start)]))
                left[:, block] = left[:, block] @ rotation
                right[block, :] = rotation.T @ right[block, :]
            else:
                logging.debug(f"SIMPLE UPDATE: degenerate block {start}:{stop} is orthogonal to the uniform vector")
    return left.reshape(u.shape), right.reshape(vh.shape)


def simple_update_bond(
    p: VectorizedPepo,
    gate: TwoSiteGate,
    bond: Bond,
    cutoff: Optional[float] = None,
    floor: Optional[float] = None,
) -> tuple[VectorizedPepo, float]:
    """Applies `gate` across `bond` and truncates back to p.d_max; returns the state and the SVD error."""
    cutoff = config.SVD_CUTOFF if cutoff is None else cutoff
    floor = config.LAMBDA_FLOOR if floor is None else floor
    bond = Bond(bond)
    d = p.d
    if gate.local_dim != d:
        raise TensorArgumentError(f"gate acts on d={gate.local_dim}, state has d={d}")

    first, first_leg, second, second_leg = BOND_ENDS[bond]
    x, x_legs, x_weights = _open_site(p, first, first_leg)
    y, y_legs, y_weights = _open_site(p, second, second_leg)

    theta = np.einsum('abcpz,z,efgqz,PQpq->abcPefgQ', x, p.lambdas[bond], y, gate.tensor.data, optimize=True)
    # full spectrum first: the ket↔bra gauge needs complete degenerate blocks
    full_rank = min(int(np.prod(theta.shape[:4])), int(np.prod(theta.shape[4:])))
    result = truncated_svd(DenseTensor(theta), ([0, 1, 2, 3], [4, 5, 6, 7]), max_rank=full_rank, cutoff=cutoff)
    s = result.singular_values
    if not s[0] > 0:
        raise NumericalError(f"gate annihilated bond {bond.value}", beta=p.beta)

    keep = min(p.d_max, len(s))
    u, vh = _hermitian_gauge(result.left_isometry.data, s, result.right_isometry.data, d, keep=keep)
    spectrum = np.concatenate([s, result.discarded])
    error = float(np.linalg.norm(spectrum[keep:]) / np.linalg.norm(spectrum))
    u, s, vh = u[..., :keep], s[:keep], vh[:keep]

    new_x = _close_site(u, x_legs, x_weights, d, floor)
    new_y = _close_site(np.moveaxis(vh, 0, -1), y_legs, y_weights, d, floor)

    updated = p.with_sites(
        sites={first: DenseTensor(new_x, SITE_LABELS), second: DenseTensor(new_y, SITE_LABELS)},
        lambdas={bond: (s / s[0]).real.astype(float)},
    )
    return updated, error


def anneal(
    p: VectorizedPepo,
    model: Model,
    schedule: AnnealSchedule,
    d_max: Optional[int] = None,
    cutoff: Optional[float] = None,
    floor: Optional[float] = None,
    hermiticity_warn: Optional[float] = None,
) -> Iterator[AnnealSnapshot]:
    """
    Sweeps the schedule from p.beta (0, or a resumed snapshot) and yields a
    snapshot at every checkpoint. Checkpoints at or below the starting slice
    are skipped.
    """
    hermiticity_warn = config.HERMITICITY_WARN if hermiticity_warn is None else hermiticity_warn
    if p.d != model.d:
        raise TensorArgumentError(f"state has d={p.d}, model {model.name} has d={model.d}")
    if d_max is not None:
        if d_max < 1:
            raise TensorArgumentError(f"d_max must be >= 1, got {d_max}")
        p = replace(p, d_max=int(d_max))

    gate = build_gate(model, schedule.delta_beta / 2)
    start = int(round(p.beta / schedule.delta_beta))
    pending = [(k, b) for k, b in schedule.checkpoint_slices() if k > start]
    if not pending:
        logging.info(f"ANNEAL: nothing to do, state already at beta={p.beta:.6g}")
        return

    logging.info(f"ANNEAL: {model.name} from slice {start} to {pending[-1][0]} "
                 f"(delta_beta={schedule.delta_beta}, D={p.d_max}, {len(pending)} checkpoints)")
    clock = time.perf_counter()
    err_sum, err_max = 0.0, 0.0
    step = start
    for target, requested in pending:
        while step < target:
            step += 1
            beta = step * schedule.delta_beta
            try:
                for bond in schedule.sweep_order:
                    p, error = simple_update_bond(p, gate, bond, cutoff=cutoff, floor=floor)
                    err_sum += error
                    err_max = max(err_max, error)
            except NumericalError as e:
                raise NumericalError(f"anneal failed: {e}", beta=beta) from e
            p = replace(p, beta=beta, step=step)

        if not (p.site_a.is_finite() and p.site_b.is_finite()):
            raise NumericalError("non-finite site tensor", beta=p.beta)
        deviation = hermiticity_deviation(p)
        warnings = []
        if deviation > hermiticity_warn:
            message = f"hermiticity deviation {deviation:.3e} exceeds {hermiticity_warn:.1e}"
            logging.warning(f"ANNEAL: {message} at beta={p.beta:.6g}")
            warnings.append(message)
        wall = time.perf_counter() - clock
        logging.info(f"ANNEAL: checkpoint beta={p.beta:.6g} (slice {step}), trunc_err sum={err_sum:.3e} "
                     f"max={err_max:.3e}, herm_dev={deviation:.3e}, {wall:.2f}s")
        yield AnnealSnapshot(
            beta=p.beta, requested_beta=requested, step=step, pepo=p,
            trunc_err_sum=err_sum, trunc_err_max=err_max, herm_dev=deviation,
            wall_time=wall, warnings=tuple(warnings),
        )
        err_sum, err_max = 0.0, 0.0

    logging.info(f"ANNEAL: finished at beta={p.beta:.6g} after {time.perf_counter() - clock:.2f}s")
