# thermopepo/tensor_core.py
"""
Dense tensor algebra shared by every other module.

All tensors hold complex128 elements in row-major (C) order. The vectorization
index math in `thermal_pepo` relies on this ordering: a pair of indices
(i, j) with extents (n, m) fuses into i * m + j.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from thermopepo.exceptions import NumericalError, TensorArgumentError, TensorDimensionError

DTYPE = np.complex128


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Complex tensor with optional per-index labels."""
    data: np.ndarray
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        array = np.ascontiguousarray(self.data, dtype=DTYPE)
        object.__setattr__(self, 'data', array)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != array.ndim:
                raise TensorArgumentError(f"{len(labels)} labels given for a rank-{array.ndim} tensor")
            object.__setattr__(self, 'labels', labels)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def index_of(self, label: str) -> int:
        if self.labels is None or label not in self.labels:
            raise TensorArgumentError(f"no index labelled {label!r}")
        return self.labels.index(label)

    def permute(self, order: Sequence[int]) -> "DenseTensor":
        order = tuple(order)
        if sorted(order) != list(range(self.rank)):
            raise TensorArgumentError(f"{order} is not a permutation of {self.rank} indices")
        labels = None if self.labels is None else tuple(self.labels[i] for i in order)
        return DenseTensor(np.transpose(self.data, order), labels)

    def reshape(self, shape: Sequence[int], labels: Optional[Sequence[str]] = None) -> "DenseTensor":
        shape = tuple(int(n) for n in shape)
        if int(np.prod(shape)) != self.size:
            raise TensorDimensionError(f"cannot reshape {self.shape} into {shape}")
        return DenseTensor(self.data.reshape(shape), labels)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))


@dataclass(frozen=True, eq=False)
class SvdResult:
    left_isometry: DenseTensor
    singular_values: np.ndarray
    right_isometry: DenseTensor
    truncation_error: float
    discarded: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def kept(self) -> int:
        return len(self.singular_values)


def contract(a: DenseTensor, b: DenseTensor, pairs: Sequence[tuple[int, int]]) -> DenseTensor:
    """Sum over paired indices; free indices keep the order (a's, then b's)."""
    pairs = [(int(i), int(j)) for i, j in pairs]
    axes_a = [i for i, _ in pairs]
    axes_b = [j for _, j in pairs]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise TensorArgumentError(f"repeated index in contraction pairs {pairs}")
    for i, j in pairs:
        if not (0 <= i < a.rank and 0 <= j < b.rank):
            raise TensorArgumentError(f"index pair {(i, j)} out of range for ranks {a.rank}, {b.rank}")
        if a.shape[i] != b.shape[j]:
            raise TensorDimensionError(
                f"extent mismatch on pair {(i, j)}: {a.shape[i]} != {b.shape[j]}"
            )
    data = np.tensordot(a.data, b.data, axes=(axes_a, axes_b))
    labels = None
    if a.labels is not None and b.labels is not None:
        labels = tuple(l for n, l in enumerate(a.labels) if n not in axes_a) + \
                 tuple(l for n, l in enumerate(b.labels) if n not in axes_b)
    return DenseTensor(data, labels)


def _svd(matrix: np.ndarray):
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver='gesdd')
    except (np.linalg.LinAlgError, ValueError):
        logging.warning("gesdd did not converge, retrying SVD with lapack_driver='gesvd'")
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver='gesvd')


def truncated_svd(
    t: DenseTensor,
    split: tuple[Sequence[int], Sequence[int]],
    max_rank: int,
    cutoff: float = 0.0,
) -> SvdResult:
    """
    Matricize `t` with the row indices `split[0]` and column indices `split[1]`,
    keep at most `max_rank` singular values and drop those below
    `cutoff * s_max`. The left isometry has shape (*row extents, k) and the
    right isometry (k, *column extents).
    """
    rows, cols = [list(group) for group in split]
    if not rows or not cols or sorted(rows + cols) != list(range(t.rank)):
        raise TensorArgumentError(f"split {split} does not partition {t.rank} indices into two groups")
    if max_rank < 1:
        raise TensorArgumentError(f"max_rank must be >= 1, got {max_rank}")
    if cutoff < 0:
        raise TensorArgumentError(f"cutoff must be non-negative, got {cutoff}")
    if not t.is_finite():
        raise NumericalError("non-finite elements passed to truncated_svd")

    row_shape = [t.shape[i] for i in rows]
    col_shape = [t.shape[i] for i in cols]
    matrix = np.transpose(t.data, rows + cols).reshape(int(np.prod(row_shape)), int(np.prod(col_shape)))
    u, s, vh = _svd(matrix)

    keep = min(max_rank, len(s))
    if s[0] > 0:
        keep = max(1, min(keep, int(np.count_nonzero(s >= cutoff * s[0]))))
    else:
        keep = 1

    total = float(np.sqrt(np.sum(s ** 2)))
    discarded = s[keep:]
    error = float(np.sqrt(np.sum(discarded ** 2)) / total) if total > 0 else 0.0

    left = DenseTensor(u[:, :keep].reshape(row_shape + [keep]))
    right = DenseTensor(vh[:keep, :].reshape([keep] + col_shape))
    return SvdResult(left, s[:keep].copy(), right, min(error, 1.0), discarded.copy())
