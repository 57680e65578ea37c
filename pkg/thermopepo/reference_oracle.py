# thermopepo/reference_oracle.py
"""
Dense thermal states on small open-boundary lattices.

Sites are numbered row-major, i = r * cols + c. Bonds are oriented like the
infinite checkerboard: a horizontal bond whose left site has even r + c is an
A_RIGHT bond, otherwise B_RIGHT; vertical bonds follow the same rule with
A_DOWN / B_DOWN. Edge sites touch fewer than four bonds, so the one-site
pieces the bond terms carry are topped up to their full weight.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from thermopepo.exceptions import OracleArgumentError
from thermopepo.models import COORDINATION, Model
from thermopepo.tensor_core import DTYPE
from thermopepo.thermal_pepo import SWEEP_ORDER, Bond

MAX_DIMENSION = 4096

SiteIndex = Union[int, Sequence[int]]


@dataclass(frozen=True)
class SmallLattice:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise OracleArgumentError(f"lattice must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def dimension(self, d: int) -> int:
        return d ** self.n_sites

    def bonds(self) -> list[tuple[int, int, Bond]]:
        bonds = []
        for r in range(self.rows):
            for c in range(self.cols):
                even = (r + c) % 2 == 0
                if c + 1 < self.cols:
                    bonds.append((r * self.cols + c, r * self.cols + c + 1, Bond.A_RIGHT if even else Bond.B_RIGHT))
                if r + 1 < self.rows:
                    bonds.append((r * self.cols + c, (r + 1) * self.cols + c, Bond.A_DOWN if even else Bond.B_DOWN))
        return bonds

    def coordination(self, site: int) -> int:
        return sum(site in (i, j) for i, j, _ in self.bonds())

    def ordered_bonds(self, sweep_order: Sequence[Bond] = SWEEP_ORDER) -> list[tuple[int, int, Bond]]:
        rank = {Bond(b): n for n, b in enumerate(sweep_order)}
        return sorted(self.bonds(), key=lambda bond: rank[bond[2]])


def _check_dimension(model: Model, lat: SmallLattice, cap: int = MAX_DIMENSION) -> int:
    dim = lat.dimension(model.d)
    if dim > cap:
        raise OracleArgumentError(f"{lat.rows}x{lat.cols} lattice with d={model.d} has dimension {dim} > {cap}")
    return dim


def _sites(site: SiteIndex) -> tuple[int, ...]:
    return (int(site),) if np.isscalar(site) else tuple(int(s) for s in site)


def _embed(op: np.ndarray, sites: tuple[int, ...], d: int, n: int) -> np.ndarray:
    """Operator acting on `sites` (in that order) lifted to the full n-site space."""
    k = len(sites)
    if len(set(sites)) != k or any(not 0 <= s < n for s in sites):
        raise OracleArgumentError(f"invalid sites {sites} for a {n}-site lattice")
    op = np.asarray(op, dtype=DTYPE)
    if op.shape != (d ** k, d ** k):
        raise OracleArgumentError(f"operator shape {op.shape} does not act on {k} site(s) of dimension {d}")
    rest = [s for s in range(n) if s not in sites]
    order = list(sites) + rest
    full = np.kron(op, np.eye(d ** len(rest), dtype=DTYPE)).reshape([d] * (2 * n))
    inverse = list(np.argsort(order))
    full = full.transpose(inverse + [n + i for i in inverse])
    return full.reshape(d ** n, d ** n)


def _one_site_correction(model: Model, lat: SmallLattice, site: int) -> float:
    return 1.0 - lat.coordination(site) / COORDINATION


def lattice_hamiltonian(model: Model, lat: SmallLattice) -> np.ndarray:
    _check_dimension(model, lat)
    d, n = model.d, lat.n_sites
    h = np.zeros((d ** n, d ** n), dtype=DTYPE)
    for i, j, _ in lat.bonds():
        h += _embed(model.bond_matrix, (i, j), d, n)
    for site in range(n):
        weight = _one_site_correction(model, lat, site)
        if weight:
            h += weight * _embed(model.one_site_term, (site,), d, n)
    return h


def thermal_state(model: Model, lat: SmallLattice, beta: float) -> np.ndarray:
    """Unnormalized e^{-βH}, shifted by the ground energy."""
    w, v = np.linalg.eigh(lattice_hamiltonian(model, lat))
    return (v * np.exp(-beta * (w - w.min()))) @ v.conj().T


def trotter_slice(model: Model, lat: SmallLattice, delta: float,
                  sweep_order: Sequence[Bond] = SWEEP_ORDER) -> np.ndarray:
    """One slice of the bond-ordered product formula: corrections · Π_b e^{-δ h_b}."""
    _check_dimension(model, lat)
    d, n = model.d, lat.n_sites
    w, v = np.linalg.eigh(model.bond_matrix)
    gate = (v * np.exp(-delta * w)) @ v.conj().T
    product = np.eye(d ** n, dtype=DTYPE)
    for i, j, _ in lat.ordered_bonds(sweep_order):
        product = _embed(gate, (i, j), d, n) @ product
    for site in range(n):
        weight = _one_site_correction(model, lat, site)
        if weight:
            product = _embed(scipy.linalg.expm(-delta * weight * model.one_site_term), (site,), d, n) @ product
    return product


def trotterized_thermal_state(model: Model, lat: SmallLattice, beta: float, delta_beta: float,
                              sweep_order: Sequence[Bond] = SWEEP_ORDER) -> np.ndarray:
    """M 𝕀 M† with M the product formula at Δβ/2 applied round(β/Δβ) times, as in the anneal."""
    if not delta_beta > 0:
        raise OracleArgumentError(f"delta_beta must be positive, got {delta_beta}")
    m = int(round(beta / delta_beta))
    half = np.linalg.matrix_power(trotter_slice(model, lat, delta_beta / 2, sweep_order), m)
    return half @ half.conj().T


def vectorized_trotter_state(model: Model, lat: SmallLattice, beta: float, delta_beta: float,
                             sweep_order: Sequence[Bond] = SWEEP_ORDER) -> np.ndarray:
    """Same state as `trotterized_thermal_state`, evolved as vec(ρ) under the superoperator P ⊗ conj(P)."""
    dim = _check_dimension(model, lat, cap=int(np.sqrt(MAX_DIMENSION)))
    m = int(round(beta / delta_beta))
    step = trotter_slice(model, lat, delta_beta / 2, sweep_order)
    superoperator = np.kron(step, step.conj())
    vec = np.linalg.matrix_power(superoperator, m) @ np.eye(dim, dtype=DTYPE).reshape(-1)
    return vec.reshape(dim, dim)


def _expectation(rho: np.ndarray, model: Model, lat: SmallLattice, op: np.ndarray, site: SiteIndex) -> float:
    full = _embed(op, _sites(site), model.d, lat.n_sites)
    return float((np.trace(full @ rho) / np.trace(rho)).real)


def exact_thermal_expectation(model: Model, lat: SmallLattice, beta: float, op: np.ndarray,
                              site: SiteIndex) -> float:
    return _expectation(thermal_state(model, lat, beta), model, lat, op, site)


def trotterized_thermal_expectation(model: Model, lat: SmallLattice, beta: float, delta_beta: float,
                                    op: np.ndarray, site: SiteIndex,
                                    sweep_order: Optional[Sequence[Bond]] = None) -> float:
    rho = trotterized_thermal_state(model, lat, beta, delta_beta, sweep_order or SWEEP_ORDER)
    return _expectation(rho, model, lat, op, site)


def trotter_slice_error(model: Model, lat: SmallLattice, delta_beta: float,
                        sweep_order: Sequence[Bond] = SWEEP_ORDER) -> float:
    """‖e^{-ΔβH} - slice(Δβ)‖₂ / ‖e^{-ΔβH}‖₂ for one full-width slice."""
    exact = scipy.linalg.expm(-delta_beta * lattice_hamiltonian(model, lat))
    approx = trotter_slice(model, lat, delta_beta, sweep_order)
    return float(np.linalg.norm(exact - approx, 2) / np.linalg.norm(exact, 2))
