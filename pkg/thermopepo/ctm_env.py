# thermopepo/ctm_env.py
"""
Corner transfer matrices for the single-layer network of reduced site tensors.

The environment lives on a 2×2 periodic cell (A on even x+y, B on odd x+y).
Every corner C1..C4 and edge T1..T4 is labelled by its own lattice position,
so the one-site patch around site (x, y) reads

    C1(x-1,y-1)  T1(x,y-1)  C2(x+1,y-1)
    T4(x-1,y)    a(x,y)     T2(x+1,y)
    C4(x-1,y+1)  T3(x,y+1)  C3(x+1,y+1)

Legs run clockwise around the ring C1 T1 C2 T2 C3 T3 C4 T4, each tensor
listing (previous, [site], next):

    C1[s,e]  T1[w,s,e]  C2[w,s]  T2[n,w,s]  C3[n,w]  T3[e,n,w]  C4[e,n]  T4[s,e,n]

and reduced site tensors are a[u,r,dn,l]. With this ordering a 90° clockwise
turn of the lattice only relabels tensors, so the right, up and down moves
are the left move applied to the turned lattice.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from thermopepo.config import config
from thermopepo.exceptions import (
    EnvironmentDegenerateError, NumericalError, TensorArgumentError, TensorDimensionError,
)
from thermopepo.tensor_core import DTYPE, DenseTensor, truncated_svd
from thermopepo.thermal_pepo import LEG_BONDS, Sublattice, VectorizedPepo

PROJECTOR_CUTOFF = 1e-12
SINGULAR_FLOOR = 1e-14
TRACE_FLOOR = 1e-30

POSITIONS = ((0, 0), (1, 0), (0, 1), (1, 1))
SITE_POSITIONS = {Sublattice.A: (0, 0), Sublattice.B: (1, 0)}


def _at(x: int, y: int) -> tuple[int, int]:
    return x % 2, y % 2


def sublattice_at(position: tuple[int, int]) -> Sublattice:
    return Sublattice.A if sum(position) % 2 == 0 else Sublattice.B


@dataclass(frozen=True, eq=False)
class CtmEnvironment:
    """Corners and edges per cell position; corners[i][pos] is C(i+1) at pos."""
    corners: tuple[dict, dict, dict, dict]
    edges: tuple[dict, dict, dict, dict]
    chi: int
    converged: bool
    iterations: int
    delta: float

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for group in self.corners + self.edges for t in group.values())

    def corner_spectra(self) -> dict:
        return _spectra(self.corners, self.chi)


def _absorbed_site(p: VectorizedPepo, sublattice: Sublattice) -> np.ndarray:
    """Site tensor (k, b, u, r, dn, l) with √λ absorbed on every bond."""
    sublattice = Sublattice(sublattice)
    data = p.site(sublattice).data
    for leg, bond in enumerate(LEG_BONDS[sublattice]):
        shape = [1] * 6
        shape[2 + leg] = len(p.lambdas[bond])
        data = data * np.sqrt(p.lambdas[bond]).reshape(shape)
    return data


def reduced_site_tensor(p: VectorizedPepo, sublattice: Sublattice, op: Optional[np.ndarray] = None) -> DenseTensor:
    """Σ_{k,b} M[b,k] A[k,b,u,r,dn,l] with √λ on each bond; M is the identity when op is None."""
    data = _absorbed_site(p, sublattice)
    if op is None:
        reduced = np.einsum('kkurdl->urdl', data)
    else:
        op = np.asarray(op, dtype=DTYPE)
        if op.shape != (p.d, p.d):
            raise TensorDimensionError(f"operator has shape {op.shape}, expected {(p.d, p.d)}")
        reduced = np.einsum('bk,kburdl->urdl', op, data)
    return DenseTensor(reduced, ('u', 'r', 'dn', 'l'))


def _initial_environment(seeded: dict) -> tuple[list, list]:
    """Boundary tensors from seeded site tensors with outward legs closed on the leading bond component."""
    corners = [{}, {}, {}, {}]
    edges = [{}, {}, {}, {}]
    for q, a in seeded.items():
        corners[0][q] = a[0, :, :, 0].T
        edges[0][q] = a[0].transpose(2, 1, 0)
        corners[1][q] = a[0, 0].T
        edges[1][q] = a[:, 0].transpose(0, 2, 1)
        corners[2][q] = a[:, 0, 0, :]
        edges[2][q] = a[:, :, 0, :].transpose(1, 0, 2)
        corners[3][q] = a[:, :, 0, 0].T
        edges[3][q] = a[:, :, :, 0].transpose(2, 1, 0)
    for group in corners:
        for q in group:
            group[q] = _normalize_corner(group[q])
    for group in edges:
        for q in group:
            group[q] = _normalize_edge(group[q])
    return corners, edges


def _check_fit(corners, edges, p: VectorizedPepo):
    """Each edge's middle leg must match the bond extent of the site it faces."""
    # (edge index, offset from the edge to its site, site leg)
    faces = ((0, (0, 1), 0), (1, (-1, 0), 1), (2, (0, -1), 2), (3, (1, 0), 3))
    for i, (dx, dy), leg in faces:
        for q in POSITIONS:
            if q not in edges[i] or any(q not in group for group in corners):
                raise TensorDimensionError(f"environment has no tensors at cell position {q}")
            site_q = _at(q[0] + dx, q[1] + dy)
            bond = LEG_BONDS[sublattice_at(site_q)][leg]
            expected = len(p.lambdas[bond])
            extent = edges[i][q].shape[1]
            if extent != expected:
                raise TensorDimensionError(
                    f"edge T{i + 1} at {q} has middle extent {extent}, bond {bond.value} has {expected}")


def _normalize_corner(c: np.ndarray) -> np.ndarray:
    s = scipy.linalg.svdvals(c)
    if not np.all(np.isfinite(s)) or s[0] == 0:
        raise EnvironmentDegenerateError("corner matrix vanished or diverged")
    return c / s[0]


def _normalize_edge(t: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(t))
    if not np.isfinite(scale) or scale == 0:
        raise EnvironmentDegenerateError("edge tensor vanished or diverged")
    return t / scale


def _spectra(corners, chi: int) -> dict:
    spectra = {}
    for i, group in enumerate(corners):
        for q, c in group.items():
            s = np.sort(scipy.linalg.svdvals(c))[::-1][:chi]
            padded = np.zeros(chi)
            padded[:len(s)] = s / s[0] if s[0] > 0 else s
            spectra[(i, q)] = padded
    return spectra


def _spectra_distance(old: dict, new: dict) -> float:
    return max(float(np.linalg.norm(new[key] - old[key])) for key in new)


class _DirectionalCtm:
    """Mutable working copy of an environment; `left_move` then `rotate`, four times per iteration."""

    def __init__(self, sites: dict, corners: list, edges: list, chi: int):
        self.sites = dict(sites)
        self.corners = [dict(group) for group in corners]
        self.edges = [dict(group) for group in edges]
        self.chi = chi

    def _projectors(self, x: int, y: int) -> tuple[np.ndarray, np.ndarray]:
        """Projector pair for the cut between rows y and y+1 left of column x+1."""
        C1, C2, C3, C4 = self.corners
        T1, T2, T3, T4 = self.edges
        a = self.sites

        q1 = np.einsum('ab,buc,dla,urel->decr', C1[_at(x - 1, y - 1)], T1[_at(x, y - 1)],
                       T4[_at(x - 1, y)], a[_at(x, y)], optimize=True)
        q2 = np.einsum('cuf,fg,gqh,uqmr->crhm', T1[_at(x + 1, y - 1)], C2[_at(x + 2, y - 1)],
                       T2[_at(x + 2, y)], a[_at(x + 1, y)], optimize=True)
        q3 = np.einsum('uqml,nqs,sw,wmv->nuvl', a[_at(x + 1, y + 1)], T2[_at(x + 2, y + 1)],
                       C3[_at(x + 2, y + 2)], T3[_at(x + 1, y + 2)], optimize=True)
        q4 = np.einsum('gpn,uqmp,eg,vme->vqnu', T4[_at(x - 1, y + 1)], a[_at(x, y + 1)],
                       C4[_at(x - 1, y + 2)], T3[_at(x, y + 2)], optimize=True)

        cut_top = q1.shape[:2]
        cut_bottom = q4.shape[2:]
        r_top = q1.reshape(np.prod(cut_top), -1) @ q2.reshape(q2.shape[0] * q2.shape[1], -1)
        r_bottom = q4.reshape(-1, np.prod(cut_bottom)).T @ q3.reshape(q3.shape[0] * q3.shape[1], -1).T
        scales = (np.max(np.abs(r_top)), np.max(np.abs(r_bottom)))
        if not all(np.isfinite(s) and s > 0 for s in scales):
            raise EnvironmentDegenerateError(f"half-plane product vanished at column {x}, row {y}")
        r_top = r_top / scales[0]
        r_bottom = r_bottom / scales[1]

        result = truncated_svd(DenseTensor(r_top.T @ r_bottom), ([0], [1]), self.chi, PROJECTOR_CUTOFF)
        s = result.singular_values
        if s[0] < SINGULAR_FLOOR:
            raise EnvironmentDegenerateError(f"all projector singular values below {SINGULAR_FLOOR:g}")
        u = result.left_isometry.data
        vh = result.right_isometry.data
        inv_sqrt = 1.0 / np.sqrt(s)
        p_top = (r_bottom @ vh.conj().T) * inv_sqrt
        p_bottom = (r_top @ u.conj()) * inv_sqrt
        return p_top.reshape(*cut_top, -1), p_bottom.reshape(*cut_bottom, -1)

    def left_move(self, x: int):
        """Absorbs column x into the left boundary, producing C1, T4, C4 at column x."""
        projectors = {y: self._projectors(x, y) for y in (0, 1)}
        C1, _, _, C4 = self.corners
        T1, _, T3, T4 = self.edges
        new_c1, new_t4, new_c4 = {}, {}, {}
        for y in (0, 1):
            p_top = projectors[y][0]
            p_bottom = projectors[(y - 1) % 2][1]
            new_c1[y] = np.einsum('se,euf,suk->kf', C1[_at(x - 1, y)], T1[_at(x, y)], p_top, optimize=True)
            new_t4[y] = np.einsum('sln,urdl,nuk,sdj->jrk', T4[_at(x - 1, y)], self.sites[_at(x, y)],
                                  p_bottom, p_top, optimize=True)
            new_c4[y] = np.einsum('en,fme,nmk->fk', C4[_at(x - 1, y)], T3[_at(x, y)], p_bottom, optimize=True)
        for y in (0, 1):
            C1[_at(x, y)] = _normalize_corner(new_c1[y])
            T4[_at(x, y)] = _normalize_edge(new_t4[y])
            C4[_at(x, y)] = _normalize_corner(new_c4[y])

    def rotate(self):
        """Turns the lattice 90° clockwise: (x, y) -> (-y, x), the left boundary becomes the top one."""
        def turn(q):
            return _at(-q[1], q[0])

        self.sites = {turn(q): a.transpose(3, 0, 1, 2) for q, a in self.sites.items()}
        self.corners = [{turn(q): c for q, c in self.corners[i].items()} for i in (3, 0, 1, 2)]
        self.edges = [{turn(q): t for q, t in self.edges[i].items()} for i in (3, 0, 1, 2)]

    def iterate(self):
        for _ in range(4):
            for x in (0, 1):
                self.left_move(x)
            self.rotate()


def ctm_converge(
    p: VectorizedPepo,
    chi: int,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
    boundary_seed: Optional[np.ndarray] = None,
    env: Optional[CtmEnvironment] = None,
) -> CtmEnvironment:
    """
    Iterates directional moves until the corner spectra move by less than
    `tol` between iterations. `env` resumes from an earlier environment;
    otherwise the boundary is built from the site tensors with their physical
    pair contracted against `boundary_seed`.
    """
    tol = config.CTM_TOL if tol is None else tol
    max_iters = config.CTM_MAX_ITERS if max_iters is None else max_iters
    if chi < 1 or max_iters < 1 or not tol > 0:
        raise TensorArgumentError(f"need chi >= 1, max_iters >= 1, tol > 0; got {chi}, {max_iters}, {tol}")
    if not (p.site_a.is_finite() and p.site_b.is_finite()):
        raise NumericalError("non-finite PEPO passed to ctm_converge", beta=p.beta)

    sites = {q: reduced_site_tensor(p, sublattice_at(q)).data for q in POSITIONS}
    if env is None:
        seeded = {q: reduced_site_tensor(p, sublattice_at(q), boundary_seed).data for q in POSITIONS}
        corners, edges = _initial_environment(seeded)
    else:
        corners, edges = list(env.corners), list(env.edges)
        _check_fit(corners, edges, p)
    runner = _DirectionalCtm(sites, corners, edges, chi)

    previous = _spectra(runner.corners, chi)
    delta = float('inf')
    converged = False
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        runner.iterate()
        current = _spectra(runner.corners, chi)
        delta = _spectra_distance(previous, current)
        previous = current
        if delta < tol:
            converged = True
            break

    if converged:
        logging.info(f"CTM: converged in {iterations} iterations (chi={chi}, delta={delta:.2e}, beta={p.beta:.6g})")
    else:
        logging.warning(f"CTM: not converged after {iterations} iterations (chi={chi}, delta={delta:.2e}, "
                        f"beta={p.beta:.6g})")
    return CtmEnvironment(
        corners=tuple(runner.corners), edges=tuple(runner.edges), chi=chi,
        converged=converged, iterations=iterations, delta=delta,
    )


def one_site_rdm(env: CtmEnvironment, p: VectorizedPepo, sublattice: Sublattice) -> np.ndarray:
    """Unnormalized one-site reduced density matrix ρ[k, b] of `sublattice`."""
    sublattice = Sublattice(sublattice)
    x, y = SITE_POSITIONS[sublattice]
    C1, C2, C3, C4 = env.corners
    T1, T2, T3, T4 = env.edges
    _check_fit(env.corners, env.edges, p)
    site = _absorbed_site(p, sublattice)
    try:
        rho = np.einsum(
            'ab,bcd,de,ehj,jl,lik,kg,gfa,KBchif->KB',
            C1[_at(x - 1, y - 1)], T1[_at(x, y - 1)], C2[_at(x + 1, y - 1)], T2[_at(x + 1, y)],
            C3[_at(x + 1, y + 1)], T3[_at(x, y + 1)], C4[_at(x - 1, y + 1)], T4[_at(x - 1, y)],
            site, optimize=True,
        )
    except ValueError as e:
        raise TensorDimensionError(f"environment does not fit the PEPO: {e}") from None
    trace = np.trace(rho)
    if not np.isfinite(trace) or abs(trace) < TRACE_FLOOR:
        raise EnvironmentDegenerateError(f"one-site RDM trace {abs(trace):.3e} on sublattice {sublattice.value}",
                                         beta=p.beta)
    return rho
