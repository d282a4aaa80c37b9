"""Reduced rough paths: symmetric level data, perturbations, brackets.

A reduced rough path above X keeps only the symmetric second- and
third-level enhancements.  It is stored losslessly as (X, gamma, eta): the
levels over any [s, t] are

    level2 = X_{s,t} (x) X_{s,t} / 2 + (gamma_t - gamma_s) / 2
    level3 = X_{s,t}^(x)3 / 6      + (eta_t - eta_s) / 6

with gamma symmetric-matrix valued and eta symmetric-cube valued, both
starting at zero.  Storing the perturbations as one-parameter paths makes
bracket increments additive by construction and makes the shift identity
between perturbed and canonical compensated sums an exact regrouping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import rng
from .paths import SampledPath, TimeGrid, read_path_csv, subsample, write_path_csv
from .tensors import sym

# stream bases keep perturbation draws disjoint from path-coordinate draws
_GAMMA_STREAM_BASE = 256
_ETA_STREAM_BASE = 512

_SYMMETRY_TOL = 1e-9


def _check_perturbation(p: SampledPath, degree: int, name: str) -> SampledPath:
    if p.degree != degree:
        raise ValueError(f"{name} must be degree-{degree} valued, got degree {p.degree}")
    if np.max(np.abs(p.values[0]), initial=0.0) != 0.0:
        raise ValueError(f"{name} must start at zero")
    symmetrized = np.stack([sym(v) for v in p.values])
    if float(np.max(np.abs(symmetrized - p.values), initial=0.0)) > _SYMMETRY_TOL:
        raise ValueError(f"{name} values are not symmetric within {_SYMMETRY_TOL}")
    return SampledPath(p.grid, symmetrized)


@dataclass(frozen=True)
class ReducedRoughPath:
    """Triple (X, gamma, eta) on one shared grid."""

    path: SampledPath
    gamma: SampledPath
    eta: SampledPath

    def __post_init__(self):
        if self.path.degree != 1:
            raise ValueError("underlying path must be degree-1 valued")
        if self.gamma.grid != self.path.grid or self.eta.grid != self.path.grid:
            raise ValueError("path, gamma and eta must share one grid")
        d = self.path.dim
        if self.gamma.dim != d or self.eta.dim != d:
            raise ValueError("path, gamma and eta must share one dimension")

    @property
    def grid(self) -> TimeGrid:
        return self.path.grid

    @property
    def dim(self) -> int:
        return self.path.dim

    def is_canonical(self) -> bool:
        return not (np.any(self.gamma.values) or np.any(self.eta.values))

    def increment(self, i: int, j: int) -> np.ndarray:
        return self.path.values[j] - self.path.values[i]

    def second_level(self, i: int, j: int) -> np.ndarray:
        """Symmetric level-2 enhancement over [t_i, t_j]."""
        dx = self.increment(i, j)
        return np.multiply.outer(dx, dx) / 2.0 + (self.gamma.values[j] - self.gamma.values[i]) / 2.0

    def third_level(self, i: int, j: int) -> np.ndarray:
        """Symmetric level-3 enhancement over [t_i, t_j]."""
        dx = self.increment(i, j)
        cube = np.multiply.outer(np.multiply.outer(dx, dx), dx)
        return cube / 6.0 + (self.eta.values[j] - self.eta.values[i]) / 6.0

    def levels_between(self, indices: np.ndarray):
        """Batched (increments, level2, level3) over consecutive index pairs."""
        idx = np.asarray(indices, dtype=np.intp)
        x = self.path.values[idx]
        dx = x[1:] - x[:-1]
        dg = self.gamma.values[idx][1:] - self.gamma.values[idx][:-1]
        de = self.eta.values[idx][1:] - self.eta.values[idx][:-1]
        h2 = np.einsum("ka,kb->kab", dx, dx) / 2.0 + dg / 2.0
        h3 = np.einsum("ka,kb,kc->kabc", dx, dx, dx) / 6.0 + de / 6.0
        return dx, h2, h3


def zero_perturbation(grid: TimeGrid, dim: int, degree: int) -> SampledPath:
    return SampledPath(grid, np.zeros((len(grid),) + (dim,) * degree))


def canonical_reduced(path: SampledPath) -> ReducedRoughPath:
    """The reduced rough path forced by the path alone (zero perturbations)."""
    return ReducedRoughPath(
        path,
        zero_perturbation(path.grid, path.dim, 2),
        zero_perturbation(path.grid, path.dim, 3),
    )


def perturb(base: ReducedRoughPath, gamma: SampledPath | None,
            eta: SampledPath | None) -> ReducedRoughPath:
    """Shift the level data by symmetric perturbation paths.

    Perturbations add: perturbing twice by gamma' then gamma'' equals
    perturbing once by their sum.  Inputs are symmetrized; values whose
    symmetrization moves them by more than 1e-9 are rejected.
    """
    d = base.dim
    if gamma is None:
        gamma = zero_perturbation(base.grid, d, 2)
    if eta is None:
        eta = zero_perturbation(base.grid, d, 3)
    if gamma.grid != base.grid or eta.grid != base.grid:
        raise ValueError("perturbations must live on the base grid")
    gamma = _check_perturbation(gamma, 2, "gamma")
    eta = _check_perturbation(eta, 3, "eta")
    return ReducedRoughPath(
        base.path,
        SampledPath(base.grid, base.gamma.values + gamma.values),
        SampledPath(base.grid, base.eta.values + eta.values),
    )


def reduced_chen_defect(r: ReducedRoughPath, i: int, u: int, j: int):
    """Deviation from the reduced multiplicative identity at a split point.

    The level-2 component vanishes for every storable object (perturbation
    increments telescope).  The level-3 component vanishes when gamma is
    constant; otherwise it reports the symmetrized cross term between the
    path increment and the gamma increment, which the validator surfaces
    as advisory information rather than a failure.
    """
    if not (i <= u <= j):
        raise IndexError(f"need i <= u <= j, got ({i}, {u}, {j})")
    xiu = r.increment(i, u)
    xuj = r.increment(u, j)
    d2 = (
        r.second_level(i, j)
        - r.second_level(i, u)
        - r.second_level(u, j)
        - sym(np.multiply.outer(xiu, xuj))
    )
    d3 = (
        r.third_level(i, j)
        - r.third_level(i, u)
        - r.third_level(u, j)
        - sym(
            np.multiply.outer(xiu, r.second_level(u, j))
            + np.multiply.outer(r.second_level(i, u), xuj)
        )
    )
    return d2, d3


@dataclass(frozen=True)
class BracketPath:
    """One-parameter bracket carriers: increments give the brackets."""

    grid: TimeGrid
    b2: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        n = len(self.grid)
        b2 = np.asarray(self.b2, dtype=np.float64)
        b3 = np.asarray(self.b3, dtype=np.float64)
        d = b2.shape[1] if b2.ndim == 3 else 0
        if b2.shape != (n, d, d) or b3.shape != (n, d, d, d):
            raise ValueError("bracket arrays do not match the grid")
        if np.max(np.abs(b2[0]), initial=0.0) != 0.0 or np.max(np.abs(b3[0]), initial=0.0) != 0.0:
            raise ValueError("bracket carriers must start at zero")
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "b3", b3)

    def increment2(self, i: int, j: int) -> np.ndarray:
        return self.b2[j] - self.b2[i]

    def increment3(self, i: int, j: int) -> np.ndarray:
        return self.b3[j] - self.b3[i]


def brackets(r: ReducedRoughPath) -> BracketPath:
    """Bracket carriers of a reduced rough path.

    The square of the increment minus twice the level-2 data telescopes to
    minus the gamma increment, and likewise at level 3 with eta, so the
    carriers are simply the negated perturbation paths.
    """
    return BracketPath(r.grid, -r.gamma.values, -r.eta.values)


def recover_perturbation(r: ReducedRoughPath):
    """Invert the level decomposition: read (gamma, eta) off the level data.

    gamma_t = 2 (level2(0, t) - increment square / 2), normalized to vanish
    at zero; similarly for eta at level 3.  Round-trips :func:`perturb`.
    """
    n = len(r.grid)
    d = r.dim
    g = np.empty((n, d, d))
    e = np.empty((n, d, d, d))
    for t in range(n):
        dx = r.increment(0, t)
        g[t] = 2.0 * (r.second_level(0, t) - np.multiply.outer(dx, dx) / 2.0)
        e[t] = 6.0 * (
            r.third_level(0, t) - np.multiply.outer(np.multiply.outer(dx, dx), dx) / 6.0
        )
    return SampledPath(r.grid, g), SampledPath(r.grid, e)


def restrict_level(r: ReducedRoughPath, level: int) -> ReducedRoughPath:
    """Same reduced structure viewed on the dyadic sub-grid at ``level``."""
    n = r.grid.n_intervals
    pieces = 2 ** level
    if n % pieces != 0:
        raise ValueError(f"grid with {n} intervals cannot restrict to level {level}")
    idx = np.arange(0, n + 1, n // pieces)
    return ReducedRoughPath(
        subsample(r.path, idx), subsample(r.gamma, idx), subsample(r.eta, idx)
    )


# ---------------------------------------------------------------------------
# perturbation generators


def linear_matrix_path(grid: TimeGrid, tensor) -> SampledPath:
    """Perturbation t -> t * M for a fixed symmetric tensor M."""
    m = sym(np.asarray(tensor, dtype=np.float64))
    return SampledPath(grid, np.multiply.outer(grid.times, m))


def lipschitz_seeded_path(grid: TimeGrid, dim: int, degree: int, seed: int,
                          scale: float = 1.0, n_terms: int = 8) -> SampledPath:
    """Seeded random Lipschitz path of symmetric degree-2/3 tensors.

    A trigonometric polynomial in t with symmetric tensor coefficients:
    a function of t alone, so sampling on any grid of the same horizon is
    consistent across refinements.  Starts at zero.
    """
    if degree not in (2, 3):
        raise ValueError("perturbation degree must be 2 or 3")
    base = _GAMMA_STREAM_BASE if degree == 2 else _ETA_STREAM_BASE
    horizon = grid.horizon
    t = grid.times
    values = np.zeros((len(grid),) + (dim,) * degree)
    for k in range(1, n_terms + 1):
        u = rng.uniforms(seed, base + k, 0, 2)
        phase = 2.0 * np.pi * u[0]
        weight = 2.0 * u[1] - 1.0
        coeffs = rng.normals(seed, base + k, dim ** degree, start=1)
        m = sym(coeffs.reshape((dim,) * degree))
        osc = np.sin(2.0 * np.pi * k * t / horizon + phase) - np.sin(phase)
        amp = scale * weight * horizon / (2.0 * np.pi * k * n_terms)
        values += np.multiply.outer(amp * osc, m)
    return SampledPath(grid, values)


# ---------------------------------------------------------------------------
# bulk validators (CLI support)


def _norms(a: np.ndarray, batch_ndim: int) -> np.ndarray:
    return np.sqrt(np.sum(a.reshape(a.shape[:batch_ndim] + (-1,)) ** 2, axis=-1))


def _sym_outer_12(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    prod = np.einsum("...a,...b->...ab", a, b)
    return (prod + np.einsum("...ab->...ba", prod)) / 2.0


def _sym3_batch(t: np.ndarray) -> np.ndarray:
    batch = t.ndim - 3
    axes = list(range(batch))
    acc = np.zeros_like(t)
    for perm in itertools.permutations(range(batch, batch + 3)):
        acc += np.transpose(t, axes + list(perm))
    return acc / 6.0


def reduced_chen_scan(r: ReducedRoughPath, triples: np.ndarray | None = None):
    """Worst relative level-2/3 reduced-identity defects over triples.

    Exhaustive over all i <= u <= j when ``triples`` is None.  The level-3
    figure is advisory whenever gamma is non-constant.
    """
    X = r.path.values
    G = r.gamma.values
    E = r.eta.values
    n = r.grid.n_intervals

    def blocks(i_idx, u_idx, j_idx):
        xiu = X[u_idx] - X[i_idx]
        xuj = X[j_idx] - X[u_idx]
        xij = X[j_idx] - X[i_idx]

        def lvl2(dx, ga, gb):
            return np.einsum("...a,...b->...ab", dx, dx) / 2.0 + (gb - ga) / 2.0

        def lvl3(dx, ea, eb):
            return np.einsum("...a,...b,...c->...abc", dx, dx, dx) / 6.0 + (eb - ea) / 6.0

        h_ij = lvl2(xij, G[i_idx], G[j_idx])
        h_iu = lvl2(xiu, G[i_idx], G[u_idx])
        h_uj = lvl2(xuj, G[u_idx], G[j_idx])
        d2 = h_ij - h_iu - h_uj - _sym_outer_12(xiu, xuj)
        cross = np.einsum("...a,...bc->...abc", xiu, h_uj) + np.einsum(
            "...ab,...c->...abc", h_iu, xuj
        )
        d3 = (
            lvl3(xij, E[i_idx], E[j_idx])
            - lvl3(xiu, E[i_idx], E[u_idx])
            - lvl3(xuj, E[u_idx], E[j_idx])
            - _sym3_batch(cross)
        )
        return d2, d3, h_ij

    if triples is not None:
        triples = np.asarray(triples, dtype=np.intp)
        d2, d3, h_ij = blocks(triples[:, 0], triples[:, 1], triples[:, 2])
        scale2 = max(float(np.max(_norms(h_ij, 1))), 1e-300)
        scale3 = max(_third_scale(r, triples), 1e-300)
        rel2 = _norms(d2, 1) / scale2
        rel3 = _norms(d3, 1) / scale3
        k2, k3 = int(np.argmax(rel2)), int(np.argmax(rel3))
        return (
            (float(rel2[k2]), tuple(int(v) for v in triples[k2])),
            (float(rel3[k3]), tuple(int(v) for v in triples[k3])),
        )

    best2, best3 = (0.0, (0, 0, 0)), (0.0, (0, 0, 0))
    scale2 = scale3 = 1e-300
    for u in range(n + 1):
        ii = np.arange(0, u + 1)
        jj = np.arange(u, n + 1)
        d2, d3, h_ij = blocks(ii[:, None], u, jj[None, :])
        scale2 = max(scale2, float(np.max(_norms(h_ij, 2))))
        n2 = _norms(d2, 2)
        n3 = _norms(d3, 2)
        k2 = np.unravel_index(np.argmax(n2), n2.shape)
        k3 = np.unravel_index(np.argmax(n3), n3.shape)
        if n2[k2] > best2[0]:
            best2 = (float(n2[k2]), (int(ii[k2[0]]), u, int(jj[k2[1]])))
        if n3[k3] > best3[0]:
            best3 = (float(n3[k3]), (int(ii[k3[0]]), u, int(jj[k3[1]])))
    scale3 = max(_third_scale(r, None), 1e-300)
    return (best2[0] / scale2, best2[1]), (best3[0] / scale3, best3[1])


def _third_scale(r: ReducedRoughPath, triples) -> float:
    if triples is None:
        n = r.grid.n_intervals
        i_idx = np.zeros(n + 1, dtype=np.intp)
        j_idx = np.arange(n + 1)
    else:
        i_idx = triples[:, 0]
        j_idx = triples[:, 2]
    dx = r.path.values[j_idx] - r.path.values[i_idx]
    h3 = np.einsum("ka,kb,kc->kabc", dx, dx, dx) / 6.0 + (
        r.eta.values[j_idx] - r.eta.values[i_idx]
    ) / 6.0
    return float(np.max(_norms(h3, 1)))


def bracket_additivity_scan(bp: BracketPath, triples: np.ndarray | None = None):
    """Worst relative additivity residual of bracket increments over triples."""
    n = len(bp.grid) - 1
    scale2 = max(float(np.max(_norms(bp.b2[None], 2))), 1e-300)
    scale3 = max(float(np.max(_norms(bp.b3[None], 2))), 1e-300)

    def residuals(b, i_idx, u_idx, j_idx):
        return (b[u_idx] - b[i_idx]) + (b[j_idx] - b[u_idx]) - (b[j_idx] - b[i_idx])

    if triples is not None:
        triples = np.asarray(triples, dtype=np.intp)
        i_idx, u_idx, j_idx = triples[:, 0], triples[:, 1], triples[:, 2]
        r2 = _norms(residuals(bp.b2, i_idx, u_idx, j_idx), 1) / scale2
        r3 = _norms(residuals(bp.b3, i_idx, u_idx, j_idx), 1) / scale3
        k2, k3 = int(np.argmax(r2)), int(np.argmax(r3))
        return (
            (float(r2[k2]), tuple(int(v) for v in triples[k2])),
            (float(r3[k3]), tuple(int(v) for v in triples[k3])),
        )

    best2, best3 = (0.0, (0, 0, 0)), (0.0, (0, 0, 0))
    for u in range(n + 1):
        ii = np.arange(0, u + 1)[:, None]
        jj = np.arange(u, n + 1)[None, :]
        r2 = _norms(residuals(bp.b2, ii, u, jj), 2) / scale2
        r3 = _norms(residuals(bp.b3, ii, u, jj), 2) / scale3
        k2 = np.unravel_index(np.argmax(r2), r2.shape)
        k3 = np.unravel_index(np.argmax(r3), r3.shape)
        if r2[k2] > best2[0]:
            best2 = (float(r2[k2]), (int(ii[k2[0], 0]), u, int(jj[0, k2[1]])))
        if r3[k3] > best3[0]:
            best3 = (float(r3[k3]), (int(ii[k3[0], 0]), u, int(jj[0, k3[1]])))
    return best2, best3


# ---------------------------------------------------------------------------
# CSV round-trip for perturbation paths


def write_perturbation_csv(p: SampledPath, dest, prefix: str = "g") -> None:
    """Rows t + flattened entries; header labels carry the index order."""
    write_path_csv(p, dest, prefix=prefix)


def read_perturbation_csv(src, degree: int) -> SampledPath:
    return read_path_csv(src, degree=degree)
