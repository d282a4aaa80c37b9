"""Compensated Riemann sums, Young integrals against brackets, and the
change-of-variables residual with convergence-order estimation.

The compensated sum per partition interval is

    DF(X_s) X_{s,t} + D2F(X_s) level2_{s,t} + D3F(X_s) level3_{s,t}

with every derivative term at weight one; the third-level data already
carries its own 1/6.  Left-point evaluation throughout, for both the
compensated sums and the Young sums against bracket increments.  All
convergence studies run on nested dyadic partitions so that order
estimates compare the same underlying object across mesh sizes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .functions import FunctionC4
from .reduced import BracketPath, ReducedRoughPath, brackets, restrict_level

# residuals below 1e3 * eps * scale are rounding noise, not convergence data
_NOISE_EPS_FACTOR = 1e3 * np.finfo(np.float64).eps

ORDER_SENTINEL = math.inf


@dataclass
class IntegralReport:
    """A partition sum: total value, mesh, and per-interval contributions."""

    value: np.ndarray
    mesh: float
    terms: np.ndarray
    observed_order: float | None = None


def _contract(dk: np.ndarray, tensors: np.ndarray) -> np.ndarray:
    """Batched contraction of derivative tensors against degree-k tensors."""
    n, m = dk.shape[0], dk.shape[1]
    return np.einsum("nmi,ni->nm", dk.reshape(n, m, -1), tensors.reshape(n, -1))


def compensated_term(F: FunctionC4, r: ReducedRoughPath, i: int, j: int) -> np.ndarray:
    """One compensated summand over [t_i, t_j], evaluated at the left point."""
    if not (0 <= i < j <= r.grid.n_intervals):
        raise IndexError(f"need 0 <= i < j <= {r.grid.n_intervals}, got ({i}, {j})")
    x = r.path.values[i]
    out = F.apply_derivative(1, x, r.increment(i, j))
    out = out + F.apply_derivative(2, x, r.second_level(i, j))
    out = out + F.apply_derivative(3, x, r.third_level(i, j))
    return out


def _compensated_terms(F: FunctionC4, r: ReducedRoughPath, indices: np.ndarray) -> np.ndarray:
    """Compensated summands over consecutive pairs of ``indices``, batched."""
    left = r.path.values[indices[:-1]]
    dx, h2, h3 = r.levels_between(indices)
    terms = _contract(F.derivative_many(1, left), dx)
    terms += _contract(F.derivative_many(2, left), h2)
    terms += _contract(F.derivative_many(3, left), h3)
    return terms


def _partition_indices(r: ReducedRoughPath, level: int | None) -> np.ndarray:
    n = r.grid.n_intervals
    if level is None:
        return np.arange(n + 1)
    pieces = 2 ** level
    if n % pieces != 0:
        raise ValueError(f"grid with {n} intervals has no dyadic level-{level} partition")
    return np.arange(0, n + 1, n // pieces)


def rough_integral(F: FunctionC4, r: ReducedRoughPath,
                   level: int | None = None) -> IntegralReport:
    """Compensated Riemann sum over the dyadic level-``level`` partition.

    ``level=None`` sums over the full grid.  As the level grows the values
    form a Cauchy sequence; the limit is the rough integral of DF(X) dX.
    """
    idx = _partition_indices(r, level)
    terms = _compensated_terms(F, r, idx)
    mesh = float(np.max(np.diff(r.grid.times[idx])))
    return IntegralReport(terms.sum(axis=0), mesh, terms)


def young_integral(G: np.ndarray, B: BracketPath, degree: int,
                   level: int | None = None) -> IntegralReport:
    """Left-point Riemann sum of G against bracket increments.

    ``G`` holds the integrand per grid time, shape (n+1, m, d, ..., d) with
    ``degree`` trailing axes (e.g. second or third derivative values along
    the path).  Converges as the mesh shrinks when G is Hölder and the
    bracket carrier is Lipschitz.
    """
    if degree not in (2, 3):
        raise ValueError("bracket degree must be 2 or 3")
    carrier = B.b2 if degree == 2 else B.b3
    n = len(B.grid) - 1
    G = np.asarray(G, dtype=np.float64)
    if G.shape[0] != n + 1:
        raise ValueError(f"integrand has {G.shape[0]} samples for {n + 1} grid times")
    if level is None:
        idx = np.arange(n + 1)
    else:
        pieces = 2 ** level
        if n % pieces != 0:
            raise ValueError(f"grid with {n} intervals has no dyadic level-{level} partition")
        idx = np.arange(0, n + 1, n // pieces)
    db = carrier[idx][1:] - carrier[idx][:-1]
    terms = _contract(G[idx[:-1]], db)
    mesh = float(np.max(np.diff(B.grid.times[idx])))
    return IntegralReport(terms.sum(axis=0), mesh, terms)


@dataclass
class ItoBreakdown:
    """The change-of-variables identity, term by term, at one level."""

    level: int
    mesh: float
    lhs: np.ndarray
    rough: np.ndarray
    young2: np.ndarray
    young3: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.rough - self.young2 / 2.0 - self.young3 / 6.0

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))


def ito_terms(F: FunctionC4, r: ReducedRoughPath, level: int) -> ItoBreakdown:
    """Evaluate every term of the identity at one dyadic level."""
    sub = restrict_level(r, level)
    X = sub.path.values
    values = F.value_many(np.stack([X[-1], X[0]]))
    lhs = values[0] - values[1]
    rough = rough_integral(F, sub)
    bp = brackets(sub)
    y2 = young_integral(F.derivative_many(2, X), bp, 2)
    y3 = young_integral(F.derivative_many(3, X), bp, 3)
    return ItoBreakdown(level, rough.mesh, lhs, rough.value, y2.value, y3.value)


def ito_residual(F: FunctionC4, r: ReducedRoughPath, level: int) -> float:
    """Norm of F(X_T) - F(X_0) minus the three integral terms at one level."""
    return ito_terms(F, r, level).residual_norm


def nested_halving_triples(n_intervals: int, count: int = 8) -> np.ndarray:
    """Index triples (0, s/2, s) with the span s halving ``count`` times."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if n_intervals % (2 ** count) != 0:
        raise ValueError(f"{n_intervals} intervals cannot halve {count} times")
    out = []
    s = n_intervals
    for _ in range(count):
        out.append((0, s // 2, s))
        s //= 2
    return np.asarray(out, dtype=np.intp)


def sewing_defect_probe(F: FunctionC4, r: ReducedRoughPath, triples) -> float:
    """Observed exponent of the compensated-sum defect over index triples.

    Computes |A(s,t) - A(s,u) - A(u,t)| per triple and fits the
    least-squares slope of log defect against log time-span.  Defects at
    rounding level are discarded; if fewer than three informative triples
    remain (e.g. the defect cancels exactly), returns the +inf sentinel.
    """
    triples = np.asarray(triples, dtype=np.intp)
    if triples.shape[0] < 3:
        raise ValueError("need at least 3 triples to estimate an exponent")
    spans, defects, scale = [], [], 0.0
    for i, u, j in triples:
        a_whole = compensated_term(F, r, int(i), int(j))
        a_left = compensated_term(F, r, int(i), int(u))
        a_right = compensated_term(F, r, int(u), int(j))
        defect = float(np.linalg.norm(a_whole - a_left - a_right))
        scale = max(scale, float(np.linalg.norm(a_whole)), 1.0)
        spans.append(float(r.grid.times[j] - r.grid.times[i]))
        defects.append(defect)
    spans = np.asarray(spans)
    defects = np.asarray(defects)
    keep = defects > _NOISE_EPS_FACTOR * scale
    if np.count_nonzero(keep) < 3:
        return ORDER_SENTINEL
    return float(np.polyfit(np.log(spans[keep]), np.log(defects[keep]), 1)[0])


@dataclass
class ConvergenceStudy:
    """Per-level residuals of the identity plus an order estimate."""

    rows: list[ItoBreakdown] = field(default_factory=list)
    observed_order: float = ORDER_SENTINEL
    monotone_decreasing: bool = False

    @property
    def residual_norms(self) -> list[float]:
        return [row.residual_norm for row in self.rows]


def observed_order(meshes, residuals, scale: float） -> float:
    """Least-squares slope of log residual against log mesh.

    Levels whose residual sits below the rounding floor are excluded; with
    fewer than three informative levels the +inf sentinel is returned
    (residuals already at rounding level at every mesh).
    """
    meshes = np.asarray(meshes, dtype=np.float64)
    residuals = np.asarray(residuals, dtype=np.float64)
    keep = residuals > _NOISE_EPS_FACTOR * max(scale, 1.0)
    if np.count_nonzero(keep) < 3:
        return ORDER_SENTINEL
    return float(np.polyfit(np.log(meshes[keep]), np.log(residuals[keep]), 1)[0])


def convergence_study(F: FunctionC4, r: ReducedRoughPath, level_min: int,
                      level_max: int, max_workers: int = 1) -> ConvergenceStudy:
    """Run the identity at each dyadic level and fit the observed order.

    Levels run independently (optionally in parallel); assembly is ordered
    by level, so results do not depend on scheduling.
    """
    if not (level_max > level_min >= 4):
        raise ValueError("need level_max > level_min >= 4")
    levels = list(range(level_min, level_max + 1))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(lambda lv: ito_terms(F, r, lv), levels))
    else:
        rows = [ito_terms(F, r, lv) for lv in levels]
    residuals = [row.residual_norm for row in rows]
    scale = max(1.0, max(float(np.linalg.norm(row.lhs)) for row in rows))
    order = observed_order([row.mesh for row in rows], residuals, scale)
    monotone = all(b < a for a, b in zip(residuals, residuals[1:]))
    return ConvergenceStudy(rows, order, monotone)
