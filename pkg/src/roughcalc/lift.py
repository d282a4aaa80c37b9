"""Canonical step-3 lift of piecewise-linear paths and relation validators.

A lifted path stores level-(1,2,3) data per adjacent grid interval; values
over wider index spans come from left-to-right multiplicative composition,
so the multiplicative (Chen) identity holds exactly by construction.  The
validators re-evaluate that identity, and the shuffle identity, and report
the defects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import SampledPath, TimeGrid
from .tensors import as_tensor

# full pair tables hold O(n^2 d^3) floats; refuse beyond this many entries
_PAIR_TABLE_LIMIT = 100_000_000


@dataclass(frozen=True)
class LevelTriple:
    """One interval's level-1/2/3 data (vector, matrix, cube)."""

    x: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.x).shape[0]
        object.__setattr__(self, "x", as_tensor(self.x, 1, d))
        object.__setattr__(self, "x2", as_tensor(self.x2, 2, d))
        object.__setattr__(self, "x3", as_tensor(self.x3, 3, d))

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @classmethod
    def zero(cls, dim: int) -> "LevelTriple":
        return cls(np.zeros(dim), np.zeros((dim, dim)), np.zeros((dim, dim, dim)))


def segment_signature(v) -> LevelTriple:
    """Levels of a straight segment with increment v: (v, v (x) v / 2, v^(x)3 / 6)."""
    v = as_tensor(v, degree=1)
    vv = np.multiply.outer(v, v)
    return LevelTriple(v, vv / 2.0, np.multiply.outer(vv, v) / 6.0)


def chen_compose(left: LevelTriple, right: LevelTriple) -> LevelTriple:
    """Multiplicative composition across a splitting time."""
    if left.dim != right.dim:
        raise ValueError(f"dimension mismatch: {left.dim} vs {right.dim}")
    x = left.x + right.x
    x2 = left.x2 + right.x2 + np.multiply.outer(left.x, right.x)
    x3 = (
        left.x3
        + right.x3
        + np.multiply.outer(left.x, right.x2)
        + np.multiply.outer(left.x2, right.x)
    )
    return LevelTriple(x, x2, x3)


class RoughPath3:
    """Level-(1,2,3) data on adjacent grid intervals.

    ``x1_adj[k]``, ``x2_adj[k]``, ``x3_adj[k]`` are the levels over
    [t_k, t_{k+1}].  Lifted paths come from :func:`lift_piecewise_linear`;
    the arrays may also be assembled by hand to feed the validators with
    deliberately broken data.
    """

    def __init__(self, grid: TimeGrid, x1_adj, x2_adj, x3_adj):
        n = grid.n_intervals
        self.grid = grid
        self.x1_adj = np.asarray(x1_adj, dtype=np.float64)
        self.x2_adj = np.asarray(x2_adj, dtype=np.float64)
        self.x3_adj = np.asarray(x3_adj, dtype=np.float64)
        d = self.x1_adj.shape[1] if self.x1_adj.ndim == 2 else 0
        if self.x1_adj.shape != (n, d) or self.x2_adj.shape != (n, d, d) \
                or self.x3_adj.shape != (n, d, d, d):
            raise ValueError("adjacent level arrays do not match the grid")
        self.dim = d

    def evaluate(self, i: int, j: int) -> LevelTriple:
        """Levels over [t_i, t_j] by strict left-to-right composition."""
        n = self.grid.n_intervals
        if not (0 <= i <= j <= n):
            raise IndexError(f"need 0 <= i <= j <= {n}, got ({i}, {j})")
        if i == j:
            return LevelTriple.zero(self.dim)
        acc = LevelTriple(self.x1_adj[i], self.x2_adj[i], self.x3_adj[i])
        for k in range(i + 1, j):
            acc = chen_compose(acc, LevelTriple(self.x1_adj[k], self.x2_adj[k], self.x3_adj[k]))
        return acc

    def prefix_tables(self):
        """Left-fold levels over [t_0, t_j] for every j, as stacked arrays."""
        n, d = self.grid.n_intervals, self.dim
        p1 = np.zeros((n + 1, d))
        p2 = np.zeros((n + 1, d, d))
        p3 = np.zeros((n + 1, d, d, d))
        for j in range(n):
            p1[j + 1] = p1[j] + self.x1_adj[j]
            p2[j + 1] = p2[j] + self.x2_adj[j] + np.multiply.outer(p1[j], self.x1_adj[j])
            p3[j + 1] = (
                p3[j]
                + self.x3_adj[j]
                + np.multiply.outer(p1[j], self.x2_adj[j])
                + np.multiply.outer(p2[j], self.x1_adj[j])
            )
        return p1, p2, p3

    def pair_tables(self):
        """Levels over [t_i, t_j] for all pairs i <= j, by the left fold.

        Entry [i, j] agrees bit-for-bit with ``evaluate(i, j)``: the tables
        advance the same composition, one right factor at a time, for all
        left endpoints at once.  Memory is O(n^2 d^3): exhaustive-validator
        scale only.
        """
        n, d = self.grid.n_intervals, self.dim
        if (n + 1) ** 2 * d ** 3 > _PAIR_TABLE_LIMIT:
            raise MemoryError(f"pair tables too large for n={n}, d={d}")
        t1 = np.zeros((n + 1, n + 1, d))
        t2 = np.zeros((n + 1, n + 1, d, d))
        t3 = np.zeros((n + 1, n + 1, d, d, d))
        for j in range(n):
            rows = slice(0, j + 1)
            a1, a2, a3 = self.x1_adj[j], self.x2_adj[j], self.x3_adj[j]
            t1[rows, j + 1] = t1[rows, j] + a1
            t2[rows, j + 1] = (t2[rows, j] + a2) + t1[rows, j, :, None] * a1[None, None, :]
            t3[rows, j + 1] = (
                (t3[rows, j] + a3)
                + t1[rows, j, :, None, None] * a2[None, None, :, :]
                + t2[rows, j, :, :, None] * a1[None, None, None, :]
            )
        return t1, t2, t3


def lift_piecewise_linear(path: SampledPath) -> RoughPath3:
    """Canonical lift of the piecewise-linear interpolant of a sampled path."""
    if path.degree != 1:
        raise ValueError("only degree-1 paths can be lifted")
    dx = np.diff(path.values, axis=0)
    x2 = np.einsum("ka,kb->kab", dx, dx) / 2.0
    x3 = np.einsum("kab,kc->kabc", x2, dx) / 3.0
    return RoughPath3(path.grid, dx, x2, x3)


def chen_defect(rp: RoughPath3, i: int, u: int, j: int):
    """Level-2 and level-3 multiplicative-identity defect at a split point."""
    if not (i <= u <= j):
        raise IndexError(f"need i <= u <= j, got ({i}, {u}, {j})")
    whole = rp.evaluate(i, j)
    left = rp.evaluate(i, u)
    right = rp.evaluate(u, j)
    d2 = whole.x2 - left.x2 - right.x2 - np.multiply.outer(left.x, right.x)
    d3 = (
        whole.x3
        - left.x3
        - right.x3
        - np.multiply.outer(left.x, right.x2)
        - np.multiply.outer(left.x2, right.x)
    )
    return d2, d3


def shuffle_defect(rp: RoughPath3, i: int, j: int):
    """Deviation from the shuffle identity over [t_i, t_j].

    Returns (X (x) X - P1(lvl2), X (x) lvl2 - P2(lvl3), lvl2 (x) X - P3(lvl3));
    all three vanish for weakly geometric data.
    """
    if not (i < j):
        raise IndexError(f"need i < j, got ({i}, {j})")
    v = rp.evaluate(i, j)
    s2 = np.multiply.outer(v.x, v.x) - (v.x2 + v.x2.T)
    p2v = v.x3 + np.transpose(v.x3, (1, 0, 2)) + np.transpose(v.x3, (2, 0, 1))
    p3v = v.x3 + np.transpose(v.x3, (0, 2, 1)) + np.transpose(v.x3, (1, 2, 0))
    s3a = np.multiply.outer(v.x, v.x2) - p2v
    s3b = np.multiply.outer(v.x2, v.x) - p3v
    return s2, s3a, s3b


def _norms(a: np.ndarray, batch_ndim: int) -> np.ndarray:
    return np.sqrt(np.sum(a.reshape(a.shape[:batch_ndim] + (-1,)) ** 2, axis=-1))


def pairs_from_prefixes(prefixes, i: np.ndarray, j: np.ndarray):
    """Levels over [t_i, t_j] recovered from prefix tables, batched.

    Solves the multiplicative identity for the right factor; agrees with
    the left fold to rounding, which is all the sampled-triple validators
    need.
    """
    p1, p2, p3 = prefixes
    x = p1[j] - p1[i]
    x2 = p2[j] - p2[i] - np.einsum("ka,kb->kab", p1[i], x)
    x3 = (
        p3[j]
        - p3[i]
        - np.einsum("ka,kbc->kabc", p1[i], x2)
        - np.einsum("kab,kc->kabc", p2[i], x)
    )
    return x, x2, x3


def chen_defect_scan(rp: RoughPath3, triples: np.ndarray | None = None):
    """Worst relative level-2/3 defects over index triples.

    ``triples = None`` scans all i < u < j exhaustively via pair tables;
    otherwise ``triples`` is an (m, 3) integer array and the batched
    prefix-table route is used.  Returns ((rel2, (i,u,j)), (rel3, (i,u,j))),
    defect norms relative to the largest level norm of the scanned data.
    """
    n = rp.grid.n_intervals
    if triples is None:
        t1, t2, t3 = rp.pair_tables()
        scale2 = max(float(np.max(_norms(t2, 2))), 1e-300)
        scale3 = max(float(np.max(_norms(t3, 2))), 1e-300)
        best2, best3 = (0.0, (0, 0, 0)), (0.0, (0, 0, 0))
        for u in range(n + 1):
            ii = np.arange(0, u + 1)
            jj = np.arange(u, n + 1)
            d2 = (
                t2[: u + 1, u:]
                - t2[: u + 1, u][:, None]
                - t2[u, u:][None, :]
                - np.einsum("ia,jb->ijab", t1[: u + 1, u], t1[u, u:])
            )
            d3 = (
                t3[: u + 1, u:]
                - t3[: u + 1, u][:, None]
                - t3[u, u:][None, :]
                - np.einsum("ia,jbc->ijabc", t1[: u + 1, u], t2[u, u:])
                - np.einsum("iab,jc->ijabc", t2[: u + 1, u], t1[u, u:])
            )
            n2 = _norms(d2, 2) / scale2
            n3 = _norms(d3, 2) / scale3
            k2 = np.unravel_index(np.argmax(n2), n2.shape)
            k3 = np.unravel_index(np.argmax(n3), n3.shape)
            if n2[k2] > best2[0]:
                best2 = (float(n2[k2]), (int(ii[k2[0]]), u, int(jj[k2[1]])))
            if n3[k3] > best3[0]:
                best3 = (float(n3[k3]), (int(ii[k3[0]]), u, int(jj[k3[1]])))
        return best2, best3

    triples = np.asarray(triples, dtype=np.intp)
    prefixes = rp.prefix_tables()
    i, u, j = triples[:, 0], triples[:, 1], triples[:, 2]
    xiu, x2iu, x3iu = pairs_from_prefixes(prefixes, i, u)
    xuj, x2uj, x3uj = pairs_from_prefixes(prefixes, u, j)
    xij, x2ij, x3ij = pairs_from_prefixes(prefixes, i, j)
    d2 = x2ij - x2iu - x2uj - np.einsum("ka,kb->kab", xiu, xuj)
    d3 = (
        x3ij
        - x3iu
        - x3uj
        - np.einsum("ka,kbc->kabc", xiu, x2uj)
        - np.einsum("kab,kc->kabc", x2iu, xuj)
    )
    scale2 = max(float(np.max(_norms(x2ij, 1))), 1e-300)
    scale3 = max(float(np.max(_norms(x3ij, 1))), 1e-300)
    n2 = _norms(d2, 1) / scale2
    n3 = _norms(d3, 1) / scale3
    k2, k3 = int(np.argmax(n2)), int(np.argmax(n3))
    return (
        (float(n2[k2]), tuple(int(v) for v in triples[k2])),
        (float(n3[k3]), tuple(int(v) for v in triples[k3])),
    )


def shuffle_defect_scan(rp: RoughPath3, pairs: np.ndarray | None = None):
    """Worst relative shuffle defects over index pairs i < j.

    Exhaustive over all pairs when ``pairs`` is None.  Returns three
    (relative_defect, (i, j)) entries, one per shuffle component.
    """
    n = rp.grid.n_intervals
    if pairs is None:
        i, j = np.triu_indices(n + 1, k=1)
        pairs = np.stack([i, j], axis=1)
    else:
        pairs = np.asarray(pairs, dtype=np.intp)
        i, j = pairs[:, 0], pairs[:, 1]
    x, x2, x3 = pairs_from_prefixes(rp.prefix_tables(), i, j)
    s2 = np.einsum("ka,kb->kab", x, x) - (x2 + np.transpose(x2, (0, 2, 1)))
    p2v = x3 + np.transpose(x3, (0, 2, 1, 3)) + np.transpose(x3, (0, 3, 1, 2))
    p3v = x3 + np.transpose(x3, (0, 1, 3, 2)) + np.transpose(x3, (0, 2, 3, 1))
    s3a = np.einsum("ka,kbc->kabc", x, x2) - p2v
    s3b = np.einsum("kab,kc->kabc", x2, x) - p3v
    out = []
    for defect, ref in ((s2, np.einsum("ka,kb->kab", x, x)), (s3a, p2v), (s3b, p3v)):
        scale = max(float(np.max(_norms(ref, 1))), 1e-300)
        rel = _norms(defect, 1) / scale
        k = int(np.argmax(rel))
        out.append((float(rel[k]), (int(pairs[k, 0]), int(pairs[k, 1]))))
    return out[0], out[1], out[2]


def regularity_slopes(rp: RoughPath3, max_span_level: int | None = None):
    """Log-log slopes of the worst level norms against time-span width.

    Scans dyadic index spans 1, 2, 4, ... and fits least-squares slopes of
    log(max_i |level over [t_i, t_{i+s}]|) against log(t-span).  For data
    of Hölder type alpha the three slopes sit near alpha, 2 alpha, 3 alpha.
    """
    n = rp.grid.n_intervals
    prefixes = rp.prefix_tables()
    spans = []
    s = 1
    limit = n if max_span_level is None else min(n, 2 ** max_span_level)
    while s <= limit // 2:
        spans.append(s)
        s *= 2
    logs_dt, logs = [], [[], [], []]
    for s in spans:
        i = np.arange(0, n - s + 1)
        x, x2, x3 = pairs_from_prefixes(prefixes, i, i + s)
        dt = rp.grid.times[i + s] - rp.grid.times[i]
        logs_dt.append(np.log(float(np.max(dt))))
        for lvl, arr in enumerate((x, x2, x3)):
            logs[lvl].append(np.log(max(float(np.max(_norms(arr, 1))), 1e-300)))
    return tuple(float(np.polyfit(logs_dt, logs[lvl], 1)[0]) for lvl in range(3))
