"""Sampled paths on time grids: generators, increments, Hölder estimation.

A path is stored as its values on a finite increasing grid.  Degree-1 paths
carry vectors in R^d; perturbation paths carry symmetric 2- or 3-tensors.
Generators are deterministic functions of (spec, grid), so identical inputs
reproduce identical paths bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import rng

WEIERSTRASS_TERMS = 31  # k = 0..30; terms below 1e-12 for decay a <= 0.8

PATH_KINDS = ("polynomial", "trigonometric", "weierstrass", "random-walk")

# grid sizes up to this use the exhaustive O(n^2) pair set for the Hölder
# estimator; larger grids fall back to dyadic-span pairs
_EXHAUSTIVE_PAIR_LIMIT = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times t_0 = 0 < ... < t_n = T."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("grid needs at least two times")
        if t[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_intervals(self) -> int:
        return self.times.size - 1

    def __len__(self) -> int:
        return self.times.size

    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)


def make_dyadic_grid(levels: int, horizon: float = 1.0) -> TimeGrid:
    """Uniform grid with 2^levels intervals on [0, horizon]."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    n = 2 ** levels
    return TimeGrid(horizon * np.arange(n + 1) / n)


@dataclass(frozen=True)
class SampledPath:
    """Grid plus one value per grid time (vector or symmetric tensor)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape[0] != len(self.grid):
            raise ValueError(f"{v.shape[0]} values for {len(self.grid)} grid times")
        if v.ndim < 2 or v.ndim > 4:
            raise ValueError("values must be (n, d), (n, d, d) or (n, d, d, d)")
        if any(s != v.shape[1] for s in v.shape[1:]):
            raise ValueError(f"tensor axes must share one dimension, got {v.shape[1:]}")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def degree(self) -> int:
        return self.values.ndim - 1

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SampledPath)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class GeneratorSpec:
    """Path generator: kind, per-kind parameters, seed for random kinds."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}; expected one of {PATH_KINDS}")


def _coefficients_per_coordinate(params: dict, dim: int, key: str = "coefficients") -> list:
    coeffs = params.get(key)
    if coeffs is None:
        raise ValueError(f"missing {key!r} parameter")
    if coeffs and np.isscalar(coeffs[0]):
        coeffs = [coeffs] * dim
    if len(coeffs) == 1 and dim > 1:
        coeffs = list(coeffs) * dim
    if len(coeffs) != dim:
        raise ValueError(f"{len(coeffs)} coefficient groups for dimension {dim}")
    return coeffs


def sample(spec: GeneratorSpec, grid: TimeGrid, dim: int) -> SampledPath:
    """Sample a degree-1 path from a generator spec on a grid."""
    t = grid.times
    n = len(grid)
    values = np.zeros((n, dim))

    if spec.kind == "polynomial":
        for i, cs in enumerate(_coefficients_per_coordinate(spec.params, dim)):
            # ascending coefficients c0 + c1 t + c2 t^2 + ...
            values[:, i] = np.polynomial.polynomial.polyval(t, np.asarray(cs, dtype=np.float64))

    elif spec.kind == "trigonometric":
        for i, terms in enumerate(_coefficients_per_coordinate(spec.params, dim, "terms")):
            acc = np.zeros(n)
            for amp, freq, phase in terms:
                acc += amp * np.sin(2.0 * np.pi * (freq * t + phase))
            values[:, i] = acc

    elif spec.kind == "weierstrass":
        alpha = float(spec.params.get("alpha", 0.5))
        b = float(spec.params.get("base", 2.0))
        amp = float(spec.params.get("amplitude", 1.0))
        if b <= 1.0:
            raise ValueError("weierstrass base must be > 1")
        if not 0.0 < alpha <= 1.0:
            raise ValueError("weierstrass alpha must lie in (0, 1]")
        a = b ** (-alpha)
        for i in range(dim):
            if spec.seed is None:
                phases = np.zeros(WEIERSTRASS_TERMS)
            else:
                phases = 2.0 * np.pi * rng.uniforms(spec.seed, i, 0, WEIERSTRASS_TERMS)
            acc = np.zeros(n)
            for k in range(WEIERSTRASS_TERMS):
                acc += a ** k * np.cos(b ** k * np.pi * t + phases[k])
            values[:, i] = amp * acc

    elif spec.kind == "random-walk":
        if spec.seed is None:
            raise ValueError("random-walk kind requires a seed")
        scale = float(spec.params.get("scale", 1.0))
        sqrt_dt = np.sqrt(np.diff(t))
        for i in range(dim):
            steps = sqrt_dt * rng.normals(spec.seed, i, grid.n_intervals)
            values[1:, i] = scale * np.cumsum(steps)

    return SampledPath(grid, values)


def increment(path: SampledPath, i: int, j: int):
    """X_{t_i, t_j} = values[j] - values[i]."""
    n = len(path.grid)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"indices ({i}, {j}) out of range for {n} grid times")
    return path.values[j] - path.values[i]


def _pair_norms(flat: np.ndarray, i_block: np.ndarray, j: np.ndarray) -> np.ndarray:
    d = flat[j][None, :, :] - flat[i_block][:, None, :]
    return np.sqrt(np.sum(d * d, axis=-1))


def holder_seminorm(path: SampledPath, alpha: float) -> float:
    """Discrete Hölder seminorm: max over grid pairs of |X_t - X_s| / (t-s)^alpha.

    Exhaustive over all pairs up to 4096 grid points; above that only pairs
    whose index span is a power of two are scanned.  Either way the result
    is a lower bound for the continuum seminorm.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    t = path.grid.times
    n = t.size
    flat = path.values.reshape(n, -1)
    best = 0.0
    if n <= _EXHAUSTIVE_PAIR_LIMIT:
        block = max(1, (1 << 22) // max(1, 8 * n * flat.shape[1]))
        for lo in range(0, n - 1, block):
            hi = min(lo + block, n - 1)
            i_block = np.arange(lo, hi)
            norms = _pair_norms(flat, i_block, np.arange(n))
            dt = t[None, :] - t[i_block][:, None]
            mask = dt > 0
            if np.any(mask):
                best = max(best, float(np.max(norms[mask] / dt[mask] ** alpha)))
    else:
        span = 1
        while span < n:
            diffs = flat[span:] - flat[:-span]
            norms = np.sqrt(np.sum(diffs * diffs, axis=-1))
            dt = t[span:] - t[:-span]
            best = max(best, float(np.max(norms / dt ** alpha)))
            span *= 2
    return best


def resample_linear(path: SampledPath, grid: TimeGrid) -> SampledPath:
    """Sample the piecewise-linear interpolant of ``path`` on another grid.

    Exact at shared times, so refining a dyadic grid reproduces the original
    samples at the original knots.
    """
    if grid.times[-1] > path.grid.times[-1] + 1e-12:
        raise ValueError("target grid exceeds the path horizon")
    n = len(path.grid)
    flat = path.values.reshape(n, -1)
    out = np.empty((len(grid), flat.shape[1]))
    for c in range(flat.shape[1]):
        out[:, c] = np.interp(grid.times, path.grid.times, flat[:, c])
    return SampledPath(grid, out.reshape((len(grid),) + path.values.shape[1:]))


def subsample(path: SampledPath, indices: np.ndarray) -> SampledPath:
    """Restrict a path to a subset of grid indices (must include 0 and n)."""
    idx = np.asarray(indices, dtype=np.intp)
    return SampledPath(TimeGrid(path.grid.times[idx]), path.values[idx])


def _column_labels(shape: tuple, prefix: str = "x") -> list[str]:
    if len(shape) == 1:
        return [f"{prefix}_{i + 1}" for i in range(shape[0])]
    ranges = [range(1, s + 1) for s in shape]
    return [prefix + "_" + "_".join(map(str, ix)) for ix in itertools.product(*ranges)]


def write_path_csv(path: SampledPath, dest, prefix: str = "x") -> None:
    """Write ``t,x_1,...`` rows with 17-significant-digit values.

    Tensor-valued paths flatten row-major: label x_i_j means slot (i, j) of
    the degree-2 value, et cetera.
    """
    close = False
    if isinstance(dest, (str, bytes)):
        dest = open(dest, "w", newline="")
        close = True
    try:
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(["t"] + _column_labels(path.values.shape[1:], prefix))
        flat = path.values.reshape(len(path.grid), -1)
        for k, t in enumerate(path.grid.times):
            writer.writerow([format(t, ".17g")] + [format(v, ".17g") for v in flat[k]])
    finally:
        if close:
            dest.close()


def read_path_csv(src, degree: int = 1) -> SampledPath:
    """Inverse of :func:`write_path_csv`; full float64 round-trip."""
    close = False
    if isinstance(src, (str, bytes)):
        src = open(src, "r", newline="")
        close = True
    try:
        rows = list(csv.reader(src))
    finally:
        if close:
            src.close()
    if not rows or rows[0][0] != "t":
        raise ValueError("expected a header row starting with 't'")
    n_cols = len(rows[0]) - 1
    dim = round(n_cols ** (1.0 / degree))
    if dim ** degree != n_cols:
        raise ValueError(f"{n_cols} value columns do not form a degree-{degree} tensor")
    data = np.array([[float(c) for c in row] for row in rows[1:]])
    values = data[:, 1:].reshape((data.shape[0],) + (dim,) * degree)
    return SampledPath(TimeGrid(data[:, 0]), values)


def path_csv_text(path: SampledPath, prefix: str = "x") -> str:
    buf = io.StringIO()
    write_path_csv(path, buf, prefix)
    return buf.getvalue()
