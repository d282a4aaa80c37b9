"""Four-times differentiable test functions with exact derivative tensors.

Three families: ``polynomial`` (exact, closed-form oracles), ``trig-exp``
(sine and exponential ridge terms with linear inner arguments), and
``composite`` (sum of the other two).  Derivatives of every order up to 4
are evaluated symbolically, never by differencing; the finite-difference
comparison lives in :func:`fd_check` as an independent cross-check.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import rng

FAMILIES = ("polynomial", "trig-exp", "composite")

_SEED_STREAM_BASE = 768  # keep function draws off the path/perturbation streams


def _falling(e: np.ndarray, c: int) -> np.ndarray:
    out = np.ones_like(e, dtype=np.float64)
    for step in range(c):
        out *= np.maximum(e - step, 0)
    return out


class _PolynomialPart:
    def __init__(self, exponents, coefficients):
        self.exponents = np.asarray(exponents, dtype=np.int64)
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        if self.exponents.ndim != 2 or self.coefficients.ndim != 2 \
                or self.exponents.shape[0] != self.coefficients.shape[0]:
            raise ValueError("need (terms, dim) exponents and (terms, codim) coefficients")
        self.dim = self.exponents.shape[1]
        self.codim = self.coefficients.shape[1]

    def derivative_many(self, k: int, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        d, m = self.dim, self.codim
        out = np.zeros((n, m) + (d,) * k)
        for combo in itertools.combinations_with_replacement(range(d), k):
            counts = np.bincount(combo, minlength=d) if k else np.zeros(d, dtype=np.int64)
            ff = np.ones(self.exponents.shape[0])
            for j in range(d):
                if counts[j]:
                    ff *= _falling(self.exponents[:, j].astype(np.float64), int(counts[j]))
            keep = ff != 0.0
            if not np.any(keep):
                continue
            expo = self.exponents[keep] - counts
            mono = np.prod(X[:, None, :] ** expo[None, :, :], axis=2)
            block = mono @ (ff[keep, None] * self.coefficients[keep])
            # mixed partials commute: one evaluation serves every index order
            for perm in set(itertools.permutations(combo)):
                out[(slice(None), slice(None)) + perm] = block
        return out


class _TrigExpPart:
    def __init__(self, sin_weights, sin_coeffs, sin_phases, exp_weights, exp_coeffs):
        self.sin_weights = np.asarray(sin_weights, dtype=np.float64)
        self.sin_coeffs = np.asarray(sin_coeffs, dtype=np.float64)
        self.sin_phases = np.asarray(sin_phases, dtype=np.float64)
        self.exp_weights = np.asarray(exp_weights, dtype=np.float64)
        self.exp_coeffs = np.asarray(exp_coeffs, dtype=np.float64)
        self.dim = (self.sin_weights.shape[1] if self.sin_weights.size
                    else self.exp_weights.shape[1])
        self.codim = (self.sin_coeffs.shape[1] if self.sin_coeffs.size
                      else self.exp_coeffs.shape[1])

    def derivative_many(self, k: int, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        out = np.zeros((n, self.codim) + (self.dim,) * k)
        for w, coeff, phase in zip(self.sin_weights, self.sin_coeffs, self.sin_phases):
            u = X @ w + phase + k * np.pi / 2.0  # d^k sin = sin shifted by k pi/2
            wtens = 1.0
            for _ in range(k):
                wtens = np.multiply.outer(wtens, w)
            out += np.multiply.outer(np.outer(np.sin(u), coeff), wtens).reshape(out.shape)
        for w, coeff in zip(self.exp_weights, self.exp_coeffs):
            u = np.exp(X @ w)
            wtens = 1.0
            for _ in range(k):
                wtens = np.multiply.outer(wtens, w)
            out += np.multiply.outer(np.outer(u, coeff), wtens).reshape(out.shape)
        return out


class FunctionC4:
    """Test function F: R^d -> R^m with exact derivatives up to order 4."""

    def __init__(self, dim: int, codim: int, family: str, parts):
        if family not in FAMILIES:
            raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
        self.dim = dim
        self.codim = codim
        self.family = family
        self.parts = parts

    def derivative_many(self, k: int, X) -> np.ndarray:
        """Order-k derivative tensors at many points: shape (n, m, d, ..., d)."""
        if not 0 <= k <= 4:
            raise ValueError("derivative order must be 0..4")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"points of dimension {X.shape[1]}, function expects {self.dim}")
        out = self.parts[0].derivative_many(k, X)
        for part in self.parts[1:]:
            out = out + part.derivative_many(k, X)
        return out

    def derivative(self, k: int, x) -> np.ndarray:
        return self.derivative_many(k, np.asarray(x, dtype=np.float64)[None, :])[0]

    def value_many(self, X) -> np.ndarray:
        return self.derivative_many(0, X)

    def value(self, x) -> np.ndarray:
        return self.derivative(0, x)

    def apply_derivative(self, k: int, x, tensor) -> np.ndarray:
        """Contract the order-k derivative at x against a degree-k tensor."""
        dk = self.derivative(k, x)
        t = np.asarray(tensor, dtype=np.float64)
        return dk.reshape(self.codim, -1) @ t.reshape(-1)


def polynomial_function(dim: int, codim: int, exponents, coefficients) -> FunctionC4:
    return FunctionC4(dim, codim, "polynomial", [_PolynomialPart(exponents, coefficients)])


def univariate_polynomial(coeffs_per_component) -> FunctionC4:
    """d = 1 polynomial from ascending coefficient lists, one per component."""
    if np.isscalar(coeffs_per_component[0]):
        coeffs_per_component = [coeffs_per_component]
    degree_max = max(len(c) for c in coeffs_per_component)
    exponents = np.arange(degree_max)[:, None]
    table = np.zeros((degree_max, len(coeffs_per_component)))
    for p, cs in enumerate(coeffs_per_component):
        table[: len(cs), p] = cs
    return polynomial_function(1, len(coeffs_per_component), exponents, table)


def _monomial_exponents(dim: int, degree: int) -> np.ndarray:
    combos = []
    for total in range(degree + 1):
        for c in itertools.combinations_with_replacement(range(dim), total):
            combos.append(np.bincount(c, minlength=dim))
    return np.asarray(combos, dtype=np.int64)


def seeded_polynomial(dim: int, codim: int, degree: int, seed: int,
                      scale: float = 1.0) -> FunctionC4:
    """Random polynomial of total degree <= degree with seeded coefficients."""
    exponents = _monomial_exponents(dim, degree)
    draws = rng.normals(seed, _SEED_STREAM_BASE, exponents.shape[0] * codim)
    coefficients = scale * draws.reshape(exponents.shape[0], codim)
    return polynomial_function(dim, codim, exponents, coefficients)


def trig_exp_function(dim: int, codim: int, sin_weights, sin_coeffs, sin_phases,
                      exp_weights=(), exp_coeffs=()) -> FunctionC4:
    part = _TrigExpPart(
        np.asarray(sin_weights, dtype=np.float64).reshape(-1, dim),
        np.asarray(sin_coeffs, dtype=np.float64).reshape(-1, codim),
        np.asarray(sin_phases, dtype=np.float64).reshape(-1),
        np.asarray(exp_weights, dtype=np.float64).reshape(-1, dim),
        np.asarray(exp_coeffs, dtype=np.float64).reshape(-1, codim),
    )
    return FunctionC4(dim, codim, "trig-exp", [part])


def seeded_trig_exp(dim: int, codim: int, n_sin: int, seed: int,
                    scale: float = 1.0, n_exp: int = 1) -> FunctionC4:
    need = n_sin * (dim + codim + 1) + n_exp * (dim + codim)
    draws = rng.normals(seed, _SEED_STREAM_BASE + 1, need)
    pos = 0

    def take(k):
        nonlocal pos
        out = draws[pos:pos + k]
        pos += k
        return out

    sin_w = take(n_sin * dim).reshape(n_sin, dim)
    sin_c = scale * take(n_sin * codim).reshape(n_sin, codim)
    sin_p = take(n_sin)
    exp_w = 0.3 * take(n_exp * dim).reshape(n_exp, dim)  # mild growth on desk ranges
    exp_c = scale * take(n_exp * codim).reshape(n_exp, codim)
    return trig_exp_function(dim, codim, sin_w, sin_c, sin_p, exp_w, exp_c)


def composite_function(dim: int, codim: int, degree: int, n_sin: int, seed: int,
                       scale: float = 1.0) -> FunctionC4:
    poly = seeded_polynomial(dim, codim, degree, seed, scale)
    trig = seeded_trig_exp(dim, codim, n_sin, seed, scale)
    return FunctionC4(dim, codim, "composite", poly.parts + trig.parts)


def fd_check(F: FunctionC4, points) -> float:
    """Worst relative gap between exact derivatives and central differences.

    For k = 1..4 compares the order-k derivative against central differences
    of the order-(k-1) derivative with step 1e-5 * (1 + |x|).
    """
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=np.float64)):
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
        for k in range(1, 5):
            exact = F.derivative(k, x)
            fd = np.empty_like(exact)
            for j in range(F.dim):
                step = np.zeros(F.dim)
                step[j] = h
                diff = (F.derivative(k - 1, x + step) - F.derivative(k - 1, x - step)) / (2 * h)
                fd[..., j] = diff
            scale = max(1.0, float(np.max(np.abs(exact))))
            worst = max(worst, float(np.max(np.abs(fd - exact))) / scale)
    return worst
