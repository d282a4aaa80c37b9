"""Dense degree-1/2/3 tensor arithmetic over R^d.

Tensors are plain float64 numpy arrays of shape (d,), (d, d) or (d, d, d),
index order (i, j, k) meaning e_i (x) e_j (x) e_k.  All operations are pure
and never mutate their arguments.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

MAX_DEGREE = 3

# Tolerance convention for "equal up to rounding": absolute, scaled by
# max(1, norms of the operands).
DEFAULT_TOL = 1e-12


def as_tensor(t, degree: int | None = None, dim: int | None = None) -> np.ndarray:
    """Coerce input to a float64 tensor, optionally checking degree and dim."""
    a = np.asarray(t, dtype=np.float64)
    if a.ndim == 0 or a.ndim > MAX_DEGREE:
        raise ValueError(f"tensor degree must be 1..{MAX_DEGREE}, got array of ndim {a.ndim}")
    if any(n != a.shape[0] for n in a.shape):
        raise ValueError(f"tensor axes must share one dimension, got shape {a.shape}")
    if degree is not None and a.ndim != degree:
        raise ValueError(f"expected degree {degree}, got {a.ndim}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {a.shape[0]}")
    return a


def degree(t: np.ndarray) -> int:
    return np.asarray(t).ndim


def tensor_product(a, b) -> np.ndarray:
    """Tensor product a (x) b; result degree is deg(a) + deg(b) <= 3."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.ndim + b.ndim > MAX_DEGREE:
        raise ValueError(f"product degree {a.ndim + b.ndim} exceeds {MAX_DEGREE}")
    return np.multiply.outer(a, b)


def _invert(sigma: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(sigma)
    for pos, img in enumerate(sigma):
        inv[img] = pos
    return tuple(inv)


def permute(t, sigma) -> np.ndarray:
    """Symmetric-group action sigma . t.

    ``sigma`` is a permutation of 0..n-1 given as the tuple of images
    (sigma[m] = image of slot m).  On basis tensors the action moves factor
    omega_m to slot sigma(m), i.e. sigma.(w_0 (x) ... ) has w_{sigma^-1(l)}
    in slot l.  Composition satisfies permute(permute(t, s), tau)
    == permute(t, tau o s).
    """
    t = as_tensor(t)
    sigma = tuple(int(i) for i in sigma)
    if sorted(sigma) != list(range(t.ndim)):
        raise ValueError(f"invalid permutation {sigma} for degree-{t.ndim} tensor")
    if t.ndim == 1:
        return t.copy()
    # transpose(T, axes) sends factor slot m to slot axes^-1(m); the group
    # action needs the inverse axes.
    return np.transpose(t, _invert(sigma)).copy()


def sym(t) -> np.ndarray:
    """Symmetrization: average of all permutations of the factors."""
    t = as_tensor(t)
    if t.ndim == 1:
        return t.copy()
    acc = np.zeros_like(t)
    for axes in itertools.permutations(range(t.ndim)):
        acc += np.transpose(t, axes)
    return acc / math.factorial(t.ndim)


def p1(t) -> np.ndarray:
    """w1 (x) w2  ->  w1 (x) w2 + w2 (x) w1, extended linearly."""
    t = as_tensor(t, degree=2)
    return t + np.transpose(t, (1, 0))


def p2(t) -> np.ndarray:
    """w1w2w3 -> w1w2w3 + w2w1w3 + w3w1w2, extended linearly."""
    t = as_tensor(t, degree=3)
    return t + np.transpose(t, (1, 0, 2)) + np.transpose(t, (2, 0, 1))


def p3(t) -> np.ndarray:
    """w1w2w3 -> w1w2w3 + w1w3w2 + w2w3w1, extended linearly."""
    t = as_tensor(t, degree=3)
    return t + np.transpose(t, (0, 2, 1)) + np.transpose(t, (1, 2, 0))


def frobenius_norm(t) -> float:
    """Entrywise l2 norm; zero iff t == 0."""
    return float(np.sqrt(np.sum(np.square(np.asarray(t, dtype=np.float64)))))


def tensors_close(a, b, tol: float = DEFAULT_TOL) -> bool:
    """Entrywise comparison at absolute tolerance tol * max(1, |a|, |b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return False
    scale = max(1.0, frobenius_norm(a), frobenius_norm(b))
    return bool(np.max(np.abs(a - b), initial=0.0) <= tol * scale)


def basis_vector(i: int, dim: int) -> np.ndarray:
    e = np.zeros(dim)
    e[i] = 1.0
    return e
