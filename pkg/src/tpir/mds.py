"""(n, k) MDS codes over GF(q) from Vandermonde generator matrices.

The generator row at evaluation point x is (x^0, x^1, ..., x^(k-1)) with
points 0, 1, ..., n-1, so any k rows form a square Vandermonde matrix on
distinct nodes and are invertible. The generator is deterministic and
globally known; only the secret matrices it multiplies are random.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .field import is_prime

__all__ = [
    "MdsSpec",
    "generator",
    "encode",
    "recover_info",
    "submatrix_inverse",
    "vandermonde_inverse",
    "verify_mds_property",
]

# Exhaustive subset check at construction is cheap up to this code length.
_EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True)
class MdsSpec:
    """An (n, k) MDS code over GF(q); evaluation points are 0..n-1."""

    n: int
    k: int
    q: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need n >= k >= 1, got n={self.n} k={self.k}")
        if self.q < self.n:
            raise ValueError(
                f"field too small: q={self.q} < n={self.n} (no {self.n} distinct points)"
            )
        if not is_prime(self.q):
            raise ValueError(f"q={self.q} is not prime")


@lru_cache(maxsize=None)
def _generator_cached(n: int, k: int, q: int) -> np.ndarray:
    nodes = np.arange(n, dtype=np.int64)
    g = np.empty((n, k), dtype=np.int64)
    g[:, 0] = 1
    for j in range(1, k):
        g[:, j] = g[:, j - 1] * nodes % q
    if n <= _EXHAUSTIVE_LIMIT:
        bad = _check_submatrices(g, k, q, itertools.combinations(range(n), k))
        if bad is not None:
            raise AssertionError(f"MDS property violated for rows {bad}")
    g.setflags(write=False)
    return g


def _check_submatrices(g: np.ndarray, k: int, q: int, subsets):
    for rows in subsets:
        if linalg.rank(g[list(rows)], q) != k:
            return rows
    return None


def generator(spec: MdsSpec) -> np.ndarray:
    """n x k Vandermonde generator; row i is (i^0, ..., i^(k-1)) mod q."""
    return _generator_cached(spec.n, spec.k, spec.q)


def verify_mds_property(
    spec: MdsSpec,
    exhaustive: bool = False,
    samples: int = 1000,
    rng: np.random.Generator | None = None,
):
    """Check that k-row submatrices are invertible.

    Exhaustively over all C(n, k) subsets when requested (or n small),
    otherwise over ``samples`` random subsets. Returns True on success,
    False if some submatrix is singular.
    """
    g = _generator_cached(spec.n, spec.k, spec.q)
    if exhaustive or spec.n <= _EXHAUSTIVE_LIMIT:
        subsets = itertools.combinations(range(spec.n), spec.k)
    else:
        rng = rng or np.random.default_rng(0)
        subsets = (
            tuple(sorted(rng.choice(spec.n, size=spec.k, replace=False)))
            for _ in range(samples)
        )
    return _check_submatrices(g, spec.k, spec.q, subsets) is None


def encode(spec: MdsSpec, info) -> np.ndarray:
    """Codeword(s) generator(spec) @ info; info has k rows."""
    info = np.asarray(info, dtype=np.int64)
    vec = info.ndim == 1
    info2 = info.reshape(spec.k, -1) if vec else info
    if info2.shape[0] != spec.k:
        raise ValueError(f"info has {info2.shape[0]} rows, expected k={spec.k}")
    out = linalg.mat_mul(generator(spec), info2, spec.q)
    return out.ravel() if vec else out


def recover_info(spec: MdsSpec, coords, values) -> np.ndarray:
    """Invert the code from any k coordinates.

    coords: k distinct codeword positions; values: the symbols at those
    positions. Returns the info matrix x with generator[coords, :] @ x = values.
    """
    coords = list(coords)
    if len(set(coords)) != len(coords):
        raise ValueError(f"coordinates not distinct: {coords}")
    if len(coords) != spec.k:
        raise ValueError(f"need exactly k={spec.k} coordinates, got {len(coords)}")
    sub = generator(spec)[coords]
    return linalg.solve(sub, np.asarray(values, dtype=np.int64), spec.q)


def submatrix_inverse(spec: MdsSpec, coords) -> np.ndarray:
    """Exact inverse of generator(spec)[coords, :] for k distinct coordinates.

    O(k^2) plus one k x k product, via Lagrange interpolation on the
    evaluation points; equivalent to ``linalg.invert`` of the submatrix but
    fast enough to run per responder subset inside the decoder.
    """
    coords = np.asarray(list(coords), dtype=np.int64)
    if coords.size != spec.k or len(set(coords.tolist())) != spec.k:
        raise ValueError(f"need k={spec.k} distinct coordinates")
    return vandermonde_inverse(coords % spec.q, spec.q)


def vandermonde_inverse(nodes: np.ndarray, q: int) -> np.ndarray:
    """Inverse of the square Vandermonde matrix V[i, j] = nodes[i]^j over GF(q).

    Solving V c = y is polynomial interpolation: c holds the coefficients of
    the degree < k polynomial through (nodes[i], y[i]). Columns of the inverse
    are the Lagrange basis polynomials P / ((x - x_i) P'(x_i)), assembled with
    one batched synthetic-division product.
    """
    nodes = np.asarray(nodes, dtype=np.int64) % q
    k = nodes.size
    if len(set(nodes.tolist())) != k:
        raise ValueError("nodes must be distinct mod q")
    # master polynomial P(x) = prod (x - x_i), coeffs low-to-high, length k+1
    p = np.zeros(k + 1, dtype=np.int64)
    p[0] = 1
    deg = 0
    for x in nodes.tolist():
        head = p[: deg + 1].copy()
        p[1 : deg + 2] = head  # multiply by x
        p[0] = 0
        p[: deg + 1] = (p[: deg + 1] + head * (q - x)) % q  # minus x_i * p
        deg += 1
    # power table X[i, t] = x_i^t, t < k
    powers = np.empty((k, k), dtype=np.int64)
    powers[:, 0] = 1
    for t in range(1, k):
        powers[:, t] = powers[:, t - 1] * nodes % q
    # quotient coefficients B[i, j] of P / (x - x_i):
    # B[i, j] = sum_t p[j + 1 + t] * x_i^t  (a Hankel-structured product)
    hankel = np.zeros((k, k), dtype=np.int64)
    for t in range(k):
        hankel[t, : k - t] = p[1 + t : k + 1]
    b = linalg.mat_mul(powers, hankel, q)
    # weights 1 / P'(x_i); P'(x_i) equals the quotient evaluated at x_i
    dp = p[1:] * np.arange(1, k + 1, dtype=np.int64) % q
    deriv = linalg.mat_mul(powers, dp.reshape(-1, 1), q).ravel()
    w = np.array([pow(int(v), -1, q) for v in deriv], dtype=np.int64)
    return (b * w[:, None] % q).T
