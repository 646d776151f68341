"""Batched central finite differences with one Richardson step.

Every field handed to this module is *batched*: ``F(Y)`` takes an array of
points of shape ``(K, m)`` and returns an array of shape ``(K, *S)``.  Fields
may themselves differentiate other fields internally, which is how covariant
derivatives of connection coefficients are built.

Base stencils are fourth-order accurate; one Richardson step combining steps
``h`` and ``h/2`` removes the ``h**4`` term, so the error model is
``O(h**6)`` plus roundoff of order ``eps / h**order`` per nesting level.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

STEP = 1e-3
# Largest offset, in units of h, used by any stencil below (third derivative).
MAX_RADIUS = 3

_BASE_OFFSETS = {
    1: (-2, -1, 1, 2),
    2: (-2, -1, 0, 1, 2),
    3: (-3, -2, -1, 1, 2, 3),
}

Field = Callable[[np.ndarray], np.ndarray]


class StencilError(ValueError):
    """Raised when a stencil would leave the chart."""


@lru_cache(maxsize=None)
def stencil_weights(offsets: tuple, order: int) -> tuple:
    """Weights ``w`` with ``sum(w * f(x + o*h)) / h**order ~ f^(order)(x)``."""
    o = np.asarray(offsets, dtype=float)
    k = len(o)
    V = np.vander(o, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = math.factorial(order)
    return tuple(np.linalg.solve(V, rhs))


def _counts(multi_index: Sequence[int], m: int) -> tuple:
    c = [0] * m
    for a in multi_index:
        c[a] += 1
    return tuple(c)


@lru_cache(maxsize=None)
def _product_stencil(counts: tuple, richardson: bool) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product stencil in units of h: (offsets (P, m), weights (P,))."""
    m = len(counts)

    def single(scale: float) -> dict:
        pts = {(): 1.0}
        for axis, c in enumerate(counts):
            if c == 0:
                continue
            offs = _BASE_OFFSETS[c]
            ws = stencil_weights(offs, c)
            new = {}
            for key, w0 in pts.items():
                for o, w in zip(offs, ws):
                    if w == 0.0:
                        continue
                    k2 = key + ((axis, o * scale),)
                    new[k2] = new.get(k2, 0.0) + w0 * w / scale**c
            pts = new
        return pts

    if richardson:
        fine, coarse = single(0.5), single(1.0)
        comb = {}
        for key, w in fine.items():
            comb[key] = comb.get(key, 0.0) + 16.0 * w / 15.0
        for key, w in coarse.items():
            comb[key] = comb.get(key, 0.0) - w / 15.0
    else:
        comb = single(1.0)
    offsets = np.zeros((len(comb), m))
    weights = np.zeros(len(comb))
    for i, (key, w) in enumerate(sorted(comb.items())):
        for axis, o in key:
            offsets[i, axis] = o
        weights[i] = w
    keep = np.abs(weights) > 1e-14
    return offsets[keep], weights[keep]


def partials(
    F: Field,
    X: np.ndarray,
    multi_indices: Sequence[Sequence[int]],
    h: float | None = None,
    richardson: bool = True,
) -> np.ndarray:
    """Partial derivatives of a batched field at every row of ``X``.

    Returns an array of shape ``(N, len(multi_indices), *S)``.
    """
    h = STEP if h is None else h
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, m = X.shape
    stencils = [_product_stencil(_counts(mi, m), richardson) for mi in multi_indices]
    sizes = [len(w) for _, w in stencils]
    offs = np.concatenate([o for o, _ in stencils], axis=0)
    Y = X[:, None, :] + h * offs[None, :, :]
    vals = np.asarray(F(Y.reshape(-1, m)))
    shape = vals.shape[1:]
    vals = vals.reshape((N, len(offs)) + shape)
    # weights sum to zero, so differencing against the centre value changes nothing
    # mathematically but makes constants (and their roundoff) drop out exactly
    vals = vals - np.asarray(F(X))[:, None]
    out = np.empty((N, len(multi_indices)) + shape, dtype=vals.dtype)
    start = 0
    for i, ((_, w), mi, size) in enumerate(zip(stencils, multi_indices, sizes)):
        scale = h ** len(mi)
        out[:, i] = np.tensordot(w, vals[:, start:start + size], axes=([0], [1])) / scale
        start += size
    return out


def derivative(F: Field, X: np.ndarray, h: float | None = None, richardson: bool = True) -> np.ndarray:
    """Gradient of a batched field: shape ``(N, m, *S)`` with axis 1 the direction."""
    X = np.atleast_2d(X)
    m = X.shape[1]
    return partials(F, X, [(a,) for a in range(m)], h, richardson)


def second_derivative(F: Field, X: np.ndarray, h: float | None = None, richardson: bool = True) -> np.ndarray:
    """Symmetric matrix of second partials, shape ``(N, m, m, *S)``."""
    X = np.atleast_2d(X)
    m = X.shape[1]
    pairs = [(a, b) for a in range(m) for b in range(a, m)]
    d = partials(F, X, pairs, h, richardson)
    out = np.empty((d.shape[0], m, m) + d.shape[2:], dtype=d.dtype)
    for i, (a, b) in enumerate(pairs):
        out[:, a, b] = d[:, i]
        out[:, b, a] = d[:, i]
    return out


def diff_scalar(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    multi_index: Sequence[int],
    h: float | None = None,
    richardson: bool = True,
):
    """A single partial derivative (order at most 3) of a batched scalar field at ``x``."""
    if len(multi_index) > 3:
        raise ValueError("derivatives above third order are not supported")
    if len(multi_index) == 0:
        return np.asarray(f(np.atleast_2d(x)))[0]
    return partials(f, np.atleast_2d(x), [tuple(multi_index)], h, richardson)[0, 0]


def stencil_radius(order: int, h: float | None = None) -> float:
    """Largest coordinate displacement used for derivatives of the given order."""
    h = STEP if h is None else h
    if order == 0:
        return 0.0
    return h * max(max(abs(o) for o in _BASE_OFFSETS[min(order, 3)]), 2)
