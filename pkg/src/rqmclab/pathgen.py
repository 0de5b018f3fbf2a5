"""Brownian-motion covariance and its factorizations (Cholesky, Brownian
bridge, PCA), plus the conditional covariance left after integrating out the
first time point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METHODS = ("cholesky", "bb", "pca")


@dataclass(frozen=True)
class PathFactor:
    """Matrix A with A A^T equal to the Brownian covariance (dt * min(i,j))."""

    method: str
    d: int
    T: float
    matrix: np.ndarray


@dataclass(frozen=True)
class ConditionalFactor:
    """Matrix C with C C^T equal to the covariance of (B_{t_2},...,B_{t_d})
    increments over t_1, i.e. entries t_{min(i,j)+1} - t_1."""

    method: str
    d: int
    T: float
    matrix: np.ndarray


def bm_covariance(d: int, T: float) -> np.ndarray:
    """Covariance of (B_{t_1},...,B_{t_d}) on the uniform grid t_i = i T / d."""
    if d < 1:
        raise ValueError("need at least one time step")
    if T <= 0:
        raise ValueError("maturity must be positive")
    t = np.arange(1, d + 1) * (T / d)
    return np.minimum(t[:, None], t[None, :])


def cholesky_factor(sigma: np.ndarray) -> PathFactor:
    """Lower-triangular factor of an SPD covariance."""
    sigma = np.asarray(sigma, dtype=np.float64)
    A = np.linalg.cholesky(sigma)
    d = sigma.shape[0]
    return PathFactor("cholesky", d, float(sigma[-1, -1]), A)


def pca_factor(sigma: np.ndarray) -> PathFactor:
    """A = U Lambda^{1/2} with eigenvalues in descending order."""
    sigma = np.asarray(sigma, dtype=np.float64)
    vals, vecs = np.linalg.eigh(sigma)
    order = np.argsort(vals)[::-1]
    vals = np.maximum(vals[order], 0.0)
    A = vecs[:, order] * np.sqrt(vals)[None, :]
    return PathFactor("pca", sigma.shape[0], float(sigma[-1, -1]), A)


def brownian_bridge_factor(d: int, T: float) -> PathFactor:
    """Bridge construction: variable 1 drives the terminal value, later
    variables fill recursive midpoints of the index ranges."""
    if d < 1:
        raise ValueError("need at least one time step")
    t = np.concatenate([[0.0], np.arange(1, d + 1) * (T / d)])
    A = np.zeros((d, d))
    # rows of A express B_{t_i} as a combination of bridge variables
    A[d - 1, 0] = np.sqrt(t[d])
    col = 1
    stack = [(0, d)]  # known endpoints (grid indices); 0 is the pinned origin
    while stack:
        next_stack = []
        for left, right in stack:
            if right - left < 2:
                continue
            mid = (left + right) // 2
            wl = (t[right] - t[mid]) / (t[right] - t[left])
            wr = (t[mid] - t[left]) / (t[right] - t[left])
            sd = np.sqrt((t[mid] - t[left]) * (t[right] - t[mid]) / (t[right] - t[left]))
            row_l = A[left - 1] if left > 0 else 0.0
            A[mid - 1] = wl * row_l + wr * A[right - 1]
            A[mid - 1, col] += sd
            col += 1
            next_stack += [(left, mid), (mid, right)]
        stack = next_stack
    return PathFactor("bb", d, float(T), A)


def _factor(method: str, sigma: np.ndarray, d: int, T: float):
    if method == "cholesky":
        return cholesky_factor(sigma)
    if method == "pca":
        return pca_factor(sigma)
    if method == "bb":
        return brownian_bridge_factor(d, T)
    raise ValueError(f"unknown path method {method!r}; expected one of {METHODS}")


def path_factor(method: str, d: int, T: float) -> PathFactor:
    """Factor of the full Brownian covariance using the chosen method."""
    return _factor(method, bm_covariance(d, T), d, T)


def positive_first_column(factor: PathFactor) -> PathFactor:
    """Fix the sign of the first column of A so every entry is positive.

    Column sign flips leave A A^T unchanged.  A positive first column makes
    any weighted average of the asset levels strictly increasing in the first
    normal coordinate, which the basket preintegration requires.
    """
    A = factor.matrix
    if np.all(A[:, 0] < 0):
        A = A.copy()
        A[:, 0] = -A[:, 0]
    if np.any(A[:, 0] <= 0):
        raise ValueError(f"{factor.method} factor has a mixed-sign first column; "
                         "cannot orient it positive")
    return PathFactor(factor.method, factor.d, factor.T, A)


def conditional_factor(method: str, d: int, T: float) -> ConditionalFactor:
    """Factor of the post-conditioning covariance (entries t_{min+1} - t_1).

    For d = 1 the preintegration consumes all randomness and the factor is
    empty.  The conditional covariance equals a Brownian covariance on d-1
    uniform steps of the same spacing, so all three methods apply directly.
    """
    if d < 1:
        raise ValueError("need at least one time step")
    if d == 1:
        return ConditionalFactor(method, d, float(T), np.zeros((0, 0)))
    sub_T = (d - 1) * (T / d)
    inner = _factor(method, bm_covariance(d - 1, sub_T), d - 1, sub_T)
    return ConditionalFactor(method, d, float(T), inner.matrix)
