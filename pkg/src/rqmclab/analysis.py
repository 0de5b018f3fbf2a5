"""Theory instrumentation: the C^1 piecewise-quadratic soft clamp used in the
variance-splitting argument, finite-difference mixed partials, and empirical
exponential-growth-bound fits."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GrowthFit:
    """Result of fitting |derivatives| <= C exp(A|x|^2 + B|x|) over samples.

    The constant is calibrated on the inner half of the samples (by radius);
    positive residuals on the remaining samples are violations of the bound.
    """

    A: float
    B: float
    C: float
    max_residual: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.max_residual <= 1e-6


def smooth_clip(x, R: float):
    """Soft clamp onto [-R+1/2, R-1/2]: identity on [-R+1, R-1], quadratic
    blends on the unit bands outside, constant beyond |x| >= R.  C^1 with
    derivative in [0, 1]."""
    if R <= 1:
        raise ValueError("require R > 1")
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    a = arr.reshape(-1)
    out = np.empty_like(a)
    lo, hi = -R + 1.0, R - 1.0
    const = (R - 1.0) ** 2 / 2.0
    m_low = a <= -R
    m_dn = (a > -R) & (a < lo)
    m_mid = (a >= lo) & (a <= hi)
    m_up = (a > hi) & (a < R)
    m_high = a >= R
    out[m_low] = -R + 0.5
    out[m_dn] = 0.5 * a[m_dn] ** 2 + R * a[m_dn] + const
    out[m_mid] = a[m_mid]
    out[m_up] = -0.5 * a[m_up] ** 2 + R * a[m_up] - const
    out[m_high] = R - 0.5
    return float(out[0]) if scalar else out.reshape(arr.shape)


def smooth_clip_vec(x, R: float):
    """Componentwise soft clamp of a vector (or batch of vectors)."""
    return smooth_clip(np.asarray(x, dtype=np.float64), R)


def knot_continuity_gaps(R: float, eps: float = 1e-5):
    """Worst value and one-sided-slope mismatch of the soft clamp across its
    four knots.  Slopes are Richardson-extrapolated one-sided differences, so
    the O(eps) truncation of the quadratic pieces cancels.
    """
    value_gap = 0.0
    slope_gap = 0.0
    for knot in (-R, -R + 1.0, R - 1.0, R):
        left = np.nextafter(knot, -np.inf)
        right = np.nextafter(knot, np.inf)
        value_gap = max(value_gap, abs(smooth_clip(left, R) - smooth_clip(right, R)))
        f0 = smooth_clip(knot, R)

        def one_sided(sign):
            d1 = (smooth_clip(knot + sign * eps, R) - f0) / (sign * eps)
            d2 = (smooth_clip(knot + sign * eps / 2, R) - f0) / (sign * eps / 2)
            return 2.0 * d2 - d1

        slope_gap = max(slope_gap, abs(one_sided(1.0) - one_sided(-1.0)))
    return value_gap, slope_gap


def mixed_partial(fn, x, u, step: float = 1e-4) -> float:
    """Central-difference estimate of the mixed partial of ``fn`` at ``x``
    taken once with respect to each coordinate in ``u`` (at most 4 of them).

    Per-coordinate steps are scaled as step * (1 + |x_i|); the error is
    O(step^2) in each direction.
    """
    u = tuple(u)
    if len(u) > 4:
        raise ValueError("mixed partials limited to 4 coordinates")
    x = np.asarray(x, dtype=np.float64)
    if len(u) == 0:
        val = float(fn(x))
        if not np.isfinite(val):
            raise RuntimeError("non-finite function value in mixed_partial")
        return val
    h = np.array([step * (1.0 + abs(x[i])) for i in u])
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=len(u)):
        pt = x.copy()
        for i, sgn, hi in zip(u, signs, h):
            pt[i] += sgn * hi
        val = float(fn(pt))
        if not np.isfinite(val):
            raise RuntimeError("non-finite function value in mixed_partial")
        total += np.prod(signs) * val
    return total / np.prod(2.0 * h)


def growth_check(fn, samples, A: float, B: float, max_order: int = 2,
                 step: float = 1e-4) -> GrowthFit:
    """Empirical check of sup_u |d^u fn(x)| <= C exp(A|x|^2 + B|x|).

    Evaluates the function and its finite-difference mixed partials up to
    ``max_order`` coordinates at every sample, calibrates the smallest C on
    the inner half of the samples, and reports the worst log-residual over
    all of them.  A failing fit is data, not an error.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n, d = samples.shape
    radii = np.linalg.norm(samples, axis=1)
    log_m = np.empty(n)
    subsets = [()]
    for k in range(1, max_order + 1):
        subsets += list(itertools.combinations(range(d), k))
    for i in range(n):
        worst = 0.0
        for u in subsets:
            worst = max(worst, abs(mixed_partial(fn, samples[i], u, step)))
        log_m[i] = np.log(worst) if worst > 0 else -np.inf
    envelope = A * radii ** 2 + B * radii
    inner = radii <= np.median(radii)
    if not np.any(inner):
        inner = np.ones(n, dtype=bool)
    log_c = float(np.max(log_m[inner] - envelope[inner]))
    residuals = log_m - envelope - log_c
    return GrowthFit(A, B, float(np.exp(log_c)), float(np.max(residuals)), n)
