"""Closed-form preintegration of each payoff over its first normal coordinate,
plus an adaptive-quadrature evaluation of the defining conditional expectation
used as an independent oracle.

All values returned here are discounted, so every estimator downstream targets
the same quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .mathfn import std_normal_cdf, std_normal_pdf
from .models import (BasketSpec, BsAsianSpec, HestonSpec, heston_average)
from .pathgen import ConditionalFactor, PathFactor


@dataclass(frozen=True)
class PsiSolveResult:
    """Root of the conditional-average equation; -inf when always in the money."""

    psi: float
    iterations: int
    bracket: tuple | None


@dataclass(frozen=True)
class PreintegratedIntegrand:
    """Smooth nonnegative integrand left after integrating out one coordinate."""

    model: str
    s: int
    fn: object
    discounted: bool = True

    def __call__(self, z):
        return self.fn(z)


def _survival(y):
    # 1 - Phi(y), evaluated without cancellation in the upper tail
    return std_normal_cdf(-y)


def _rows(z, dim: int):
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.shape[1] != dim:
        raise ValueError(f"input has dimension {z.shape[1]}, expected {dim}")
    return z, single


# -- single-asset Asian -------------------------------------------------------

def _bs_tilde_avg(spec: BsAsianSpec, cfactor: ConditionalFactor, z: np.ndarray):
    """Conditional average with the first coordinate zeroed out:
    (1/d) sum_j s0 exp(omega (t_j - t_1) + sigma (C z)_{j-1})."""
    d = spec.d
    omega = spec.r - 0.5 * spec.sigma ** 2
    dt = spec.T / d
    terms = np.empty((z.shape[0], d))
    terms[:, 0] = spec.s0
    if d > 1:
        inc = z @ cfactor.matrix.T
        tdiff = np.arange(1, d) * dt
        terms[:, 1:] = spec.s0 * np.exp(omega * tdiff[None, :] + spec.sigma * inc)
    return terms.mean(axis=1)


def bs_asian_preint(spec: BsAsianSpec, cfactor: ConditionalFactor, z):
    """Conditional expectation of the discounted Asian payoff given the
    post-t_1 increments; collapses to the Black-Scholes call price at d = 1."""
    z, single = _rows(z, spec.d - 1)
    d = spec.d
    t1 = spec.T / d
    omega = spec.r - 0.5 * spec.sigma ** 2
    avg = _bs_tilde_avg(spec, cfactor, z)
    sig_rt = spec.sigma * np.sqrt(t1)
    if spec.strike <= 0.0:
        psi = np.full(avg.shape, -np.inf)
    else:
        psi = (np.log(spec.strike) - np.log(avg) - omega * t1) / sig_rt
    value = (np.exp(spec.r * (t1 - spec.T)) * avg * _survival(psi - sig_rt)
             - np.exp(-spec.r * spec.T) * spec.strike * _survival(psi))
    value = np.maximum(value, 0.0)
    return float(value[0]) if single else value


def bs_conditional_payoff(spec: BsAsianSpec, cfactor: ConditionalFactor, x):
    """Raw discounted payoff under the conditional path construction
    x = (x_1, z): B_{t_1} = sqrt(t_1) x_1 and post-t_1 increments C z.
    This is the integrand whose x_1-preintegration bs_asian_preint evaluates.
    """
    x, single = _rows(x, spec.d)
    t1 = spec.T / spec.d
    omega = spec.r - 0.5 * spec.sigma ** 2
    avg = _bs_tilde_avg(spec, cfactor, x[:, 1:])
    full_avg = avg * np.exp(omega * t1 + spec.sigma * np.sqrt(t1) * x[:, 0])
    pay = np.exp(-spec.r * spec.T) * np.maximum(full_avg - spec.strike, 0.0)
    return float(pay[0]) if single else pay


# -- two-asset basket ---------------------------------------------------------

def _basket_parts(spec: BasketSpec, factor: PathFactor, z_rest: np.ndarray):
    """Pieces of the conditional average: S-bar(z_1) = (w1/d) sum_j D_j e^{b_j z_1} + w2 m2."""
    d = spec.d
    A = factor.matrix
    t = np.arange(1, d + 1) * (spec.T / d)
    rho_c = np.sqrt(1.0 - spec.rho ** 2)
    b2 = z_rest[:, d - 1:] @ A.T
    b1_partial = z_rest[:, :d - 1] @ A[:, 1:].T
    D = spec.s0_1 * np.exp((spec.r - 0.5 * spec.sigma1 ** 2) * t
                           + spec.sigma1 * (spec.rho * b2 + rho_c * b1_partial))
    s2 = spec.s0_2 * np.exp((spec.r - 0.5 * spec.sigma2 ** 2) * t + spec.sigma2 * b2)
    b = spec.sigma1 * rho_c * A[:, 0]
    return D, b, s2.mean(axis=1)


def _solve_psi_batch(D: np.ndarray, b: np.ndarray, w1_over_d: float,
                     rhs: np.ndarray, tol: float = 1e-12):
    """Vectorized root of (w1/d) sum_j D_j e^{b_j z} = rhs for rows with rhs > 0.

    Brackets by doubling outward from 0, bisects to ``tol`` width, then takes
    two Newton steps on the log of the monotone sum.  Rows with rhs <= 0 (the
    conditional average exceeds the strike for every z_1) get -inf.
    """
    n = D.shape[0]
    psi = np.full(n, -np.inf)
    live = rhs > 0.0
    iters = 0
    if not np.any(live):
        return psi, iters
    Dl, rl = D[live], rhs[live]

    def f(z):
        with np.errstate(over="ignore"):
            return w1_over_d * np.sum(Dl * np.exp(np.outer(z, b)), axis=1) - rl

    lo = np.zeros(live.sum())
    hi = np.zeros(live.sum())
    f0 = f(lo)
    above = f0 > 0.0
    lo[above] = -1.0
    hi[~above] = 1.0
    for _ in range(80):
        iters += 1
        bad_lo = above & (f(lo) > 0.0)
        bad_hi = ~above & (f(hi) < 0.0)
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo[bad_lo] *= 2.0
        hi[bad_hi] *= 2.0
    width = float(np.max(hi - lo))
    nbis = int(np.ceil(np.log2(max(width, tol) / tol))) + 1
    for _ in range(nbis):
        iters += 1
        mid = 0.5 * (lo + hi)
        high = f(mid) > 0.0
        hi[high] = mid[high]
        lo[~high] = mid[~high]
    root = 0.5 * (lo + hi)
    log_rhs = np.log(rl / w1_over_d)
    for _ in range(2):
        iters += 1
        e = Dl * np.exp(np.outer(root, b))
        ssum = e.sum(axis=1)
        root = root - (np.log(ssum) - log_rhs) / (e @ b / ssum)
    psi[live] = root
    return psi, iters


def solve_psi_basket(spec: BasketSpec, factor: PathFactor, z_rest) -> PsiSolveResult:
    """Threshold psi with S-bar(psi; z_rest) = K, or -inf when no root exists."""
    z_rest, _ = _rows(z_rest, 2 * spec.d - 1)
    if z_rest.shape[0] != 1:
        raise ValueError("solve_psi_basket expects a single conditioning point")
    D, b, m2 = _basket_parts(spec, factor, z_rest)
    rhs = spec.strike - spec.w2 * m2
    psi, iters = _solve_psi_batch(D, b, spec.w1 / spec.d, rhs)
    bracket = None if not np.isfinite(psi[0]) else (float(psi[0]) - 1e-12, float(psi[0]) + 1e-12)
    return PsiSolveResult(float(psi[0]), iters, bracket)


def basket_preint(spec: BasketSpec, factor: PathFactor, z_rest):
    """Conditional expectation of the discounted basket payoff given all
    coordinates except z_1.  ``factor`` must be the Cholesky factor (positive
    first column) so the conditional average is strictly increasing in z_1."""
    z_rest, single = _rows(z_rest, 2 * spec.d - 1)
    if np.any(factor.matrix[:, 0] <= 0):
        raise ValueError("basket preintegration requires a positive first factor column")
    D, b, m2 = _basket_parts(spec, factor, z_rest)
    rhs = spec.strike - spec.w2 * m2
    psi, _ = _solve_psi_batch(D, b, spec.w1 / spec.d, rhs)
    disc = np.exp(-spec.r * spec.T)
    asset1 = (spec.w1 / spec.d) * np.sum(
        D * np.exp(0.5 * b * b)[None, :] * _survival(psi[:, None] - b[None, :]), axis=1)
    value = disc * (asset1 + (spec.w2 * m2 - spec.strike) * _survival(psi))
    value = np.maximum(value, 0.0)
    return float(value[0]) if single else value


# -- Heston -------------------------------------------------------------------

def heston_preint(spec: HestonSpec, z_rest):
    """Conditional expectation of the discounted Heston-Asian payoff given all
    coordinates except z_1.  z_1 enters every asset level through the same
    coefficient rho_hat sqrt(V_0 dt), which yields a Black-Scholes-type form."""
    z_rest, single = _rows(z_rest, 2 * spec.d - 1)
    n = z_rest.shape[0]
    z_full = np.concatenate([np.zeros((n, 1)), z_rest], axis=1)
    avg = heston_average(spec, z_full)
    dt = spec.T / spec.d
    c = np.sqrt((1.0 - spec.rho ** 2) * spec.v0 * dt)
    disc = np.exp(-spec.r * spec.T)
    if c == 0.0:
        # degenerate conditioning: z_1 has zero coefficient
        value = disc * np.maximum(avg - spec.strike, 0.0)
        return float(value[0]) if single else value
    if spec.strike <= 0.0:
        psi = np.full(n, -np.inf)
    else:
        psi = np.log(spec.strike / avg) / c
    value = disc * (avg * np.exp(0.5 * c * c) * _survival(psi - c)
                    - spec.strike * _survival(psi))
    value = np.maximum(value, 0.0)
    return float(value[0]) if single else value


# -- quadrature oracle --------------------------------------------------------

def quadrature_preint(payoff, j: int, x_rest, lo: float = -12.0, hi: float = 12.0,
                      tol: float = 1e-11) -> float:
    """Adaptive quadrature of payoff(x_j, x_rest) * phi(x_j) over x_j.

    Locates the indicator kink by bisection (the payoff boundary is monotone
    in x_j for every model here) and splits the panel there, then integrates
    each side with adaptive Gauss-Kronrod.  The domain is truncated to
    [lo, hi]; the normal weight outside |x_j| <= 12 is below 1e-31.
    """
    x_rest = np.asarray(x_rest, dtype=np.float64)

    def f1(t):
        x = np.insert(x_rest, j, t)
        return payoff(x)

    split = None
    f_lo, f_hi = f1(lo), f1(hi)
    if (f_lo > 0.0) != (f_hi > 0.0):
        a, bnd = lo, hi
        positive_low = f_lo > 0.0
        for _ in range(100):
            mid = 0.5 * (a + bnd)
            if (f1(mid) > 0.0) == positive_low:
                a = mid
            else:
                bnd = mid
        split = 0.5 * (a + bnd)

    def weighted(t):
        return f1(t) * std_normal_pdf(t)

    total = 0.0
    pieces = [(lo, hi)] if split is None else [(lo, split), (split, hi)]
    for a, bnd in pieces:
        res = quad(weighted, a, bnd, epsabs=tol * 0.5, epsrel=1e-10,
                   limit=300, full_output=1)
        if len(res) > 3:
            raise RuntimeError(f"preintegration quadrature did not converge on "
                               f"[{a}, {bnd}]: {res[3]}")
        total += res[0]
    return total


# -- integrand assembly -------------------------------------------------------

def preintegrated_integrand(spec, factor=None) -> PreintegratedIntegrand:
    """Wrap the model's closed-form preintegration as a batch-callable
    integrand over R^s (s = d-1 for the single asset, 2d-1 otherwise)."""
    if isinstance(spec, BsAsianSpec):
        if not isinstance(factor, ConditionalFactor):
            raise ValueError("single-asset preintegration needs a ConditionalFactor")
        return PreintegratedIntegrand(
            "bs_asian", spec.d - 1, lambda z: bs_asian_preint(spec, factor, z))
    if isinstance(spec, BasketSpec):
        if not isinstance(factor, PathFactor) or np.any(factor.matrix[:, 0] <= 0):
            raise ValueError("basket preintegration needs a PathFactor with a "
                             "positive first column")
        return PreintegratedIntegrand(
            "basket", 2 * spec.d - 1, lambda z: basket_preint(spec, factor, z))
    if isinstance(spec, HestonSpec):
        return PreintegratedIntegrand(
            "heston", 2 * spec.d - 1, lambda z: heston_preint(spec, z))
    raise TypeError(f"unsupported spec type {type(spec).__name__}")
