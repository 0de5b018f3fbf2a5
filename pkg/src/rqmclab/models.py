"""Discounted payoff evaluation for the three pricing problems.

Each payoff has the factored form g(x) * 1{phi(x) >= 0} with g and phi
exposed separately (both smooth) for growth-condition diagnostics.
All evaluators accept a single input vector or an (n, dim) batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pathgen import PathFactor


@dataclass(frozen=True)
class BsAsianSpec:
    s0: float
    sigma: float
    r: float
    T: float
    d: int
    strike: float

    def __post_init__(self):
        if self.s0 <= 0 or self.sigma <= 0 or self.T <= 0:
            raise ValueError("require s0 > 0, sigma > 0, T > 0")
        if self.d < 1:
            raise ValueError("require at least one averaging date")
        if self.strike < 0:
            raise ValueError("strike must be nonnegative")


@dataclass(frozen=True)
class BasketSpec:
    s0_1: float
    s0_2: float
    sigma1: float
    sigma2: float
    rho: float
    w1: float
    w2: float
    r: float
    T: float
    d: int
    strike: float

    def __post_init__(self):
        if self.s0_1 <= 0 or self.s0_2 <= 0 or self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("require positive initial prices and volatilities")
        if not abs(self.rho) < 1:
            raise ValueError("require |rho| < 1")
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.T <= 0 or self.d < 1 or self.strike < 0:
            raise ValueError("require T > 0, d >= 1, strike >= 0")


@dataclass(frozen=True)
class HestonSpec:
    s0: float
    v0: float
    theta: float
    nu: float
    sigma: float
    rho: float
    r: float
    T: float
    d: int
    strike: float

    def __post_init__(self):
        if self.s0 <= 0 or self.v0 < 0 or self.theta < 0 or self.nu < 0 or self.sigma < 0:
            raise ValueError("require s0 > 0 and nonnegative variance parameters")
        if not abs(self.rho) < 1:
            raise ValueError("require |rho| < 1")
        if self.T <= 0 or self.d < 1 or self.strike < 0:
            raise ValueError("require T > 0, d >= 1, strike >= 0")


def _rows(x, dim: int):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != dim:
        raise ValueError(f"input has dimension {x.shape[1]}, expected {dim}")
    return x, single


def _out(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


# -- Black-Scholes single-asset Asian ---------------------------------------

def bs_asset_path(spec: BsAsianSpec, factor: PathFactor, x):
    """S_i = s0 exp((r - sigma^2/2) t_i + sigma (A x)_i) for i = 1..d."""
    x, single = _rows(x, spec.d)
    t = np.arange(1, spec.d + 1) * (spec.T / spec.d)
    drift = (spec.r - 0.5 * spec.sigma ** 2) * t
    s = spec.s0 * np.exp(drift[None, :] + spec.sigma * (x @ factor.matrix.T))
    return s[0] if single else s

def bs_asian_average(spec: BsAsianSpec, factor: PathFactor, x):
    x2, single = _rows(x, spec.d)
    s = bs_asset_path(spec, factor, x2)
    return _out(s.mean(axis=1), single)


def bs_asian_payoff(spec: BsAsianSpec, factor: PathFactor, x):
    """Discounted arithmetic-average call payoff e^{-rT} (S_A - K)_+."""
    x, single = _rows(x, spec.d)
    avg = bs_asset_path(spec, factor, x).mean(axis=1)
    pay = np.exp(-spec.r * spec.T) * np.maximum(avg - spec.strike, 0.0)
    return _out(pay, single)


def bs_asian_g_phi(spec: BsAsianSpec, factor: PathFactor):
    """Smooth factor g and boundary function phi with payoff = g * 1{phi >= 0}."""
    disc = np.exp(-spec.r * spec.T)

    def phi(x):
        return bs_asian_average(spec, factor, x) - spec.strike

    def g(x):
        return disc * (bs_asian_average(spec, factor, x) - spec.strike)

    return g, phi


# -- two-asset basket Asian --------------------------------------------------

def _basket_averages(spec: BasketSpec, factor: PathFactor, z):
    d = spec.d
    A = factor.matrix
    t = np.arange(1, d + 1) * (spec.T / d)
    b1 = z[:, :d] @ A.T          # independent component of asset 1
    b2 = z[:, d:] @ A.T          # asset 2 driver (shared through rho)
    rho_c = np.sqrt(1.0 - spec.rho ** 2)
    s1 = spec.s0_1 * np.exp((spec.r - 0.5 * spec.sigma1 ** 2) * t
                            + spec.sigma1 * (spec.rho * b2 + rho_c * b1))
    s2 = spec.s0_2 * np.exp((spec.r - 0.5 * spec.sigma2 ** 2) * t
                            + spec.sigma2 * b2)
    return spec.w1 * s1.mean(axis=1) + spec.w2 * s2.mean(axis=1)


def basket_average(spec: BasketSpec, factor: PathFactor, z):
    z2, single = _rows(z, 2 * spec.d)
    return _out(_basket_averages(spec, factor, z2), single)


def basket_payoff(spec: BasketSpec, factor: PathFactor, z):
    """Discounted payoff e^{-rT} (w1 mean S^(1) + w2 mean S^(2) - K)_+.

    ``factor`` must be the Cholesky factor so every coefficient of z_1 in the
    weighted average is positive.
    """
    z, single = _rows(z, 2 * spec.d)
    avg = _basket_averages(spec, factor, z)
    pay = np.exp(-spec.r * spec.T) * np.maximum(avg - spec.strike, 0.0)
    return _out(pay, single)


def basket_g_phi(spec: BasketSpec, factor: PathFactor):
    disc = np.exp(-spec.r * spec.T)

    def phi(z):
        return basket_average(spec, factor, z) - spec.strike

    def g(z):
        return disc * (basket_average(spec, factor, z) - spec.strike)

    return g, phi


# -- Heston (Euler-Maruyama with full truncation) ----------------------------

def _heston_log_paths(spec: HestonSpec, z):
    """Log asset levels log(S_i / s0) for i = 1..d, shape (n, d).

    Odd inputs z_{2j+1} drive the asset's independent component, even inputs
    z_{2j+2} drive the variance.  Negative Euler variance is handled by full
    truncation: every occurrence of V_j is floored at 0 inside the recursions.
    """
    n = z.shape[0]
    d = spec.d
    dt = spec.T / d
    rho_c = np.sqrt(1.0 - spec.rho ** 2)
    sq_dt = np.sqrt(dt)
    v = np.full(n, spec.v0)
    log_s = np.zeros(n)
    out = np.empty((n, d))
    for i in range(d):
        vp = np.maximum(v, 0.0)
        sq_v = np.sqrt(vp)
        shock = rho_c * z[:, 2 * i] + spec.rho * z[:, 2 * i + 1]
        log_s = log_s + spec.r * dt - 0.5 * vp * dt + sq_dt * sq_v * shock
        v = v + spec.nu * (spec.theta - vp) * dt + spec.sigma * sq_dt * sq_v * z[:, 2 * i + 1]
        out[:, i] = log_s
    return out


def heston_average(spec: HestonSpec, z):
    z2, single = _rows(z, 2 * spec.d)
    avg = spec.s0 * np.exp(_heston_log_paths(spec, z2)).mean(axis=1)
    return _out(avg, single)


def heston_payoff(spec: HestonSpec, z):
    """Discounted arithmetic-average call under the Euler-discretized Heston model."""
    z, single = _rows(z, 2 * spec.d)
    avg = spec.s0 * np.exp(_heston_log_paths(spec, z)).mean(axis=1)
    pay = np.exp(-spec.r * spec.T) * np.maximum(avg - spec.strike, 0.0)
    return _out(pay, single)


def heston_g_phi(spec: HestonSpec):
    disc = np.exp(-spec.r * spec.T)

    def phi(z):
        return heston_average(spec, z) - spec.strike

    def g(z):
        return disc * (heston_average(spec, z) - spec.strike)

    return g, phi
