"""The four estimators (MC, QMC, CQMC, CQMC+IS), the repetition/RMSE harness,
reference-value computation, and log-log slope fitting.

Monte Carlo draws come from a counter-based generator (Philox) and go through
the same inverse-CDF path as the QMC points, so method comparisons isolate
the point set.  Every repetition seed is fanned out from the master seed by a
stable hash, making full studies a pure function of (configuration, seed).
"""

from __future__ import annotations

import enum
import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lds
from .mathfn import std_normal_inv_cdf
from .models import (BasketSpec, BsAsianSpec, HestonSpec, basket_payoff,
                     bs_asian_payoff, heston_payoff)
from .odis import find_drift, is_transform
from .pathgen import (METHODS, conditional_factor, path_factor,
                      positive_first_column)
from .preint import preintegrated_integrand


class Method(enum.Enum):
    MC = "mc"
    QMC = "qmc"
    CQMC = "cqmc"
    CQMC_IS = "cqmc_is"


@dataclass(frozen=True)
class RunRecord:
    method: Method
    n: int
    rep: int
    seed: int
    estimate: float


@dataclass(frozen=True)
class RmseRow:
    method: Method
    n: int
    rmse: float
    reps: int
    reference: float


@dataclass(frozen=True)
class StudyResult:
    rows: list
    records: list
    reference: float


@dataclass(frozen=True)
class McSource:
    """Counter-based pseudo-random uniforms, strictly inside (0,1)."""

    seed: int
    dim: int

    def block(self, n: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(self.seed)))
        raw = rng.integers(0, 1 << 53, size=(n, self.dim), dtype=np.int64)
        return (raw + 0.5) * 2.0 ** -53


def fanout_seed(master: int, method: Method, n: int, rep: int) -> int:
    """Stable 64-bit repetition seed derived from (master, method, n, rep)."""
    key = f"{master}:{method.value}:{n}:{rep}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


class Problem:
    """A pricing problem with its unit-cube integrands assembled per method."""

    def __init__(self, spec, path_method: str = "pca", dirs=None):
        if path_method not in METHODS:
            raise ValueError(f"unknown path method {path_method!r}")
        self.spec = spec
        self.path_method = path_method
        self.dirs = dirs if dirs is not None else lds.default_direction_numbers()
        self._drift = None
        if isinstance(spec, BsAsianSpec):
            full = path_factor(path_method, spec.d, spec.T)
            cond = conditional_factor(path_method, spec.d, spec.T)
            self.raw_dim = spec.d
            self._payoff = lambda x: bs_asian_payoff(spec, full, x)
            self.preint = preintegrated_integrand(spec, cond)
        elif isinstance(spec, BasketSpec):
            full = positive_first_column(path_factor(path_method, spec.d, spec.T))
            self.raw_dim = 2 * spec.d
            self._payoff = lambda z: basket_payoff(spec, full, z)
            self.preint = preintegrated_integrand(spec, full)
        elif isinstance(spec, HestonSpec):
            self.raw_dim = 2 * spec.d
            self._payoff = lambda z: heston_payoff(spec, z)
            self.preint = preintegrated_integrand(spec)
        else:
            raise TypeError(f"unsupported spec type {type(spec).__name__}")

    def dimension(self, method: Method) -> int:
        return self.raw_dim if method in (Method.MC, Method.QMC) else self.preint.s

    def drift(self):
        """ODIS drift for the preintegrated integrand, computed once and cached."""
        if self._drift is None:
            self._drift = find_drift(self.preint, init=np.zeros(self.preint.s))
        return self._drift

    def integrand(self, method: Method):
        """The integrand over (0,1)^s that the given method averages."""
        if method in (Method.MC, Method.QMC):
            payoff = self._payoff
            return lambda u: payoff(std_normal_inv_cdf(u))
        if method is Method.CQMC:
            h = self.preint
            return lambda u: h(std_normal_inv_cdf(u))
        if method is Method.CQMC_IS:
            return is_transform(self.preint, self.drift())
        raise ValueError(f"unknown method {method!r}")


def estimate(integrand, source, n: int) -> float:
    """Equal-weight average of the integrand over the source's first n points,
    accumulated with compensated summation in fixed index order."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    values = np.asarray(integrand(source.block(n)), dtype=np.float64)
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise RuntimeError(f"non-finite integrand value at point index "
                           f"{int(np.nonzero(bad)[0][0])}")
    return math.fsum(values) / n


def run_method(problem: Problem, method: Method, n: int, seed: int) -> RunRecord:
    """One randomized estimate of the problem's price with the given method."""
    dim = problem.dimension(method)
    integrand = problem.integrand(method)
    if dim == 0:
        # preintegration consumed all randomness; the integrand is a constant
        value = float(np.asarray(integrand(np.zeros((1, 0))))[0])
        return RunRecord(method, n, 0, seed, value)
    if method is Method.MC:
        source = McSource(seed, dim)
    else:
        source = lds.new_generator(problem.dirs, dim, seed, scrambled=True)
    return RunRecord(method, n, 0, seed, estimate(integrand, source, n))


def reference_value(problem: Problem, seed: int = 0, n: int = 2 ** 19,
                    scrambles: int = 8) -> float:
    """High-precision CQMC+IS price: the scramble-average of ``scrambles``
    independent randomizations at sample size n."""
    vals = [run_method(problem, Method.CQMC_IS, n,
                       fanout_seed(seed, Method.CQMC_IS, n, 10_000 + k)).estimate
            for k in range(scrambles)]
    return math.fsum(vals) / len(vals)


def rmse_study(problem: Problem, methods, n_grid, reps: int, reference: float,
               master_seed: int = 0, threads: int = 1) -> StudyResult:
    """RMSE of each (method, n) against the reference over ``reps``
    independent randomizations; per-repetition records are retained."""
    n_grid = list(n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("sample-size grid must be ascending")
    if reps < 2:
        raise ValueError("need at least 2 repetitions")
    methods = list(methods)
    if Method.CQMC_IS in methods:
        problem.drift()          # fill the cache before any parallel work
    tasks = [(m, n, r) for m in methods for n in n_grid for r in range(reps)]

    def one(task):
        m, n, r = task
        rec = run_method(problem, m, n, fanout_seed(master_seed, m, n, r))
        return RunRecord(m, n, r, rec.seed, rec.estimate)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, tasks))
    else:
        records = [one(t) for t in tasks]
    records.sort(key=lambda rec: (methods.index(rec.method), rec.n, rec.rep))
    rows = []
    for m in methods:
        for n in n_grid:
            errs = [(rec.estimate - reference) ** 2 for rec in records
                    if rec.method is m and rec.n == n]
            rows.append(RmseRow(m, n, math.sqrt(math.fsum(errs) / len(errs)),
                                reps, reference))
    return StudyResult(rows, records, reference)


def fit_slope(rows) -> float:
    """Least-squares slope of log2(rmse) against log2(n) for one method's rows."""
    rows = list(rows)
    if len({row.method for row in rows}) > 1:
        raise ValueError("fit_slope expects rows for a single method")
    usable = [row for row in rows if row.rmse > 0.0]
    if len(usable) < len(rows):
        warnings.warn("excluding rows with rmse = 0 from slope fit")
    if len(usable) < 4:
        raise ValueError("need at least 4 positive-rmse rows to fit a slope")
    x = np.log2([row.n for row in usable])
    y = np.log2([row.rmse for row in usable])
    return float(np.polyfit(x, y, 1)[0])
