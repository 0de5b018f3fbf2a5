"""Experiment orchestration: config parsing, the convergence-study command
reproducing the RMSE protocol, single-price runs, and a self-validation suite.

Configs are flat JSON documents; unknown keys are rejected.  Study outputs are
two CSV files per strike (runs.csv, rmse.csv) with fixed headers, and the full
pipeline is a pure function of (config, master seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analysis, lds, odis, pathgen, preint
from .estimators import (Method, Problem, fit_slope, reference_value,
                         rmse_study, run_method)
from .models import BasketSpec, BsAsianSpec, HestonSpec

_COMMON_KEYS = {"model", "path", "n_exponents", "reps", "seed", "threads",
                "out", "direction_file", "K"}
_MODEL_KEYS = {
    "bs_asian": {"S0", "sigma", "r", "T", "d"},
    "basket": {"S0_1", "S0_2", "sigma1", "sigma2", "rho", "w1", "w2", "r", "T", "d"},
    "heston": {"S0", "V0", "theta", "nu", "sigma", "rho", "r", "T", "d"},
}


@dataclass
class ExperimentConfig:
    model: str
    params: dict
    strikes: list
    path_method: str = "pca"
    n_exponents: list = field(default_factory=lambda: list(range(7, 17)))
    reps: int = 100
    seed: int = 0
    threads: int = 0
    out: str = "out"
    direction_file: str | None = None

    def spec(self, strike: float):
        p = self.params
        if self.model == "bs_asian":
            return BsAsianSpec(p["S0"], p["sigma"], p["r"], p["T"], int(p["d"]), strike)
        if self.model == "basket":
            return BasketSpec(p["S0_1"], p["S0_2"], p["sigma1"], p["sigma2"],
                              p["rho"], p["w1"], p["w2"], p["r"], p["T"],
                              int(p["d"]), strike)
        return HestonSpec(p["S0"], p["V0"], p["theta"], p["nu"], p["sigma"],
                          p["rho"], p["r"], p["T"], int(p["d"]), strike)

    def problem(self, strike: float) -> Problem:
        dirs = None
        if self.direction_file:
            dirs = lds.load_direction_numbers(self.direction_file)
        return Problem(self.spec(strike), self.path_method, dirs)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    model = doc.get("model")
    if model not in _MODEL_KEYS:
        raise ValueError(f"config key 'model' must be one of {sorted(_MODEL_KEYS)}, "
                         f"got {model!r}")
    allowed = _COMMON_KEYS | _MODEL_KEYS[model]
    for key in doc:
        if key not in allowed:
            raise ValueError(f"unknown config key {key!r}")
    missing = _MODEL_KEYS[model] - set(doc)
    if missing:
        raise ValueError(f"missing config keys for {model}: {sorted(missing)}")
    if "K" not in doc:
        raise ValueError("missing config key 'K'")
    strikes = doc["K"] if isinstance(doc["K"], list) else [doc["K"]]
    if not strikes:
        raise ValueError("config key 'K' must list at least one strike")
    cfg = ExperimentConfig(
        model=model,
        params={k: float(doc[k]) for k in _MODEL_KEYS[model]},
        strikes=[float(k) for k in strikes],
        path_method=doc.get("path", "pca"),
        n_exponents=[int(e) for e in doc.get("n_exponents", range(7, 17))],
        reps=int(doc.get("reps", 100)),
        seed=int(doc.get("seed", 0)),
        threads=int(doc.get("threads", 0)),
        out=str(doc.get("out", "out")),
        direction_file=doc.get("direction_file"),
    )
    if cfg.path_method not in pathgen.METHODS:
        raise ValueError(f"config key 'path' must be one of {pathgen.METHODS}")
    if cfg.reps < 2:
        raise ValueError("config key 'reps' must be >= 2")
    if any(b <= a for a, b in zip(cfg.n_exponents, cfg.n_exponents[1:])) or not cfg.n_exponents:
        raise ValueError("config key 'n_exponents' must be a nonempty ascending list")
    if cfg.threads < 0:
        raise ValueError("config key 'threads' must be >= 0")
    cfg.spec(cfg.strikes[0])  # surface model-invariant violations now
    return cfg


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_converge(cfg: ExperimentConfig, full: bool = False, out=sys.stdout) -> int:
    """Run the four-method RMSE study for every strike and write CSVs.

    Without ``full`` the protocol is scaled down for desk runtimes
    (reps <= 30, n <= 2^13, reference at 2^16); with ``full`` the configured
    protocol runs as-is with the reference at 2^19.
    """
    methods = [Method.MC, Method.QMC, Method.CQMC, Method.CQMC_IS]
    if full:
        reps, exps, ref_n = cfg.reps, cfg.n_exponents, 2 ** 19
    else:
        reps = min(cfg.reps, 30)
        exps = [e for e in cfg.n_exponents if e <= 13]
        ref_n = 2 ** 16
    if not exps:
        raise ValueError("no usable n exponents for the scaled protocol")
    n_grid = [2 ** e for e in exps]
    threads = cfg.threads or (os.cpu_count() or 1)
    os.makedirs(cfg.out, exist_ok=True)
    for strike in cfg.strikes:
        problem = cfg.problem(strike)
        reference = reference_value(problem, seed=cfg.seed, n=ref_n)
        study = rmse_study(problem, methods, n_grid, reps, reference,
                           master_seed=cfg.seed, threads=threads)
        subdir = os.path.join(cfg.out, f"K{strike:g}")
        os.makedirs(subdir, exist_ok=True)
        _write_csv(os.path.join(subdir, "runs.csv"),
                   ["method", "n", "rep", "seed", "estimate"],
                   [(rec.method.value, rec.n, rec.rep, rec.seed, rec.estimate)
                    for rec in study.records])
        _write_csv(os.path.join(subdir, "rmse.csv"),
                   ["method", "n", "rmse", "reps", "reference"],
                   [(row.method.value, row.n, row.rmse, row.reps, row.reference)
                    for row in study.rows])
        print(f"[K={strike:g}] reference = {reference!r}", file=out)
        for m in methods:
            slope = fit_slope([row for row in study.rows if row.method is m])
            print(f"[K={strike:g}] {m.value:8s} slope = {slope:+.3f}", file=out)
    return 0


def cmd_price(cfg: ExperimentConfig, method_name: str, n: int, out=sys.stdout) -> int:
    """Single estimate for the first configured strike."""
    method = Method(method_name)
    problem = cfg.problem(cfg.strikes[0])
    rec = run_method(problem, method, n, cfg.seed)
    print(f"estimate = {rec.estimate!r}", file=out)
    if method is Method.CQMC_IS:
        print(f"drift_norm = {float(np.linalg.norm(problem.drift().mu))!r}", file=out)
    return 0


def _validation_checks():
    """The oracle suite behind ``validate``: (name, measured, threshold, passed)."""
    from .models import basket_payoff, heston_payoff
    checks = []
    rng = np.random.default_rng(20240901)

    # closed-form preintegration vs adaptive quadrature, all three models
    worst = 0.0
    bspec = BsAsianSpec(100.0, 0.4, 0.1, 1.0, 4, 110.0)
    cond = pathgen.conditional_factor("pca", 4, 1.0)
    for _ in range(5):
        z = rng.standard_normal(3)
        cf = preint.bs_asian_preint(bspec, cond, z)
        qd = preint.quadrature_preint(
            lambda x: preint.bs_conditional_payoff(bspec, cond, x), 0, z)
        worst = max(worst, abs(cf - qd) / max(abs(qd), 1e-10))
    kspec = BasketSpec(100.0, 100.0, 0.3, 0.1, 0.5, 0.7, 0.3, 0.05, 1.0, 4, 110.0)
    bfac = pathgen.positive_first_column(pathgen.path_factor("pca", 4, 1.0))
    for _ in range(5):
        z = rng.standard_normal(7)
        cf = preint.basket_preint(kspec, bfac, z)
        qd = preint.quadrature_preint(lambda x: basket_payoff(kspec, bfac, x), 0, z)
        worst = max(worst, abs(cf - qd) / max(abs(qd), 1e-10))
    hspec = HestonSpec(50.0, 0.2, 0.2, 1.0, 0.2, 0.5, 0.05, 1.0, 4, 60.0)
    for _ in range(5):
        z = rng.standard_normal(7)
        cf = preint.heston_preint(hspec, z)
        qd = preint.quadrature_preint(lambda x: heston_payoff(hspec, x), 0, z)
        worst = max(worst, abs(cf - qd) / max(abs(qd), 1e-10))
    checks.append(("preintegration vs quadrature (rel)", worst, 1e-8))

    # factorization residuals at d = 80
    sig = pathgen.bm_covariance(80, 1.0)
    worst = 0.0
    for m in pathgen.METHODS:
        A = pathgen.path_factor(m, 80, 1.0).matrix
        worst = max(worst, float(np.abs(A @ A.T - sig).max()))
    checks.append(("factorization residual d=80 (max)", worst, 1e-9))

    # Sobol one-dimensional stratification, scrambled
    gen = lds.new_generator(lds.default_direction_numbers(), 10, seed=7)
    block = gen.block(1 << 12)
    bad = 0
    for j in range(10):
        for m in range(1, 13):
            cells = np.floor(block[: 1 << m, j] * (1 << m)).astype(int)
            bad += int(len(np.unique(cells)) != (1 << m))
    checks.append(("Sobol stratification misses (dims<=10, m<=12)", float(bad), 0.0))

    # soft-clamp knot continuity (value and slope)
    vgap, sgap = analysis.knot_continuity_gaps(3.5)
    checks.append(("soft clamp knot continuity", max(vgap, sgap), 1e-9))

    # IS likelihood-ratio unbiasedness: E[w] = 1 under the drifted proposal
    prop = odis.ISProposal(np.array([1.0, -0.7, 0.4]), 0.0, True, 0)
    w = odis.is_transform(lambda x: np.ones(x.shape[0]), prop)
    u = np.random.Generator(np.random.Philox(key=np.uint64(11))).random((10 ** 5, 3))
    u = np.clip(u, 1e-12, 1 - 1e-12)
    vals = w(u)
    dev = abs(float(vals.mean()) - 1.0)
    bound = 4.0 * float(vals.std()) / np.sqrt(len(vals))
    checks.append(("IS weight mean |E[w]-1| (4 SE bound %.1e)" % bound, dev, bound))

    # light-tail moment decay: dominated by C exp(-R^2/4)
    prop = odis.ISProposal(np.array([1.2, -1.0]), 0.0, True, 0)
    grid = [3.0, 4.0, 5.0, 6.0]
    t = [odis.tail_moment_estimate(prop, B=1.0, R=R_, n=2 * 10 ** 5, seed=3) for R_ in grid]
    ratios = [v * np.exp(R_ ** 2 / 4.0) for v, R_ in zip(t, grid)]
    c_fit = max(ratios)
    resid = max(np.log(v) - (np.log(c_fit) - R_ ** 2 / 4.0)
                for v, R_ in zip(t, grid) if R_ >= 4.0 and v > 0)
    checks.append(("tail moment log-residual (R>=4, C=%.3g)" % c_fit, resid, 1e-12))
    return checks


def cmd_validate(out=sys.stdout) -> int:
    failures = 0
    for name, measured, threshold in _validation_checks():
        ok = measured <= threshold
        failures += int(not ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: measured {measured:.3e} "
              f"vs threshold {threshold:.3e}", file=out)
    print(f"{'all checks passed' if not failures else f'{failures} check(s) failed'}",
          file=out)
    return 1 if failures else 0


def _load_config(args) -> ExperimentConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rqmclab",
        description="Quasi-Monte Carlo pricing laboratory (scrambled Sobol + "
                    "preintegration + optimal-drift importance sampling)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("price", "converge"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None)
    pp = sub.choices["price"]
    pp.add_argument("--method", required=True,
                    choices=[m.value for m in Method])
    pp.add_argument("--n", required=True, type=int)
    sub.choices["converge"].add_argument(
        "--full", action="store_true",
        help="run the configured protocol in full with the 2^19 reference")
    sub.add_parser("validate")
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate()
        cfg = _load_config(args)
        if args.command == "price":
            return cmd_price(cfg, args.method, args.n)
        return cmd_converge(cfg, full=args.full)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
