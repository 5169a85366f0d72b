"""Command-line drivers.

Each subcommand reads its parameters from a JSON config block named after
the command (``--config``) with command-line options taking precedence, and
writes plot-ready tables plus a JSON summary into ``--out``.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure
(including a failed conservation check), 3 fit did not converge.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings

import numpy as np
from scipy.stats import skew

from . import io
from .errors import ConfigError, EvoIncomeError, InvalidParamsError, NumericOverflowError
from .estimation import build_histogram, fit_mixture, hill_tail_exponent, ks_statistic
from .estimation import EmpiricalDistribution, max_entropy_wage
from .firms import FirmGrowthParams, power_law_exponent, profit_from_sales, simulate_firm_ensemble
from .income import MixtureParams, WageProcessParams, component_densities, labour_cdf
from .income import mixture_sample, wage_ensemble
from .market import (
    CostCurve,
    Economy,
    MarketAggregates,
    MarketState,
    Product,
    conservation_check,
    equilibrium_psi,
    mean_price,
    run_market,
)
from .prices import PriceFluctParams, laplace_cdf, laplace_mean_abs, laplace_variance
from .prices import price_ensemble, windowed_mean_abs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 1, 2, 3

STATIONARY_PRODUCTS = [
    {"price": 1.0, "eta": 0.5, "gamma": 0.02, "c0": 0.25, "c1": 0.2, "c2": 0.25, "z0": 2.0,
     "y0": 1.0},
    {"price": 1.1, "eta": 0.5, "gamma": 0.02, "c0": 0.3, "c1": 0.25, "c2": 0.3, "z0": 1.5,
     "y0": 0.8},
    {"price": 0.95, "eta": 0.5, "gamma": 0.02, "c0": 0.2, "c1": 0.2, "c2": 0.2, "z0": 2.5,
     "y0": 1.2},
]

DEFAULTS = {
    "simulate-market": {
        "products": STATIONARY_PRODUCTS, "demand_intercept": None, "demand_slope": 1.0,
        "psi0": None, "dt": 0.01, "n_steps": 10_000, "n_employees": 10, "n_unemployed": 2,
        "tax_rate": 0.1, "money_per_agent": 100.0,
    },
    "simulate-firms": {
        "n_firms": 100_000, "a": 0.5, "D_prime": 0.5, "nu": 1.0, "pi_mean": 1.0, "x_min": None,
        "x0": 1.0, "dt": 0.01, "n_steps": 2000, "mode": "cash_cow", "conserve_total": False,
        "hill_k": None,
    },
    "simulate-wages": {
        "zeta": 1.0, "Q": 1.0, "t_wage": None, "n_replicas": 2000, "dt": 0.001,
        "burn_in": 5000, "record_every": 20, "n_records": 500, "w0": None,
    },
    "simulate-prices": {
        "b": 1.0, "D": 2.0, "regime": "competitive", "n_replicas": 2000, "dt": 0.01,
        "burn_in": 1000, "record_every": 20, "n_records": 500, "n_windows": 6,
    },
    "sample": {"params": None, "n": 100_000},
    "fit": {"data": None, "init": None, "freeze": [], "bins": 200, "h_floor": 0.0,
            "max_iter": 500},
    "oracle-entropy": {"bins": None, "grid": None, "mean": None},
}
PRODUCT_KEYS = {"price", "eta", "gamma", "c0", "c1", "c2", "z0", "y0"}
GLOBAL_KEYS = {"seed", "format"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit, default 0)")
    common.add_argument("--config", help="JSON config with one block per command")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--format", choices=("csv", "json"), help="table format (default csv)")

    parser = _Parser(prog="evoincome", parents=[common],
                     description="Evolutionary market and income-distribution simulations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate-market", parents=[common],
                   help="run the product market circuit and check money conservation")
    p = sub.add_parser("simulate-firms", parents=[common], help="firm-size ensemble")
    p.add_argument("--n-firms", dest="n_firms", type=int, default=argparse.SUPPRESS)
    p.add_argument("--n-steps", dest="n_steps", type=int, default=argparse.SUPPRESS)
    p = sub.add_parser("simulate-wages", parents=[common], help="wage Langevin ensemble")
    p.add_argument("--n-replicas", dest="n_replicas", type=int, default=argparse.SUPPRESS)
    p = sub.add_parser("simulate-prices", parents=[common], help="price-fluctuation ensemble")
    p.add_argument("--regime", choices=("competitive", "non_competitive"),
                   default=argparse.SUPPRESS)
    p.add_argument("--n-replicas", dest="n_replicas", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("sample", parents=[common], help="draw incomes from the mixture")
    p.add_argument("--params", default=argparse.SUPPRESS,
                   help="MixtureParams JSON file (default: published Australian fit)")
    p.add_argument("-n", "--n", dest="n", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("fit", parents=[common], help="fit the income mixture to data")
    p.add_argument("--data", default=argparse.SUPPRESS,
                   help="income sample CSV or histogram CSV")
    p.add_argument("--init", default=argparse.SUPPRESS, help="initial MixtureParams JSON")
    p.add_argument("--freeze", default=argparse.SUPPRESS,
                   help="comma-separated parameter names to hold fixed")
    p.add_argument("--bins", type=int, default=argparse.SUPPRESS,
                   help="histogram bins for sample data")
    p.add_argument("--h-floor", dest="h_floor", type=float, default=argparse.SUPPRESS)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("oracle-entropy", parents=[common],
                       help="maximum-entropy wage occupation at fixed mean")
    p.add_argument("--bins", default=argparse.SUPPRESS, help="comma-separated bin values")
    p.add_argument("--grid", default=argparse.SUPPRESS, help="LOW,HIGH,N bin midpoints")
    p.add_argument("--mean", type=float, default=argparse.SUPPRESS)
    return parser


# configuration

def load_config(path):
    if path is None:
        return {}
    try:
        cfg = io.read_json(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - set(DEFAULTS) - GLOBAL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for command, block in cfg.items():
        if command in GLOBAL_KEYS:
            continue
        if not isinstance(block, dict):
            raise ConfigError(f"config block {command!r} must be an object")
        bad = set(block) - set(DEFAULTS[command])
        if bad:
            raise ConfigError(f"unknown keys in {command!r}: {sorted(bad)}")
    return cfg


def resolve(args):
    cfg = load_config(getattr(args, "config", None))
    block = dict(DEFAULTS[args.command])
    block.update(cfg.get(args.command, {}))
    for key in DEFAULTS[args.command]:
        if hasattr(args, key):
            block[key] = getattr(args, key)
    seed = getattr(args, "seed", cfg.get("seed", 0))
    if not (isinstance(seed, int) and 0 <= seed < 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    fmt = getattr(args, "format", cfg.get("format", "csv"))
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    return block, seed, fmt, getattr(args, "out", ".")


def _positive_int(block, *keys, allow_zero=False):
    for k in keys:
        v = block[k]
        if not isinstance(v, int) or isinstance(v, bool) or v < (0 if allow_zero else 1):
            raise ConfigError(f"{k} must be a {'nonnegative' if allow_zero else 'positive'} integer")


# commands

def cmd_simulate_market(block, seed, fmt, out):
    _positive_int(block, "n_steps")
    products = []
    for i, spec in enumerate(block["products"]):
        if set(spec) != PRODUCT_KEYS:
            raise ConfigError(f"product {i} needs exactly the keys {sorted(PRODUCT_KEYS)}")
        products.append(Product(spec["price"], spec["eta"], spec["gamma"], spec["z0"],
                                spec["y0"], CostCurve(spec["c0"], spec["c1"], spec["c2"])))
    if not products:
        raise ConfigError("at least one product is required")
    slope = block["demand_slope"]
    y_t = sum(p.sales for p in products)
    intercept = block["demand_intercept"]
    if intercept is None:
        intercept = y_t + slope * mean_price(products)
    psi0 = block["psi0"] if block["psi0"] is not None else equilibrium_psi(products)
    state = MarketState(tuple(products), psi0, intercept, slope)
    economy = Economy(block["n_employees"], block["n_unemployed"], block["tax_rate"])
    dt = block["dt"]
    run = run_market(state, dt, block["n_steps"], economy=economy,
                     money_per_agent=block["money_per_agent"])
    report = conservation_check(run.ledgers, dt)

    steps = np.arange(len(run.aggregates))
    rows = np.array([a.row() for a in run.aggregates])
    header = ["step", "time"] + list(MarketAggregates.FIELDS)
    cols = [steps, steps * dt] + [rows[:, j] for j in range(rows.shape[1])]
    for k in range(run.shares.shape[1]):
        header.append(f"share_{k}")
        cols.append(run.shares[:, k])
    io.write_table(os.path.join(out, "market_timeseries"), header, cols, fmt)

    alpha = run.series("alpha")
    summary = report.to_dict()
    summary["offenders"] = [list(o) for o in report.offenders[:100]]
    summary.update(n_agents=len(run.ledgers[0].money), seed=seed,
                   alpha_relative_drift=float(np.ptp(alpha) / abs(alpha[0])),
                   stockout_steps=run.stockout_steps)
    io.write_json(os.path.join(out, "conservation.json"), summary)
    if not report.passed:
        print("money conservation violated", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_simulate_firms(block, seed, fmt, out):
    _positive_int(block, "n_firms", "n_steps")
    params = FirmGrowthParams(block["a"], block["D_prime"], block["nu"], block["pi_mean"])
    ens = simulate_firm_ensemble(params, block["n_firms"], block["n_steps"], dt=block["dt"],
                                 x0=block["x0"], x_min=block["x_min"], seed=seed,
                                 conserve_total=block["conserve_total"], mode=block["mode"])
    x = ens.sales
    io.write_table(os.path.join(out, "firms_sample"), ["sales", "profit"],
                   [x, profit_from_sales(x, params)], fmt)

    k = block["hill_k"] or max(10, x.size // 100)
    hill = hill_tail_exponent(x, k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        target = power_law_exponent(params) if params.noise_amplitude > 0 else None
    summary = {
        "n_firms": int(x.size), "time": ens.time, "seed": seed,
        "tail_exponent": hill.exponent, "tail_exponent_stderr": hill.stderr, "hill_k": k,
        "tail_exponent_by_k": {str(kk): v for kk, v in hill.by_k.items()},
        "tail_stable": hill.stable, "target_exponent": target,
        "mean_sales": float(x.mean()), "mean_log_sales": float(np.log(x).mean()),
        "std_log_sales": float(np.log(x).std()), "skew_log_sales": float(skew(np.log(x))),
    }
    if target is not None and target > 1:
        u = np.sort(x)[-k - 1]
        tail = x[x > u]
        summary["tail_ks_vs_power_law"] = ks_statistic(
            EmpiricalDistribution(sample=tail), lambda v: 1.0 - (v / u) ** (1.0 - target))
    io.write_json(os.path.join(out, "firms_summary.json"), summary)
    return EXIT_OK


def _record_steps(block):
    _positive_int(block, "n_replicas", "record_every", "n_records")
    _positive_int(block, "burn_in", allow_zero=True)
    return block["burn_in"] + (block["n_records"] - 1) * block["record_every"]


def cmd_simulate_wages(block, seed, fmt, out):
    n_steps = _record_steps(block)
    params = WageProcessParams(block["zeta"], block["Q"], block["t_wage"])
    ens = wage_ensemble(params, block["n_replicas"], block["dt"], n_steps, seed=seed,
                        burn_in=block["burn_in"], record_every=block["record_every"],
                        w0=block["w0"])
    io.write_table(os.path.join(out, "wages_sample"), ["wage"], [ens.values[-1]], fmt)
    w = ens.pooled()
    mean = params.stationary_mean
    summary = {
        "n_samples": int(w.size), "seed": seed, "mean": float(w.mean()),
        "expected_mean": mean, "variance": float(w.var()), "expected_variance": mean**2,
        "ks_vs_exponential": ks_statistic(EmpiricalDistribution(sample=w),
                                          lambda v: labour_cdf(v, MixtureParams(
                                              n_pf=0, n_e=1, n_ue=0, h0=1, sigma_f=1,
                                              t_wage=mean, h_ue=1, sigma_ue=1))),
    }
    io.write_json(os.path.join(out, "wages_summary.json"), summary)
    return EXIT_OK


def cmd_simulate_prices(block, seed, fmt, out):
    n_steps = _record_steps(block)
    params = PriceFluctParams(block["b"], block["D"], block["regime"])
    ens = price_ensemble(params, block["n_replicas"], block["dt"], n_steps, seed=seed,
                         burn_in=block["burn_in"], record_every=block["record_every"])
    io.write_table(os.path.join(out, "prices_sample"), ["dp"], [ens.values[-1]], fmt)
    dp = ens.pooled()
    windows = windowed_mean_abs(ens.values, block["n_windows"])
    summary = {"n_samples": int(dp.size), "seed": seed, "regime": params.regime,
               "mean_abs": float(np.abs(dp).mean()), "variance": float(dp.var()),
               "windowed_mean_abs": windows.tolist(),
               "windows_increasing": bool(np.all(np.diff(windows) > 0))}
    if params.regime == "competitive":
        summary.update(stationary_distribution="laplace",
                       expected_mean_abs=laplace_mean_abs(params),
                       expected_variance=laplace_variance(params),
                       ks_vs_laplace=ks_statistic(EmpiricalDistribution(sample=dp),
                                                  lambda v: laplace_cdf(v, params)))
    else:
        summary.update(stationary_distribution=None,
                       note="no stationary distribution without competition")
    io.write_json(os.path.join(out, "prices_summary.json"), summary)
    return EXIT_OK


def _mixture_params(source):
    if source is None:
        return MixtureParams.published()
    data = io.read_json(source) if isinstance(source, str) else source
    if not isinstance(data, dict):
        raise ConfigError("mixture parameters must be a JSON object")
    return MixtureParams.from_dict(data).validate()


def cmd_sample(block, seed, fmt, out):
    _positive_int(block, "n", allow_zero=True)
    params = _mixture_params(block["params"])
    x = mixture_sample(params, block["n"], seed=seed)
    io.write_table(os.path.join(out, "incomes"), ["income"], [x], fmt)
    return EXIT_OK


def cmd_fit(block, seed, fmt, out):
    if block["data"] is None:
        raise ConfigError("fit needs --data")
    try:
        dist = io.read_income_data(block["data"])
    except OSError as exc:
        raise ConfigError(f"cannot read data: {exc}") from None
    if not dist.is_histogram:
        _positive_int(block, "bins")
        dist = build_histogram(dist.sample, n_bins=block["bins"])
    init = _mixture_params(block["init"])
    freeze = block["freeze"]
    if isinstance(freeze, str):
        freeze = [f.strip() for f in freeze.split(",") if f.strip()]
    res = fit_mixture(dist, init, frozen=set(freeze), h_floor=block["h_floor"],
                      max_iter=block["max_iter"])
    result = res.to_dict()
    result["message"] = res.message
    io.write_json(os.path.join(out, "fit_result.json"), result)

    h = dist.centers
    comp = component_densities(np.maximum(h, np.finfo(float).tiny), res.params)
    total = comp["capital"] + comp["labour"] + comp["insurance"]
    io.write_table(os.path.join(out, "fit_curve"),
                   ["h", "empirical_density", "fitted_total", "capital", "labour", "insurance"],
                   [h, dist.density, total, comp["capital"], comp["labour"], comp["insurance"]],
                   fmt)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_oracle_entropy(block, seed, fmt, out):
    if block["mean"] is None:
        raise ConfigError("oracle-entropy needs --mean")
    bins, grid = block["bins"], block["grid"]
    if (bins is None) == (grid is None):
        raise ConfigError("give exactly one of --bins and --grid")
    try:
        if bins is not None:
            values = [float(v) for v in bins.split(",")] if isinstance(bins, str) else bins
        else:
            parts = grid.split(",") if isinstance(grid, str) else grid
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            width = (hi - lo) / n
            values = lo + width * (np.arange(n) + 0.5)
    except (ValueError, IndexError, TypeError) as exc:
        raise ConfigError(f"bad bin specification: {exc}") from None
    sol = max_entropy_wage(values, block["mean"])
    d = sol.to_dict()
    d["entropy"] = sol.entropy
    io.write_json(os.path.join(out, "entropy.json"), d)
    return EXIT_OK


COMMANDS = {
    "simulate-market": cmd_simulate_market,
    "simulate-firms": cmd_simulate_firms,
    "simulate-wages": cmd_simulate_wages,
    "simulate-prices": cmd_simulate_prices,
    "sample": cmd_sample,
    "fit": cmd_fit,
    "oracle-entropy": cmd_oracle_entropy,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        block, seed, fmt, out = resolve(args)
        return COMMANDS[args.command](block, seed, fmt, out)
    except (NumericOverflowError, ArithmeticError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InvalidParamsError, EvoIncomeError, ValueError, TypeError,
            KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
