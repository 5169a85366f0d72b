import json
import math
from pathlib import Path

import numpy as np
import pytest

from evoincome import io
from evoincome.cli import main
from evoincome.income import MixtureParams, mixture_cdf

FIG1 = MixtureParams.published()

SMALL = {
    "simulate-market": {"n_steps": 300},
    "simulate-firms": {"n_firms": 3000, "n_steps": 100},
    "simulate-wages": {"n_replicas": 200, "burn_in": 500, "n_records": 20},
    "simulate-prices": {"n_replicas": 200, "burn_in": 200, "n_records": 20},
}


def write_config(tmp_path, cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, *args, cfg=SMALL, out="out"):
    out_dir = tmp_path / out
    code = main(["--config", write_config(tmp_path, cfg), "--out", str(out_dir), *args])
    return code, out_dir


def files(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir())}


@pytest.mark.parametrize("command", ["simulate-market", "simulate-firms", "simulate-wages",
                                     "simulate-prices"])
def test_simulations_are_byte_identical(tmp_path, command):
    c1, d1 = run(tmp_path, "--seed", "17", command, out="a")
    c2, d2 = run(tmp_path, "--seed", "17", command, out="b")
    assert c1 == c2 == 0
    assert files(d1) == files(d2)
    assert len(files(d1)) == 2


def test_seed_changes_stochastic_output(tmp_path):
    _, d1 = run(tmp_path, "--seed", "1", "simulate-wages", out="a")
    _, d2 = run(tmp_path, "--seed", "2", "simulate-wages", out="b")
    assert files(d1)["wages_sample.csv"] != files(d2)["wages_sample.csv"]


def test_market_stationary_alpha_and_conservation(tmp_path):
    code, d = run(tmp_path, "simulate-market")
    assert code == 0
    header, data = io.read_csv(d / "market_timeseries.csv")
    alpha = data[:, header.index("alpha")]
    assert np.ptp(alpha) / alpha[0] < 0.01
    report = json.loads((d / "conservation.json").read_text())
    assert report["passed"] and report["max_relative_violation"] < 1e-9


def test_market_two_product_replicator(tmp_path):
    prods = [dict(price=1.0, eta=1.0, gamma=0.2, c0=0.1, c1=0.1, c2=0.1, z0=1.0, y0=0.3),
             dict(price=1.0, eta=1.0, gamma=0.1, c0=0.1, c1=0.1, c2=0.1, z0=1.0, y0=0.7)]
    cfg = {"simulate-market": {"products": prods, "psi0": 1.0, "dt": 0.05, "n_steps": 400}}
    code, d = run(tmp_path, "simulate-market", cfg=cfg)
    assert code == 0
    header, data = io.read_csv(d / "market_timeseries.csv")
    t = data[:, header.index("time")]
    exact = 0.3 * np.exp(0.1 * t) / (0.3 * np.exp(0.1 * t) + 0.7)
    np.testing.assert_allclose(data[:, header.index("share_0")], exact, rtol=1e-10)


def test_prices_non_competitive_flagged(tmp_path):
    code, d = run(tmp_path, "simulate-prices", "--regime", "non_competitive")
    assert code == 0
    summary = json.loads((d / "prices_summary.json").read_text())
    assert summary["stationary_distribution"] is None
    assert summary["windows_increasing"]


def test_wages_summary(tmp_path):
    code, d = run(tmp_path, "simulate-wages")
    s = json.loads((d / "wages_summary.json").read_text())
    assert code == 0
    assert s["n_samples"] == 200 * 20
    assert s["expected_mean"] == 1.0
    assert abs(s["mean"] - 1.0) < 0.2


def test_firms_summary_fields(tmp_path):
    code, d = run(tmp_path, "simulate-firms")
    s = json.loads((d / "firms_summary.json").read_text())
    assert code == 0
    assert s["target_exponent"] == 2.0
    assert math.isfinite(s["tail_exponent"])
    header, data = io.read_csv(d / "firms_sample.csv")
    assert header == ["sales", "profit"] and data.shape == (3000, 2)


def test_sample_header_only_and_deterministic(tmp_path):
    code, d = run(tmp_path, "sample", "-n", "0", out="zero")
    assert code == 0
    assert (d / "incomes.csv").read_text() == "income\n"
    _, a = run(tmp_path, "--seed", "3", "sample", "-n", "500", out="a")
    _, b = run(tmp_path, "--seed", "3", "sample", "-n", "500", out="b")
    assert files(a) == files(b)


def test_sample_insurance_window_fraction(tmp_path):
    code, d = run(tmp_path, "sample", "-n", "1000000")
    x = io.read_income_sample(d / "incomes.csv")
    frac = np.mean((x >= 7000) & (x <= 7800))
    expected = mixture_cdf(7800.0, FIG1) - mixture_cdf(7000.0, FIG1)
    assert frac == pytest.approx(expected, abs=4 * math.sqrt(expected / 1e6))


def test_sample_from_params_file(tmp_path):
    p = FIG1.replace(n_pf=0.0, n_e=1.0, n_ue=0.0)
    pf = tmp_path / "p.json"
    pf.write_text(json.dumps(p.to_dict()))
    code, d = run(tmp_path, "sample", "--params", str(pf), "-n", "20000")
    x = io.read_income_sample(d / "incomes.csv")
    assert code == 0 and abs(x.mean() / 19000 - 1) < 0.03


def test_csv_round_trip_is_byte_identical(tmp_path):
    _, d = run(tmp_path, "sample", "-n", "1000")
    src = d / "incomes.csv"
    header, data = io.read_csv(src)
    io.write_csv(tmp_path / "again.csv", header, [data[:, 0]])
    assert (tmp_path / "again.csv").read_bytes() == src.read_bytes()


def analytic_histogram_file(tmp_path):
    edges = np.linspace(0.0, 4e5, 801)
    dens = np.diff(mixture_cdf(edges, FIG1)) / np.diff(edges)
    dens /= np.sum(dens * np.diff(edges))
    path = tmp_path / "hist.csv"
    io.write_csv(path, ["bin_left", "bin_right", "density"], [edges[:-1], edges[1:], dens])
    return path


def init_file(tmp_path, params):
    path = tmp_path / "init.json"
    path.write_text(json.dumps(params.to_dict()))
    return path


def test_fit_round_trip_and_decomposition(tmp_path):
    data = analytic_histogram_file(tmp_path)
    init = FIG1.replace(n_pf=0.15, n_e=0.72, n_ue=0.13, h0=2e4, sigma_f=0.26, t_wage=2.4e4,
                        h_ue=6e3, sigma_ue=1500.0)
    code, d = run(tmp_path, "fit", "--data", str(data), "--init", str(init_file(tmp_path, init)))
    assert code == 0
    res = json.loads((d / "fit_result.json").read_text())
    assert res["converged"]
    for k in ("n_pf", "n_e", "n_ue", "h0", "sigma_f", "t_wage", "h_ue", "sigma_ue"):
        assert res[k] == pytest.approx(getattr(FIG1, k), rel=0.1)
    header, curve = io.read_csv(d / "fit_curve.csv")
    assert header == ["h", "empirical_density", "fitted_total", "capital", "labour", "insurance"]
    total = curve[:, 3] + curve[:, 4] + curve[:, 5]
    assert np.array_equal(total, curve[:, 2])


def test_fit_freeze_honoured(tmp_path):
    data = analytic_histogram_file(tmp_path)
    init = FIG1.replace(h0=2.5e4, sigma_ue=1400.0)
    code, d = run(tmp_path, "fit", "--data", str(data), "--init", str(init_file(tmp_path, init)),
                  "--freeze", "n_ue,h_ue,sigma_ue")
    res = json.loads((d / "fit_result.json").read_text())
    assert code in (0, 3)
    assert (res["n_ue"], res["h_ue"], res["sigma_ue"]) == (0.12, 7400.0, 1400.0)


def test_fit_non_convergence_exit_code(tmp_path):
    data = analytic_histogram_file(tmp_path)
    init = FIG1.replace(h0=2e4, t_wage=2.5e4)
    cfg = {"fit": {"max_iter": 1}}
    code, d = run(tmp_path, "fit", "--data", str(data), "--init",
                  str(init_file(tmp_path, init)), cfg=cfg)
    assert code == 3
    assert json.loads((d / "fit_result.json").read_text())["converged"] is False


def test_oracle_entropy_examples(tmp_path):
    code, d = run(tmp_path, "oracle-entropy", "--bins", "0,1,2", "--mean", "1")
    occ = json.loads((d / "entropy.json").read_text())["occupation"]
    assert code == 0 and occ == pytest.approx([1 / 3] * 3, abs=1e-12)
    _, d = run(tmp_path, "oracle-entropy", "--bins", "0,1,2", "--mean", "0.5")
    occ = json.loads((d / "entropy.json").read_text())["occupation"]
    assert occ[1] / occ[0] == pytest.approx((-1 + math.sqrt(13)) / 6, abs=1e-9)
    _, d = run(tmp_path, "oracle-entropy", "--grid", "0,20,10000", "--mean", "1")
    sol = json.loads((d / "entropy.json").read_text())
    w = np.array(sol["bin_values"])
    rel = np.array(sol["occupation"]) / 0.002 / np.exp(-w) - 1
    assert np.max(np.abs(rel)) < 0.01


def test_exit_codes_for_bad_input(tmp_path):
    assert main(["--out", str(tmp_path), "oracle-entropy", "--bins", "0,1", "--mean", "3"]) == 1
    assert main(["no-such-command"]) == 1
    assert run(tmp_path, "simulate-market", cfg={"simulate-market": {"bogus": 1}})[0] == 1
    assert run(tmp_path, "simulate-market", cfg={"unknown-block": {}})[0] == 1
    assert main(["--seed", "-1", "--out", str(tmp_path), "sample", "-n", "1"]) == 1
    bad = FIG1.to_dict()
    bad["n_pf"] = 0.5
    pf = tmp_path / "bad.json"
    pf.write_text(json.dumps(bad))
    assert main(["--out", str(tmp_path), "sample", "--params", str(pf)]) == 1


def test_json_format_option(tmp_path):
    code, d = run(tmp_path, "--format", "json", "sample", "-n", "10")
    assert code == 0
    data = json.loads((d / "incomes.json").read_text())
    assert len(data["income"]) == 10
