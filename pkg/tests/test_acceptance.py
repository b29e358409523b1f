"""End-to-end acceptance criteria, each reported as one PASS/FAIL line in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import hashlib
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from exotest.bootstrap import censoring_fit, resample
from exotest.cli import main
from exotest.montecarlo import DgpParams, kendall_tau_b, simulate, warp_speed
from exotest.ranks import estimate_ranks, rank_marginal_cdf, uniform_distance
from exotest.rng import substream
from exotest.survival import conditional_km, km_eval, km_fit, logrank
from exotest.teststats import run_pipeline

from conftest import HAND_ROWS, HAND_ROWS_2X, rows_to_dataset
from oracles import kendall_tau_b_pairs, logrank_two_sample, pipeline as oracle_pipeline

SEED = 42
COMBOS = [(s, k) for s in ("ks", "cm") for k in ("A", "B")]


@pytest.fixture(scope="module")
def null_run():
    return warp_speed(DgpParams(n=500), M=1000, seed=SEED)


@pytest.fixture(scope="module")
def power_run():
    return warp_speed(DgpParams(alpha=5.0, n=1000), M=1000, seed=SEED)


def test_criterion_1_size(null_run, record_criterion):
    rates = {f"{s}-{k}": null_run.reject_rate(s, k) for s, k in COMBOS}
    ok = all(0.03 <= r <= 0.07 for r in rates.values())
    record_criterion("1 size under the null", ok, str(rates))
    assert ok, rates


def test_criterion_2_power(power_run, record_criterion):
    rates = {f"{s}-{k}": power_run.reject_rate(s, k) for s, k in COMBOS}
    ok = all(rates[f"cm-{k}"] >= 0.9 and rates[f"cm-{k}"] >= rates[f"ks-{k}"] - 0.02
             for k in ("A", "B"))
    record_criterion("2 power separation", ok, str(rates))
    assert ok, rates


def test_criterion_3_dgp_calibration(record_criterion):
    latent = simulate(DgpParams(n=10**6), SEED)
    d = latent.data
    n = d.n
    got = {
        "censoring": latent.censoring_rate,
        "tau_wz": kendall_tau_b(d.w, d.z),
        "cell_001": float(np.mean((d.x == 0) & (d.w == 0) & (d.z == 1))),
        "cell_101": float(np.mean((d.x == 1) & (d.w == 0) & (d.z == 1))),
    }
    ok = (abs(got["censoring"] - 0.25) <= 0.02 and abs(got["tau_wz"] - 0.45) <= 0.03
          and abs(got["cell_001"] - 0.019) <= 0.003 and abs(got["cell_101"] - 0.023) <= 0.003)
    record_criterion("3 DGP calibration", ok, f"n={n} {got}")
    assert ok, got


def _median_scaled_distance(n, reps=200):
    out = []
    for r in range(reps):
        data = simulate(DgpParams(n=n), SEED + r).data
        ranks = estimate_ranks(data, conditional_km(data, "xz"))
        out.append(math.sqrt(n) * uniform_distance(rank_marginal_cdf(ranks)))
    return float(np.median(out))


def test_criterion_4_super_root_n(record_criterion):
    small, large = _median_scaled_distance(500), _median_scaled_distance(2000)
    ok = large < small
    record_criterion("4 super-root-n rank convergence", ok, f"n=500: {small:.4f}  n=2000: {large:.4f}")
    assert ok


def test_criterion_5_pvalue_uniformity(null_run, record_criterion):
    pvals = {f"{s}-{k}": stats.kstest(null_run.bootstrap_pvalues(s, k), "uniform").pvalue
             for s, k in COMBOS}
    ok = all(p > 0.01 for p in pvals.values())
    record_criterion("5 bootstrap p-value uniformity", ok,
                     "KS-test p: " + str({k: float(f"{v:.3g}") for k, v in pvals.items()}))
    assert ok, pvals


def test_criterion_6_oracles(record_criterion):
    failures = []
    # product-limit equals the empirical CDF without censoring
    for seed in range(100):
        rng = np.random.default_rng(seed)
        t = rng.choice(rng.exponential(size=30), size=30)
        ecdf = (t[None, :] <= t[:, None]).mean(axis=1)
        if not np.allclose(km_eval(km_fit(t, np.ones(30, int)), t), ecdf, atol=1e-12, rtol=0):
            failures.append(f"ecdf seed {seed}")
    # full pipeline on the hand instances
    for rows in (HAND_ROWS, HAND_ROWS_2X):
        ref = oracle_pipeline(rows)
        pipe = run_pipeline(rows_to_dataset(rows))
        expected_d = np.array([[float(ref["D"][(v, c)]) for v in ref["grid"]] for c in ref["cells"]])
        checks = [
            np.allclose(pipe.ranks.v_hat, [float(v) for v in ref["ranks"]], atol=1e-12, rtol=0),
            np.allclose(pipe.surface.values, expected_d, atol=1e-12, rtol=0),
            abs(pipe.statistics.ks - ref["ks"]) <= 1e-12,
            abs(pipe.statistics.cm - float(ref["cm"])) <= 1e-12,
        ]
        if not all(checks):
            failures.append(f"pipeline {checks}")
    # tau-b against exhaustive pairs
    for n in range(2, 51):
        rng = np.random.default_rng(1000 + n)
        a, b = rng.integers(0, 5, n), rng.integers(0, 5, n)
        want, got = kendall_tau_b_pairs(a.tolist(), b.tolist()), kendall_tau_b(a, b)
        if not (math.isnan(want) and math.isnan(got)) and not abs(want - got) <= 1e-12:
            failures.append(f"tau n={n}")
    # log-rank hand instance
    hand = logrank_two_sample([1, 2, 3, 4], [1, 1, 1, 1], "AABB", "A")
    got = logrank([1, 2, 3, 4], [1, 1, 1, 1], list("AABB")).chi_square
    if hand != Fraction(49, 17) or abs(got - 49 / 17) > 1e-10:
        failures.append("logrank")
    record_criterion("6 oracle equivalences", not failures, "; ".join(failures) or "all exact")
    assert not failures


def test_criterion_7_degeneracy(record_criterion):
    single = rows_to_dataset([(y, d, 0, 0, 0) for y, d, *_ in HAND_ROWS])
    s = run_pipeline(single).statistics
    ok_single = s.ks == 0.0 and s.cm == 0.0
    ok_types = True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = 80
        rows = [(float(rng.integers(1, 40)), 1, int(rng.integers(2)), int(rng.integers(2)),
                 int(rng.integers(2))) for _ in range(n)]
        data = rows_to_dataset(rows)
        fit_t, fit_c = conditional_km(data, "xz"), censoring_fit(data)
        a = resample(data, fit_t, fit_c, "A", substream(SEED, seed)).data
        b = resample(data, fit_t, fit_c, "B", substream(SEED, seed)).data
        ok_types &= sorted(zip(a.y, a.delta)) == sorted(zip(b.y, b.delta))
    ok = ok_single and ok_types
    record_criterion("7 degeneracy fixed points", ok,
                     f"single-cell KS={s.ks} CM={s.cm}; A==B without censoring: {ok_types}")
    assert ok


def test_criterion_8_determinism(tmp_path, capsys, record_criterion):
    data_path = tmp_path / "sim.csv"
    assert main(["simulate", "--n", "300", "--seed", "7", "-o", str(data_path)]) == 0

    def digest(argv):
        assert main(argv) == 0
        out = capsys.readouterr().out
        return hashlib.sha256(out.encode()).hexdigest()

    commands = [
        ["simulate", "--n", "300", "--seed", "7"],
        ["describe", "-i", str(data_path)],
        ["test", "-i", str(data_path), "--reps", "40", "--seed", "3", "--boot", "a"],
        ["test", "-i", str(data_path), "--reps", "40", "--seed", "3", "--boot", "b",
         "--statistic", "ks"],
        ["power", "--n", "100", "--alpha", "0,3", "--mc", "6", "--statistic", "all",
         "--boot", "all", "--seed", "3"],
    ]
    mismatched = []
    for argv in commands:
        runs = {digest(argv), digest(argv)}
        if argv[0] in ("test", "power"):
            runs |= {digest(argv + ["--threads", "2"]), digest(argv + ["--threads", "3"])}
        if len(runs) != 1:
            mismatched.append(argv[0])
    record_criterion("8 determinism", not mismatched,
                     f"mismatched: {mismatched}" if mismatched else "byte-identical")
    assert not mismatched
