"""Acceptance criteria 1-9.

Each check prints one line ``criterion N: PASS|FAIL <detail>``. Under
pytest the lines are collected and repeated in the terminal summary;
``python tests/test_acceptance.py`` prints them directly.
"""

import contextlib
import functools
import io
import json
import math
import sys
import time

import numpy as np
import pytest

from rbsde import (
    Driver,
    Instance,
    NodeField,
    build_lattice,
    check_apriori,
    check_comparison,
    check_skorokhod,
    class_d_norm,
    crr_oracle,
    divergence_probe,
    linear,
    make_instance,
    penalization_sweep,
    powerz,
    snell_envelope,
    solve_reflected,
)
from rbsde.analysis import class_d_exhaustive
from rbsde.cli import main as cli_main

SCHEDULE = (4, 16, 64, 256, 1024)
SEED = 20240611
RESULTS = {}


def record(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    RESULTS[number] = line
    print(line)
    return passed


@functools.lru_cache(maxsize=None)
def put_sweep():
    start = time.perf_counter()
    res = penalization_sweep(make_instance("american_put", N=100), SCHEDULE, seed=SEED)
    return res, time.perf_counter() - start


def random_monotone_instance(seed=SEED, N=16):
    rng = np.random.default_rng(seed)
    g, c, q = rng.uniform(-1, 0.5), rng.uniform(-1, 1), rng.uniform(0.2, 1)
    l0, l1, l2 = rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0, 1)
    amp, freq = rng.uniform(0.2, 1), rng.uniform(0.5, 2)

    def barrier(t, b):
        return l0 + l1 * b - l2 * t

    def xi(b):
        return np.maximum(amp * np.cos(freq * b), barrier(1.0, b))

    return Instance(build_lattice(1.0, N), powerz(g, c, q), xi, barrier, "random-monotone")


# criterion checks

def criterion_1():
    details, ok = [], True
    for r, tol in ((0.0, 1e-9), (0.05, 5e-3)):
        start = time.perf_counter()
        value = solve_reflected(make_instance("american_put", r=r, N=200)).value
        elapsed = time.perf_counter() - start
        err = abs(value - crr_oracle(r, 0.2, 100.0, 100.0, 1.0, 200))
        ok &= err <= tol and elapsed < 2.0
        details.append(f"r={r}: |err|={err:.2e} (tol {tol:g}) in {elapsed:.2f}s")
    return record(1, ok, "; ".join(details))


def criterion_2():
    res, elapsed = put_sweep()
    gaps = [row.max_gap_y for row in res.report.rows]
    ok = res.report.gaps_strictly_decreasing and gaps[-1] <= gaps[0] / 10 and elapsed < 10.0
    return record(2, ok, f"gaps={[float(f'{g:.3e}') for g in gaps]} sweep {elapsed:.2f}s")


def criterion_3():
    counts = {"american_put": put_sweep()[0].report.monotone_violations}
    cx7 = make_instance("counterexample7", N=8)
    counts["counterexample7"] = penalization_sweep(cx7, SCHEDULE).report.monotone_violations
    counts["random-monotone"] = penalization_sweep(random_monotone_instance(), SCHEDULE) \
        .report.monotone_violations
    return record(3, sum(counts.values()) == 0, f"violations={counts}")


def criterion_4():
    instances = {
        "american_put": make_instance("american_put"),
        "american_put[gbm]": make_instance("american_put", tree="gbm"),
        "linear_bsde": make_instance("linear_bsde"),
        "counterexample5": make_instance("counterexample5"),
        "counterexample7": make_instance("counterexample7"),
        "custom": make_instance("custom", driver="powerz(-0.5, 1, 0.5)", xi="pos(1 - b)",
                                barrier="pos(1 - b) - t / 2"),
    }
    worst_sum, worst_gap = 0.0, 0.0
    for inst in instances.values():
        rep = check_skorokhod(solve_reflected(inst), tol=0.0)
        worst_sum = max(worst_sum, rep.sum)
        worst_gap = max(worst_gap, rep.barrier_violation)
    ok = worst_sum == 0.0 and worst_gap == 0.0
    return record(4, ok, f"{len(instances)} scenarios, max sum={worst_sum!r}, "
                         f"max barrier breach={worst_gap!r}")


def ordered_pair(rng, N=16):
    lat = build_lattice(1.0, N)
    a, b, c = rng.uniform(-2, 0.5), rng.uniform(-2, 2), rng.uniform(-1, 1)
    shift_f, slope_z = rng.uniform(0, 1), rng.uniform(0, 1)
    l0, l1, l2 = rng.uniform(-1, 0), rng.uniform(-0.5, 0.5), rng.uniform(0, 1)
    shift_l, shift_xi = rng.uniform(0, 0.5), rng.uniform(0, 0.5)
    amp = rng.uniform(0, 1)

    f1 = linear(a, b, c)
    f2 = Driver(lambda t, y, z, x: a * y + b * z + c + shift_f + slope_z * np.abs(z),
                mu=a, lam=abs(b) + slope_z)

    def lower(t, x):
        return l0 + l1 * x - l2 * t

    def upper(t, x):
        return lower(t, x) + shift_l

    inst1 = Instance(lat, f1, lambda x: np.maximum(amp * np.sin(x), lower(1.0, x)), lower)
    inst2 = Instance(lat, f2, lambda x: np.maximum(amp * np.sin(x) + shift_xi, upper(1.0, x)),
                     upper)
    return inst1, inst2


def criterion_5():
    rng = np.random.default_rng(SEED)
    total, worst = 0, 0.0
    for _ in range(50):
        i1, i2 = ordered_pair(rng)
        rep = check_comparison(solve_reflected(i1), solve_reflected(i2), tol=1e-9)
        total += rep.n_violations
        worst = max(worst, rep.worst)
    return record(5, total == 0, f"50 pairs, violations={total}, max(Y1-Y2)={worst:.3e}")


def criterion_6():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for k in range(20):
        N = 1 + k % 4
        lat = build_lattice(rng.uniform(0.5, 2.0), N)
        field = NodeField([rng.normal(scale=2.0, size=i + 1) for i in range(N + 1)])
        exhaustive, _ = class_d_exhaustive(lat, field)
        worst = max(worst, abs(class_d_norm(lat, field) - exhaustive))
    return record(6, worst <= 1e-12, f"20 fields, max |snell - exhaustive|={worst:.2e}")


def criterion_7():
    schedule = (4, 8, 16, 24)
    t5 = divergence_probe("counterexample5", schedule)
    t7 = divergence_probe("counterexample7", schedule, seed=SEED)
    ys = [r.y_s2 for r in t7.rows]
    spread = max(ys) / min(ys)
    need = math.log(10.0)
    ok = (t5.log_growth >= need and t7.log_growth >= need and t5.strictly_increasing
          and t7.strictly_increasing and spread <= 2.0)
    return record(7, ok, f"log growth cx5={t5.log_growth:.1f} cx7={t7.log_growth:.1f} "
                         f"(need >= {need:.2f}), Y S2 spread={spread:.3f}")


def criterion_8():
    res, _ = put_sweep()
    inst = make_instance("american_put", N=100)
    majorant = snell_envelope(inst.lattice, inst.barrier, inst.xi)
    ratios = [check_apriori(s, inst, majorant, p=2.0, seed=SEED).ratio for s in res.solutions]
    bound = max(ratios) / ratios[0]
    ok = all(math.isfinite(r) for r in ratios) and bound <= 3.0
    return record(8, ok, f"ratios={[round(r, 4) for r in ratios]}, max/first={bound:.3f}")


CLI_CONFIGS = [
    {"action": "penalize-sweep", "schedule": list(SCHEDULE),
     "scenario": {"kind": "american_put", "params": {"N": 40}},
     "numerics": {"seed": 11, "n_paths": 1024, "workers": 4}},
    {"action": "solve", "method": "reflected",
     "scenario": {"kind": "counterexample5", "params": {"N": 8}}},
    {"action": "divergence-probe", "order": 0.5, "numerics": {"seed": 5, "n_paths": 2000},
     "divergence": {"kind": "counterexample7", "N_schedule": [4, 8, 16, 28]}},
    {"action": "norms", "method": "penalized", "penalty": 50,
     "scenario": {"kind": "american_put", "params": {"N": 60}},
     "numerics": {"seed": 9, "n_paths": 3000}},
    {"action": "probe-hypotheses", "numerics": {"seed": 4}, "probe": {"samples": 3000},
     "scenario": {"kind": "custom", "params": {"driver": "powerz(0.3,-1,0.7)"}}},
]


def criterion_9(tmp_path):
    mismatches = []
    for k, doc in enumerate(CLI_CONFIGS):
        cfg = tmp_path / f"c{k}.json"
        cfg.write_text(json.dumps(doc), encoding="utf-8")
        outs = []
        for rep in range(2):
            out = tmp_path / f"run{k}_{rep}"
            with contextlib.redirect_stdout(io.StringIO()):
                status = cli_main(["run", str(cfg), "--out", str(out)])
            outs.append((status, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
        if outs[0] != outs[1] or outs[0][0] != 0:
            mismatches.append(doc["action"])
    return record(9, not mismatches,
                  f"{len(CLI_CONFIGS)} configs run twice, differing: {mismatches or 'none'}")


# pytest entry points

def test_criterion_1_oracle_equivalence():
    assert criterion_1(), RESULTS[1]


def test_criterion_2_penalization_convergence():
    assert criterion_2(), RESULTS[2]


def test_criterion_3_monotone_in_penalty():
    assert criterion_3(), RESULTS[3]


def test_criterion_4_skorokhod_minimality():
    assert criterion_4(), RESULTS[4]


def test_criterion_5_comparison():
    assert criterion_5(), RESULTS[5]


def test_criterion_6_class_d_oracle():
    assert criterion_6(), RESULTS[6]


def test_criterion_7_counterexample_divergence():
    assert criterion_7(), RESULTS[7]


def test_criterion_8_apriori_bounded():
    assert criterion_8(), RESULTS[8]


def test_criterion_9_determinism(tmp_path):
    assert criterion_9(tmp_path), RESULTS[9]


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
              criterion_7, criterion_8]
    passed = [check() for check in checks]
    with tempfile.TemporaryDirectory() as tmp:
        passed.append(criterion_9(Path(tmp)))
    sys.exit(0 if all(passed) else 1)
