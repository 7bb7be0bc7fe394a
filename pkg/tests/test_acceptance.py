"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly as
``python tests/test_acceptance.py``.
"""

import functools
import math
import sys
import tempfile
import time

import pytest

from ergomix import cli, experiments, modelspace
from ergomix.errors import ParameterError
from ergomix.semigroups import make_instance

SEED = 424242
INSTANCES = ["translation", "rudnicki_translation", "birth_death", "death_model", "black_scholes"]
EIGEN = ["rudnicki_translation", "birth_death", "death_model", "black_scholes"]
OUT = tempfile.mkdtemp(prefix="ergomix-acceptance-")


@functools.lru_cache(maxsize=None)
def context(name, kind, workers=1):
    cfg = cli.resolve({"instance": {"name": name}, "experiments": [{"kind": kind}]},
                      seed=SEED, workers=workers, output=OUT)
    return cli.build_context(cfg)


@functools.lru_cache(maxsize=None)
def report(name, kind, workers=1, **knobs):
    t0 = time.perf_counter()
    rep = experiments.run_experiment(kind, context(name, kind, workers), **knobs)
    return rep, time.perf_counter() - t0


def timed(limit, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    secs = time.perf_counter() - t0
    return ok and secs < limit, f"{detail}; {secs:.1f}s (limit {limit:.0f}s)"


def c1():
    worst, ok = {}, True
    for name in INSTANCES:
        rep = experiments.criterion_audit(experiments.Context(make_instance(name), None, None, SEED))
        worst[name] = max(rep.estimates.values())
        ok &= rep.passed and worst[name] == 0.0
    return ok, ", ".join(f"{k}={v:.1e}" for k, v in worst.items())


def c2():
    worst, ok = {}, True
    for name in EIGEN:
        rep = experiments.eigen_residuals(experiments.Context(make_instance(name), None, None, SEED))
        worst[name] = rep.estimates["max_residual"]
        ok &= rep.passed
    return ok, ", ".join(f"{k}={v:.1e}" for k, v in worst.items())


def c3():
    parts, ok = [], True
    for name in INSTANCES:
        rep, _ = report(name, "equivariance")
        e = rep.estimates
        ok &= rep.passed
        parts.append(f"{name}: max {e['max_residual']:.2e} <= {rep.thresholds['residual']:.2e}"
                     f" cases {e['cases'][1]}/{e['cases'][2]}")
        assert rep.thresholds["J"] == 40
    return ok, "; ".join(parts)


def c4():
    rep, _ = report("translation", "sampler-laws")
    e = rep.estimates
    ks_p = min(r["p"] for r in rep.tests["ks"])
    return rep.passed, (f"inner {e['inner_gap_mean']:.4f}, straddling {e['straddling_gap_mean']:.4f}, "
                        f"chi2 p {e['chi2_p']:.3f}, min KS p {ks_p:.3f}")


def c5():
    rep, _ = report("translation", "invariance", t_list=(0.0, 0.7, 1.3, 2.5), n_samples=5000)
    t0 = [r["ks"] for r in rep.tests["ks"] if r["t"] == 0]
    ok = rep.passed and len(t0) == 5 and all(d == 0.0 for d in t0)
    return ok, f"max KS {rep.estimates['max_ks']:.4f}, min p {rep.estimates['min_p']:.3f}, t=0 KS {max(t0)}"


def c6():
    rep, _ = report("translation", "mixing", n_samples=5000)
    paths = rep.write(OUT, SEED)
    e = rep.estimates
    ok = rep.passed and e["t_max"] == 15 and len(paths) == 2 and paths[1].endswith(".csv")
    return ok, (f"C(0) {e['C0']:.4f} > band {e['band0']:.4f}; |C(15)| {abs(e['C_tmax']):.4f}"
                f" <= band {e['band_tmax']:.4f}")


def c7():
    rep, _ = report("translation", "support", k_targets=(1, 2, 3, 5, 8))
    rows = rep.estimates
    ok = rep.passed and rows["1"]["hit_rate"] == 1.0
    ok &= all(math.isfinite(r["log_bound"]) for r in rows.values())
    return ok, ", ".join(f"u_{k}: {r['hit_rate']:.2f} (log P >= {r['log_bound']:.0f})"
                         for k, r in rows.items())


def c8():
    rep, _ = report("translation", "density", T=500.0, dt=0.05)
    e = rep.estimates
    ok = rep.passed and e["min_running_density_second_half"] > 0
    return ok, f"radius {e['radius']:.3f}, densities {list(map(lambda v: round(v, 3), e['densities'].values()))}"


def c9():
    rep = experiments.ou_check(experiments.Context(None, None, None, SEED))
    return rep.passed, ", ".join(f"h={r['h']:g}: {r['corr']:.4f} vs {r['expected']:.4f}"
                                 for r in rep.tests["lags"])


def c10():
    p = modelspace.default_measure_params()
    ok = math.isfinite(p.beta_log_sum) and p.remainder_bound < 1e-9
    for head, N in [([0.5 ** j for j in range(1, 65)], [4, 8, 12, 16]),
                    ([0.0] + [0.5 ** j for j in range(1, 64)], [4, 12, 24, 40])]:
        try:
            modelspace.make_measure_params(head, 0.5, N)
            ok = False
        except ParameterError:
            pass
    return ok, f"sum log beta {p.beta_log_sum:.6f}, remainder {p.remainder_bound:.1e}"


def c11():
    diffs = []
    for kind, knobs in [("sampler-laws", {}), ("invariance", {"n_samples": 5000}),
                        ("mixing", {"n_samples": 5000})]:
        one = report("translation", kind, 1, **knobs)[0].to_json(with_clock=False)
        two = report("translation", kind, 2, **knobs)[0].to_json(with_clock=False)
        if one != two:
            diffs.append(kind)
    return not diffs, "identical for workers 1 and 2" if not diffs else f"differs: {diffs}"


CRITERIA = {
    1: ("criterion audit", 120, c1),
    2: ("eigen residuals", 60, c2),
    3: ("equivariance", 600, c3),
    4: ("sampler laws", 120, c4),
    5: ("invariance", 900, c5),
    6: ("mixing", 900, c6),
    7: ("full support", 600, c7),
    8: ("frequent recurrence", 300, c8),
    9: ("OU covariance", 60, c9),
    10: ("beta certificate", 1, c10),
    11: ("determinism", 1800, c11),
}


def run(num):
    title, limit, fn = CRITERIA[num]
    try:
        ok, detail = timed(limit, fn)
    except Exception as exc:
        ok, detail = False, f"error {type(exc).__name__}: {exc}"
    return ok, f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, capsys):
    ok, line = run(num)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    nums = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    failed = 0
    for n in nums:
        ok, line = run(n)
        failed += not ok
        print(line, flush=True)
    sys.exit(1 if failed else 0)
