"""Named experiments shared by the CLI, scripts and the acceptance suite.

Each runner takes a :class:`Context` and a dict of knobs and returns an
:class:`ExperimentReport`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import ergostats, modelspace, pushforward, semigroups
from .banach import norm
from .errors import ConfigurationError
from .ergostats import Observable, ks_two_sample
from .modelspace import MeasureParams
from .pushforward import TruncationPlan
from .reports import ExperimentReport, params_hash
from .rng import derive_rng, draw_rngs, stream_id
from .semigroups import FHCSystem


@dataclass
class Context:
    system: FHCSystem
    params: MeasureParams
    plan: TruncationPlan | None
    seed: int
    workers: int = 1
    cache_dir: str | None = None

    def require_plan(self) -> TruncationPlan:
        if self.plan is None:
            raise ConfigurationError("this experiment needs a truncation plan")
        return self.plan


def _base(name, ctx, **kw):
    if ctx.system is None:
        return ExperimentReport(experiment=name, instance="model-space",
                                params_hash=params_hash(ctx.params.to_json()), **kw)
    return ExperimentReport(experiment=name, instance=ctx.system.id,
                            params_hash=params_hash(ctx.system.params), **kw)


def criterion_audit(ctx: Context, t_grid=(0.3, 0.7, 1.1, 2.5), n_basics: int = 8):
    return semigroups.criterion_audit(ctx.system, tuple(t_grid), n_basics=n_basics)


def eigen_residuals(ctx: Context, n_points: int = 20, tol: float = 1e-6):
    start = time.perf_counter()
    field = ctx.system.field
    rep = _base("eigen-residuals", ctx, thresholds={"tol": tol}, sample_sizes={"points": n_points})
    if field is None:
        rep.notes.append("instance has no eigenvector field")
        return rep
    lo, hi = field.interval
    xis = np.linspace(lo, hi, n_points + 2)[1:-1]
    res = [field.generator_residual(float(x)) for x in xis]
    rep.estimates = {"max_residual": max(res), "interval": [lo, hi],
                     "residuals": dict(zip((f"{x:.6g}" for x in xis), res))}
    rep.verdicts = {"residual": max(res) <= tol}
    rep.wall_clock = time.perf_counter() - start
    return rep


def _case_shift(f, case: int, a_max: float, rng, lattice: float | None) -> float:
    edge = float(-f.breaks[f.zero - 1])          # shifts below this keep the straddling gap
    lo, hi = (0.0, edge) if case == 1 else (edge, max(a_max, edge + 1.0))
    a = float(rng.uniform(lo, hi))
    if lattice:
        k = max(1, round(a / lattice))
        if case == 1 and k * lattice >= edge:
            k -= 1
        if case == 2 and k * lattice < edge:
            k += 1
        a = max(k, 1) * lattice
    return a


def equivariance(ctx: Context, n_pairs: int = 100, a_max: float = 3.0):
    """``||T_a phi(f) - phi(R_a f)||`` on random pairs, alternating the two shift cases.

    Translation shifts are drawn on the grid lattice, where ``T_a`` is exact.
    """
    start = time.perf_counter()
    plan, sys_ = ctx.require_plan(), ctx.system
    lattice = sys_.params.get("grid_step") if sys_.id == "translation" else None
    threshold = 2 * plan.tail_bound + 10 * sys_.quad_tol
    rows = []
    for i, rng in enumerate(draw_rngs(ctx.seed, "equivariance", n_pairs)):
        f = modelspace.sample_model(ctx.params, plan.window(), rng)
        case = 1 + i % 2
        a = _case_shift(f, case, a_max, rng, lattice)
        r = pushforward.equivariance_residual(f, a, sys_, plan)
        rows.append({"a": a, "case": pushforward.shift_case(f, a), "residual": r,
                     "sample_bound": plan.sample_bound(f)})
    res = np.array([r["residual"] for r in rows])
    ratio = np.array([r["residual"] / max(r["sample_bound"], 1e-300) for r in rows])
    rep = _base("equivariance", ctx, seeds={"seed": ctx.seed}, sample_sizes={"pairs": n_pairs},
                thresholds={"residual": threshold, "J": plan.J})
    rep.estimates = {"max_residual": float(res.max()), "median_residual": float(np.median(res)),
                     "tail_bound": plan.tail_bound,
                     "max_residual_over_sample_bound": float(ratio.max()),
                     "cases": {c: sum(r["case"] == c for r in rows) for c in (1, 2)}}
    rep.tests = {"pairs": rows}
    rep.verdicts = {"equivariance": bool(res.max() <= threshold),
                    "both_cases": all(rep.estimates["cases"][c] > 0 for c in (1, 2))}
    rep.wall_clock = time.perf_counter() - start
    return rep


def sampler_laws(ctx: Context, n_gaps: int = 100_000, n_shift: int = 10_000,
                 shifts=(0.37, 1.9), level: float = 0.01):
    """Gap means, mark law and shift stationarity of the model-space sampler."""
    start = time.perf_counter()
    straddle, inner, marks = np.empty(n_gaps), np.empty(n_gaps), np.empty(n_gaps, np.int64)
    for i, rng in enumerate(draw_rngs(ctx.seed, "sampler-gaps", n_gaps)):
        f = modelspace.sample_model(ctx.params, 2.0, rng)
        z = f.zero
        straddle[i] = f.breaks[z] - f.breaks[z - 1]
        inner[i] = f.breaks[z + 1] - f.breaks[z]
        marks[i] = f.heights[z]
    probs = ctx.params.sampling_probs()
    counts = np.bincount(marks, minlength=probs.size + 1)[1:]
    expected = n_gaps * probs
    keep = np.flatnonzero(expected >= 5)
    last = keep[-1]
    obs_b = np.append(counts[:last], counts[last:].sum())
    exp_b = np.append(expected[:last], expected[last:].sum())
    chi2 = float(np.sum((obs_b - exp_b) ** 2 / exp_b))
    chi2_p = float(stats.chi2.sf(chi2, obs_b.size - 1))

    ks_rows = []
    base = [modelspace.sample_model(ctx.params, 8.0, r) for r in draw_rngs(ctx.seed, "sampler-base", n_shift)]
    ref_s0 = np.array([f.breaks[f.zero] for f in base])
    ref_g = np.array([f.breaks[f.zero] - f.breaks[f.zero - 1] for f in base])
    for t in shifts:
        other = [modelspace.shift_model(f, t) for f in
                 (modelspace.sample_model(ctx.params, 8.0, r)
                  for r in draw_rngs(ctx.seed, f"sampler-shift-{t}", n_shift))]
        s0 = np.array([f.breaks[f.zero] for f in other])
        g = np.array([f.breaks[f.zero] - f.breaks[f.zero - 1] for f in other])
        for stat, a, b in (("s0", ref_s0, s0), ("straddling_gap", ref_g, g)):
            d, p = ks_two_sample(a, b)
            ks_rows.append({"t": float(t), "statistic": stat, "ks": d, "p": p})

    se_s = straddle.std(ddof=1) / math.sqrt(n_gaps)
    se_i = inner.std(ddof=1) / math.sqrt(n_gaps)
    rep = _base("sampler-laws", ctx, seeds={"seed": ctx.seed},
                sample_sizes={"gaps": n_gaps, "shift": n_shift},
                thresholds={"gap_mean_tol": 0.005, "level": level})
    rep.estimates = {"inner_gap_mean": float(inner.mean()), "inner_gap_se": se_i,
                     "straddling_gap_mean": float(straddle.mean()), "straddling_gap_se": se_s,
                     "straddling_gap_expected": 13 / 12, "chi2": chi2, "chi2_df": int(obs_b.size - 1),
                     "chi2_p": chi2_p}
    rep.tests = {"ks": ks_rows}
    rep.verdicts = {"inner_gap_mean": abs(inner.mean() - 1.0) <= 0.005,
                    "straddling_gap_mean": abs(straddle.mean() - 13 / 12) <= 0.005,
                    "mark_law": chi2_p > level,
                    "shift_stationarity": all(r["p"] > level for r in ks_rows)}
    rep.wall_clock = time.perf_counter() - start
    return rep


def beta_certificate(ctx: Context):
    p = ctx.params
    rep = _base("beta-certificate", ctx, thresholds={"remainder": modelspace.BETA_REMAINDER_TOL})
    rep.estimates = {"beta_log_sum": p.beta_log_sum, "remainder_bound": p.remainder_bound,
                     "terms": p.terms_used, "N_head": p.N_head.tolist()}
    rep.verdicts = {"finite": math.isfinite(p.beta_log_sum),
                    "remainder": p.remainder_bound < modelspace.BETA_REMAINDER_TOL}
    return rep


def invariance(ctx: Context, t_list=(0.0, 0.7, 1.3, 2.5), n_samples: int = 5000,
               n_observables: int = 5):
    obs = ergostats.default_observables(ctx.system, n_observables)
    return ergostats.estimate_invariance(ctx.system, ctx.params, ctx.require_plan(), list(t_list),
                                         obs, n_samples, ctx.seed, workers=ctx.workers)


def mixing(ctx: Context, t_grid=(0, 0.5, 1, 2, 3, 5, 8, 11, 15), n_samples: int = 5000,
           probe: float | None = None, n_boot: int = 200):
    obs = ergostats.default_observables(ctx.system, 5)
    ob = obs[2] if probe is None else Observable(f"probe@{probe:g}", "probe", at=float(probe))
    return ergostats.estimate_mixing(ctx.system, ctx.params, ctx.require_plan(), ob, ob,
                                     list(t_grid), n_samples, ctx.seed, workers=ctx.workers,
                                     n_boot=n_boot)


def support(ctx: Context, k_targets=(1, 2, 3, 5, 8), n_samples: int = 200,
            radius: float | None = None, mode: str = "conditioned", eps: float = 0.1):
    return ergostats.estimate_support(ctx.system, ctx.params, ctx.require_plan(), list(k_targets),
                                      n_samples, ctx.seed, radius=radius, mode=mode, eps=eps,
                                      workers=ctx.workers)


def density(ctx: Context, T: float = 500.0, dt: float = 0.05, radius_samples: int = 200,
            margin: float = 40.0, grid_step: float = 0.05):
    """Visit density of one sampled orbit to the ball ``B(0, r)``.

    ``r`` is the median norm of invariant draws.  Translation runs on an
    enlarged domain so that the orbit stays representable up to ``T``.
    """
    start = time.perf_counter()
    sys_, plan = ctx.system, ctx.require_plan()
    if sys_.id == "translation":
        big = semigroups.translation_make(sys_.params["weight"], grid_step, T + 3 * margin)
        J_orbit = int(T + margin)
    else:
        big, J_orbit = sys_, plan.J
    _, big_plan = pushforward.calibrate_truncation(big, ctx.params, J=plan.J,
                                                   cache_dir=ctx.cache_dir)
    draws = pushforward.sample_batch(big, ctx.params, big_plan, ctx.seed, "density-radius",
                                     radius_samples, workers=ctx.workers)
    r = float(np.median([norm(x) for x in draws]))
    rng = derive_rng(ctx.seed, stream_id("density-x0"))
    f = modelspace.sample_model(ctx.params, max(4 * J_orbit, 64), rng)
    x0 = pushforward.phi(f, big, J_orbit)
    rep = ergostats.orbit_lower_density(big, x0, None, r, T, dt)
    rep.instance = sys_.id
    rep.estimates.update(radius=r, J_orbit=J_orbit)
    rep.wall_clock = time.perf_counter() - start
    return rep


def ou_check(ctx: Context, n_paths: int = 10_000, t_max: float = 2.0, step: float = 0.5,
             lags=(0.0, 0.5, 1.0, 2.0)):
    start = time.perf_counter()
    grid = np.arange(0.0, t_max + step / 2, step)
    paths = modelspace.ou_process_sample(grid, n_paths, derive_rng(ctx.seed, stream_id("ou")))
    rows = []
    for h in lags:
        k = int(round(h / step))
        a, b = paths[:, 0], paths[:, k]
        corr = float(np.corrcoef(a, b)[0, 1]) if k else 1.0
        se = (1 - math.exp(-2 * h)) / math.sqrt(n_paths)   # sd of a sample correlation
        rows.append({"h": h, "corr": corr, "expected": math.exp(-h), "se": se})
    rep = ExperimentReport(experiment="ou-check", instance="ou", seeds={"seed": ctx.seed},
                           sample_sizes={"paths": n_paths}, thresholds={"sigmas": 3.0})
    rep.tests = {"lags": rows}
    rep.curve = [(r["h"], r["corr"], r["expected"] - 3 * r["se"], r["expected"] + 3 * r["se"])
                 for r in rows]
    rep.verdicts = {"covariance": all(abs(r["corr"] - r["expected"]) <= 3 * r["se"] for r in rows)}
    rep.wall_clock = time.perf_counter() - start
    return rep


EXPERIMENTS = {
    "criterion-audit": criterion_audit,
    "eigen-residuals": eigen_residuals,
    "equivariance": equivariance,
    "sampler-laws": sampler_laws,
    "beta-certificate": beta_certificate,
    "invariance": invariance,
    "mixing": mixing,
    "support": support,
    "density": density,
    "ou-check": ou_check,
}

NEEDS_PLAN = {"equivariance", "invariance", "mixing", "support", "density"}


def run_experiment(kind: str, ctx: Context, **knobs) -> ExperimentReport:
    if kind not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {kind!r}; known: {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[kind](ctx, **knobs)
