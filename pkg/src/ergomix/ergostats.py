"""Monte Carlo checks of invariance, mixing, full support and recurrence."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import banach
from .banach import COEFF, EIGEN, StateVector, distance, norm
from .errors import ConfigurationError, ParameterError, SupportTestError
from .modelspace import HCondition, MeasureParams
from .pushforward import TruncationPlan, orbit_quad, sample_batch
from .reports import ExperimentReport, params_hash
from .rng import derive_rng, stream_id
from .semigroups import FHCSystem

__all__ = ["Observable", "ExperimentReport", "default_observables", "ks_two_sample", "holm",
           "estimate_invariance", "estimate_mixing", "estimate_support", "orbit_lower_density"]

LEVEL = 0.01


# -- observables --------------------------------------------------------------------

@dataclass(frozen=True)
class Observable:
    """Bounded test function on states.

    ``probe``: ``tanh(Re l(x) / scale)`` with ``l`` a grid evaluation at
    ``at`` or a coefficient read-out at index ``at``.  ``radial``:
    ``exp(-||x - center||)``.
    """

    id: str
    kind: str
    at: float = 0.0
    scale: float = 1.0
    center: StateVector | None = field(default=None, compare=False)

    def __call__(self, x: StateVector) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "radial":
            return math.exp(-distance(x, self.center))
        if self.kind != "probe":
            raise ConfigurationError(f"unknown observable kind {self.kind!r}")
        return math.tanh(probe_value(x, self.at) / self.scale)


def probe_value(x: StateVector, at: float) -> float:
    v = banach.materialize(x) if x.kind == EIGEN else x
    if v.values.size == 0:
        return 0.0
    if v.kind == COEFF:
        k = int(at)
        return float(v.values[k].real) if k < v.values.size else 0.0
    return float(np.interp(at, v.grid, v.values.real))


def default_observables(system: FHCSystem, k: int = 5) -> list[Observable]:
    """``k`` probes spread over the low, middle and high part of the representation."""
    x = system.basic(2)
    v = banach.materialize(x) if x.kind == EIGEN else x
    if v.kind == COEFF:
        spots = [0, 1, 2, 4, 8, 16, 32][:k]
    elif system.id == "translation":
        spots = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0][:k]
    else:
        g = v.grid
        lo, hi = (np.log(g[1]), np.log(g[-1])) if g[0] > 0 else (g[0], g[-1])
        qs = np.linspace(0.3, 0.7, k)
        spots = [float(np.exp(lo + q * (hi - lo))) if g[0] > 0 else float(lo + q * (hi - lo))
                 for q in qs]
    return [Observable(f"probe@{s:g}", "probe", at=float(s)) for s in spots]


# -- statistics ------------------------------------------------------------------------

def kolmogorov_sf(lam: float) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 0.2:
        return 1.0
    k = np.arange(1, 101)
    return float(min(1.0, max(0.0, 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam)))))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value (Stephens' small-sample correction)."""
    a = np.sort(np.asarray(a, float))
    b = np.sort(np.asarray(b, float))
    if a.size == 0 or b.size == 0:
        raise ParameterError("KS test needs two nonempty samples")
    pts = np.concatenate([a, b])
    d = float(np.max(np.abs(np.searchsorted(a, pts, side="right") / a.size
                            - np.searchsorted(b, pts, side="right") / b.size)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d)


def holm(pvalues, level: float = LEVEL) -> list[bool]:
    """Holm step-down; ``True`` where the hypothesis is rejected."""
    p = np.asarray(pvalues, float)
    order = np.argsort(p, kind="stable")
    reject = np.zeros(p.size, bool)
    m = p.size
    for rank, i in enumerate(order):
        if p[i] > level / (m - rank):
            break
        reject[i] = True
    return reject.tolist()


def _cov(u, v) -> float:
    return float(np.cov(u, v, ddof=1)[0, 1]) if len(u) > 1 else 0.0


# -- shared plumbing -------------------------------------------------------------------

def _report(experiment, system, **kw) -> ExperimentReport:
    return ExperimentReport(experiment=experiment, instance=system.id,
                            params_hash=params_hash(system.params), **kw)


def _evaluate(obs, xs) -> np.ndarray:
    return np.array([obs(x) for x in xs])


# -- invariance ----------------------------------------------------------------------------

def estimate_invariance(system: FHCSystem, params: MeasureParams, plan: TruncationPlan,
                        t_list, observables, n_samples: int, seed: int, *,
                        workers: int = 1, level: float = LEVEL) -> ExperimentReport:
    """KS comparison of ``obs(X)`` and ``obs(T_t X)`` over the same draws ``X ~ mu``."""
    start = time.perf_counter()
    rep = _report("invariance", system, seeds={"seed": seed, "stream": "invariance"},
                  sample_sizes={"n": n_samples}, thresholds={"family_level": level})
    try:
        xs = sample_batch(system, params, plan, seed, "invariance", n_samples, workers=workers)
        rows = []
        for t in t_list:
            shifted = xs if t == 0 else [system.apply_T(float(t), x) for x in xs]
            for obs in observables:
                d, p = ks_two_sample(_evaluate(obs, xs), _evaluate(obs, shifted))
                rows.append({"t": float(t), "observable": obs.id, "ks": d, "p": p})
    except Exception as exc:  # partial report, flagged invalid
        rep.valid = False
        rep.notes.append(f"aborted: {type(exc).__name__}: {exc}")
        rep.wall_clock = time.perf_counter() - start
        return rep
    rejected = holm([r["p"] for r in rows], level)
    for r, rej in zip(rows, rejected):
        r["rejected"] = rej
    rep.tests = {"ks": rows}
    rep.estimates = {"max_ks": max(r["ks"] for r in rows), "min_p": min(r["p"] for r in rows)}
    rep.verdicts = {"family": not any(rejected)}
    zero = [r["ks"] for r in rows if r["t"] == 0]
    if zero:
        rep.verdicts["t0_identical"] = all(d == 0.0 for d in zero)
    rep.notes.append(f"tail_bound={plan.tail_bound:.3g} at J={plan.J}")
    rep.wall_clock = time.perf_counter() - start
    return rep


# -- mixing ----------------------------------------------------------------------------------

def null_band(u, v, rng: np.random.Generator, n_boot: int = 200) -> float:
    """Bootstrap sd of the covariance after independently resampling both margins."""
    n = len(u)
    vals = np.empty(n_boot)
    for b in range(n_boot):
        vals[b] = _cov(u[rng.integers(0, n, n)], v[rng.integers(0, n, n)])
    return float(vals.std(ddof=1))


def estimate_mixing(system: FHCSystem, params: MeasureParams, plan: TruncationPlan,
                    phi_obs: Observable, psi_obs: Observable, t_grid, n_samples: int, seed: int,
                    *, workers: int = 1, n_boot: int = 200) -> ExperimentReport:
    """``C(t) = Cov(phi(X), psi(T_t X))`` with 3-sigma null bands from a bootstrap."""
    start = time.perf_counter()
    t_grid = [float(t) for t in t_grid]
    if t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ParameterError("mixing t_grid must start at 0 and increase")
    rep = _report("mixing", system, seeds={"seed": seed, "stream": "mixing"},
                  sample_sizes={"n": n_samples, "bootstrap": n_boot},
                  thresholds={"band_sigmas": 3.0})
    try:
        xs = sample_batch(system, params, plan, seed, "mixing", n_samples, workers=workers)
        u = _evaluate(phi_obs, xs)
        curve = []
        boot = derive_rng(seed, stream_id("mixing-bootstrap"))
        for t in t_grid:
            v = _evaluate(psi_obs, xs if t == 0 else [system.apply_T(t, x) for x in xs])
            c = _cov(u, v)
            band = 3.0 * null_band(u, v, boot, n_boot)
            curve.append((t, c, -band, band))
    except Exception as exc:
        rep.valid = False
        rep.notes.append(f"aborted: {type(exc).__name__}: {exc}")
        rep.wall_clock = time.perf_counter() - start
        return rep
    rep.curve = curve
    c0, cT = curve[0], curve[-1]
    rep.estimates = {"C0": c0[1], "C_tmax": cT[1], "band0": c0[3], "band_tmax": cT[3],
                     "t_max": t_grid[-1], "var_phi": float(np.var(u, ddof=1))}
    rep.verdicts = {"decorrelated_at_tmax": abs(cT[1]) <= cT[3]}
    if phi_obs == psi_obs and np.ptp(u) > 0:
        rep.verdicts["correlated_at_0"] = c0[1] > c0[3]
    rep.wall_clock = time.perf_counter() - start
    return rep


# -- support -------------------------------------------------------------------------------

def support_targets(system: FHCSystem, ks, tol: float | None = None) -> dict[int, StateVector]:
    """``u_k = int_0^1 T_t x_k dt`` by adaptive quadrature."""
    return {k: (system.zero() if k == 1 else orbit_quad(system, k, 0.0, 1.0, tol)) for k in ks}


def conditioning_log_prob(params: MeasureParams, k: int, eps: float) -> dict:
    """Analytic log-probabilities of the conditioning event for target ``k``."""
    N = params.N(k)
    event = 2 * math.log(eps) + math.log(float(params.p(k))) + 2 * N * math.log(float(params.p(1)))
    return {"N_k": N, "log_event": event, "log_bound": event + 2 * params.log_beta_tail(k)}


def estimate_support(system: FHCSystem, params: MeasureParams, plan: TruncationPlan, k_targets,
                     n_samples: int, seed: int, *, radius: float | None = None,
                     mode: str = "conditioned", eps: float = 0.1, workers: int = 1,
                     min_hit_rate: float = 0.5) -> ExperimentReport:
    """Hits of ``||X - u_k|| < radius``.

    Conditioned mode forces ``n_0 = k``, ``n_j = 1`` for ``0 < |j| <= N_k``,
    ``s_0 in [0, eps]`` and ``s_2 in [1, 1 + eps]``.  Without ``radius`` the
    radius is ``max(2 * median distance, tail bound beyond N_k)``.
    """
    start = time.perf_counter()
    if radius is not None and radius <= 0:
        raise ParameterError("support radius must be positive")
    if mode not in ("conditioned", "unconditional"):
        raise ParameterError(f"unknown support mode {mode!r}")
    rep = _report("support", system, seeds={"seed": seed}, sample_sizes={"n": n_samples},
                  thresholds={"min_hit_rate": min_hit_rate, "eps": eps})
    targets = support_targets(system, k_targets)
    rows = {}
    shared = None
    if mode == "unconditional":
        shared = sample_batch(system, params, plan, seed, "support", n_samples, workers=workers)
    for k in k_targets:
        cert = conditioning_log_prob(params, k, eps)
        if mode == "conditioned":
            cond = HCondition(height=k, n_ones=cert["N_k"], eps=eps)
            xs = sample_batch(system, params, plan, seed, f"support-{k}", n_samples,
                              workers=workers, condition=cond)
        else:
            xs = shared
        d = np.array([distance(x, targets[k]) for x in xs])
        tail = plan.tail_at((cert["N_k"] - 1) / 2.0)
        r = radius if radius is not None else max(2.0 * float(np.median(d)),
                                                  float(np.nextafter(tail, math.inf)))
        hits = float(np.mean(d < r))
        rows[str(k)] = {"radius": r, "hit_rate": hits, "median_distance": float(np.median(d)),
                        "max_distance": float(d.max()), "tail_beyond_N": tail,
                        "target_norm": norm(targets[k]), **cert}
        if mode == "conditioned" and hits == 0:
            rep.valid = False
            rep.notes.append(f"no conditioned sample near u_{k}")
    rep.estimates = rows
    rep.verdicts = {f"hit_rate_{k}": rows[str(k)]["hit_rate"] >= min_hit_rate for k in k_targets}
    rep.verdicts["positive_probability"] = all(math.isfinite(r["log_bound"]) for r in rows.values())
    rep.notes.append("log_bound = log(eps^2 p_k p_1^(2 N_k)) + 2 sum_{l>=k} log beta_l; "
                     "the free eps only enters through the conditioning event")
    rep.wall_clock = time.perf_counter() - start
    if not rep.valid:
        raise SupportTestError("; ".join(rep.notes[:-1]))
    return rep


# -- recurrence -----------------------------------------------------------------------------

def orbit_lower_density(system: FHCSystem, x0: StateVector, center: StateVector | None,
                        radius: float, T: float, dt: float,
                        horizons=None) -> ExperimentReport:
    """Fraction of times ``k dt <= N`` with ``T_{k dt} x0`` inside the ball, for growing ``N``."""
    start = time.perf_counter()
    if dt <= 0 or dt > 0.1:
        raise ParameterError("dt must lie in (0, 0.1]")
    if radius <= 0:
        raise ParameterError("radius must be positive")
    horizons = sorted(horizons or (T / 4, T / 2, T))
    steps = int(round(T / dt))
    center = center if center is not None else system.zero()
    inside = np.zeros(steps + 1, bool)
    rep = _report("density", system, sample_sizes={"steps": steps, "dt": dt, "T": T},
                  thresholds={"radius": radius})
    x = x0
    try:
        for k in range(steps + 1):
            if k:
                x = system.apply_T(dt, x)
            inside[k] = math.isinf(radius) or distance(x, center) < radius
    except Exception as exc:
        rep.valid = False
        rep.notes.append(f"orbit left the representation at step {k}: {exc}")
        steps = k - 1
    dens = []
    for N in horizons:
        m = min(int(round(N / dt)), steps)
        dens.append(float(inside[:m + 1].mean()) if m >= 0 else 0.0)
    run = np.cumsum(inside[:steps + 1]) / np.arange(1, steps + 2)
    rep.curve = [(k * dt, float(run[k]), float(run[k]), float(run[k]))
                 for k in range(0, steps + 1, max(1, steps // 200))]
    rep.estimates = {"densities": dict(zip(map(str, horizons), dens)), "min_density": min(dens),
                     "min_running_density_second_half": float(run[steps // 2:].min())}
    rep.verdicts = {"positive_density": min(dens) > 0}
    rep.wall_clock = time.perf_counter() - start
    return rep
