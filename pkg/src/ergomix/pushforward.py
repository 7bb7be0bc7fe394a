"""The factor map from model functions to states, and its truncation.

``phi(f)`` integrates the orbit of ``x_{n_j}`` over each gap
``[s_2j, s_2j+2]``: backward orbits ``S_{-t}`` on negative times and forward
orbits ``T_t`` on positive ones, with the gap straddling the origin split at
0.  Only gaps ``|j| <= J`` are kept; everything dropped lives at times
``|t| >= (J - 1) / 2`` and is bounded by the tail of the orbit-norm envelope.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import banach
from .banach import EIGEN, StateVector, clock_norms, distance, linear_combine, norm
from .errors import CalibrationError, CoverageError, DomainOverflowError, ParameterError
from .modelspace import (MeasureParams, ModelFunction, make_measure_params, sample_model,
                         shift_model)
from .reports import params_hash
from .rng import draw_rngs
from .semigroups import FHCSystem

DEFAULT_J = 40
DEFAULT_TARGET_TOL = 1e-3
ENVELOPE_STEP = 0.5
J_CAP = 400
N_LEVELS = 8


@dataclass
class TruncationPlan:
    """Retained gaps ``|j| <= J`` and a bound on the norm of what is dropped.

    ``tail_M`` / ``tail_vals`` tabulate ``M -> int_{|t| >= M}`` of the orbit
    norm envelope over all basics the sampler can draw.
    """

    J: int
    tail_bound: float
    per_level_tails: list
    N_calibrated: list
    target_tol: float
    schedule_base: float
    instance: str
    key: str
    tail_M: list = field(default_factory=list, repr=False)
    tail_vals: list = field(default_factory=list, repr=False)
    basic_rows: list = field(default_factory=list, repr=False)
    row_mode: str = "curve"
    notes: list = field(default_factory=list)

    def tail_at(self, M: float) -> float:
        """Tail beyond time ``M``; rounds ``M`` down to the table (conservative)."""
        if M <= 0:
            return self.tail_vals[0]
        M_arr = np.asarray(self.tail_M)
        i = int(np.searchsorted(M_arr, M, side="right")) - 1
        return float(self.tail_vals[max(i, 0)])

    def bound_for(self, J: int) -> float:
        return self.tail_at((J - 1) / 2.0)

    def with_J(self, J: int) -> "TruncationPlan":
        d = asdict(self)
        d.update(J=int(J), tail_bound=self.bound_for(J))
        return TruncationPlan(**d)

    def gap_bound(self, n: int, a: float, b: float) -> float:
        """Bound on ``int`` over times ``a <= |t| <= b`` of the orbit norms of ``x_n``."""
        if n == 1:
            return 0.0
        M = np.asarray(self.tail_M)
        row = np.asarray(self.basic_rows[n - 2])
        step = M[1] - M[0]
        if self.row_mode == "hint":
            return float(row[max(int(np.searchsorted(M, a, side="right")) - 1, 0)])
        if b > M[-1]:
            return math.inf
        ia = max(int(np.searchsorted(M, a, side="right")) - 1, 0)
        ib = min(int(np.searchsorted(M, b, side="left")), M.size - 1)
        return float((b - a + step) * row[ia:ib + 1].max())

    def sample_bound(self, f: ModelFunction) -> float:
        """Tail bound for this ``f``.

        Dropped gaps up to the table horizon use their actual heights; times
        past the horizon or the sampled range fall back to the envelope.
        """
        z, J = f.zero, self.J
        H = self.tail_M[-1]
        edge = min(float(f.breaks[-1]), float(-f.breaks[0]), H)
        total = self.tail_at(edge)
        for i in range(f.breaks.size - 1):
            j = i - z
            if -J <= j <= J:
                continue
            a, b = float(f.breaks[i]), float(f.breaks[i + 1])
            lo, hi = (a, b) if j > 0 else (-b, -a)
            if lo < edge:
                total += self.gap_bound(int(f.heights[i]), lo, min(hi, edge))
        return min(total, self.tail_bound)

    def window(self) -> float:
        return float(max(4 * self.J, 64))

    def to_json(self) -> dict:
        return {k: (str(v) if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, obj) -> "TruncationPlan":
        d = dict(obj)
        d["target_tol"] = float(d["target_tol"])
        return cls(**d)


# -- orbit integrals ------------------------------------------------------------------

def orbit_quad(system: FHCSystem, n: int, a: float, b: float, tol: float | None = None) -> StateVector:
    """``int_a^b`` of ``T_t x_n`` (``t >= 0``) or ``S_{-t} x_n`` (``t <= 0``) by quadrature.

    Negative pieces substitute ``u = -t`` so that all quadrature runs on
    positive time.
    """
    tol = tol or system.quad_tol or 1e-8
    x = system.basic(n)
    parts = []
    if a < 0:
        hi = min(b, 0.0)
        parts.append(banach.quad_integral(lambda u: system.apply_S(u, x), (-hi, -a), tol))
    if b > 0:
        lo = max(a, 0.0)
        parts.append(banach.quad_integral(lambda t: system.apply_T(t, x), (lo, b), tol))
    return parts[0] if len(parts) == 1 else linear_combine([1.0, 1.0], parts)


def _orbit_piece(system: FHCSystem, n: int, a: float, b: float) -> StateVector:
    if system.orbit_integral is not None:
        return system.orbit_integral(n, a, b)
    return orbit_quad(system, n, a, b)


def gap_terms(f: ModelFunction, system: FHCSystem, J: int) -> list[tuple[int, StateVector]]:
    """``(j, integral over gap j)`` for ``|j| <= J``; the straddling gap is ``j = -1``."""
    z = f.zero
    if z - J < 0 or z + J + 1 >= f.breaks.size:
        raise CoverageError(f"model window does not cover gaps |j| <= {J}; increase T_win")
    out = []
    for j in range(-J, J + 1):
        i = z + j
        n = int(f.heights[i])
        if n == 1:
            continue
        a, b = float(f.breaks[i]), float(f.breaks[i + 1])
        if j == -1:
            piece = linear_combine([1.0, 1.0], [_orbit_piece(system, n, a, 0.0),
                                                _orbit_piece(system, n, 0.0, b)])
        else:
            piece = _orbit_piece(system, n, a, b)
        out.append((j, piece))
    return out


def phi(f: ModelFunction, system: FHCSystem, plan: TruncationPlan | int) -> StateVector:
    """The truncated factor map; ``plan`` may be a plan or a bare ``J``."""
    J = plan if isinstance(plan, int) else plan.J
    terms = [v for _, v in gap_terms(f, system, J)]
    if not terms:
        return system.zero()
    return linear_combine(np.ones(len(terms)), terms)


def equivariance_residual(f: ModelFunction, a: float, system: FHCSystem,
                          plan: TruncationPlan | int) -> float:
    """``|| T_a phi(f) - phi(R_a f) ||`` with ``R_a`` moving breakpoints by ``+a``."""
    if a < 0:
        raise ParameterError("equivariance shift must be >= 0")
    if a == 0:
        return 0.0
    return distance(system.apply_T(a, phi(f, system, plan)), phi(shift_model(f, a), system, plan))


def shift_case(f: ModelFunction, a: float) -> int:
    """1 if the straddling gap still straddles after shifting by ``a``, else 2."""
    return 1 if a < -f.breaks[f.zero - 1] else 2


# -- tail control -----------------------------------------------------------------------

def pettis_tail_probe(system: FHCSystem, n: int, N: float, n_compacts: int,
                      rng: np.random.Generator, delta: float = 10.0, pieces: int = 4) -> float:
    """Max norm of orbit integrals over random finite unions of intervals in ``[N, N + delta]``.

    Both ``T_t x_n`` and ``S_t x_n`` are probed; a Monte Carlo stand-in for
    the supremum over compacts.
    """
    if N <= 0:
        raise ParameterError("probe start N must be positive")
    best = 0.0
    if n == 1:
        return 0.0
    for _ in range(n_compacts):
        cuts = np.sort(rng.uniform(N, N + delta, 2 * pieces))
        segs = cuts.reshape(-1, 2)
        fwd = [_orbit_piece(system, n, float(a), float(b)) for a, b in segs]
        bwd = [_orbit_piece(system, n, float(-b), float(-a)) for a, b in segs]
        ones = np.ones(pieces)
        best = max(best, norm(linear_combine(ones, fwd)), norm(linear_combine(ones, bwd)))
    return best


def orbit_norm_curve(system: FHCSystem, n: int, ts: np.ndarray) -> np.ndarray:
    """``||T_t x_n|| + ||S_t x_n||`` on ``ts``."""
    x = system.basic(n)
    if x.kind == EIGEN and system.field is not None:
        # T_t and S_t are exact clock moves for eigen instances
        return clock_norms(x, ts) + clock_norms(x, -ts)
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        try:
            out[i] = norm(system.apply_T(float(t), x)) + norm(system.apply_S(float(t), x))
        except DomainOverflowError:
            out[i:] = np.nan
            break
    return out


def tail_table(system: FHCSystem, n_max: int, step: float = ENVELOPE_STEP):
    """``M -> bound on int_{|t|>=M}`` over all orbits of ``x_2 .. x_{n_max}``.

    Systems with an ``orbit_decay_hint`` sum the per-basic bounds.  Others use
    the pointwise max of norm curves on a ``step`` grid, padded by one step
    of the running maximum, plus ``env(H) * H`` beyond the horizon ``H``.
    Also returns the per-basic rows (hint values or norm curves) used for
    per-sample bounds.
    """
    H = float(system.horizon if math.isfinite(system.horizon) else 160.0)
    Ms = np.arange(0.0, H + step / 2, step)
    notes = []
    if system.orbit_decay_hint is not None:
        rows = np.array([[system.orbit_decay_hint(n, float(M)) for M in Ms]
                         for n in range(2, n_max + 1)])
        notes.append("tail: sum of per-basic decay bounds")
        return Ms, rows.sum(axis=0), rows, "hint", notes
    rows = np.array([orbit_norm_curve(system, n, Ms) for n in range(2, n_max + 1)])
    env = rows.max(axis=0)
    seg = 0.5 * step * (env[1:] + env[:-1])
    cum = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    run_max = np.maximum.accumulate(env[::-1])[::-1]
    beyond = env[-1] * H
    vals = cum + step * run_max + beyond
    notes.append(f"tail: envelope over x_2..x_{n_max}, step {step}, extrapolation env(H)*H = {beyond:.3g}")
    return Ms, vals, rows, "curve", notes


def _levels(Ms, vals, base: float, n_levels: int):
    """Thresholds ``N_n`` whose tails fall below ``base^-(n+1)``, gaps strictly increasing."""
    def first_J(tol):
        ok = np.flatnonzero(vals <= tol)
        return None if ok.size == 0 else int(math.floor(2 * Ms[ok[0]])) + 1

    Ns = []
    for lvl in range(1, n_levels + 1):
        need = first_J(base ** -(lvl + 1)) or 1
        if len(Ns) >= 2:
            need = max(need, 2 * Ns[-1] - Ns[-2] + 1)
        elif Ns:
            need = max(need, Ns[-1] + 1)
        Ns.append(int(need))
    return Ns, first_J


def calibrate_truncation(system: FHCSystem, params: MeasureParams,
                         target_tol: float = DEFAULT_TARGET_TOL, *, J: int | None = None,
                         schedule_base: float = 2.0, cache_dir: str | None = None,
                         step: float = ENVELOPE_STEP) -> tuple[MeasureParams, TruncationPlan]:
    """Pick ``J`` (unless given) and thresholds ``N_n`` from the tail table.

    ``target_tol = inf`` yields the minimal plan ``J = 1``.  Raises
    :class:`CalibrationError` if ``target_tol`` needs ``J > J_CAP``.
    """
    if not target_tol > 0:
        raise ParameterError("target_tol must be positive")
    if schedule_base <= 1:
        raise ParameterError("schedule base must exceed 1")
    n_max = params.support_cap
    key = params_hash({"instance": system.id, "params": system.params, "n_max": n_max,
                       "step": step})
    table = _load_table(cache_dir, system.id, key)
    if table is None:
        Ms, vals, rows, mode, notes = tail_table(system, n_max, step)
        table = {"M": Ms.tolist(), "vals": vals.tolist(), "rows": rows.tolist(), "mode": mode,
                 "notes": notes}
        _store_table(cache_dir, system.id, key, table)
    Ms, vals = np.asarray(table["M"]), np.asarray(table["vals"])
    Ns, first_J = _levels(Ms, vals, schedule_base, N_LEVELS)
    base_plan = TruncationPlan(1, float(vals[0]), [], Ns, float(target_tol), schedule_base,
                               system.id, key, table["M"], table["vals"], list(table["notes"]))
    base_plan.per_level_tails = [base_plan.bound_for(N) for N in Ns]
    base_plan.basic_rows = table["rows"]
    base_plan.row_mode = table["mode"]
    if J is None:
        if math.isinf(target_tol):
            J = 1
        else:
            J = first_J(target_tol)
            if J is None or J > J_CAP:
                achieved = base_plan.bound_for(J_CAP)
                raise CalibrationError(f"tail tolerance {target_tol:g} not reached with J <= {J_CAP} "
                                       f"(achieved {achieved:.3g})", achieved=achieved)
    elif J < 1:
        raise ParameterError("J must be a positive integer")
    plan = base_plan.with_J(J)
    new_params = make_measure_params(params.p_head, params.tail_ratio, Ns)
    return new_params, plan


def _cache_path(cache_dir, instance, key):
    return os.path.join(cache_dir, f"tail-{instance}-{key}.json")


def _load_table(cache_dir, instance, key):
    if not cache_dir:
        return None
    try:
        with open(_cache_path(cache_dir, instance, key)) as fh:
            return json.load(fh)
    except (OSError, ValueError):
        return None


def _store_table(cache_dir, instance, key, table):
    if not cache_dir:
        return
    os.makedirs(cache_dir, exist_ok=True)
    tmp = _cache_path(cache_dir, instance, key) + f".{os.getpid()}.tmp"
    with open(tmp, "w") as fh:
        json.dump(table, fh)
    os.replace(tmp, _cache_path(cache_dir, instance, key))


# -- sampling -------------------------------------------------------------------------

def sample_invariant(system: FHCSystem, params: MeasureParams, plan: TruncationPlan,
                     rng: np.random.Generator, window: float | None = None) -> StateVector:
    """One draw from the truncated pushforward measure."""
    return phi(sample_model(params, window or plan.window(), rng), system, plan)


def sample_batch(system, params, plan, seed: int, stream: str, n: int, *, workers: int = 1,
                 condition=None, window: float | None = None, return_models: bool = False):
    """``n`` draws with per-draw seeds; output order and values ignore ``workers``."""
    rngs = draw_rngs(seed, stream, n)
    win = window or plan.window()

    def one(rng):
        f = sample_model(params, win, rng, condition=condition)
        return f, phi(f, system, plan)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            pairs = list(ex.map(one, rngs))
    else:
        pairs = [one(r) for r in rngs]
    xs = [x for _, x in pairs]
    return (xs, [f for f, _ in pairs]) if return_models else xs
