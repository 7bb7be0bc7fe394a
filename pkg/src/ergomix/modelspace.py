"""The model space of spike functions and its translation-invariant measure.

A model function is piecewise linear with peaks ``n_j`` at breakpoints
``s_2j`` and zeros at the gap midpoints.  Breakpoints form a stationary
renewal process with Uniform(1/2, 3/2) gaps: unit density matches the
``2 eps`` base-set weights of the measure, and the gap that straddles the
origin is length biased so that the law is translation invariant.  Heights
are i.i.d. with law ``p`` and independent of positions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, ParameterError, RangeError

GAP_LO, GAP_HI = 0.5, 1.5
SUPPORT_CAP = 64
BETA_REMAINDER_TOL = 1e-9


# -- measure parameters -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasureParams:
    """Height law ``p`` and thresholds ``N`` with the ``prod beta_j > 0`` certificate.

    ``p_j = p_head[j-1]`` for ``j <= len(p_head)`` and
    ``p_j = p_head[-1] * tail_ratio ** (j - len(p_head))`` beyond.  ``N``
    continues past ``N_head`` with its last second difference.
    """

    p_head: np.ndarray
    tail_ratio: float
    N_head: np.ndarray
    beta_log_sum: float
    remainder_bound: float
    terms_used: int

    @property
    def support_cap(self) -> int:
        return min(SUPPORT_CAP, self.p_head.size)

    def p(self, j):
        j = np.asarray(j)
        m = self.p_head.size
        head = self.p_head[np.clip(j, 1, m) - 1]
        return np.where(j <= m, head, self.p_head[-1] * self.tail_ratio ** np.maximum(j - m, 0))

    def N(self, j: int) -> int:
        m = self.N_head.size
        if j <= m:
            return int(self.N_head[j - 1])
        g = int(self.N_head[-1] - self.N_head[-2])
        c = int(self.N_head[-1] - 2 * self.N_head[-2] + self.N_head[-3])
        k = j - m
        return int(self.N_head[-1] + k * g + c * k * (k + 1) // 2)

    def sampling_probs(self) -> np.ndarray:
        """``p`` truncated at the support cap and renormalized."""
        q = self.p_head[:self.support_cap]
        return q / q.sum()

    def log_beta(self, j: int) -> float:
        gap = self.N(j + 1) - self.N(j)
        return gap * math.log1p(-_tail_mass(self.p_head, self.tail_ratio, j))

    def log_beta_tail(self, n: int) -> float:
        """``sum_{l >= n} log beta_l`` (finite by the certificate)."""
        return self.beta_log_sum - sum(self.log_beta(j) for j in range(1, n))

    def to_json(self) -> dict:
        return {"p_head": self.p_head.tolist(), "tail_ratio": self.tail_ratio,
                "N_head": self.N_head.tolist(), "beta_log_sum": self.beta_log_sum,
                "remainder_bound": self.remainder_bound}


def _tail_mass(p_head, ratio, j: int) -> float:
    """``sum_{i > j} p_i``."""
    m = p_head.size
    beyond = p_head[-1] * ratio / (1.0 - ratio)
    if j >= m:
        return beyond * ratio ** (j - m)
    return float(p_head[j:].sum() + beyond)


def make_measure_params(p_head, tail_ratio: float, N_head) -> MeasureParams:
    """Validate ``(p, N)`` and certify ``sum_j log beta_j`` to ``BETA_REMAINDER_TOL``."""
    p_head = np.asarray(p_head, float)
    N_head = np.asarray(N_head, dtype=np.int64)
    if p_head.size == 0 or np.any(p_head <= 0) or np.any(p_head >= 1):
        raise ParameterError("p_j must satisfy 0 < p_j < 1 (p_1 = 0 gives beta_1 = 0)")
    if not 0 < tail_ratio < 1:
        raise ParameterError("geometric tail ratio must lie in (0, 1)")
    total = p_head.sum() + p_head[-1] * tail_ratio / (1 - tail_ratio)
    if abs(total - 1.0) > 1e-12:
        raise ParameterError(f"p must sum to 1 (got {total!r})")
    if N_head.size < 3:
        raise ParameterError("need at least three thresholds N_1 < N_2 < N_3")
    gaps = np.diff(N_head)
    if np.any(gaps <= 0) or np.any(np.diff(gaps) <= 0):
        raise ParameterError("thresholds need N_{n+2}-N_{n+1} > N_{n+1}-N_n (strictly increasing gaps)")
    c = int(gaps[-1] - gaps[-2])
    rho = tail_ratio
    probe = MeasureParams(p_head, tail_ratio, N_head, 0.0, math.inf, 0)
    total_log, j = 0.0, 0
    while True:
        j += 1
        total_log += probe.log_beta(j)
        if j >= max(p_head.size, N_head.size):
            q = _tail_mass(p_head, rho, j + 1)
            g = probe.N(j + 2) - probe.N(j + 1)
            bound = q / (1 - q) * (g / (1 - rho) + c * rho / (1 - rho) ** 2)
            if bound < BETA_REMAINDER_TOL:
                break
        if j > 100_000:
            raise ParameterError("beta-product certificate did not converge")
    if not math.isfinite(total_log):
        raise ParameterError("sum of log beta_j diverges; prod beta_j = 0")
    return MeasureParams(p_head, tail_ratio, N_head, total_log, bound, j)


def default_measure_params(N_head=None) -> MeasureParams:
    """``p_j = 2^-j`` and ``N_j = 2 j (j + 1)`` unless thresholds are given."""
    p_head = 0.5 ** np.arange(1, SUPPORT_CAP + 1)
    if N_head is None:
        N_head = [2 * j * (j + 1) for j in range(1, 9)]
    return make_measure_params(p_head, 0.5, N_head)


def degenerate_measure_params() -> MeasureParams:
    """Almost all mass on height 1; used to check the ``x_1 = 0`` convention.

    Sampling truncates at the first entry, so every height is exactly 1.
    """
    return MeasureParams(np.array([1.0]), 0.5, np.array([4, 12, 24]), 0.0, 0.0, 0)


# -- model functions ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModelFunction:
    """Breakpoints ``s_2j`` with peak heights; ``zero`` indexes ``s_0``.

    ``heights[i]`` is the value at ``breaks[i]`` and labels the gap
    ``[breaks[i], breaks[i+1]]``.
    """

    breaks: np.ndarray
    heights: np.ndarray
    zero: int
    window: tuple[float, float]

    def gap_index(self, j: int) -> int:
        """Array index of the gap ``[s_2j, s_2j+2]``."""
        return self.zero + j

    @property
    def n_neg(self) -> int:
        return self.zero

    @property
    def n_pos(self) -> int:
        return self.breaks.size - 1 - self.zero

    def to_json(self) -> dict:
        return {"breakpoints": self.breaks.tolist(), "heights": self.heights.tolist(),
                "zero_index": int(self.zero), "window": list(self.window)}

    @classmethod
    def from_json(cls, obj) -> "ModelFunction":
        return cls(np.asarray(obj["breakpoints"], float), np.asarray(obj["heights"], np.int64),
                   int(obj["zero_index"]), tuple(obj["window"]))


def check_model(f: ModelFunction) -> None:
    """Raise AssertionError if an invariant of the model space fails."""
    b = f.breaks
    assert b.size == f.heights.size
    assert 1 <= f.zero < b.size
    assert b[f.zero - 1] < 0 <= b[f.zero]
    g = np.diff(b)
    assert np.all(g > GAP_LO) and np.all(g < GAP_HI), "gap outside (1/2, 3/2)"
    assert np.all(f.heights >= 1)
    assert b[0] <= f.window[0] and f.window[1] <= b[-1]


@dataclass(frozen=True)
class HCondition:
    """Near-origin pattern forced in conditioned sampling.

    ``n_0 = height``, ``n_j = 1`` for ``0 < |j| <= n_ones``, ``s_0 in [0, eps]``
    and ``s_2 in [1, 1 + eps]``.
    """

    height: int
    n_ones: int
    eps: float = 0.1


def _uniform_gaps(rng, n):
    return rng.uniform(GAP_LO, GAP_HI, n)


def sample_model(params: MeasureParams, window: float, rng: np.random.Generator, *,
                 condition: HCondition | None = None, check: bool = False) -> ModelFunction:
    """Draw a model function covering ``(-window, window)``."""
    if window < 2:
        raise ParameterError("window T_win must be >= 2")
    if condition is None:
        G = math.sqrt(2.0 * rng.random() + 0.25)       # length-biased gap
        s0 = rng.random() * G
        s_m2 = s0 - G
        fwd0 = [s0]
    else:
        if not 0 < condition.eps < 0.25:
            raise ParameterError("conditioning eps must lie in (0, 1/4)")
        s0 = condition.eps * rng.random()
        s2 = 1.0 + condition.eps * rng.random()
        s_m2 = s0 - rng.uniform(GAP_LO, GAP_HI)
        fwd0 = [s0, s2]
    n_est = int(math.ceil(window)) + 8
    fwd = np.concatenate([fwd0, fwd0[-1] + np.cumsum(_uniform_gaps(rng, n_est))])
    while fwd[-1] < window:
        fwd = np.concatenate([fwd, fwd[-1] + np.cumsum(_uniform_gaps(rng, n_est))])
    bwd = s_m2 - np.concatenate([[0.0], np.cumsum(_uniform_gaps(rng, n_est))])
    while bwd[-1] > -window:
        bwd = np.concatenate([bwd, bwd[-1] - np.cumsum(_uniform_gaps(rng, n_est))])
    breaks = np.concatenate([bwd[::-1], fwd])
    zero = bwd.size
    probs = params.sampling_probs()
    heights = rng.choice(probs.size, size=breaks.size, p=probs) + 1
    if condition is not None:
        lo = max(0, zero - condition.n_ones)
        hi = min(breaks.size, zero + condition.n_ones + 1)
        heights[lo:hi] = 1
        heights[zero] = condition.height
    f = ModelFunction(breaks, heights.astype(np.int64), zero, (-float(window), float(window)))
    if check:
        check_model(f)
    return f


def shift_model(f: ModelFunction, t: float) -> ModelFunction:
    """Translate the graph by ``t`` and relabel so that ``s_-2 < 0 <= s_0``."""
    if t == 0:
        return f
    b = f.breaks + t
    zero = int(np.searchsorted(b, 0.0, side="left"))
    if zero < 1 or zero >= b.size:
        raise CoverageError(f"shift by {t:g} moves the origin outside the sampled breakpoints; "
                            "use a larger T_win")
    return ModelFunction(b, f.heights, zero, (f.window[0] + t, f.window[1] + t))


def eval_model(f: ModelFunction, x):
    """Value of the spike function at ``x`` (scalar or array)."""
    x = np.asarray(x, float)
    b = f.breaks
    if np.any(x < f.window[0]) or np.any(x > f.window[1]) or np.any(x < b[0]) or np.any(x > b[-1]):
        raise RangeError("evaluation point outside the model window")
    i = np.clip(np.searchsorted(b, x, side="right") - 1, 0, b.size - 2)
    left, right = b[i], b[i + 1]
    mid = 0.5 * (left + right)
    val = np.where(x <= mid, f.heights[i] * (mid - x) / (mid - left),
                   f.heights[i + 1] * (x - mid) / (right - mid))
    return val if val.ndim else float(val)


# -- Ornstein-Uhlenbeck alternative ------------------------------------------------

def ou_process_sample(grid, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary OU paths with covariance ``exp(-|t - s|)`` on ``grid``.

    Exact AR(1) recursion; returns shape ``(n_paths, len(grid))``.
    """
    grid = np.asarray(grid, float)
    if grid.size == 0 or grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ParameterError("grid must start at 0 and be strictly increasing")
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    out = np.empty((n_paths, grid.size))
    out[:, 0] = rng.standard_normal(n_paths)
    for k, h in enumerate(np.diff(grid), start=1):
        a = math.exp(-h)
        out[:, k] = a * out[:, k - 1] + math.sqrt(-math.expm1(-2 * h)) * rng.standard_normal(n_paths)
    return out


def write_ou_csv(path, grid, paths) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "path_id", "value"])
        for pid, row in enumerate(paths):
            for t, v in zip(grid, row):
                w.writerow([repr(float(t)), pid, repr(float(v))])
