"""Concrete C0-semigroups satisfying the frequent hypercyclicity criterion.

Every instance is an :class:`FHCSystem`: forward maps ``T_t``, a dense
family ``x_1 = 0, x_2, ...`` and right inverses ``S_t`` on that family.
Instances built from an eigenvector field (``A f(xi) = i xi f(xi)``) store
their states as eigen combinations, so ``T_t`` and ``S_t`` act by moving
the combination's clock.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import banach
from .banach import (EIGEN, GRID, StateVector, eigen_combo, format_id, grid_function,
                     linear_combine, materialize, norm, parse_id, register_basis)
from .errors import (ConfigurationError, DomainOverflowError, ParameterError,
                     SpectralRangeError, TruncationError)
from .reports import ExperimentReport, params_hash

ENUMERATION_VERSION = "x0.v1"


@dataclass(frozen=True)
class EigenField:
    """Eigenvector field ``xi -> f(xi)`` with ``A f(xi) = i xi f(xi)``."""

    interval: tuple[float, float]
    param: Callable[[float], complex]
    basis: str
    norm_id: str
    residual_fn: Callable[[StateVector, complex], StateVector]
    bump_intervals: tuple = ()

    def rate(self, xi: float) -> complex:
        return 1j * xi

    def eval(self, xi: float) -> StateVector:
        return eigen_combo([self.param(xi)], [1.0], [self.rate(xi)], self.basis, self.norm_id)

    def generator_residual(self, xi: float) -> float:
        """``||A f(xi) - i xi f(xi)|| / ||f(xi)||`` with a finite generator action."""
        v = materialize(self.eval(xi))
        return norm(self.residual_fn(v, self.rate(xi))) / norm(v)


@dataclass(frozen=True)
class FHCSystem:
    id: str
    basic: Callable[[int], StateVector]
    apply_T: Callable[[float, StateVector], StateVector]
    apply_S: Callable[[float, StateVector], StateVector]
    norm_id: str
    tol_inst: float = 0.0
    quad_tol: float = 0.0
    # integral of t -> T_t x_n (t >= 0) / S_{-t} x_n (t <= 0) over [a, b]
    orbit_integral: Callable[[int, float, float], StateVector] | None = None
    # bound on int_N^inf (||T_t x_n|| + ||S_t x_n||) dt
    orbit_decay_hint: Callable[[int, float], float] | None = None
    horizon: float = math.inf
    params: dict = field(default_factory=dict)
    condition: str = ""
    field: EigenField | None = None
    exact: bool = False

    def zero(self) -> StateVector:
        return self.basic(1)


# -- enumeration helpers -------------------------------------------------------

def cantor_unpair(m: int) -> tuple[int, int]:
    w = int((math.isqrt(8 * m + 1) - 1) // 2)
    t = w * (w + 1) // 2
    j = m - t
    return w - j, j


def signed(k: int) -> int:
    """0, 1, 2, 3, ... -> 1, -1, 2, -2, ..."""
    return (k // 2 + 1) * (-1) ** k


def modulation(k: int) -> int:
    """0, 1, 2, 3, 4, ... -> 0, 1, -1, 2, -2, ..."""
    return 0 if k == 0 else signed(k - 1)


# -- translation semigroup on a weighted L^1 space -----------------------------

def _hat_params(n: int):
    i, j = cantor_unpair(n - 2)
    wi, ai = cantor_unpair(j)
    return 0.5 + 0.25 * i, 0.5 / 2 ** (wi % 3), float(signed(ai))


def _antiderivative(v: np.ndarray, h: float, z: np.ndarray) -> np.ndarray:
    """Exact integral from 0 to z of the linear interpolant of v (zero outside)."""
    m = v.size
    c = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))])
    u = np.clip(z / h, 0.0, m - 1.0)
    k = np.minimum(np.floor(u).astype(int), m - 2)
    th = u - k
    return c[k] + h * (th * v[k] + 0.5 * th * th * (v[k + 1] - v[k]))


def _lattice_index(t: float, h: float) -> int | None:
    k = t / h
    r = round(k)
    return int(r) if abs(k - r) <= 1e-9 * max(1.0, abs(k)) else None


def translation_make(weight: float = 1.0, grid_step: float = 0.01,
                     domain_cap: float = 80.0) -> FHCSystem:
    """Left translation ``T_t f = f(. + t)`` on ``L^1([0, inf), exp(-w x) dx)``.

    ``S_t f = f(. - t)`` (zero on ``[0, t)``).  States are grid functions on
    ``[0, domain_cap]``; shifts by multiples of ``grid_step`` are exact index
    moves, other shifts interpolate linearly.
    """
    if weight <= 0:
        raise ParameterError("translation semigroup needs weight w > 0")
    if grid_step <= 0 or domain_cap <= 10 * grid_step:
        raise ParameterError("bad grid for translation semigroup")
    h = float(grid_step)
    npts = int(round(domain_cap / h)) + 1
    grid = h * np.arange(npts)
    grid.setflags(write=False)
    norm_id = format_id("weighted-l1", w=float(weight))
    zero = grid_function(grid, np.zeros(npts), norm_id)

    @functools.lru_cache(maxsize=None)
    def _hat(n):
        c, hw, amp = _hat_params(n)
        lo, hi = int(round((c - hw) / h)), int(round((c + hw) / h))
        if hi >= npts:
            raise DomainOverflowError(f"basic x_{n} does not fit in [0, {domain_cap}]")
        vals = np.zeros(npts)
        vals[lo:hi + 1] = amp * np.maximum(0.0, 1.0 - np.abs(grid[lo:hi + 1] - c) / hw)
        vals.setflags(write=False)
        return vals, hi

    def basic(n: int) -> StateVector:
        if n < 1:
            raise ParameterError("basics are indexed from 1")
        if n == 1:
            return zero
        return grid_function(grid, _hat(n)[0], norm_id)

    def _support_end(x):
        nz = np.flatnonzero(x.values)
        return nz[-1] if nz.size else -1

    def apply_T(t: float, x: StateVector) -> StateVector:
        if t < 0:
            raise ParameterError("T_t needs t >= 0")
        if t == 0:
            return x
        k = _lattice_index(t, h)
        if k is None:
            return x.with_values(np.interp(grid + t, grid, x.values, right=0.0))
        out = np.zeros_like(x.values)
        if k < npts:
            out[:npts - k] = x.values[k:]
        return x.with_values(out)

    def apply_S(t: float, x: StateVector) -> StateVector:
        if t < 0:
            raise ParameterError("S_t needs t >= 0")
        if t == 0:
            return x
        end = _support_end(x)
        if end >= 0 and grid[end] + t > grid[-1] + 1e-12:
            raise DomainOverflowError(
                f"S_{t:g} pushes support past domain_cap={domain_cap}; enlarge domain_cap")
        k = _lattice_index(t, h)
        if k is None:
            return x.with_values(np.interp(grid - t, grid, x.values, left=0.0))
        out = np.zeros_like(x.values)
        out[k:] = x.values[:npts - k]
        return x.with_values(out)

    def orbit_integral(n: int, a: float, b: float) -> StateVector:
        # both T_t x (t >= 0) and S_{-t} x (t <= 0) equal x(y + t) on y >= 0
        if n == 1 or a == b:
            return zero
        vals, hi = _hat(n)
        if -a + grid[hi] > grid[-1] + 1e-12:
            raise DomainOverflowError(
                f"orbit integral down to t={a:g} overflows domain_cap={domain_cap}")
        v = vals[:hi + 2]
        return grid_function(grid, _antiderivative(v, h, grid + b) - _antiderivative(v, h, grid + a),
                             norm_id)

    def decay_hint(n: int, N: float) -> float:
        if n == 1:
            return 0.0
        x = basic(n)
        nx = norm(x)
        s_part = math.exp(-weight * N) * nx / weight
        end = grid[_hat(n)[1]]
        if N >= end:
            return s_part
        ks = np.arange(math.floor(N / h), math.ceil(end / h) + 1)
        tail = np.array([norm(apply_T(float(k * h), x)) for k in ks])
        # ||T_t x|| is piecewise smooth in t; pad by one step of the largest value
        return s_part + float(np.trapezoid(tail, h * ks)) + h * float(tail.max())

    return FHCSystem(
        id="translation", basic=basic, apply_T=apply_T, apply_S=apply_S, norm_id=norm_id,
        tol_inst=0.0, quad_tol=0.0, orbit_integral=orbit_integral,
        orbit_decay_hint=decay_hint, horizon=domain_cap,
        params=dict(weight=weight, grid_step=grid_step, domain_cap=domain_cap),
        condition="w > 0", exact=True)


# -- eigen bases -----------------------------------------------------------------

def _seq(spec, n: int) -> np.ndarray:
    """Sequence spec: a number (constant) or ``a:b:c`` (last value repeats)."""
    if isinstance(spec, (int, float)):
        return np.full(n, float(spec))
    vals = [float(v) for v in (spec.split(":") if isinstance(spec, str) else spec)]
    out = np.full(n, vals[-1])
    out[:min(n, len(vals))] = vals[:n]
    return out


def _seq_id(spec) -> str | float:
    if isinstance(spec, (int, float)):
        return float(spec)
    return ":".join(repr(float(v)) for v in spec)


@register_basis("birth_death")
def _bd_basis(lams, a, b, d, dim):
    dim = int(dim)
    f = np.zeros((lams.size, dim), complex)
    f[:, 0] = 1.0
    if dim > 1:
        f[:, 1] = (lams - a) / d
    for n in range(2, dim):
        f[:, n] = ((lams - a) * f[:, n - 1] - b * f[:, n - 2]) / d
    return banach.COEFF, None, f


@register_basis("death")
def _death_basis(lams, alpha, beta, dim):
    dim = int(dim)
    al, be = _seq(alpha, dim), _seq(beta, dim)
    f = np.zeros((lams.size, dim), complex)
    f[:, 0] = 1.0
    for n in range(1, dim):
        f[:, n] = (lams + al[n - 1]) * f[:, n - 1] / be[n - 1]
    return banach.COEFF, None, f


@functools.lru_cache(maxsize=8)
def _fourier_grid(W, h):
    g = h * np.arange(-int(round(W / h)), int(round(W / h)) + 1)
    g.setflags(write=False)
    return g


@register_basis("fourier")
def _fourier_basis(lams, W, h):
    g = _fourier_grid(float(W), float(h))
    return GRID, g, np.exp(np.outer(lams, g))


@functools.lru_cache(maxsize=8)
def _log_grid(lo, hi, n):
    u = np.linspace(lo, hi, int(n))
    x = np.exp(u)
    x.setflags(write=False)
    return u, x


@register_basis("monomial")
def _monomial_basis(mus, lo, hi, n):
    u, x = _log_grid(float(lo), float(hi), int(n))
    return GRID, x, np.exp(np.outer(mus, u))


def _tail_ratio(vec: np.ndarray, p: float = 1.0, tail: int = 10) -> float:
    a = np.abs(vec) ** p
    return float((a[-tail:].sum() / a.sum()) ** (1.0 / p))


def _decay_window(vec_of, tail_tol=1e-12, scan=np.linspace(-4.0, 4.0, 801)):
    """Largest contiguous xi-interval on which f(i xi) has a tail below tail_tol."""
    ok = np.array([_tail_ratio(vec_of(x)) <= tail_tol for x in scan])
    best, cur = None, None
    for i, good in enumerate(ok):
        if good:
            cur = (cur[0], i) if cur else (i, i)
            if best is None or cur[1] - cur[0] > best[1] - best[0]:
                best = cur
        else:
            cur = None
    if best is None:
        return None
    return float(scan[best[0]]), float(scan[best[1]])


def _split_bumps(lo, hi):
    """Bump supports inside (lo, hi), kept away from xi = 0."""
    if lo < 0 < hi:
        gap = 0.2 * min(-lo, hi)
        return ((lo, -gap), (gap, hi))
    return ((lo, hi),)


# -- birth-and-death / death models ----------------------------------------------

def _check_field_interval(field: EigenField, dim: int, p: float, tail_tol: float = 1e-12):
    for xi in np.linspace(*field.interval, 21):
        v = materialize(field.eval(float(xi))).values
        if _tail_ratio(v, p) > tail_tol:
            raise TruncationError(
                f"eigenvector at xi={xi:.3g} does not decay within trunc_dim={dim} "
                f"(tail ratio {_tail_ratio(v, p):.2e}); shrink the interval or raise trunc_dim")


def birth_death_make(a: float = 0.0, b: float = 0.25, d: float = 1.0, trunc_dim: int = 200,
                     p_exp: float = 1.0, interval=None, **fhc_kw):
    """Constant-coefficient birth-and-death chain on l^p.

    ``(Lf)_1 = a f_1 + d f_2``, ``(Lf)_n = b f_{n-1} + a f_n + d f_{n+1}``.
    Returns ``(system, field)``.
    """
    if not (0 < abs(b) < abs(d)):
        raise ParameterError(f"birth_death needs 0<|b|<|d| (got b={b}, d={d})")
    if not abs(a) < abs(b + d):
        raise ParameterError(f"birth_death needs |a|<|b+d| (got a={a}, b+d={b + d})")
    if not 1 <= p_exp < math.inf:
        raise ParameterError("p_exp must satisfy 1 <= p < inf")
    basis = format_id("birth_death", a=float(a), b=float(b), d=float(d), dim=int(trunc_dim))
    norm_id = format_id("lp", p=float(p_exp))

    def residual(v, lam):
        f = v.values
        lf = np.empty_like(f)
        lf[0] = a * f[0] + d * f[1]
        lf[1:-1] = b * f[:-2] + a * f[1:-1] + d * f[2:]
        r = lf - lam * f
        r[-1] = 0.0
        return v.with_values(r)

    if interval is None:
        interval = _decay_window(lambda xi: _bd_basis(np.array([1j * xi]), a, b, d, trunc_dim)[2][0])
        if interval is None:
            raise TruncationError("no decaying eigenvectors on the imaginary axis")
        interval = (math.ceil(interval[0] * 20) / 20, math.floor(interval[1] * 20) / 20)
    field = EigenField(tuple(interval), lambda xi: 1j * xi, basis, norm_id, residual,
                       _split_bumps(*interval))
    _check_field_interval(field, trunc_dim, p_exp)
    system = eigenfield_to_fhc(field, name="birth_death",
                               params=dict(a=a, b=b, d=d, trunc_dim=trunc_dim, p_exp=p_exp,
                                           interval=list(interval)),
                               condition="0<|b|<|d| and |a|<|b+d|", **fhc_kw)
    return system, field


def death_model_make(alpha=0.5, beta=1.0, trunc_dim: int = 200, interval=None, **fhc_kw):
    """Death model ``(Af)_n = -alpha_n f_n + beta_n f_{n+1}`` on l^1.

    ``alpha``/``beta`` are numbers (constant) or lists whose last entry repeats.
    """
    al, be = _seq(alpha, trunc_dim), _seq(beta, trunc_dim)
    if np.any(al <= 0) or np.any(be <= 0):
        raise ParameterError("death model needs positive alpha and beta")
    if not al.max() < be[-1]:
        raise ParameterError(
            f"death model needs sup_n alpha_n < liminf_n beta_n (got {al.max()} >= {be[-1]})")
    basis = format_id("death", alpha=_seq_id(alpha), beta=_seq_id(beta), dim=int(trunc_dim))
    norm_id = format_id("lp", p=1.0)

    def residual(v, lam):
        f = v.values
        r = np.zeros_like(f)
        r[:-1] = -al[:-1] * f[:-1] + be[:-1] * f[1:] - lam * f[:-1]
        return v.with_values(r)

    if interval is None:
        interval = _decay_window(
            lambda xi: _death_basis(np.array([1j * xi]), _seq_id(alpha), _seq_id(beta), trunc_dim)[2][0])
        if interval is None:
            raise TruncationError("no decaying eigenvectors on the imaginary axis")
        interval = (math.ceil(interval[0] * 20) / 20, math.floor(interval[1] * 20) / 20)
    field = EigenField(tuple(interval), lambda xi: 1j * xi, basis, norm_id, residual,
                       _split_bumps(*interval))
    _check_field_interval(field, trunc_dim, 1.0)
    system = eigenfield_to_fhc(field, name="death_model",
                               params=dict(alpha=alpha, beta=beta, trunc_dim=trunc_dim,
                                           interval=list(interval)),
                               condition="sup_{n>=1} alpha_n < liminf_{n->inf} beta_n", **fhc_kw)
    return system, field


# -- translation group on Y = {g : g(x)/x -> 0} ----------------------------------------

def rudnicki_translation_make(grid_step: float = 0.01, domain_half_width: float = 20.0,
                              interval=(-2.0, 2.0), **fhc_kw):
    """Translation group ``T_t g = g(. + t)`` on ``Y`` with ``sup |g(x)| / (1 + |x|)``.

    The eigenfield is ``f(xi)(x) = exp(i xi x)``; norms are sampled on
    ``[-W, W]`` with step ``grid_step``.
    """
    if domain_half_width < 20:
        raise ParameterError("domain_half_width must be >= 20")
    h, W = float(grid_step), float(domain_half_width)
    basis = format_id("fourier", W=W, h=h)

    def residual(v, lam):
        f = v.values
        r = np.zeros_like(f)
        # fourth-order central difference
        r[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h) - lam * f[2:-2]
        return v.with_values(r)

    field = EigenField(tuple(interval), lambda xi: 1j * xi, basis, "ylin", residual,
                       _split_bumps(*interval))
    system = eigenfield_to_fhc(field, name="rudnicki_translation",
                               params=dict(grid_step=h, domain_half_width=W,
                                           interval=list(interval)),
                               condition="f(xi)(x) = exp(i xi x), dense span in Y", **fhc_kw)
    return system, field


def translate_grid(t: float, g: StateVector) -> StateVector:
    """``g(. + t)`` for a grid function on a symmetric window (zero outside)."""
    return g.with_values(np.interp(g.grid + t, g.grid, g.values, left=0.0, right=0.0))


# -- Black-Scholes ---------------------------------------------------------------

@dataclass(frozen=True)
class BlackScholesSpectrum:
    sigma: float
    r: float
    s: float

    @property
    def nu(self) -> float:
        return self.sigma / math.sqrt(2.0)

    @property
    def gamma(self) -> float:
        return self.r / self.nu - self.nu

    def g(self, z):
        return z * z + self.gamma * z - self.r

    def roots(self, w: complex) -> tuple[complex, complex]:
        """Both solutions ``z`` of ``g(z) = w``."""
        disc = np.sqrt(complex(self.gamma ** 2 + 4.0 * (self.r + w)))
        return (-self.gamma + disc) / 2.0, (-self.gamma - disc) / 2.0

    def strip_root(self, xi: float) -> complex | None:
        """Root of ``g(z) = i xi`` with ``0 < Re z < s nu`` (larger Re on ties)."""
        cands = [z for z in self.roots(1j * xi) if 0.0 < z.real < self.s * self.nu]
        if not cands:
            return None
        return max(cands, key=lambda z: z.real)

    def attainable_window(self, scan=np.linspace(-50, 50, 20001)):
        ok = [x for x in scan if self.strip_root(float(x)) is not None]
        return (float(min(ok)), float(max(ok))) if ok else None


def black_scholes_make(sigma: float = math.sqrt(2.0), r: float = 0.5, s: float = 2.0,
                       tau: float = 0.0, interval=(0.5, 2.5), log_range=(-40.0, 40.0),
                       n_log: int = 4001, **fhc_kw):
    """Black-Scholes semigroup on ``Y^{s,tau}`` via monomials ``h_mu(x) = x^mu``.

    The generator ``(nu x d/dx)^2 + gamma nu x d/dx - r`` acts on ``h_mu`` by
    ``g(nu mu)``; the eigenfield is ``xi -> h_mu`` with ``g(nu mu) = i xi``.
    """
    if sigma <= 0 or r <= 0:
        raise ParameterError("Black-Scholes needs sigma > 0 and r > 0")
    spec = BlackScholesSpectrum(sigma, r, s)
    nu = spec.nu
    if not (s > 1 and tau >= 0 and s * nu > 1):
        raise ParameterError(f"Black-Scholes chaos needs s>1, tau>=0, s*nu>1 (s={s}, tau={tau}, nu={nu:.4g})")
    for xi in np.linspace(*interval, 41):
        if spec.strip_root(float(xi)) is None:
            raise SpectralRangeError(
                f"no root of g(nu mu) = i*{xi:.4g} with 0 < Re(nu mu) < s nu",
                window=spec.attainable_window())
    lo, hi = map(float, log_range)
    basis = format_id("monomial", lo=lo, hi=hi, n=int(n_log))
    norm_id = format_id("yst", s=float(s), tau=float(tau))
    du = (hi - lo) / (n_log - 1)

    def residual(v, lam):
        f = v.values
        r_ = np.zeros_like(f)
        d1 = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * du)
        d2 = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * du * du)
        r_[2:-2] = nu * nu * d2 + spec.gamma * nu * d1 - spec.r * f[2:-2] - lam * f[2:-2]
        return v.with_values(r_)

    field = EigenField(tuple(interval), lambda xi: spec.strip_root(xi) / nu, basis, norm_id,
                       residual, _split_bumps(*interval))
    system = eigenfield_to_fhc(field, name="black_scholes",
                               params=dict(sigma=sigma, r=r, s=s, tau=tau, interval=list(interval)),
                               condition="s>1, tau>=0, s*nu>1", exact=True,
                               **{k: v for k, v in fhc_kw.items() if k != "exact"})
    return system, field


# -- eigenfield -> FHC system ------------------------------------------------------

BUMP_STEEPNESS = 4.0


def smooth_bump(u, steep: float = BUMP_STEEPNESS):
    """``exp(steep - steep / (1 - u^2))`` on ``|u| < 1``, peak 1 at 0."""
    u = np.asarray(u, float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1
    out[m] = np.exp(steep - steep / (1.0 - u[m] ** 2))
    return out


def bump_params(n: int, intervals) -> tuple[float, float, float, float]:
    """Enumeration ``n >= 2 -> (center, half width, modulation, amplitude)``."""
    i, j = cantor_unpair(n - 2)
    qi, ai = cantor_unpair(j)
    R = len(intervals)
    level, rem = 0, i
    while rem >= R * 2 ** level:
        rem -= R * 2 ** level
        level += 1
    r, p = divmod(rem, 2 ** level)
    lo, hi = intervals[r]
    cell = (hi - lo) / 2 ** level
    return lo + (p + 0.5) * cell, 0.45 * cell, float(modulation(qi)), float(signed(ai))


def eigenfield_to_fhc(field: EigenField, *, name: str = "eigenfield", bumps=None,
                      quad_tol: float = 1e-9, t_max: float = 160.0, tol_inst: float = 1e-6,
                      params: dict | None = None, condition: str = "", exact: bool = False
                      ) -> FHCSystem:
    """Build ``x_k = int phi_k(xi) f(xi) d xi`` and the modulation maps.

    ``T_s x_k`` is the integral of ``exp(i s xi) phi_k f`` and ``S_s x_k`` that
    of ``exp(-i s xi) phi_k f``; with the quadrature nodes fixed per basic
    both are exact clock moves on the eigen combination.  Panels are fine
    enough to resolve modulations up to ``t_max``.
    """
    intervals = tuple(tuple(map(float, b)) for b in (bumps or field.bump_intervals))
    lo_i, hi_i = field.interval
    for a, b in intervals:
        if not (lo_i <= a < b <= hi_i):
            raise ParameterError(f"bump support [{a}, {b}] not inside {field.interval}")
    zero = banach.StateVector(EIGEN, field.norm_id, np.zeros(0), params=np.zeros(0),
                              rates=np.zeros(0), basis=field.basis)

    @functools.lru_cache(maxsize=None)
    def basic_cached(n: int) -> StateVector:
        c, hw, q, amp = bump_params(n, intervals)
        panels = max(2, math.ceil(2 * hw * (t_max + abs(q)) / 2.0))

        def integrand(xi):
            w = amp * smooth_bump((xi - c) / hw) * np.exp(1j * q * xi)
            return field.eval(xi).with_values([complex(w)])

        return banach.quad_integral(integrand, (c - hw, c + hw), quad_tol, min_panels=panels)

    def basic(n: int) -> StateVector:
        if n < 1:
            raise ParameterError("basics are indexed from 1")
        return zero if n == 1 else basic_cached(n)

    def _check(x):
        if x.kind != EIGEN or x.basis != field.basis:
            raise TypeError(f"{name} acts on eigen combinations over {field.basis}")

    def apply_T(t: float, x: StateVector) -> StateVector:
        if t < 0:
            raise ParameterError("T_t needs t >= 0")
        _check(x)
        return x if t == 0 else x.with_values(x.values, clock=x.clock + t)

    def apply_S(t: float, x: StateVector) -> StateVector:
        if t < 0:
            raise ParameterError("S_t needs t >= 0")
        _check(x)
        return x if t == 0 else x.with_values(x.values, clock=x.clock - t)

    def orbit_integral(n: int, a: float, b: float) -> StateVector:
        # T_t and S_{-t} both multiply term k by exp(t * rate_k)
        x = basic(n)
        if n == 1 or a == b:
            return zero
        k = x.rates
        small = np.abs(k) * (b - a) < 1e-8
        safe = np.where(small, 1.0, k)
        factor = np.where(small, (b - a) * np.exp(a * k),
                          np.exp(a * k) * np.expm1((b - a) * k) / safe)
        return x.with_values(x.coefficients() * factor, clock=0.0)

    return FHCSystem(
        id=name, basic=basic, apply_T=apply_T, apply_S=apply_S, norm_id=field.norm_id,
        tol_inst=0.0 if exact else tol_inst, quad_tol=quad_tol, orbit_integral=orbit_integral,
        horizon=t_max, params=dict(params or {}, quad_tol=quad_tol, t_max=t_max),
        condition=condition, field=field, exact=exact)


# -- audits ------------------------------------------------------------------------

def criterion_audit(system: FHCSystem, t_grid=(0.3, 0.7, 1.1, 2.5), r_grid=None,
                    n_basics: int = 8) -> ExperimentReport:
    """Max residuals of ``T_t S_t x = x``, ``T_t S_r x = S_{r-t} x`` and the semigroup law."""
    start = time.perf_counter()
    r_grid = t_grid if r_grid is None else r_grid
    res_inv = res_shift = res_group = 0.0
    for n in range(1, n_basics + 1):
        x = system.basic(n)
        scale = 1.0 + norm(x)
        for t in t_grid:
            d = banach.distance(system.apply_T(t, system.apply_S(t, x)), x)
            res_inv = max(res_inv, d)
            for r in r_grid:
                if r > t:
                    d = banach.distance(system.apply_T(t, system.apply_S(r, x)),
                                        system.apply_S(r - t, x))
                    res_shift = max(res_shift, d)
            for s in t_grid:
                d = banach.distance(system.apply_T(t + s, x),
                                    system.apply_T(t, system.apply_T(s, x))) / scale
                res_group = max(res_group, d)
    tol = system.tol_inst
    return ExperimentReport(
        experiment="criterion-audit", instance=system.id,
        params_hash=params_hash(system.params),
        sample_sizes={"n_basics": n_basics, "t_grid": list(t_grid), "r_grid": list(r_grid)},
        estimates={"inverse_residual": res_inv, "shift_residual": res_shift,
                   "semigroup_residual": res_group},
        verdicts={"inverse": res_inv <= tol, "shift": res_shift <= tol,
                  "semigroup": res_group <= tol},
        thresholds={"tol_inst": tol},
        notes=[f"X0 enumeration {ENUMERATION_VERSION}"],
        wall_clock=time.perf_counter() - start)


def strong_continuity_probe(system: FHCSystem, n_basics: int = 5, k_max: int = 12):
    """``||T_h x - x||`` along ``h = 2^-k`` for the first basics."""
    out = []
    for n in range(1, n_basics + 1):
        x = system.basic(n)
        out.append([banach.distance(system.apply_T(2.0 ** -k, x), x)
                    for k in range(1, k_max + 1)])
    return np.array(out)


# -- registry ------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceInfo:
    name: str
    build: Callable[..., FHCSystem]
    schema: dict
    condition: str
    provenance: str


def _first(f):
    return lambda **kw: f(**kw)[0]


_NUM = {"type": "number"}
_SEQ = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}
_INTERVAL = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

INSTANCES: dict[str, InstanceInfo] = {
    "translation": InstanceInfo(
        "translation", translation_make,
        {"weight": _NUM, "grid_step": _NUM, "domain_cap": _NUM},
        "w > 0", "translation semigroups on weighted spaces"),
    "rudnicki_translation": InstanceInfo(
        "rudnicki_translation", _first(rudnicki_translation_make),
        {"grid_step": _NUM, "domain_half_width": _NUM, "interval": _INTERVAL,
         "t_max": _NUM, "quad_tol": _NUM},
        "f(xi)(x)=e^{i xi x}; ||g||_Y = sup |g(x)|/(1+|x|)",
        "translation flow reduction of a population-dynamics equation"),
    "birth_death": InstanceInfo(
        "birth_death", _first(birth_death_make),
        {"a": _NUM, "b": _NUM, "d": _NUM, "trunc_dim": {"type": "integer"}, "p_exp": _NUM,
         "interval": _INTERVAL, "t_max": _NUM, "quad_tol": _NUM},
        "0<|b|<|d| and |a|<|b+d|", "constant-coefficient birth-and-death model on l^p"),
    "death_model": InstanceInfo(
        "death_model", _first(death_model_make),
        {"alpha": _SEQ, "beta": _SEQ, "trunc_dim": {"type": "integer"}, "interval": _INTERVAL,
         "t_max": _NUM, "quad_tol": _NUM},
        "sup_{n>=1} alpha_n < liminf_{n->inf} beta_n", "death model with variable coefficients on l^1"),
    "black_scholes": InstanceInfo(
        "black_scholes", _first(black_scholes_make),
        {"sigma": _NUM, "r": _NUM, "s": _NUM, "tau": _NUM, "interval": _INTERVAL,
         "t_max": _NUM, "quad_tol": _NUM},
        "s>1, tau>=0, s*nu>1 with nu=sigma/sqrt(2)", "Black-Scholes semigroup on Y^{s,tau}"),
}


def make_instance(name: str, params: dict | None = None) -> FHCSystem:
    if name not in INSTANCES:
        raise ConfigurationError(f"unknown instance {name!r}; known: {sorted(INSTANCES)}")
    return INSTANCES[name].build(**(params or {}))
