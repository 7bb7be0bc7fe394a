"""Finite representations of Banach-space elements.

Three representations are supported:

* ``grid``  -- values of a function on strictly increasing abscissas,
  linearly interpolated in between;
* ``coeff`` -- a finite coefficient sequence;
* ``eigen`` -- a finite combination ``sum_k c_k exp(clock * rate_k) e(param_k)``
  of eigenvectors ``e(param)`` of some generator.  ``e`` is a *basis* looked
  up by name in a registry (see :func:`register_basis`), ``rate_k`` is the
  generator eigenvalue attached to ``param_k``, and ``clock`` is a lazily
  applied evolution time.  Keeping the clock separate makes the semigroup law
  hold at representation level for diagonal semigroups.

Norms are identified by strings of the form ``name`` or ``name(k=v,...)``:

``weighted-l1(w=...)``  integral of ``|f(x)| exp(-w x)`` (grid)
``ylin``                sup of ``|g(x)| / (1 + |x|)`` (grid)
``yst(s=...,tau=...)``  sup of ``|u(x)| / ((1 + x^s)(1 + x^-tau))`` (grid, x > 0)
``lp(p=...)``           plain l^p norm (coeff)

Eigen combinations are normed by materializing them through their basis.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericError, QuadratureError

GRID = "grid"
COEFF = "coeff"
EIGEN = "eigen"
KINDS = (GRID, COEFF, EIGEN)

_NORMS_FOR_KIND = {
    GRID: {"weighted-l1", "ylin", "yst"},
    COEFF: {"lp"},
}

SCHEMA_VERSION = "state_vector.v1"


def parse_id(spec: str) -> tuple[str, dict]:
    """Split ``"name(a=1,b=x)"`` into ``("name", {"a": 1.0, "b": "x"})``."""
    spec = spec.strip()
    if "(" not in spec:
        return spec, {}
    if not spec.endswith(")"):
        raise ConfigurationError(f"malformed identifier {spec!r}")
    name, rest = spec[:-1].split("(", 1)
    kw = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        try:
            kw[key.strip()] = float(val)
        except ValueError:
            kw[key.strip()] = val.strip()
    return name.strip(), kw


def format_id(name: str, **kw) -> str:
    if not kw:
        return name
    return name + "(" + ",".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                                 for k, v in kw.items()) + ")"


def _frozen(a, dtype=complex):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    kind: str
    norm_id: str
    values: np.ndarray
    grid: np.ndarray | None = None
    params: np.ndarray | None = None
    rates: np.ndarray | None = None
    basis: str | None = None
    clock: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown representation kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(self.values))
        if not np.all(np.isfinite(self.values)):
            raise NumericError("state vector has non-finite entries")
        if self.kind == GRID:
            grid = _frozen(self.grid, float)
            if grid.shape != self.values.shape:
                raise ConfigurationError("grid and values differ in length")
            if grid.size > 1 and not np.all(np.diff(grid) > 0):
                raise ConfigurationError("grid abscissas must be strictly increasing")
            object.__setattr__(self, "grid", grid)
        elif self.kind == EIGEN:
            params = _frozen(self.params)
            rates = _frozen(self.rates)
            if not (params.shape == rates.shape == self.values.shape):
                raise ConfigurationError("eigen params/rates/coefficients differ in length")
            if np.unique(params).size != params.size:
                raise ConfigurationError("eigen-parameters must be distinct")
            if self.basis is None:
                raise ConfigurationError("eigen combination needs a basis")
            object.__setattr__(self, "params", params)
            object.__setattr__(self, "rates", rates)
            object.__setattr__(self, "clock", float(self.clock))
        name, _ = parse_id(self.norm_id)
        if self.kind != EIGEN and name not in _NORMS_FOR_KIND[self.kind]:
            raise ConfigurationError(
                f"norm {self.norm_id!r} is not compatible with a {self.kind} vector")

    def __len__(self):
        return self.values.size

    def coefficients(self) -> np.ndarray:
        """Eigen coefficients with the clock applied (other kinds: raw values)."""
        if self.kind == EIGEN and self.clock != 0.0:
            return self.values * np.exp(self.clock * self.rates)
        return self.values

    def with_values(self, values, clock=None) -> "StateVector":
        return StateVector(self.kind, self.norm_id, values, self.grid, self.params,
                           self.rates, self.basis, self.clock if clock is None else clock)

    def to_json(self) -> dict:
        data: dict = {"values": _cplx_to_json(self.values)}
        if self.kind == GRID:
            data["grid"] = self.grid.tolist()
        if self.kind == EIGEN:
            data.update(params=_cplx_to_json(self.params), rates=_cplx_to_json(self.rates),
                        basis=self.basis, clock=self.clock)
        return {"schema": SCHEMA_VERSION, "kind": self.kind, "norm_id": self.norm_id,
                "data": data}

    @classmethod
    def from_json(cls, obj: dict) -> "StateVector":
        if obj.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema {obj.get('schema')!r}")
        d = obj["data"]
        kw = dict(kind=obj["kind"], norm_id=obj["norm_id"], values=_cplx_from_json(d["values"]))
        if obj["kind"] == GRID:
            kw["grid"] = d["grid"]
        if obj["kind"] == EIGEN:
            kw.update(params=_cplx_from_json(d["params"]), rates=_cplx_from_json(d["rates"]),
                      basis=d["basis"], clock=d.get("clock", 0.0))
        return cls(**kw)


def _cplx_to_json(a):
    return [[float(z.real), float(z.imag)] for z in np.asarray(a, complex)]


def _cplx_from_json(a):
    return np.array([complex(re, im) for re, im in a], dtype=complex)


def grid_function(grid, values, norm_id: str) -> StateVector:
    return StateVector(GRID, norm_id, values, grid=grid)


def coeff_seq(coeffs, norm_id: str) -> StateVector:
    return StateVector(COEFF, norm_id, coeffs)


def eigen_combo(params, coeffs, rates, basis: str, norm_id: str, clock=0.0) -> StateVector:
    return StateVector(EIGEN, norm_id, coeffs, params=np.atleast_1d(params),
                       rates=np.atleast_1d(rates), basis=basis, clock=clock)


def zeros_like(x: StateVector) -> StateVector:
    if x.kind == EIGEN:
        return StateVector(EIGEN, x.norm_id, np.zeros(0), params=np.zeros(0),
                           rates=np.zeros(0), basis=x.basis)
    return x.with_values(np.zeros_like(x.values))


# -- eigen bases -------------------------------------------------------------

BasisFn = Callable[..., tuple]
_BASES: dict[str, BasisFn] = {}


def register_basis(name: str):
    """Register ``fn(params, **kw) -> (kind, grid_or_None, matrix)``.

    ``matrix[k]`` is the materialized eigenvector for ``params[k]``.
    """
    def deco(fn):
        _BASES[name] = fn
        return fn
    return deco


def _basis_matrix_uncached(basis: str, key: bytes, n: int):
    name, kw = parse_id(basis)
    if name not in _BASES:
        raise ConfigurationError(f"unknown eigen basis {name!r}")
    params = np.frombuffer(key, dtype=complex, count=n)
    kind, grid, mat = _BASES[name](params, **kw)
    mat = np.asarray(mat, complex)
    mat.setflags(write=False)
    return kind, grid, mat


# matrices can be ~100 MB each; keep only a few
_basis_matrix_cached = functools.lru_cache(maxsize=4)(_basis_matrix_uncached)


def basis_matrix(basis: str, params: np.ndarray, cache: bool = True):
    params = np.ascontiguousarray(params, dtype=complex)
    fn = _basis_matrix_cached if cache else _basis_matrix_uncached
    return fn(basis, params.tobytes(), params.size)


MATERIALIZE_CHUNK = 4096


def materialize(x: StateVector) -> StateVector:
    """Turn an eigen combination into the grid/coeff vector it represents."""
    if x.kind != EIGEN:
        return x
    name, kw = parse_id(x.basis)
    if x.values.size == 0:
        kind, grid, mat = _BASES[name](np.zeros(1, complex), **kw)
        vals = np.zeros(np.asarray(mat).shape[1], complex)
    else:
        coeffs = x.coefficients()
        if x.params.size <= MATERIALIZE_CHUNK:
            kind, grid, mat = basis_matrix(x.basis, x.params)
            vals = coeffs @ mat
        else:
            vals = 0.0
            for i in range(0, x.params.size, MATERIALIZE_CHUNK):
                sl = slice(i, i + MATERIALIZE_CHUNK)
                kind, grid, mat = basis_matrix(x.basis, x.params[sl], cache=False)
                vals = vals + coeffs[sl] @ mat
    return StateVector(kind, x.norm_id, vals, grid=grid)


# -- norms -------------------------------------------------------------------

def _with_midpoints(grid, values):
    xm = 0.5 * (grid[1:] + grid[:-1])
    vm = 0.5 * (values[..., 1:] + values[..., :-1])
    return np.concatenate([grid, xm]), np.concatenate([values, vm], axis=-1)


def _norm_rows(norm_id: str, grid, V: np.ndarray) -> np.ndarray:
    """Norms of the rows of ``V`` (non-eigen representation)."""
    name, kw = parse_id(norm_id)
    if name == "lp":
        p = kw.get("p", 2.0)
        a = np.abs(V)
        m = a.max(axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        return m[..., 0] * np.sum((a / safe) ** p, axis=-1) ** (1.0 / p)
    if name == "weighted-l1":
        w = kw.get("w", 1.0)
        return np.trapezoid(np.abs(V) * np.exp(-w * grid), grid, axis=-1)
    xs, vs = _with_midpoints(grid, V)
    if name == "ylin":
        return np.max(np.abs(vs) / (1.0 + np.abs(xs)), axis=-1)
    if name == "yst":
        if xs.min() <= 0:
            raise ConfigurationError("Y^{s,tau} norm needs a grid on (0, inf)")
        s, tau = kw.get("s", 2.0), kw.get("tau", 0.0)
        return np.max(np.abs(vs) / ((1.0 + xs ** s) * (1.0 + xs ** (-tau))), axis=-1)
    raise ConfigurationError(f"unknown norm {norm_id!r}")


def norm(x: StateVector) -> float:
    """Norm of ``x`` under its ``norm_id``."""
    if x.kind == EIGEN:
        if x.values.size == 0 or not np.any(x.values):
            return 0.0
        return norm(materialize(x))
    if not np.any(x.values):
        return 0.0
    return float(_norm_rows(x.norm_id, x.grid, x.values[None, :])[0])


def clock_norms(x: StateVector, shifts, chunk: int = 256) -> np.ndarray:
    """``norm(x)`` with the clock moved by each of ``shifts`` (eigen combos).

    One matrix product per chunk instead of one basis read per norm.
    """
    if x.kind != EIGEN:
        raise TypeError("clock_norms needs an eigen combination")
    shifts = np.asarray(shifts, float)
    if x.values.size == 0 or not np.any(x.values):
        return np.zeros(shifts.size)
    kind, grid, mat = basis_matrix(x.basis, x.params, cache=False)
    out = np.empty(shifts.size)
    for i in range(0, shifts.size, chunk):
        c = x.clock + shifts[i:i + chunk]
        C = x.values[None, :] * np.exp(np.outer(c, x.rates))
        out[i:i + chunk] = _norm_rows(x.norm_id, grid, C @ mat)
    return out


# -- linear structure ----------------------------------------------------------

def linear_combine(coeffs: Sequence[complex], xs: Sequence[StateVector]) -> StateVector:
    """Return ``sum_i coeffs[i] * xs[i]``; eigen terms with equal parameters merge."""
    if len(coeffs) != len(xs) or not xs:
        raise ConfigurationError("linear_combine needs equally many (>0) coefficients and vectors")
    first = xs[0]
    for x in xs[1:]:
        if x.kind != first.kind or x.norm_id != first.norm_id:
            raise TypeError(f"cannot combine {x.kind}/{x.norm_id} with {first.kind}/{first.norm_id}")
    c = np.asarray(coeffs, dtype=complex)
    if first.kind == COEFF:
        n = max(x.values.size for x in xs)
        out = np.zeros(n, complex)
        for ci, x in zip(c, xs):
            out[:x.values.size] += ci * x.values
        return coeff_seq(out, first.norm_id)
    if first.kind == GRID:
        for x in xs[1:]:
            if x.grid is not first.grid and not np.array_equal(x.grid, first.grid):
                raise TypeError("grid functions live on different grids")
        out = np.zeros_like(first.values)
        for ci, x in zip(c, xs):
            out += ci * x.values
        return first.with_values(out)
    for x in xs[1:]:
        if x.basis != first.basis:
            raise TypeError("eigen combinations use different bases")
    clocks = {x.clock for x in xs}
    if len(clocks) == 1:
        clock = first.clock
        parts = [ci * x.values for ci, x in zip(c, xs)]
    else:
        clock = 0.0
        parts = [ci * x.coefficients() for ci, x in zip(c, xs)]
    params = np.concatenate([x.params for x in xs])
    rates = np.concatenate([x.rates for x in xs])
    vals = np.concatenate(parts)
    uniq, first_idx, inv = np.unique(params, return_index=True, return_inverse=True)
    merged = np.zeros(uniq.size, complex)
    np.add.at(merged, inv.ravel(), vals)
    return eigen_combo(uniq, merged, rates[first_idx], first.basis, first.norm_id, clock)


def distance(x: StateVector, y: StateVector) -> float:
    return norm(linear_combine([1.0, -1.0], [x, y]))


# -- quadrature ----------------------------------------------------------------

@functools.lru_cache(maxsize=16)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _base_panels(a, b, breakpoints, min_panels):
    edges = [a] + sorted({float(p) for p in breakpoints if a < p < b}) + [b]
    edges = np.array(edges)
    if min_panels > len(edges) - 1:
        lengths = np.diff(edges)
        counts = np.maximum(1, np.ceil(min_panels * lengths / (b - a)).astype(int))
        edges = np.concatenate(
            [np.linspace(lo, hi, k + 1)[:-1] for lo, hi, k in zip(edges[:-1], edges[1:], counts)]
            + [[b]])
    return edges


def gl_nodes(edges: np.ndarray, nodes: int = 8):
    """Composite Gauss-Legendre nodes and weights on the given panel edges."""
    x, w = gauss_legendre(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    return (lo + half * (x + 1.0)).ravel(), (half * w).ravel()


def quad_integral(g: Callable[[float], StateVector], interval, tol: float = 1e-8, *,
                  breakpoints=(), nodes: int = 8, min_panels: int = 1,
                  max_level: int = 12) -> StateVector:
    """Integrate a vector-valued map over ``[a, b]``.

    Composite Gauss-Legendre with ``nodes`` points per panel.  All panels are
    halved until two successive estimates agree to ``tol * (1 + ||Q||)``.
    ``breakpoints`` are forced panel edges (kinks of the integrand).
    """
    a, b = map(float, interval)
    if not b >= a:
        raise ConfigurationError(f"empty or reversed interval [{a}, {b}]")
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    if a == b:
        return zeros_like(g(a))
    edges = _base_panels(a, b, breakpoints, min_panels)

    def rule(edges):
        ts, ws = gl_nodes(edges, nodes)
        vals = [g(t) for t in ts]
        for v in vals:
            if not np.all(np.isfinite(v.values)):
                raise NumericError("non-finite integrand value")
        return linear_combine(ws, vals)

    prev = rule(edges)
    for _ in range(max_level):
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[1:] + edges[:-1])]))
        cur = rule(edges)
        if distance(cur, prev) <= tol * (1.0 + norm(cur)):
            return cur
        prev = cur
    raise QuadratureError(f"no convergence on [{a}, {b}] within {len(edges) - 1} panels",
                          previous=prev, current=cur)


def scalar_quad(f: Callable[[np.ndarray], np.ndarray], edges, nodes: int = 8) -> float:
    """Composite Gauss-Legendre for a vectorized scalar integrand."""
    ts, ws = gl_nodes(np.asarray(edges, float), nodes)
    return float(np.sum(ws * f(ts)))
