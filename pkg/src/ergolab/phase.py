"""Phase-space points, observables, partitions and empirical measures.

Circle points carry an explicit bit budget: a :class:`CirclePoint` is the
integer ``numer`` read as ``numer / 2**precision_bits`` on R/Z, so circle
arithmetic is exact modulo 1.  Everything else (torus, plane, histograms)
lives in hardware doubles.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import mpmath
import numpy as np
from scipy import sparse

from .errors import Unsupported, WeightSumViolation, ZeroMassWindow, InvalidParameter

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# points
# --------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class CirclePoint:
    """Point of S^1 = R/Z stored as a fixed-point binary fraction."""

    numer: int
    precision_bits: int = 53

    def __post_init__(self):
        if self.precision_bits < 53:
            raise InvalidParameter("precision_bits must be >= 53")
        if not 0 <= self.numer < (1 << self.precision_bits):
            object.__setattr__(self, "numer", self.numer % (1 << self.precision_bits))

    @classmethod
    def from_real(cls, x, precision_bits: int = 53) -> "CirclePoint":
        """Round ``x`` (float, int, Fraction, str or mpmath number) down onto the grid."""
        scale = 1 << precision_bits
        if isinstance(x, (int, Fraction)):
            q = Fraction(x) * scale
            numer = q.numerator // q.denominator
        elif isinstance(x, float):
            q = Fraction(x) * scale
            numer = q.numerator // q.denominator
        else:
            with mpmath.workprec(precision_bits + 64):
                numer = int(mpmath.floor(mpmath.mpf(x) * scale))
        return cls(numer % scale, precision_bits)

    @classmethod
    def random(cls, rng: np.random.Generator, precision_bits: int = 53) -> "CirclePoint":
        nbytes = (precision_bits + 7) // 8
        raw = int.from_bytes(rng.bytes(nbytes), "big")
        return cls(raw >> (8 * nbytes - precision_bits), precision_bits)

    @property
    def value(self) -> float:
        return self.numer / (1 << self.precision_bits)

    @property
    def exact(self) -> Fraction:
        return Fraction(self.numer, 1 << self.precision_bits)

    def __float__(self) -> float:
        return self.value

    def with_precision(self, bits: int) -> "CirclePoint":
        if bits >= self.precision_bits:
            return CirclePoint(self.numer << (bits - self.precision_bits), bits)
        return CirclePoint(self.numer >> (self.precision_bits - bits), bits)

    def __add__(self, other: "CirclePoint") -> "CirclePoint":
        bits = max(self.precision_bits, other.precision_bits)
        a, b = self.with_precision(bits), other.with_precision(bits)
        return CirclePoint((a.numer + b.numer) % (1 << bits), bits)

    def __neg__(self) -> "CirclePoint":
        return CirclePoint((-self.numer) % (1 << self.precision_bits), self.precision_bits)

    def __sub__(self, other: "CirclePoint") -> "CirclePoint":
        return self + (-other)

    def times(self, k: int) -> "CirclePoint":
        """Multiplication by an integer, exact modulo 1."""
        return CirclePoint((self.numer * k) % (1 << self.precision_bits), self.precision_bits)

    def distance(self, other: "CirclePoint") -> Fraction:
        """Exact arc distance on R/Z."""
        d = (self - other).exact
        return min(d, 1 - d)

    def decimal(self) -> str:
        digits = int(self.precision_bits * math.log10(2)) + 2
        with mpmath.workprec(self.precision_bits + 8):
            return mpmath.nstr(mpmath.mpf(self.numer) / (1 << self.precision_bits), digits,
                               min_fixed=-math.inf, max_fixed=math.inf)


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple[float, float]

    def __post_init__(self):
        c = tuple(float(v) % 1.0 for v in self.coords)
        if len(c) != 2:
            raise InvalidParameter("TorusPoint needs two coordinates")
        object.__setattr__(self, "coords", c)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameter("PlanePoint coordinates must be finite")

    @property
    def coords(self) -> tuple[float, float]:
        return (self.x, self.y)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IntervalPartition:
    """Strictly increasing cut points c_0 < ... < c_m of an interval (S^1 by default)."""

    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.array(self.cuts, dtype=float)
        if cuts.ndim != 1 or cuts.size < 2 or not np.all(np.diff(cuts) > 0):
            raise InvalidParameter("partition cuts must be strictly increasing")
        cuts.setflags(write=False)
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def uniform(cls, m: int, lo: float = 0.0, hi: float = 1.0) -> "IntervalPartition":
        return cls(np.linspace(lo, hi, m + 1))

    @classmethod
    def dyadic(cls, k: int, lo: float = 0.0, hi: float = 1.0) -> "IntervalPartition":
        return cls.uniform(1 << k, lo, hi)

    @property
    def n_cells(self) -> int:
        return self.cuts.size - 1

    shape = property(lambda self: (self.n_cells,))
    lo = property(lambda self: float(self.cuts[0]))
    hi = property(lambda self: float(self.cuts[-1]))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.cuts)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.cuts[:-1] + self.cuts[1:])

    @property
    def is_unit(self) -> bool:
        return self.lo == 0.0 and self.hi == 1.0

    def locate(self, x) -> np.ndarray:
        """Cell index of each point; -1 outside [lo, hi)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.cuts, x, side="right") - 1
        return np.where((x >= self.lo) & (x < self.hi), idx, -1)

    def overlap(self, a: float, b: float) -> np.ndarray:
        """Fraction of each cell covered by the interval [a, b)."""
        left = np.maximum(self.cuts[:-1], a)
        right = np.minimum(self.cuts[1:], b)
        return np.clip(right - left, 0.0, None) / self.widths

    def __eq__(self, other):
        return isinstance(other, IntervalPartition) and np.array_equal(self.cuts, other.cuts)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProductGrid:
    """Tensor product of two partitions; cells are indexed (i_x, i_y)."""

    x: IntervalPartition
    y: IntervalPartition

    @classmethod
    def dyadic(cls, k: int, lo: float = 0.0, hi: float = 1.0) -> "ProductGrid":
        return cls(IntervalPartition.dyadic(k, lo, hi), IntervalPartition.dyadic(k, lo, hi))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.n_cells, self.y.n_cells)

    @property
    def n_cells(self) -> int:
        return self.x.n_cells * self.y.n_cells

    @property
    def is_unit(self) -> bool:
        return self.x.is_unit and self.y.is_unit

    @property
    def areas(self) -> np.ndarray:
        return np.outer(self.x.widths, self.y.widths)

    @property
    def midpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x.midpoints, self.y.midpoints, indexing="ij")

    def locate(self, pts) -> np.ndarray:
        """Flat (row-major) cell index of each point in an (..., 2) array; -1 outside."""
        pts = np.asarray(pts, dtype=float)
        ix = self.x.locate(pts[..., 0])
        iy = self.y.locate(pts[..., 1])
        return np.where((ix >= 0) & (iy >= 0), ix * self.y.n_cells + iy, -1)

    def __eq__(self, other):
        return isinstance(other, ProductGrid) and self.x == other.x and self.y == other.y

    __hash__ = None


Grid = IntervalPartition | ProductGrid


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Observable:
    """Real function on phase space.

    ``trig_polynomial``: a_0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x) in
    coordinate ``axis``.  ``grid_function``: piecewise constant values on a
    1D grid.  ``polynomial``: sum_j c_j x^j in coordinate ``axis`` (used for
    coordinate observables on the plane).
    """

    kind: str
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    values: np.ndarray | None = None
    grid: IntervalPartition | None = None
    poly_coeffs: tuple[float, ...] = ()
    axis: int = 0

    KINDS = ("trig_polynomial", "grid_function", "polynomial")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParameter(f"unknown observable kind {self.kind!r}")
        if self.kind == "grid_function":
            if self.grid is None or self.values is None or len(self.values) != self.grid.n_cells:
                raise InvalidParameter("grid_function needs one value per grid cell")
            vals = np.array(self.values, dtype=float)
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)

    # constructors
    @classmethod
    def trig(cls, cos=(0.0,), sin=(), axis: int = 0) -> "Observable":
        """``cos[k]`` multiplies cos(2 pi k x); ``sin[k]`` multiplies sin(2 pi k x) (sin[0] ignored)."""
        return cls("trig_polynomial", tuple(map(float, cos)), tuple(map(float, sin)), axis=axis)

    @classmethod
    def constant(cls, c: float = 1.0) -> "Observable":
        return cls.trig(cos=(c,))

    @classmethod
    def cos_mode(cls, k: int, axis: int = 0) -> "Observable":
        return cls.trig(cos=[0.0] * k + [1.0], axis=axis)

    @classmethod
    def sin_mode(cls, k: int, axis: int = 0) -> "Observable":
        return cls.trig(cos=(0.0,), sin=[0.0] * k + [1.0], axis=axis)

    @classmethod
    def coordinate(cls, axis: int = 0) -> "Observable":
        return cls("polynomial", poly_coeffs=(0.0, 1.0), axis=axis)

    @classmethod
    def from_function(cls, fn: Callable, grid: IntervalPartition) -> "Observable":
        return cls("grid_function", values=np.asarray(fn(grid.midpoints), dtype=float), grid=grid)

    def evaluate(self, x, dim: int = 1) -> np.ndarray:
        """Evaluate at points.

        Point objects are unambiguous.  For arrays, ``dim=2`` means the last
        axis holds (x, y) coordinates and ``axis`` selects one of them.
        """
        if isinstance(x, CirclePoint):
            u = np.float64(x.value)
        elif isinstance(x, (TorusPoint, PlanePoint)):
            u = np.float64(x.coords[self.axis])
        else:
            x = np.asarray(x, dtype=float)
            u = x[..., self.axis] if dim == 2 else x
        if self.kind == "trig_polynomial":
            r = np.mod(u, 1.0)
            out = np.zeros_like(r, dtype=float) + (self.cos_coeffs[0] if self.cos_coeffs else 0.0)
            for k, a in enumerate(self.cos_coeffs[1:], start=1):
                if a:
                    out = out + a * np.cos(TWO_PI * k * r)
            for k, b in enumerate(self.sin_coeffs[1:], start=1):
                if b:
                    out = out + b * np.sin(TWO_PI * k * r)
            return out
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(u, self.poly_coeffs)
        idx = self.grid.locate(np.mod(u, 1.0) if self.grid.is_unit else u)
        if np.any(idx < 0):
            raise InvalidParameter("point outside the observable's grid")
        return self.values[idx]

    def __call__(self, x, dim: int = 1):
        return self.evaluate(x, dim)

    # serialization
    def to_json(self) -> str:
        d = {"kind": self.kind, "axis": self.axis}
        if self.kind == "trig_polynomial":
            d.update(cos=list(self.cos_coeffs), sin=list(self.sin_coeffs))
        elif self.kind == "polynomial":
            d.update(coeffs=list(self.poly_coeffs))
        else:
            d.update(values=self.values.tolist(), cuts=self.grid.cuts.tolist())
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str | Mapping) -> "Observable":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        kind = d["kind"]
        if kind == "trig_polynomial":
            return cls.trig(d.get("cos", (0.0,)), d.get("sin", ()), d.get("axis", 0))
        if kind == "polynomial":
            return cls("polynomial", poly_coeffs=tuple(d["coeffs"]), axis=d.get("axis", 0))
        if kind == "grid_function":
            return cls("grid_function", values=np.asarray(d["values"]),
                       grid=IntervalPartition(np.asarray(d["cuts"])), axis=d.get("axis", 0))
        raise InvalidParameter(f"unknown observable kind {kind!r}")


def observable_mean(obs: Observable) -> float:
    """Lebesgue mean of a trig polynomial, i.e. its constant coefficient."""
    if obs.kind != "trig_polynomial":
        raise Unsupported(f"closed-form mean only for trig polynomials, not {obs.kind}")
    return obs.cos_coeffs[0] if obs.cos_coeffs else 0.0


# --------------------------------------------------------------------------
# measures
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Histogram of mass over the cells of a grid."""

    grid: Grid
    mass: np.ndarray
    sample_count: int = 0

    def __post_init__(self):
        m = np.array(self.mass, dtype=float).reshape(self.grid.shape)
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise InvalidParameter("masses must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @classmethod
    def uniform(cls, grid: Grid) -> "EmpiricalMeasure":
        w = grid.widths if isinstance(grid, IntervalPartition) else grid.areas
        return cls(grid, w / w.sum())

    @classmethod
    def from_samples(cls, points, grid: Grid, weights=None) -> "EmpiricalMeasure":
        """Bin points; points outside the grid are ignored (callers that care count them first)."""
        pts = np.asarray(points, dtype=float)
        idx = grid.locate(pts).ravel()
        w = None if weights is None else np.broadcast_to(weights, idx.shape)[idx >= 0]
        counts = np.bincount(idx[idx >= 0], weights=w, minlength=grid.n_cells)
        total = counts.sum()
        if total > 0:
            counts = counts / total
        return cls(grid, counts.reshape(grid.shape), int((idx >= 0).sum()))

    @classmethod
    def point_mass(cls, point, grid: Grid) -> "EmpiricalMeasure":
        return cls.from_samples(np.asarray([point], dtype=float), grid)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def normalized(self) -> "EmpiricalMeasure":
        t = self.total
        if t <= 0:
            raise ZeroMassWindow("cannot normalize a zero measure")
        return EmpiricalMeasure(self.grid, self.mass / t, self.sample_count)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell midpoints and masses, flattened."""
        if isinstance(self.grid, IntervalPartition):
            return self.grid.midpoints, self.mass.ravel()
        mx, my = self.grid.midpoints
        return np.stack([mx.ravel(), my.ravel()], axis=1), self.mass.ravel()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if isinstance(self.grid, IntervalPartition):
            w.writerow(["cell_index", "left_endpoint", "mass"])
            for i, (left, m) in enumerate(zip(self.grid.cuts[:-1], self.mass)):
                w.writerow([i, repr(float(left)), repr(float(m))])
        else:
            w.writerow(["cell_index", "left_endpoint", "left_endpoint_y", "mass"])
            ny = self.grid.y.n_cells
            for i, m in enumerate(self.mass.ravel()):
                w.writerow([i, repr(float(self.grid.x.cuts[i // ny])),
                            repr(float(self.grid.y.cuts[i % ny])), repr(float(m))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: Grid | None = None) -> "EmpiricalMeasure":
        rows = [r for r in csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))]
        mass = np.array([float(r["mass"]) for r in rows])
        if grid is None:
            if "left_endpoint_y" in rows[0]:
                raise InvalidParameter("2D measures need their grid supplied")
            lefts = [float(r["left_endpoint"]) for r in rows]
            width = lefts[1] - lefts[0] if len(lefts) > 1 else 1.0 - lefts[0]
            grid = IntervalPartition(np.append(lefts, lefts[-1] + width))
        return cls(grid, mass)


class AtomicMeasure:
    """Finite weighted sum of point masses (used for exact weak-* tests)."""

    def __init__(self, points, weights=None):
        self.points = np.asarray(points, dtype=float)
        n = self.points.shape[0]
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        self.weights = w / w.sum()

    def atoms(self):
        return self.points, self.weights


def _is_interval(region) -> bool:
    return isinstance(region, tuple) and len(region) == 2 and np.isscalar(region[0])


def _as_weights(region, grid: IntervalPartition) -> np.ndarray:
    """Per-cell fraction belonging to a region: boolean/float mask or interval (a, b)."""
    if _is_interval(region):
        return grid.overlap(float(region[0]), float(region[1]))
    arr = np.asarray(region)
    if arr.shape != grid.shape:
        raise InvalidParameter("cell indicator must have one entry per cell")
    return arr.astype(float)


def density_ratio(A, B, mu: EmpiricalMeasure) -> float:
    """mu(A & B) / mu(B) with mass spread uniformly inside each cell.

    ``A`` and ``B`` are either intervals ``(a, b)`` or per-cell indicators.
    """
    if not isinstance(mu.grid, IntervalPartition):
        raise Unsupported("density_ratio is defined on circle partitions")
    wa, wb = _as_weights(A, mu.grid), _as_weights(B, mu.grid)
    if _is_interval(A) and _is_interval(B):
        lo, hi = max(A[0], B[0]), min(A[1], B[1])
        wab = mu.grid.overlap(lo, hi) if hi > lo else np.zeros(mu.grid.shape)
    else:
        # exact whenever one side is a 0/1 cell indicator
        wab = wa * wb
    mb = float(np.dot(mu.mass, wb))
    if mb <= 0:
        raise ZeroMassWindow("window B carries no mass")
    return float(np.dot(mu.mass, wab)) / mb


def _cell_map_matrix(cell_map, n: int) -> sparse.csr_matrix:
    if sparse.issparse(cell_map):
        return sparse.csr_matrix(cell_map)
    if isinstance(cell_map, np.ndarray):
        return sparse.csr_matrix(cell_map)
    rows, cols, vals = [], [], []
    items = cell_map.items() if isinstance(cell_map, Mapping) else enumerate(cell_map)
    for src, targets in items:
        for tgt, w in targets:
            rows.append(src)
            cols.append(tgt)
            vals.append(w)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def measure_push_grid(mu: EmpiricalMeasure, cell_map, tol: float = 1e-12) -> EmpiricalMeasure:
    """Transport cell masses along a row-stochastic cell map.

    ``cell_map`` is a (sparse) matrix with rows = source cells, or a mapping
    ``source -> [(target, weight), ...]`` over flat cell indices.
    """
    n = mu.grid.n_cells
    P = _cell_map_matrix(cell_map, n)
    if P.shape != (n, n):
        raise InvalidParameter("cell map shape does not match the grid")
    rows = np.asarray(P.sum(axis=1)).ravel()
    bad = np.abs(rows - 1.0) > tol
    if np.any(bad):
        raise WeightSumViolation(f"{int(bad.sum())} source cells have weights not summing to 1")
    out = P.T @ mu.mass.ravel()
    return EmpiricalMeasure(mu.grid, out.reshape(mu.grid.shape), mu.sample_count)
