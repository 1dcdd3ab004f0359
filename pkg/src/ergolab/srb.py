"""Candidate SRB measures from pushed-forward unstable segments, and basin statistics."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, Unsupported
from .maps import PrecisionPolicy, System, inverse_step2, jac2, step2
from .phase import EmpiricalMeasure, IntervalPartition, Observable, ProductGrid

HENON_BOX = (-1.8, 1.8)
ESCAPE_RADIUS = 1e3
TRIAL_CHUNK = 8


@dataclass(frozen=True, eq=False)
class UnstableSegment:
    base: np.ndarray
    direction: np.ndarray
    radius: float
    points: np.ndarray

    @property
    def samples(self) -> int:
        return self.points.shape[0]

    def descriptor(self) -> dict:
        return {"base": self.base.tolist(), "direction": self.direction.tolist(),
                "radius": self.radius, "samples": self.samples}


def expanding_direction(matrix) -> np.ndarray:
    """Unit eigenvector of the eigenvalue of largest modulus, first component >= 0."""
    m = np.asarray(matrix, dtype=float)
    w, v = np.linalg.eig(m)
    u = np.real(v[:, int(np.argmax(np.abs(w)))])
    u = u / np.linalg.norm(u)
    return -u if u[0] < 0 else u


def henon_direction(sys: System, p, n0: int = 50, warmup: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Base point f^warmup(p) and the image there of (1, 0) pushed along the last n0 steps."""
    if warmup < n0:
        raise InvalidParameter("warmup must be at least n0")
    x, y = (float(c) for c in np.asarray(p, dtype=float))
    for _ in range(warmup - n0):
        x, y = step2(sys, x, y)
    v1, v2 = 1.0, 0.0
    for _ in range(n0):
        j11, j12, j21, j22 = jac2(sys, x, y)
        v1, v2 = j11 * v1 + j12 * v2, j21 * v1 + j22 * v2
        r = math.hypot(v1, v2)
        v1, v2 = v1 / r, v2 / r
        x, y = step2(sys, x, y)
    if v1 < 0:
        v1, v2 = -v1, -v2
    return np.array([x, y]), np.array([v1, v2])


def unstable_segment(sys: System, p, radius: float, samples: int, n0: int = 50,
                     warmup: int = 1000) -> UnstableSegment:
    """Evenly spaced points on a straight piece of the unstable direction through the base point.

    Toral automorphisms use the exact expanding eigenvector at p; Henon maps
    first move p onto the attractor (``warmup`` steps) and estimate the
    direction by pushing a fixed vector for n0 steps.
    """
    if radius < 0 or samples < 1:
        raise InvalidParameter("radius must be >= 0 and samples >= 1")
    if sys.family == "toral_automorphism":
        base = np.asarray(p, dtype=float) % 1.0
        u = expanding_direction(sys.params["matrix"])
    elif sys.family == "henon":
        base, u = henon_direction(sys, p, n0, warmup)
    else:
        raise Unsupported(f"no unstable direction available for {sys.family}")
    if radius == 0:
        pts = base[None, :].copy()
    else:
        t = np.linspace(-radius, radius, samples)
        pts = base[None, :] + t[:, None] * u[None, :]
        if sys.family == "toral_automorphism":
            pts %= 1.0
    return UnstableSegment(base, u, float(radius), pts)


@dataclass(frozen=True, eq=False)
class SrbCandidate:
    measure: EmpiricalMeasure
    n: int
    segment: dict
    policy: PrecisionPolicy = field(default_factory=PrecisionPolicy)
    escaped: int = 0

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "segment": self.segment, "policy": self.policy.to_config(),
                           "escaped": self.escaped, "mass": self.measure.mass.ravel().tolist()},
                          sort_keys=True)


def default_grid(sys: System, k: int = 8) -> ProductGrid:
    if sys.family == "henon":
        return ProductGrid.dyadic(k, *HENON_BOX)
    return ProductGrid.dyadic(k)


def srb_iterate(sys: System, seg: UnstableSegment, n: int, grid: ProductGrid | None = None) -> SrbCandidate:
    """nu_n = (1/n) sum_{i=1}^{n} f^i_* nu_0 binned on ``grid``.

    Every sample deposits weight 1/(n samples) after each step.  Points that
    leave the grid are counted in ``escaped`` and the rest is renormalized.
    """
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    grid = grid or default_grid(sys)
    x, y = seg.points[:, 0].copy(), seg.points[:, 1].copy()
    counts = np.zeros(grid.n_cells)
    alive = np.ones(x.size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            x, y = step2(sys, x, y)
            idx = grid.locate(np.stack([x, y], axis=1))
            alive &= idx >= 0
            counts += np.bincount(idx[alive], minlength=grid.n_cells)
    mass = counts / (n * seg.samples)
    total = mass.sum()
    measure = EmpiricalMeasure(grid, (mass / total if total > 0 else mass).reshape(grid.shape),
                               n * seg.samples)
    return SrbCandidate(measure, n, seg.descriptor(), PrecisionPolicy(), int((~alive).sum()))


def _atoms(mu) -> tuple[np.ndarray, np.ndarray]:
    pts, w = mu.atoms()
    pts = np.asarray(pts, dtype=float)
    return (pts[:, None] if pts.ndim == 1 else pts), np.asarray(w, dtype=float)


def _box(mu) -> tuple[np.ndarray, np.ndarray] | None:
    g = getattr(mu, "grid", None)
    if g is None or g.is_unit:
        return None
    if isinstance(g, IntervalPartition):
        return np.array([g.lo]), np.array([g.hi])
    return np.array([g.x.lo, g.y.lo]), np.array([g.x.hi, g.y.hi])


def _frequencies(dim: int, K: int) -> np.ndarray:
    axes = [np.arange(-K, K + 1)] * dim
    ks = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    return ks[np.any(ks != 0, axis=1)]


def _character_integrals(pts, w, ks) -> np.ndarray:
    return np.exp(2j * math.pi * (pts @ ks.T)).T @ w


def _chebyshev_integrals(pts, w, K: int, lo, hi) -> np.ndarray:
    z = np.clip(2.0 * (pts - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    T = np.stack([np.polynomial.chebyshev.chebvander(z[:, d], K) for d in range(z.shape[1])], axis=0)
    degs = _frequencies(z.shape[1], K)
    degs = degs[np.all(degs >= 0, axis=1)]
    vals = np.ones((degs.shape[0], pts.shape[0]))
    for d in range(z.shape[1]):
        vals *= T[d][:, degs[:, d]].T
    return vals @ w


def weak_star_distance(mu, nu, K_max: int = 4) -> float:
    """max |integral of g dmu - integral of g dnu| over a finite test dictionary.

    On the circle/torus the dictionary is the characters e^{2 pi i k.x},
    0 < max|k_j| <= K_max.  Measures on a bounded non-periodic box (the Henon
    square) use tensor Chebyshev polynomials of degree <= K_max rescaled to
    that box.
    """
    if K_max < 1:
        raise InvalidParameter("K_max must be at least 1")
    pa, wa = _atoms(mu)
    pb, wb = _atoms(nu)
    if pa.shape[1] != pb.shape[1]:
        raise InvalidParameter("measures live in different dimensions")
    box = _box(mu) or _box(nu)
    if box is None:
        ks = _frequencies(pa.shape[1], K_max)
        diff = _character_integrals(pa, wa, ks) - _character_integrals(pb, wb, ks)
    else:
        lo, hi = box
        diff = _chebyshev_integrals(pa, wa, K_max, lo, hi) - _chebyshev_integrals(pb, wb, K_max, lo, hi)
    return float(np.max(np.abs(diff)))


# --------------------------------------------------------------------------
# basins
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BasinReport:
    mean: float
    stddev: float
    per_trial: tuple[float, ...]
    escaped: tuple[bool, ...]
    n: int
    seed: int

    @property
    def max_pairwise_gap(self) -> float:
        v = [p for p, e in zip(self.per_trial, self.escaped) if not e]
        return max(v) - min(v) if v else math.nan

    def to_json(self) -> str:
        d = {"mean": self.mean, "stddev": self.stddev, "per_trial": list(self.per_trial),
             "escaped": list(self.escaped), "n": self.n, "seed": self.seed,
             "max_pairwise_gap": self.max_pairwise_gap}
        return json.dumps(d, sort_keys=True)


def _starts(region, trials: int, seed: int) -> np.ndarray:
    (x0, x1), (y0, y1) = region
    out = np.empty((trials, 2))
    for i in range(trials):
        u = np.random.default_rng([seed, i]).random(2)
        out[i] = x0 + (x1 - x0) * u[0], y0 + (y1 - y0) * u[1]
    return out


def _birkhoff_chunk(sys: System, obs: Observable, pts: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, y = pts[:, 0].copy(), pts[:, 1].copy()
    total = np.zeros(x.size)
    escaped = np.zeros(x.size, dtype=bool)
    buf = np.empty((x.size, 2))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            x, y = step2(sys, x, y)
            escaped |= ~(np.abs(x) < ESCAPE_RADIUS)
            x[escaped] = 0.0
            y[escaped] = 0.0
            buf[:, 0], buf[:, 1] = x, y
            total += obs.evaluate(buf, dim=2)
    return total / n, escaped


def basin_average(sys: System, obs: Observable, region, n: int, trials: int, seed: int = 0,
                  threads: int = 1) -> BasinReport:
    """Birkhoff averages from ``trials`` uniform random starts in the rectangle ``region``.

    ``region`` is ((x_lo, x_hi), (y_lo, y_hi)).  Start i is drawn from the
    RNG stream (seed, i), and trials run in fixed chunks, so the report does
    not depend on ``threads``.  Escaping orbits are flagged and left out of
    mean and stddev.
    """
    if trials < 2:
        raise InvalidParameter("basin statistics need at least 2 trials")
    if sys.dim != 2:
        raise Unsupported("basin averages are implemented for planar and toral maps")
    starts = _starts(region, trials, seed)
    chunks = [starts[i:i + TRIAL_CHUNK] for i in range(0, trials, TRIAL_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = list(ex.map(lambda c: _birkhoff_chunk(sys, obs, c, n), chunks))
    avgs = np.concatenate([r[0] for r in results])
    esc = np.concatenate([r[1] for r in results])
    good = avgs[~esc]
    mean = float(good.mean()) if good.size else math.nan
    std = float(good.std(ddof=1)) if good.size > 1 else math.nan
    return BasinReport(mean, std, tuple(float(a) if not e else math.nan for a, e in zip(avgs, esc)),
                       tuple(bool(e) for e in esc), n, seed)


def escape_fractions(sys: System, region, n: int, samples: int, seed: int = 0,
                     radius: float = ESCAPE_RADIUS) -> dict:
    """Fractions of uniform starts in ``region`` whose forward / backward orbits leave |z| < radius.

    For a dissipative sink the forward orbits stay and settle on the sink
    while the backward orbits blow up: the forward-time physical measure is
    not one for the inverse map.
    """
    if sys.family != "henon" or sys.params["b"] == 0:
        raise Unsupported("forward/backward comparison needs an invertible Henon map")
    starts = _starts(region, samples, seed)
    out = {}
    for label, stepper in (("forward", step2), ("backward", inverse_step2)):
        x, y = starts[:, 0].copy(), starts[:, 1].copy()
        escaped = np.zeros(samples, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(n):
                x, y = stepper(sys, x, y)
                escaped |= ~(np.hypot(x, y) < radius)
                x[escaped] = 0.0
                y[escaped] = 0.0
        out[f"{label}_escape_fraction"] = float(escaped.mean())
        if label == "forward" and not escaped.all():
            out["forward_endpoints"] = np.stack([x[~escaped], y[~escaped]], axis=1)
    return out
