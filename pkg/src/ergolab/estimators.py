"""Birkhoff averages, pushforward densities and distortion bounds for circle maps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

from .errors import (BranchExplosion, InvalidParameter, NonConvergence,
                     Unsupported)
from .maps import (PrecisionPolicy, System, _exact_step, check_budget, deriv1,
                   inverse_branches, perturbed_branch, step1, step2)
from .phase import CirclePoint, IntervalPartition, Observable, observable_mean

MAX_BRANCH_BITS = 30
_CHUNK_POINTS = 1 << 21


# --------------------------------------------------------------------------
# time averages
# --------------------------------------------------------------------------


def birkhoff_average(sys: System, obs, p, n: int, policy: PrecisionPolicy | None = None) -> float:
    """(1/n) sum_{i=1}^{n} obs(f^i(p)).

    In exact mode the orbit is carried in fixed point and each iterate is
    rounded to a double only for evaluating ``obs``.
    """
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    policy = policy or PrecisionPolicy()
    if policy.is_exact:
        check_budget(sys, n, policy)
        c = p if isinstance(p, CirclePoint) else CirclePoint.from_real(p, policy.bits)
        c = c.with_precision(policy.bits)
        xs = np.empty(n)
        for i in range(n):
            c = _exact_step(sys, c)
            xs[i] = c.value
        return math.fsum(obs(xs)) / n
    if sys.dim == 1:
        x = float(p.value if isinstance(p, CirclePoint) else p)
        xs = np.empty(n)
        for i in range(n):
            x = step1(sys, x)
            xs[i] = x
        return math.fsum(obs(xs)) / n
    arr = np.asarray(p, dtype=float)
    x, y = float(arr[0]), float(arr[1])
    pts = np.empty((n, 2))
    for i in range(n):
        x, y = step2(sys, x, y)
        pts[i] = x, y
    return math.fsum(obs(pts, dim=2)) / n


def equidistribution_discrepancy(orbit, partition: IntervalPartition) -> float:
    """max over cells of |fraction of orbit points in the cell - cell width|."""
    xs = orbit.values() if hasattr(orbit, "values") and callable(orbit.values) else np.asarray(orbit, float)
    if xs.ndim != 1:
        raise Unsupported("discrepancy is defined for circle orbits")
    counts = np.bincount(partition.locate(np.mod(xs, 1.0)), minlength=partition.n_cells)
    freq = counts / xs.size
    return float(np.max(np.abs(freq - partition.widths / (partition.hi - partition.lo))))


def quadrature_mean(obs: Observable) -> float:
    """Lebesgue mean: closed form for trig polynomials, midpoint rule for grid functions."""
    if obs.kind == "trig_polynomial":
        return observable_mean(obs)
    if obs.kind == "grid_function":
        w = obs.grid.widths
        return float(np.dot(obs.values, w) / w.sum())
    raise Unsupported("no reference measure for polynomial observables")


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityVector:
    """Piecewise-constant density w.r.t. Lebesgue on a circle partition."""

    grid: IntervalPartition
    values: np.ndarray

    @property
    def integral(self) -> float:
        return float(np.dot(self.values, self.grid.widths))

    def max_min_ratio(self) -> float:
        return float(self.values.max() / self.values.min())

    def l1_distance(self, other: "DensityVector") -> float:
        if self.grid != other.grid:
            raise InvalidParameter("densities live on different grids")
        return float(np.dot(np.abs(self.values - other.values), self.grid.widths))

    def total_variation(self) -> float:
        v = self.values
        return float(np.abs(np.diff(np.append(v, v[0]))).sum())

    def fourier_coefficient(self, k: int) -> complex:
        """Integral of e^{2 pi i k x} against the density (midpoint rule)."""
        return complex(np.dot(self.values * self.grid.widths, np.exp(2j * math.pi * k * self.grid.midpoints)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell_index", "left_endpoint", "density"])
        for i, (left, v) in enumerate(zip(self.grid.cuts[:-1], self.values)):
            w.writerow([i, repr(float(left)), repr(float(v))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"cuts": self.grid.cuts.tolist(), "values": self.values.tolist()}, sort_keys=True)


def _check_covering(sys: System) -> None:
    if not sys.is_circle_map:
        raise Unsupported(f"{sys.family} is not a circle covering map")


def _check_branches(sys: System, n: int) -> None:
    if n < 0:
        raise InvalidParameter("n must be nonnegative")
    if n * math.log2(sys.degree) > MAX_BRANCH_BITS:
        raise BranchExplosion(f"{sys.degree}^{n} inverse branches exceed 2^{MAX_BRANCH_BITS}")


def branch_sums(sys: System, n: int, x: np.ndarray) -> np.ndarray:
    """rho_j(x) = sum over y in f^{-j}(x) of 1/(f^j)'(y), for j = 0..n.

    Walks the inverse-branch tree level by level; the level-j leaves are
    exactly the preimages f^{-j}(x) with their accumulated weights.
    Returns an array of shape (n + 1, len(x)).
    """
    _check_covering(sys)
    _check_branches(sys, n)
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1, x.size))
    out[0] = 1.0
    if n == 0:
        return out
    batch = max(1, _CHUNK_POINTS // sys.degree ** n)
    for start in range(0, x.size, batch):
        pts = x[start:start + batch, None]
        wts = np.ones_like(pts)
        for j in range(1, n + 1):
            ys, dy = inverse_branches(sys, pts)
            wts = (wts[..., None] / np.abs(dy)).reshape(pts.shape[0], -1)
            pts = (ys % 1.0).reshape(pts.shape[0], -1)
            out[j, start:start + batch] = wts.sum(axis=1)
    return out


def pushforward_density(sys: System, n: int, grid: IntervalPartition) -> DensityVector:
    """Density of f^n_* Lebesgue sampled at cell midpoints."""
    return DensityVector(grid, branch_sums(sys, n, grid.midpoints)[n])


def cesaro_density(sys: System, n: int, grid: IntervalPartition) -> DensityVector:
    """(1/n) sum_{i=1}^{n} rho_i at cell midpoints."""
    if n < 1:
        raise InvalidParameter("Cesaro average needs n >= 1")
    rho = branch_sums(sys, n, grid.midpoints)
    return DensityVector(grid, rho[1:].mean(axis=0))


def ulam_matrix(sys: System, grid: IntervalPartition, subsamples: int = 64) -> sparse.csr_matrix:
    """Row-stochastic transport matrix: row i = where 64 stratified points of cell i land."""
    _check_covering(sys)
    m = grid.n_cells
    offs = (np.arange(subsamples) + 0.5) / subsamples
    pts = grid.cuts[:-1, None] + grid.widths[:, None] * offs[None, :]
    tgt = grid.locate(step1(sys, pts) % 1.0)
    rows = np.repeat(np.arange(m), subsamples)
    data = np.full(m * subsamples, 1.0 / subsamples)
    return sparse.csr_matrix((data, (rows, tgt.ravel())), shape=(m, m))


def ulam_fixed_density(sys: System, grid: IntervalPartition, tol: float = 1e-10,
                       max_iter: int = 100_000, subsamples: int = 64) -> DensityVector:
    """Dominant left fixed vector of the Ulam matrix, by power iteration from uniform."""
    if grid.n_cells > 1 << 14:
        raise InvalidParameter("Ulam grids are capped at 2^14 cells")
    PT = ulam_matrix(sys, grid, subsamples).T.tocsr()
    p = grid.widths / grid.widths.sum()
    for _ in range(max_iter):
        q = PT @ p
        q /= q.sum()
        resid = float(np.abs(q - p).sum())
        p = q
        if resid <= tol:
            return DensityVector(grid, p / grid.widths)
    raise NonConvergence(f"Ulam power iteration residual {resid:.3g} after {max_iter} iterations")


# --------------------------------------------------------------------------
# distortion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionReport:
    K_theoretical: float
    max_ratio_observed: float = 1.0
    n_max: int = 0
    samples: int = 0
    L: float = 0.0
    C: float = 1.0
    mu: float = 2.0
    seed: int | None = None

    @property
    def valid(self) -> bool:
        return self.max_ratio_observed <= self.K_theoretical

    def to_json(self) -> str:
        d = asdict(self)
        d["valid"] = self.valid
        return json.dumps(d, sort_keys=True)


def _lipschitz_log_derivative(sys: System) -> float:
    """Sup |f''/f'|: the Lipschitz constant of log f'."""
    if sys.family == "doubling":
        return 0.0
    eps = abs(sys.params["epsilon"])
    return 4.0 * math.pi ** 2 * eps / (2.0 - 2.0 * math.pi * eps)


def distortion_constant(sys: System) -> DistortionReport:
    """K = exp(L C^-1 mu^-1 (1 - mu^-1)^-1) with C = 1 and mu = inf f'."""
    if sys.family not in ("doubling", "perturbed_expanding"):
        raise Unsupported(f"no closed-form distortion constant for {sys.family}")
    C, mu = sys.expansion_constants
    L = _lipschitz_log_derivative(sys)
    K = math.exp(L / C / mu / (1.0 - 1.0 / mu))
    return DistortionReport(K_theoretical=K, L=L, C=C, mu=mu)


def empirical_distortion(sys: System, n_max: int, samples: int, seed: int = 0) -> DistortionReport:
    """Largest (f^n)'(x)/(f^n)'(y) over same-branch pairs, n <= n_max.

    Each pair starts as two uniform points u, v of [0, 1); both are pulled
    back through one random chain of inverse branches, so at depth n they lie
    in a common component of f^{-n}([u, v]).
    """
    theory = distortion_constant(sys)
    rng = np.random.default_rng(seed)
    ends = rng.random((samples, 2))
    chains = rng.integers(0, sys.degree, size=(samples, n_max))
    x, y = ends[:, 0], ends[:, 1]
    log_ratio = np.zeros(samples)
    worst = 0.0
    for j in range(n_max):
        k = chains[:, j]
        x = _pick_branch(sys, x, k)
        y = _pick_branch(sys, y, k)
        log_ratio += np.log(deriv1(sys, x)) - np.log(deriv1(sys, y))
        worst = max(worst, float(np.abs(log_ratio).max()))
    return DistortionReport(theory.K_theoretical, math.exp(worst), n_max, samples,
                            theory.L, theory.C, theory.mu, seed)


def _pick_branch(sys: System, x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Lifted inverse branch k of x in [0, 1); continuous in x, values in [0, 1)."""
    if sys.family == "doubling":
        return 0.5 * (x + k)
    return perturbed_branch(x + k, 0, sys.params["epsilon"])


def bounded_density_constant(sys: System) -> float:
    """c with c^-1 <= rho_n(x)/rho_n(y) <= c for all n: the distortion constant itself."""
    return distortion_constant(sys).K_theoretical
