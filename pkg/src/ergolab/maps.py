"""Concrete dynamical systems and the uniform evaluation interface.

Kernels accept Python floats (fast scalar loops) or numpy arrays
(vectorized ensembles).  Two-dimensional families take points as arrays
whose last axis has length 2, or as :class:`TorusPoint` / :class:`PlanePoint`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import mpmath
import numpy as np

from .errors import (CriticalPoint, InvalidParameter, PrecisionBudgetExceeded,
                     Unsupported)
from .phase import CirclePoint, PlanePoint, TorusPoint

TWO_PI = 2.0 * math.pi
EPS_BOUND = 1.0 / TWO_PI
DEFAULT_EPSILON = 0.05

# family -> (parameters, constraint, where it comes from)
CATALOG: dict[str, tuple[str, str, str]] = {
    "rotation": ("alpha (scalar, or pair for a torus translation)", "alpha in [0, 1)",
                 "circle rotations, the isometric example of ergodicity"),
    "doubling": ("none", "degree 2, constant jacobian 2",
                 "the doubling map on the circle, the expanding example"),
    "perturbed_expanding": ("epsilon (default 0.05)", "|epsilon| < 1/(2 pi) ~ 0.159 so f' > 1",
                            "C^2 perturbations of the doubling map; distortion and invariant densities"),
    "toral_automorphism": ("matrix [[a, b], [c, d]]", "integer entries, det = +-1, no eigenvalue of modulus 1",
                           "hyperbolic toral automorphisms (cat map), Anosov diffeomorphisms"),
    "henon": ("a, b", "finite a, b; b != 0 for a diffeomorphism",
              "Henon family (1 - a x^2 + b y, x), near-critical dissipative dynamics"),
    "logistic": ("t", "t in (0, 4]", "logistic family t x (1 - x), parameter exclusion near t = 4"),
}


@dataclass(frozen=True)
class System:
    """A validated map family with its parameters."""

    family: str
    params: Mapping[str, Any] = field(default_factory=dict)
    degree: int = 1
    expansion_constants: tuple[float, float] | None = None

    @property
    def dim(self) -> int:
        if self.family in ("toral_automorphism", "henon"):
            return 2
        if self.family == "rotation" and np.ndim(self.params["alpha"]) == 1:
            return 2
        return 1

    @property
    def is_circle_map(self) -> bool:
        return self.dim == 1 and self.family != "logistic"

    @property
    def is_torus_map(self) -> bool:
        return self.dim == 2 and self.family != "henon"

    @property
    def sup_derivative(self) -> float:
        """Upper bound for |f'| used for bit budgets (circle families only)."""
        if self.family == "rotation":
            return 1.0
        if self.family == "doubling":
            return 2.0
        if self.family == "perturbed_expanding":
            return 2.0 + TWO_PI * abs(self.params["epsilon"])
        if self.family == "logistic":
            return self.params["t"]
        raise Unsupported(f"no scalar derivative bound for {self.family}")

    def to_config(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, (tuple, np.ndarray)) else v)
                  for k, v in self.params.items()}
        return {"family": self.family, "params": params}

    def to_json(self) -> str:
        return json.dumps(self.to_config(), sort_keys=True)


def _unit_eigs(m: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.eigvals(m.astype(float)))


def make_system(family: str, params: Mapping[str, Any] | None = None, **kw) -> System:
    """Validate parameters for ``family`` and build a :class:`System`."""
    p = dict(params or {})
    p.update(kw)
    if family == "rotation":
        alpha = p.get("alpha", 0.0)
        if np.ndim(alpha) == 0:
            alpha = float(alpha)
            if not 0.0 <= alpha < 1.0:
                raise InvalidParameter("rotation number alpha must lie in [0, 1)")
        else:
            alpha = tuple(float(a) for a in alpha)
            if len(alpha) != 2 or not all(0.0 <= a < 1.0 for a in alpha):
                raise InvalidParameter("torus translation needs two components in [0, 1)")
        return System("rotation", {"alpha": alpha}, 1)
    if family == "doubling":
        return System("doubling", {}, 2, (1.0, 2.0))
    if family == "perturbed_expanding":
        eps = float(p.get("epsilon", DEFAULT_EPSILON))
        mu = 2.0 - TWO_PI * abs(eps)
        if not abs(eps) < EPS_BOUND or not mu > 1.0:
            raise InvalidParameter(f"need |epsilon| < 1/(2 pi) ~ {EPS_BOUND:.6f}; got {eps}")
        return System("perturbed_expanding", {"epsilon": eps}, 2, (1.0, mu))
    if family == "toral_automorphism":
        m = np.asarray(p.get("matrix"), dtype=float)
        if m.shape != (2, 2) or not np.all(m == np.round(m)):
            raise InvalidParameter("toral automorphism needs an integer 2x2 matrix")
        det = round(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        if abs(det) != 1:
            raise InvalidParameter("matrix determinant must be +-1")
        if np.any(np.abs(_unit_eigs(m) - 1.0) < 1e-12):
            raise InvalidParameter("matrix has an eigenvalue of modulus 1 (not hyperbolic)")
        mat = tuple(tuple(int(v) for v in row) for row in m)
        lam = float(_unit_eigs(m).max())
        return System("toral_automorphism", {"matrix": mat}, 1, (1.0, lam))
    if family == "henon":
        a, b = float(p.get("a", 1.4)), float(p.get("b", 0.3))
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidParameter("Henon parameters must be finite")
        return System("henon", {"a": a, "b": b}, 1)
    if family == "logistic":
        t = float(p.get("t", 4.0))
        if not 0.0 < t <= 4.0:
            raise InvalidParameter("logistic parameter t must lie in (0, 4]")
        return System("logistic", {"t": t}, 1)
    raise InvalidParameter(f"unknown family {family!r}; known: {sorted(CATALOG)}")


def system_from_config(cfg: Mapping | str) -> System:
    """Parse ``{"family": ..., "params": {...}}`` (a dict or JSON text)."""
    d = json.loads(cfg) if isinstance(cfg, str) else cfg
    return make_system(d["family"], d.get("params", {}))


# --------------------------------------------------------------------------
# float kernels
# --------------------------------------------------------------------------


def _sin(x):
    return math.sin(x) if isinstance(x, float) else np.sin(x)


def _cos(x):
    return math.cos(x) if isinstance(x, float) else np.cos(x)


def step1(sys: System, x):
    f, p = sys.family, sys.params
    if f == "rotation":
        return (x + p["alpha"]) % 1.0
    if f == "doubling":
        return (2.0 * x) % 1.0
    if f == "perturbed_expanding":
        return (2.0 * x + p["epsilon"] * _sin(TWO_PI * x)) % 1.0
    if f == "logistic":
        return p["t"] * x * (1.0 - x)
    raise Unsupported(f"{f} is not a one-dimensional family")


def deriv1(sys: System, x):
    f, p = sys.family, sys.params
    if f == "rotation":
        return 1.0 + 0.0 * x
    if f == "doubling":
        return 2.0 + 0.0 * x
    if f == "perturbed_expanding":
        return 2.0 + TWO_PI * p["epsilon"] * _cos(TWO_PI * x)
    if f == "logistic":
        return p["t"] * (1.0 - 2.0 * x)
    raise Unsupported(f"{f} is not a one-dimensional family")


def second_deriv1(sys: System, x):
    f, p = sys.family, sys.params
    if f in ("rotation", "doubling"):
        return 0.0 * x
    if f == "perturbed_expanding":
        return -TWO_PI * TWO_PI * p["epsilon"] * _sin(TWO_PI * x)
    if f == "logistic":
        return -2.0 * p["t"] + 0.0 * x
    raise Unsupported(f"{f} is not a one-dimensional family")


def step2(sys: System, x, y):
    f, p = sys.family, sys.params
    if f == "henon":
        return 1.0 - p["a"] * x * x + p["b"] * y, x
    if f == "toral_automorphism":
        (a, b), (c, d) = p["matrix"]
        return (a * x + b * y) % 1.0, (c * x + d * y) % 1.0
    if f == "rotation":
        a1, a2 = p["alpha"]
        return (x + a1) % 1.0, (y + a2) % 1.0
    raise Unsupported(f"{f} is not a two-dimensional family")


def jac2(sys: System, x, y):
    """Entries (j11, j12, j21, j22) of D f at (x, y)."""
    f, p = sys.family, sys.params
    if f == "henon":
        return -2.0 * p["a"] * x, p["b"] + 0.0 * x, 1.0 + 0.0 * x, 0.0 * x
    if f == "toral_automorphism":
        (a, b), (c, d) = p["matrix"]
        z = 0.0 * x
        return a + z, b + z, c + z, d + z
    if f == "rotation":
        z = 0.0 * x
        return 1.0 + z, z, z, 1.0 + z
    raise Unsupported(f"{f} is not a two-dimensional family")


def inverse_step2(sys: System, x, y):
    """Inverse of an invertible planar or toral map."""
    f, p = sys.family, sys.params
    if f == "henon":
        if p["b"] == 0.0:
            raise CriticalPoint("the Henon map with b = 0 is not invertible")
        return y, (x - 1.0 + p["a"] * y * y) / p["b"]
    if f == "toral_automorphism":
        (a, b), (c, d) = p["matrix"]
        det = a * d - b * c
        return ((d * x - b * y) * det) % 1.0, ((-c * x + a * y) * det) % 1.0
    if f == "rotation":
        a1, a2 = p["alpha"]
        return (x - a1) % 1.0, (y - a2) % 1.0
    raise Unsupported(f"{f} has no inverse in this interface")


# --------------------------------------------------------------------------
# exact circle arithmetic
# --------------------------------------------------------------------------


def _mpf_point(c: CirclePoint):
    return mpmath.ldexp(mpmath.mpf(c.numer), -c.precision_bits)


def _round_to(val, bits: int) -> CirclePoint:
    return CirclePoint(int(mpmath.nint(mpmath.ldexp(val, bits))) % (1 << bits), bits)


def _exact_step(sys: System, c: CirclePoint) -> CirclePoint:
    f = sys.family
    if f == "rotation" and sys.dim == 1:
        return c + CirclePoint.from_real(sys.params["alpha"], c.precision_bits)
    if f == "doubling":
        return c.times(2)
    if f == "perturbed_expanding":
        with mpmath.workprec(c.precision_bits + 32):
            x = _mpf_point(c)
            val = 2 * x + mpmath.mpf(sys.params["epsilon"]) * mpmath.sin(2 * mpmath.pi * x)
            return _round_to(val, c.precision_bits)
    raise Unsupported(f"exact arithmetic is only available for circle families, not {f}")


def _perturbed_branch_exact(c: CirclePoint, k: int, eps: float) -> CirclePoint:
    """Root of 2y + eps sin(2 pi y) = x + k in [0, 1): bisection to 2^-bits, then two Newton steps."""
    bits = c.precision_bits
    with mpmath.workprec(bits + 32):
        e = mpmath.mpf(eps)
        target = _mpf_point(c) + k
        g = lambda y: 2 * y + e * mpmath.sin(2 * mpmath.pi * y) - target
        lo, hi = target / 2 - abs(e) / 2, target / 2 + abs(e) / 2
        tol = mpmath.ldexp(1, -bits)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
        y = (lo + hi) / 2
        for _ in range(2):
            y -= g(y) / (2 + 2 * mpmath.pi * e * mpmath.cos(2 * mpmath.pi * y))
        return _round_to(y, bits)


def perturbed_branch(x, k: int, eps: float, bisect_bits: int = 26):
    """Vectorized inverse branch ``k`` of x -> 2x + eps sin(2 pi x) (mod 1).

    Bisection on the bracket [(x+k-|eps|)/2, (x+k+|eps|)/2] down to width
    2^-bisect_bits, then two Newton polish steps.
    """
    target = np.asarray(x, dtype=float) + k
    e = abs(eps)
    lo = 0.5 * (target - e)
    width = e
    n_iter = max(0, int(math.ceil(math.log2(max(e, 1e-300)) + bisect_bits))) if e > 0 else 0
    for _ in range(n_iter):
        width *= 0.5
        mid = lo + width
        g = 2.0 * mid + eps * np.sin(TWO_PI * mid) - target
        lo = np.where(g < 0.0, mid, lo)
    y = lo + 0.5 * width
    for _ in range(2):
        y = y - (2.0 * y + eps * np.sin(TWO_PI * y) - target) / (2.0 + TWO_PI * eps * np.cos(TWO_PI * y))
    return y


# --------------------------------------------------------------------------
# public evaluation interface
# --------------------------------------------------------------------------


def _as_pair(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (2,):
        raise InvalidParameter("two-dimensional systems need points with two coordinates")
    return arr


def _wrap2(sys: System, p, x, y):
    if isinstance(p, TorusPoint):
        return TorusPoint((float(x), float(y)))
    if isinstance(p, PlanePoint):
        return PlanePoint(float(x), float(y))
    if isinstance(p, tuple):
        return (float(x), float(y))
    return np.stack([x, y], axis=-1)


def apply(sys: System, p):
    """Image of ``p``; circle and torus images are reduced mod 1."""
    if isinstance(p, CirclePoint):
        return _exact_step(sys, p)
    if sys.dim == 1:
        if isinstance(p, (TorusPoint, PlanePoint)):
            raise InvalidParameter("one-dimensional system applied to a planar point")
        return step1(sys, float(p) if np.ndim(p) == 0 else np.asarray(p, dtype=float))
    arr = _as_pair(p)
    x, y = step2(sys, arr[..., 0], arr[..., 1])
    return _wrap2(sys, p, x, y)


def apply_inverse(sys: System, p):
    if sys.dim == 1:
        pre = preimages(sys, p)
        if len(pre) != 1:
            raise Unsupported(f"{sys.family} is not invertible")
        return pre[0]
    arr = _as_pair(p)
    x, y = inverse_step2(sys, arr[..., 0], arr[..., 1])
    return _wrap2(sys, p, x, y)


def tangent(sys: System, p, v):
    """D_p f applied to the tangent vector ``v``."""
    if sys.dim == 1:
        x = p.value if isinstance(p, CirclePoint) else np.asarray(p, dtype=float)
        return deriv1(sys, x) * np.asarray(v, dtype=float)
    arr = _as_pair(p)
    vv = _as_pair(v)
    j11, j12, j21, j22 = jac2(sys, arr[..., 0], arr[..., 1])
    return np.stack([j11 * vv[..., 0] + j12 * vv[..., 1], j21 * vv[..., 0] + j22 * vv[..., 1]], axis=-1)


def jacobian_at(sys: System, p) -> float:
    """|det D_p f|; raises CriticalPoint where it vanishes."""
    if sys.dim == 1:
        x = p.value if isinstance(p, CirclePoint) else float(p)
        jac = abs(float(deriv1(sys, x)))
    else:
        arr = _as_pair(p)
        j11, j12, j21, j22 = jac2(sys, float(arr[0]), float(arr[1]))
        jac = abs(j11 * j22 - j12 * j21)
    if jac == 0.0:
        raise CriticalPoint(f"{sys.family}: derivative vanishes at {p}")
    return jac


def preimages(sys: System, p) -> list:
    """All points mapping to ``p``: ``sys.degree`` of them for covering maps."""
    f = sys.family
    if f in ("henon", "logistic"):
        raise Unsupported(f"{f} is not a covering map in this interface")
    if isinstance(p, CirclePoint):
        if f == "doubling":
            bits = p.precision_bits + 1
            return [CirclePoint(p.numer, bits), CirclePoint(p.numer + (1 << p.precision_bits), bits)]
        if f == "rotation" and sys.dim == 1:
            return [p - CirclePoint.from_real(sys.params["alpha"], p.precision_bits)]
        if f == "perturbed_expanding":
            return [_perturbed_branch_exact(p, k, sys.params["epsilon"]) for k in (0, 1)]
        raise Unsupported(f"exact preimages unavailable for {f}")
    if sys.dim == 2:
        return [apply_inverse(sys, p)]
    x = float(p) if np.ndim(p) == 0 else np.asarray(p, dtype=float)
    if f == "rotation":
        return [(x - sys.params["alpha"]) % 1.0]
    if f == "doubling":
        return [0.5 * x, 0.5 * (x + 1.0)]
    eps = sys.params["epsilon"]
    out = [perturbed_branch(x, k, eps) % 1.0 for k in (0, 1)]
    return [float(v) for v in out] if np.ndim(x) == 0 else out


def inverse_branches(sys: System, x: np.ndarray, bisect_bits: int = 26) -> tuple[np.ndarray, np.ndarray]:
    """All preimages of each entry of ``x`` stacked on a new last axis, with f' there."""
    f = sys.family
    if f == "rotation" and sys.dim == 1:
        ys = ((x - sys.params["alpha"]) % 1.0)[..., None]
    elif f == "doubling":
        ys = np.stack([0.5 * x, 0.5 * (x + 1.0)], axis=-1)
    elif f == "perturbed_expanding":
        eps = sys.params["epsilon"]
        ys = np.stack([perturbed_branch(x, k, eps, bisect_bits) for k in (0, 1)], axis=-1)
    else:
        raise Unsupported(f"{f} is not a circle covering map")
    return ys, deriv1(sys, ys)


# --------------------------------------------------------------------------
# orbits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PrecisionPolicy:
    """``exact``: fixed point with ``bits`` fractional bits.  ``pseudo``: hardware doubles."""

    mode: str = "pseudo"
    bits: int = 53

    def __post_init__(self):
        if self.mode not in ("exact", "pseudo"):
            raise InvalidParameter("precision mode must be 'exact' or 'pseudo'")
        if self.bits < 53:
            raise InvalidParameter("bit budget must be at least 53")

    @classmethod
    def exact(cls, bits: int = 1024) -> "PrecisionPolicy":
        return cls("exact", bits)

    @classmethod
    def pseudo(cls) -> "PrecisionPolicy":
        return cls("pseudo", 53)

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact"

    def to_config(self) -> dict:
        return {"mode": self.mode, "bits": self.bits}


def bits_consumed(sys: System, n: int) -> int:
    rate = math.log2(sys.sup_derivative)
    return int(math.ceil(n * rate - 1e-12)) if rate > 0 else 0


def check_budget(sys: System, n: int, policy: PrecisionPolicy) -> None:
    if not sys.is_circle_map:
        raise Unsupported(f"{sys.family} orbits run in pseudo mode only")
    need = bits_consumed(sys, n) + 64
    if policy.bits < need:
        raise PrecisionBudgetExceeded(
            f"{n} steps of {sys.family} need {need} bits, policy grants {policy.bits}")


@dataclass(frozen=True, eq=False)
class OrbitSegment:
    system: System
    points: list | np.ndarray
    policy: PrecisionPolicy
    certified_bits: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def certified(self) -> bool:
        return self.policy.is_exact

    def values(self) -> np.ndarray:
        if self.policy.is_exact:
            return np.array([c.value for c in self.points])
        return np.asarray(self.points, dtype=float)

    def verify(self) -> bool:
        """Re-apply the map to every stored point (exact mode: bit-for-bit)."""
        if not self.policy.is_exact:
            raise Unsupported("pseudo orbits carry no certificate")
        return all(apply(self.system, a) == b for a, b in zip(self.points[:-1], self.points[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.system.dim == 1:
            w.writerow(["step", "coord_0"])
            for i, pt in enumerate(self.points):
                w.writerow([i, pt.decimal() if isinstance(pt, CirclePoint) else repr(float(pt))])
        else:
            w.writerow(["step", "coord_0", "coord_1"])
            for i, pt in enumerate(np.asarray(self.points)):
                w.writerow([i, repr(float(pt[0])), repr(float(pt[1]))])
        return buf.getvalue()


def trajectory(sys: System, p, n: int) -> np.ndarray:
    """Pseudo orbit x_0..x_n in doubles via a scalar loop."""
    if sys.dim == 1:
        x = float(p.value if isinstance(p, CirclePoint) else p)
        out = np.empty(n + 1)
        out[0] = x
        for i in range(1, n + 1):
            x = step1(sys, x)
            out[i] = x
        return out
    arr = np.asarray(p, dtype=float)
    x, y = float(arr[0]), float(arr[1])
    out = np.empty((n + 1, 2))
    out[0] = x, y
    for i in range(1, n + 1):
        x, y = step2(sys, x, y)
        out[i] = x, y
    return out


def orbit(sys: System, p, n: int, policy: PrecisionPolicy | None = None) -> OrbitSegment:
    """Finite trajectory of n+1 points recorded with its precision policy."""
    policy = policy or PrecisionPolicy()
    if n < 0:
        raise InvalidParameter("n must be nonnegative")
    if not policy.is_exact:
        return OrbitSegment(sys, trajectory(sys, p, n), policy)
    check_budget(sys, n, policy)
    c = p if isinstance(p, CirclePoint) else CirclePoint.from_real(p, policy.bits)
    c = c.with_precision(policy.bits)
    pts = [c]
    for _ in range(n):
        c = _exact_step(sys, c)
        pts.append(c)
    cert = tuple(policy.bits - bits_consumed(sys, i) for i in range(n + 1))
    return OrbitSegment(sys, pts, policy, cert)
