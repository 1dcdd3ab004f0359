"""Lyapunov exponents, cone-field invariance and hyperbolic-measure classification.

Exponents use the standard growth rate (1/n) log |D_p f^n v|.  Tangent
vectors are renormalized every step; the product of stretch factors is kept
as a float mantissa times a power of two, so constant stretches (doubling,
rotations) give their logarithm with no accumulated rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTangent, InvalidParameter, Unsupported
from .maps import PrecisionPolicy, System, _exact_step, check_budget, deriv1, jac2, step1, step2
from .phase import CirclePoint

LN2 = math.log(2.0)


class LogProduct:
    """Running product of positive factors as mantissa in [1, 2) times 2**exponent."""

    __slots__ = ("mantissa", "exponent")

    def __init__(self):
        self.mantissa = 1.0
        self.exponent = 0

    def mul(self, factor: float) -> None:
        m, e = math.frexp(self.mantissa * factor)
        self.mantissa = 2.0 * m
        self.exponent += e - 1

    def mean_log(self, n: int) -> float:
        return math.log(self.mantissa) / n + (self.exponent / n) * LN2


@dataclass(frozen=True)
class ExponentEstimate:
    values: tuple[float, ...]
    n: int
    renorm_count: int
    policy: PrecisionPolicy = field(default_factory=PrecisionPolicy)

    def to_json(self) -> str:
        return json.dumps({"values": list(self.values), "n": self.n, "renorm_count": self.renorm_count,
                           "policy": self.policy.to_config()}, sort_keys=True)


def default_transient(sys: System) -> int:
    """Steps discarded before measuring: 10^3 for planar/toral/interval maps, none on the circle."""
    return 0 if sys.is_circle_map else 1000


def _circle_orbit_iter(sys: System, p, count: int, policy: PrecisionPolicy):
    """Yield ``count`` successive points (as floats) starting at p."""
    if policy.is_exact:
        check_budget(sys, count, policy)
        c = p if isinstance(p, CirclePoint) else CirclePoint.from_real(p, policy.bits)
        c = c.with_precision(policy.bits)
        for _ in range(count):
            yield c.value
            c = _exact_step(sys, c)
    else:
        x = float(p.value if isinstance(p, CirclePoint) else p)
        for _ in range(count):
            yield x
            x = step1(sys, x)


def lyapunov_top(sys: System, p, v0, n: int, policy: PrecisionPolicy | None = None,
                 transient: int | None = None) -> float:
    """(1/n) log |D f^n (v)| measured after ``transient`` discarded steps."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    policy = policy or PrecisionPolicy()
    transient = default_transient(sys) if transient is None else transient
    if sys.dim == 1:
        if float(np.asarray(v0)) == 0.0:
            raise InvalidParameter("v0 must be nonzero")
        acc = LogProduct()
        for i, x in enumerate(_circle_orbit_iter(sys, p, transient + n, policy)
                              if sys.is_circle_map else _interval_iter(sys, p, transient + n)):
            if i < transient:
                continue
            d = abs(deriv1(sys, x))
            if d == 0.0 or not math.isfinite(d):
                raise DegenerateTangent(f"derivative {d} at step {i}")
            acc.mul(d)
        return acc.mean_log(n)
    if policy.is_exact:
        raise Unsupported("planar exponents run in pseudo mode")
    x, y = (float(c) for c in np.asarray(p, dtype=float))
    v = np.asarray(v0, dtype=float)
    nv = math.hypot(v[0], v[1])
    if nv == 0.0:
        raise InvalidParameter("v0 must be nonzero")
    v1, v2 = v[0] / nv, v[1] / nv
    acc = LogProduct()
    for i in range(transient + n):
        j11, j12, j21, j22 = jac2(sys, x, y)
        v1, v2 = j11 * v1 + j12 * v2, j21 * v1 + j22 * v2
        r = math.hypot(v1, v2)
        if r == 0.0 or not math.isfinite(r):
            raise DegenerateTangent(f"tangent vector norm {r} at step {i}")
        v1, v2 = v1 / r, v2 / r
        if i >= transient:
            acc.mul(r)
        x, y = step2(sys, x, y)
    return acc.mean_log(n)


def _interval_iter(sys: System, p, count: int):
    x = float(p)
    for _ in range(count):
        yield x
        x = step1(sys, x)


def lyapunov_spectrum(sys: System, p, n: int, policy: PrecisionPolicy | None = None,
                      transient: int | None = None) -> ExponentEstimate:
    """All exponents via Gram-Schmidt re-orthonormalization of a tangent frame."""
    policy = policy or PrecisionPolicy()
    transient = default_transient(sys) if transient is None else transient
    if sys.dim == 1:
        top = lyapunov_top(sys, p, 1.0, n, policy, transient)
        return ExponentEstimate((top,), n, transient + n, policy)
    if policy.is_exact:
        raise Unsupported("planar exponents run in pseudo mode")
    x, y = (float(c) for c in np.asarray(p, dtype=float))
    # frame columns q1 = (a1, a2), q2 = (b1, b2)
    a1, a2, b1, b2 = 1.0, 0.0, 0.0, 1.0
    acc1, acc2 = LogProduct(), LogProduct()
    for i in range(transient + n):
        j11, j12, j21, j22 = jac2(sys, x, y)
        a1, a2 = j11 * a1 + j12 * a2, j21 * a1 + j22 * a2
        b1, b2 = j11 * b1 + j12 * b2, j21 * b1 + j22 * b2
        r11 = math.hypot(a1, a2)
        if r11 == 0.0 or not math.isfinite(r11):
            raise DegenerateTangent(f"frame collapsed at step {i}")
        a1, a2 = a1 / r11, a2 / r11
        r12 = a1 * b1 + a2 * b2
        b1, b2 = b1 - r12 * a1, b2 - r12 * a2
        r22 = math.hypot(b1, b2)
        if r22 == 0.0 or not math.isfinite(r22):
            raise DegenerateTangent(f"frame collapsed at step {i} (zero jacobian)")
        b1, b2 = b1 / r22, b2 / r22
        if i >= transient:
            acc1.mul(r11)
            acc2.mul(r22)
        x, y = step2(sys, x, y)
    vals = sorted((acc1.mean_log(n), acc2.mean_log(n)), reverse=True)
    return ExponentEstimate(tuple(vals), n, transient + n, policy)


def henon_top_exponents(a, b: float, x0, y0, n: int, transient: int = 1000,
                        escape_radius: float = 1e3) -> tuple[np.ndarray, np.ndarray]:
    """Top exponents for many Henon parameters/starts at once.

    Returns (exponents, escaped); escaped orbits get NaN.
    """
    a = np.asarray(a, dtype=float)
    x = np.broadcast_to(np.asarray(x0, dtype=float), a.shape).copy()
    y = np.broadcast_to(np.asarray(y0, dtype=float), a.shape).copy()
    v1, v2 = np.ones_like(a), np.zeros_like(a)
    log_sum = np.zeros_like(a)
    escaped = np.zeros(a.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for i in range(transient + n):
            j11 = -2.0 * a * x
            v1, v2 = j11 * v1 + b * v2, v1
            r = np.hypot(v1, v2)
            if i >= transient:
                log_sum += np.log(r)
            v1, v2 = v1 / r, v2 / r
            x, y = 1.0 - a * x * x + b * y, x
            escaped |= ~(np.abs(x) < escape_radius)
            x = np.where(escaped, 0.0, x)
            y = np.where(escaped, 0.0, y)
    lam = log_sum / n
    return np.where(escaped, np.nan, lam), escaped


# --------------------------------------------------------------------------
# cones
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeField:
    """Double cone {v : angle(v, +-center) <= half_angle}; constant unless ``center_fn`` is given."""

    center: tuple[float, float]
    half_angle: float
    center_fn: object = None

    def __post_init__(self):
        if not 0.0 < self.half_angle < math.pi / 2:
            raise InvalidParameter("cone half-angle must lie strictly between 0 and pi/2")
        c = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", tuple(c / np.linalg.norm(c)))

    def center_at(self, p) -> np.ndarray:
        if self.center_fn is None:
            return np.asarray(self.center)
        c = np.asarray(self.center_fn(p), dtype=float)
        return c / np.linalg.norm(c)


def _rotate(u: np.ndarray, ang: float) -> np.ndarray:
    c, s = math.cos(ang), math.sin(ang)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])


def _line_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Signed angle from line u to line v, in (-pi/2, pi/2]."""
    ang = math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])
    if ang > math.pi / 2:
        ang -= math.pi
    elif ang <= -math.pi / 2:
        ang += math.pi
    return ang


def _min_stretch(J: np.ndarray, u: np.ndarray, beta: float) -> float:
    """min |J v| over unit v within angle beta of u (|Jv|^2 is a sinusoid in twice the angle)."""
    M = J.T @ J
    cand = [-beta, 0.0, beta]
    # |J v(phi)|^2 = A + B cos(2 phi) + C sin(2 phi), v(phi) = rotate(u, phi)
    w = _rotate(u, math.pi / 2)
    muu, mww, muw = u @ M @ u, w @ M @ w, u @ M @ w
    B, C = 0.5 * (muu - mww), muw
    crit = 0.5 * math.atan2(C, B)
    for phi in (crit, crit + math.pi / 2, crit - math.pi / 2):
        if -beta < phi < beta:
            cand.append(phi)
    return min(float(np.linalg.norm(J @ _rotate(u, phi))) for phi in cand)


def cone_invariance_check(sys: System, cone: ConeField, sample, n: int = 1, tol: float = 1e-12) -> dict:
    """Check D_p f(cone(p)) inside cone(f(p)) along n steps from each sample point.

    Only the two boundary rays are mapped; the determinant's sign fixes which
    of the two sectors between their images is the image cone.  Inclusion is
    closed (up to ``tol``), so isometries that fix the cone pass; ``strict``
    records whether every image lay in the open cone.
    """
    if sys.dim != 2:
        raise Unsupported("cone checks are implemented for planar and toral maps")
    beta = cone.half_angle
    invariant, strict = True, True
    min_exp = math.inf
    failures = []
    for p0 in np.atleast_2d(np.asarray(sample, dtype=float)):
        x, y = float(p0[0]), float(p0[1])
        for _ in range(n):
            J = np.array(jac2(sys, x, y), dtype=float).reshape(2, 2)
            u = cone.center_at((x, y))
            x, y = step2(sys, x, y)
            u_img = cone.center_at((x, y))
            lo_img, hi_img = J @ _rotate(u, -beta), J @ _rotate(u, beta)
            a_lo, a_hi = _line_angle(u_img, lo_img), _line_angle(u_img, hi_img)
            det = float(np.linalg.det(J))
            ok = abs(a_lo) <= beta + tol and abs(a_hi) <= beta + tol
            ok = ok and (a_hi - a_lo) * det >= -tol and det != 0.0
            if not ok:
                invariant = False
                failures.append((x, y))
            if not (abs(a_lo) < beta - tol and abs(a_hi) < beta - tol):
                strict = False
            min_exp = min(min_exp, _min_stretch(J, u, beta))
    return {"invariant": invariant, "strict": strict and invariant, "min_expansion": min_exp,
            "failures": failures[:16]}


def classify_measure(est: ExponentEstimate, tol: float | None = None) -> str:
    """'hyperbolic' iff every exponent exceeds tol (default 5 / sqrt(n)) in modulus."""
    tol = 5.0 / math.sqrt(est.n) if tol is None else tol
    return "hyperbolic" if min(abs(v) for v in est.values) > tol else "has_zero_exponent"
