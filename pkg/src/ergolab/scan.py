"""Parameter scans separating attracting cycles from positive exponents.

Each grid parameter is first probed for an attracting cycle along the
critical orbit (logistic) or the orbit of the origin (Henon).  Parameters
without one get an exponent estimate from a random start drawn from the RNG
stream (seed, grid index), and are classified against the threshold
+-5/sqrt(n).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, Unsupported
from .hyperbolicity import henon_top_exponents
from .maps import System

ATTRACTING = "attracting_cycle"
POSITIVE = "positive_exponent"
UNDECIDED = "undecided"

LOG_FLOOR = math.log(1e-300)
ESCAPE_RADIUS = 1e3
GRID_CHUNK = 64


@dataclass(frozen=True)
class ScanRecord:
    parameter: float | tuple[float, float]
    classification: str
    period: int | None
    exponent: float
    n_used: int
    escaped: bool = False

    def __post_init__(self):
        if self.classification == ATTRACTING and not self.exponent < 0:
            raise InvalidParameter("attracting cycles must have negative exponent")


@dataclass(frozen=True)
class ScanResult:
    records: list
    positive_fraction: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "classification", "period", "exponent", "n_used", "escaped"])
        for r in self.records:
            par = repr(r.parameter) if np.isscalar(r.parameter) else ";".join(repr(v) for v in r.parameter)
            w.writerow([par, r.classification,
                        "" if r.period is None else r.period, repr(r.exponent), r.n_used, int(r.escaped)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"positive_fraction": self.positive_fraction,
                           "records": [r.__dict__ for r in self.records]}, sort_keys=True)


# --------------------------------------------------------------------------
# cycle detection (vectorized over parameters)
# --------------------------------------------------------------------------


def _logistic_cycles(t: np.ndarray, max_period: int, n_transient: int, tol: float):
    x = np.full(t.shape, 0.5)
    for _ in range(n_transient):
        x = t * x * (1.0 - x)
    orbit = np.empty((max_period + 1,) + t.shape)
    orbit[0] = x
    for i in range(1, max_period + 1):
        orbit[i] = t * orbit[i - 1] * (1.0 - orbit[i - 1])
    with np.errstate(divide="ignore"):
        logd = np.maximum(np.log(np.abs(t * (1.0 - 2.0 * orbit[:-1]))), LOG_FLOOR)
    period = np.zeros(t.shape, dtype=int)
    logmult = np.zeros(t.shape)
    for p in range(max_period, 0, -1):
        back = np.abs(orbit[p] - orbit[0]) < tol
        period = np.where(back, p, period)
        logmult = np.where(back, logd[:p].sum(axis=0), logmult)
    return period, logmult, np.zeros(t.shape, dtype=bool)


def _henon_cycles(a: np.ndarray, b: float, max_period: int, n_transient: int, tol: float):
    x, y = np.zeros(a.shape), np.zeros(a.shape)
    escaped = np.zeros(a.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_transient):
            x, y = 1.0 - a * x * x + b * y, x
            escaped |= ~(np.abs(x) < ESCAPE_RADIUS)
            x, y = np.where(escaped, 0.0, x), np.where(escaped, 0.0, y)
        xs = np.empty((max_period + 1,) + a.shape)
        ys = np.empty_like(xs)
        xs[0], ys[0] = x, y
        for i in range(1, max_period + 1):
            xs[i] = 1.0 - a * xs[i - 1] ** 2 + b * ys[i - 1]
            ys[i] = xs[i - 1]
    period = np.zeros(a.shape, dtype=int)
    for p in range(max_period, 0, -1):
        back = (np.abs(xs[p] - xs[0]) < tol) & (np.abs(ys[p] - ys[0]) < tol) & ~escaped
        period = np.where(back, p, period)
    logmult = np.zeros(a.shape)
    for k in np.flatnonzero(period):
        p = period.flat[k]
        M = np.eye(2)
        for i in range(p):
            M = np.array([[-2.0 * a.flat[k] * xs[i].flat[k], b], [1.0, 0.0]]) @ M
        rho = float(np.abs(np.linalg.eigvals(M)).max())
        logmult.flat[k] = max(math.log(rho), LOG_FLOOR) if rho > 0 else LOG_FLOOR
    return period, logmult, escaped


def detect_attracting_cycle(sys: System, max_period: int = 64, n_transient: int = 10_000,
                            tol_cycle: float = 1e-10) -> int | None:
    """Period of an attracting cycle reached from the probe orbit, if any.

    The orbit must return within ``tol_cycle`` after ``n_transient`` steps and
    the cycle multiplier (spectral radius for Henon) must be below 1.
    """
    period, logmult = detect_cycles(sys.family, [_scan_parameter(sys)], max_period, n_transient,
                                    tol_cycle, b=sys.params.get("b", 0.0))[:2]
    return int(period[0]) if period[0] > 0 and logmult[0] < 0 else None


def _scan_parameter(sys: System) -> float:
    if sys.family == "logistic":
        return sys.params["t"]
    if sys.family == "henon":
        return sys.params["a"]
    raise Unsupported("cycle detection is implemented for the logistic and Henon families")


def detect_cycles(family: str, params, max_period: int = 64, n_transient: int = 10_000,
                  tol_cycle: float = 1e-10, b: float = 0.0):
    """Vectorized cycle probe: (period or 0, log |multiplier|, escaped) per parameter."""
    if not 1 <= max_period <= 64:
        raise InvalidParameter("max_period must lie in [1, 64]")
    params = np.asarray(params, dtype=float)
    if family == "logistic":
        return _logistic_cycles(params, max_period, n_transient, tol_cycle)
    if family == "henon":
        return _henon_cycles(params, b, max_period, n_transient, tol_cycle)
    raise Unsupported("cycle detection is implemented for the logistic and Henon families")


# --------------------------------------------------------------------------
# exponents and scans
# --------------------------------------------------------------------------


def logistic_exponents(t: np.ndarray, x0: np.ndarray, n: int, n_transient: int) -> np.ndarray:
    """(1/n) sum log |f_t'(x_i)| after a transient, vectorized over t."""
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(n_transient):
        x = t * x * (1.0 - x)
    total = np.zeros(t.shape)
    with np.errstate(divide="ignore"):
        for _ in range(n):
            total += np.maximum(np.log(np.abs(t * (1.0 - 2.0 * x))), LOG_FLOOR)
            x = t * x * (1.0 - x)
    return total / n


def _starts(family: str, indices: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.array([np.random.default_rng([seed, int(i)]).random(2) for i in indices]).reshape(-1, 2)
    if family == "logistic":
        # interior point of (0, 1) avoiding the fixed point 0
        return 0.05 + 0.9 * u[:, 0], None
    return -0.1 + 0.2 * u[:, 0], -0.1 + 0.2 * u[:, 1]


def _classify(period, logmult, escaped, expo, n: int, threshold: float):
    if escaped:
        return UNDECIDED, None, math.nan
    if period > 0 and logmult < 0:
        return ATTRACTING, int(period), logmult / period
    if expo > threshold:
        return POSITIVE, None, expo
    return UNDECIDED, None, expo


def _scan_chunk(family, params, indices, b, n_transient, n_measure, seed, max_period, tol_cycle):
    period, logmult, escaped = detect_cycles(family, params, max_period, n_transient, tol_cycle, b)
    need = ~((period > 0) & (logmult < 0)) & ~escaped
    expo = np.full(params.shape, math.nan)
    if need.any():
        x0, y0 = _starts(family, indices[need], seed)
        if family == "logistic":
            expo[need] = logistic_exponents(params[need], x0, n_measure, n_transient)
        else:
            lam, esc = henon_top_exponents(params[need], b, x0, y0, n_measure, n_transient, ESCAPE_RADIUS)
            expo[need] = lam
            escaped[np.flatnonzero(need)[esc]] = True
    return period, logmult, escaped, expo


def scan_parameters(family: str, params, b: float = 0.0, n_transient: int = 10_000,
                    n_measure: int = 100_000, seed: int = 0, threads: int = 1, max_period: int = 64,
                    tol_cycle: float = 1e-10) -> ScanResult:
    """Classify an explicit list of t (logistic) or a (Henon, at fixed b) values."""
    if family not in ("logistic", "henon"):
        raise Unsupported("scans are implemented for the logistic and Henon families")
    params = np.asarray(params, dtype=float)
    idx = np.arange(params.size)
    chunks = [(params[i:i + GRID_CHUNK], idx[i:i + GRID_CHUNK]) for i in range(0, params.size, GRID_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        parts = list(ex.map(lambda c: _scan_chunk(family, c[0], c[1], b, n_transient, n_measure, seed,
                                                  max_period, tol_cycle), chunks))
    period, logmult, escaped, expo = (np.concatenate([p[k] for p in parts]) for k in range(4))
    threshold = 5.0 / math.sqrt(n_measure)
    records = []
    for i, par in enumerate(params):
        cls, per, ex_ = _classify(period[i], logmult[i], escaped[i], expo[i], n_measure, threshold)
        parameter = float(par) if family == "logistic" else (float(par), float(b))
        records.append(ScanRecord(parameter, cls, per, float(ex_),
                                  n_transient + (max_period if cls == ATTRACTING else n_measure),
                                  bool(escaped[i])))
    frac = sum(r.classification == POSITIVE for r in records) / len(records)
    return ScanResult(records, frac)


def scan_logistic(t_min: float, t_max: float, grid_count: int, n_transient: int = 10_000,
                  n_measure: int = 100_000, seed: int = 0, threads: int = 1, max_period: int = 64,
                  tol_cycle: float = 1e-10) -> ScanResult:
    """Classify ``grid_count`` evenly spaced t in [t_min, t_max]."""
    if not 0 < t_min < t_max <= 4:
        raise InvalidParameter("need 0 < t_min < t_max <= 4")
    ts = np.linspace(t_min, t_max, grid_count)
    return scan_parameters("logistic", ts, 0.0, n_transient, n_measure, seed, threads, max_period, tol_cycle)


def scan_henon(a_min: float, a_max: float, grid_count: int, b: float = 0.3, n_transient: int = 10_000,
               n_measure: int = 100_000, seed: int = 0, threads: int = 1, max_period: int = 64,
               tol_cycle: float = 1e-10) -> ScanResult:
    """Classify ``grid_count`` evenly spaced a in [a_min, a_max] at fixed b."""
    if not abs(b) < 1:
        raise InvalidParameter("need |b| < 1")
    if not a_min <= a_max:
        raise InvalidParameter("need a_min <= a_max")
    As = np.linspace(a_min, a_max, grid_count)
    return scan_parameters("henon", As, float(b), n_transient, n_measure, seed, threads, max_period, tol_cycle)


def henon_parameter_for(t):
    """a with x -> 1 - a x^2 affinely conjugate to u -> t u (1 - u) (x = 2(2u - 1)/(t - 2))."""
    t = np.asarray(t, dtype=float)
    return t * (t - 2.0) / 4.0
