"""Planar billiards on tables bounded by straight segments and circular arcs.

Boundary coordinates: ``s`` is arclength along the concatenated components
and ``theta`` in (0, pi) is the angle of the outgoing direction measured from
the positive tangent, so theta = pi/2 is the inward normal.  Each loop is
oriented with the table interior on its left: counter-clockwise arcs are
focusing walls (disk, stadium caps), clockwise arcs are dispersing scatterers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (CornerHit, DegenerateComponent, InvalidParameter, NoIntersection, OpenBoundary,
                     Singularity, TangentialHit)

TOL_TANGENT = 1e-9
TOL_CORNER = 1e-9
CLOSE_TOL = 1e-12
TAU_MIN = 1e-12
DISC_GUARD = 1e-14
SAMPLE_CHUNK = 8192

OK, TANGENTIAL, CORNER, MISSED = 0, 1, 2, 3
_ERRORS = {TANGENTIAL: TangentialHit, CORNER: CornerHit, MISSED: NoIntersection}


@dataclass(frozen=True)
class BoundaryComponent:
    """A segment from ``start`` to ``end``, or an arc.

    Arcs run from ``start_angle`` through ``span`` radians about ``center``,
    counter-clockwise when orientation = +1 and clockwise when -1.
    """

    kind: str
    start: tuple[float, float] | None = None
    end: tuple[float, float] | None = None
    center: tuple[float, float] | None = None
    radius: float = 0.0
    start_angle: float = 0.0
    span: float = 0.0
    orientation: int = 1

    @classmethod
    def segment(cls, a, b) -> "BoundaryComponent":
        return cls("segment", start=tuple(map(float, a)), end=tuple(map(float, b)))

    @classmethod
    def arc(cls, center, radius, start_angle=0.0, span=2 * math.pi, orientation=1) -> "BoundaryComponent":
        return cls("arc", center=tuple(map(float, center)), radius=float(radius),
                   start_angle=float(start_angle), span=float(span), orientation=int(orientation))

    def __post_init__(self):
        if self.kind == "segment":
            if self.start is None or self.end is None:
                raise InvalidParameter("segment needs start and end")
            if math.dist(self.start, self.end) == 0.0:
                raise DegenerateComponent("segment endpoints coincide")
        elif self.kind == "arc":
            if self.center is None:
                raise InvalidParameter("arc needs a center")
            if not self.radius > 0:
                raise DegenerateComponent("arc radius must be positive")
            if not 0 < self.span <= 2 * math.pi + 1e-15:
                raise DegenerateComponent("arc span must lie in (0, 2 pi]")
            if self.orientation not in (1, -1):
                raise InvalidParameter("arc orientation must be +1 or -1")
        else:
            raise InvalidParameter(f"unknown component kind {self.kind!r}")

    @property
    def length(self) -> float:
        if self.kind == "segment":
            return math.dist(self.start, self.end)
        return self.radius * self.span

    @property
    def is_full_circle(self) -> bool:
        return self.kind == "arc" and self.span >= 2 * math.pi - 1e-15

    def point(self, u):
        """Point at local arclength u."""
        u = np.asarray(u, dtype=float)
        if self.kind == "segment":
            a, b = np.asarray(self.start), np.asarray(self.end)
            return a + (u / self.length)[..., None] * (b - a)
        phi = self.start_angle + self.orientation * u / self.radius
        c = np.asarray(self.center)
        return c + self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def tangent(self, u):
        """Unit tangent in the direction of increasing arclength."""
        u = np.asarray(u, dtype=float)
        if self.kind == "segment":
            a, b = np.asarray(self.start), np.asarray(self.end)
            return np.broadcast_to((b - a) / self.length, u.shape + (2,))
        phi = self.start_angle + self.orientation * u / self.radius
        return self.orientation * np.stack([-np.sin(phi), np.cos(phi)], axis=-1)

    def to_dict(self) -> dict:
        if self.kind == "segment":
            return {"kind": "segment", "start": list(self.start), "end": list(self.end)}
        return {"kind": "arc", "center": list(self.center), "radius": self.radius,
                "start_angle": self.start_angle, "span": self.span, "orientation": self.orientation}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryComponent":
        if d.get("kind") == "segment":
            return cls.segment(d["start"], d["end"])
        if d.get("kind") == "arc":
            o = d.get("orientation", 1)
            o = {"focusing": 1, "dispersing": -1}.get(o, o)
            return cls.arc(d["center"], d["radius"], d.get("start_angle", 0.0),
                           d.get("span", 2 * math.pi), o)
        raise InvalidParameter(f"unknown component kind {d.get('kind')!r}")


def _inward(t: np.ndarray) -> np.ndarray:
    return np.stack([-t[..., 1], t[..., 0]], axis=-1)


@dataclass(frozen=True, eq=False)
class BilliardTable:
    components: tuple[BoundaryComponent, ...]
    offsets: np.ndarray
    corners: np.ndarray
    loops: tuple[tuple[int, ...], ...]
    name: str = "custom"
    corner_loops: np.ndarray = None

    @property
    def length(self) -> float:
        return float(self.offsets[-1])

    @property
    def diameter(self) -> float:
        pts = np.concatenate([c.point(np.linspace(0, c.length, 257)) for c in self.components])
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def locate(self, s):
        """(component index, local arclength) for boundary coordinate s (taken mod length)."""
        s = np.mod(np.asarray(s, dtype=float), self.length)
        idx = np.clip(np.searchsorted(self.offsets, s, side="right") - 1, 0, len(self.components) - 1)
        return idx, s - self.offsets[idx]

    def frame(self, s):
        """Position, unit tangent and inward unit normal at s."""
        idx, u = self.locate(s)
        idx, u = np.atleast_1d(idx), np.atleast_1d(u)
        pos = np.empty(idx.shape + (2,))
        tan = np.empty(idx.shape + (2,))
        for j, comp in enumerate(self.components):
            m = idx == j
            if m.any():
                pos[m] = comp.point(u[m])
                tan[m] = comp.tangent(u[m])
        return pos, tan, _inward(tan)

    @property
    def component_loops(self) -> np.ndarray:
        out = np.empty(len(self.components), dtype=int)
        for k, loop in enumerate(self.loops):
            out[list(loop)] = k
        return out

    def near_corner(self, s) -> np.ndarray:
        """True within TOL_CORNER arclength of a corner on the same loop."""
        s = np.mod(np.asarray(s, dtype=float), self.length)
        if self.corners.size == 0:
            return np.zeros(np.shape(s), dtype=bool)
        loop = self.component_loops[self.locate(s)[0]]
        d = np.abs(s[..., None] - self.corners)
        same = loop[..., None] == self.corner_loops
        return ((d < TOL_CORNER) & same).any(axis=-1)

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "components": [c.to_dict() for c in self.components]},
                          sort_keys=True)


def _winding(points: np.ndarray, probe: np.ndarray) -> float:
    v = points - probe
    ang = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(ang)
    d = (d + math.pi) % (2 * math.pi) - math.pi
    return float(d.sum() / (2 * math.pi))


def make_table(components, name: str = "custom") -> BilliardTable:
    """Validate components, group them into closed loops and register corners.

    Consecutive components must join within 1e-12; a loop closes when a
    component ends at the start of the loop's first component.  Junctions
    where the tangent jumps are corners.  The interior must lie to the left
    of every loop, checked with the winding number of a probe point.
    """
    comps = tuple(c if isinstance(c, BoundaryComponent) else BoundaryComponent.from_dict(c)
                  for c in components)
    if not comps:
        raise InvalidParameter("a table needs at least one boundary component")
    lengths = np.array([c.length for c in comps])
    if np.any(lengths <= 0):
        raise DegenerateComponent("zero-length component")
    offsets = np.concatenate([[0.0], np.cumsum(lengths)])
    loops, corners, corner_loops, current = [], [], [], [0]
    for i in range(len(comps)):
        comp = comps[i]
        end = comp.point(comp.length)
        first = comps[current[0]]
        closes = np.linalg.norm(end - first.point(0.0)) <= CLOSE_TOL
        if closes:
            nxt, junction = current[0], offsets[current[0]]
        elif i + 1 < len(comps) and np.linalg.norm(end - comps[i + 1].point(0.0)) <= CLOSE_TOL:
            nxt, junction = i + 1, offsets[i + 1]
        else:
            gap = np.linalg.norm(end - (comps[i + 1].point(0.0) if i + 1 < len(comps) else first.point(0.0)))
            raise OpenBoundary(f"component {i} leaves a gap of {gap:.3g}")
        t_out = comp.tangent(comp.length)
        t_in = comps[nxt].tangent(0.0)
        if abs(float(t_out[0] * t_in[1] - t_out[1] * t_in[0])) > 1e-9 or float(np.dot(t_out, t_in)) < 0:
            # a loop's closing corner sits at both ends of its arclength range
            new = [junction, offsets[i + 1]] if closes else [junction]
            corners.extend(new)
            corner_loops.extend([len(loops)] * len(new))
        if closes:
            loops.append(tuple(current))
            current = [i + 1]
        else:
            current.append(i + 1)
    order = np.argsort(corners, kind="stable")
    table = BilliardTable(comps, offsets, np.array(corners, dtype=float)[order], tuple(loops), name,
                          np.array(corner_loops, dtype=int)[order])
    _check_interior(table)
    return table


def _check_interior(table: BilliardTable) -> None:
    comp = table.components[0]
    u = 0.5 * comp.length
    p, t = comp.point(u), comp.tangent(u)
    probe = p + 1e-6 * max(table.diameter, 1.0) * _inward(t)
    total = 0.0
    for loop in table.loops:
        pts = np.concatenate([table.components[j].point(np.linspace(0, table.components[j].length, 257))
                              for j in loop])
        total += _winding(pts, probe)
    if abs(total - 1.0) > 1e-6:
        raise InvalidParameter("boundary orientation does not enclose a nonempty interior on its left")


# --------------------------------------------------------------------------
# built-in tables
# --------------------------------------------------------------------------


def _square_components():
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    return [BoundaryComponent.segment(corners[i], corners[(i + 1) % 4]) for i in range(4)]


def disk(radius: float = 1.0) -> BilliardTable:
    return make_table([BoundaryComponent.arc((0.0, 0.0), radius)], "disk")


def square() -> BilliardTable:
    return make_table(_square_components(), "square")


def sinai(r: float = 0.25) -> BilliardTable:
    """Unit square with a dispersing circular scatterer of radius r at its center."""
    if not 0 < r < 0.5:
        raise InvalidParameter("scatterer radius must lie in (0, 0.5)")
    comps = _square_components() + [BoundaryComponent.arc((0.5, 0.5), r, 0.0, 2 * math.pi, -1)]
    return make_table(comps, f"sinai:{r!r}")


def stadium(l: float = 1.0, r: float = 0.5) -> BilliardTable:
    """Two semicircular caps of radius r joined by parallel segments of length l."""
    if not (l > 0 and r > 0):
        raise InvalidParameter("stadium needs l > 0 and r > 0")
    comps = [
        BoundaryComponent.segment((0.0, 0.0), (l, 0.0)),
        BoundaryComponent.arc((l, r), r, -math.pi / 2, math.pi, 1),
        BoundaryComponent.segment((l, 2 * r), (0.0, 2 * r)),
        BoundaryComponent.arc((0.0, r), r, math.pi / 2, math.pi, 1),
    ]
    return make_table(comps, f"stadium:{l!r},{r!r}")


def table_from_spec(spec: str) -> BilliardTable:
    """Parse ``disk``, ``square``, ``sinai:r``, ``stadium:l,r`` or a JSON document."""
    spec = spec.strip()
    if spec.startswith("{"):
        d = json.loads(spec)
        return make_table(d["components"], d.get("name", "custom"))
    name, _, args = spec.partition(":")
    vals = [float(v) for v in args.split(",") if v.strip()]
    builders = {"disk": disk, "square": square, "sinai": sinai, "stadium": stadium}
    if name not in builders:
        raise InvalidParameter(f"unknown table {name!r}; built-ins: {sorted(builders)}")
    return builders[name](*vals)


# --------------------------------------------------------------------------
# dynamics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BilliardState:
    s: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and math.isfinite(self.theta)):
            raise InvalidParameter("state must be finite")
        if not 0.0 < self.theta < math.pi:
            raise InvalidParameter("theta must lie strictly inside (0, pi)")


def _ray_hits(table: BilliardTable, pos, d, src):
    """Smallest positive ray parameter per component, shape (n, components)."""
    n = pos.shape[0]
    taus = np.full((n, len(table.components)), np.inf)
    locs = np.zeros_like(taus)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j, c in enumerate(table.components):
            if c.kind == "segment":
                a, b = np.asarray(c.start), np.asarray(c.end)
                e = b - a
                w = a - pos
                den = d[:, 0] * e[1] - d[:, 1] * e[0]
                tau = (w[:, 0] * e[1] - w[:, 1] * e[0]) / den
                sig = (w[:, 0] * d[:, 1] - w[:, 1] * d[:, 0]) / den
                ok = (np.abs(den) > 1e-300) & (tau > TAU_MIN) & (sig >= -CLOSE_TOL) & (sig <= 1 + CLOSE_TOL)
                ok &= src != j
                taus[:, j] = np.where(ok, tau, np.inf)
                locs[:, j] = np.clip(sig, 0.0, 1.0) * c.length
                continue
            cc = np.asarray(c.center)
            w = pos - cc
            bq = (d * w).sum(1)
            cq = (w * w).sum(1) - c.radius ** 2
            disc = bq * bq - cq
            real = disc >= -DISC_GUARD * np.maximum(bq * bq, c.radius ** 2)
            root = np.sqrt(np.maximum(disc, 0.0))
            # leaving this arc: 0 is one root, the other is -2 b
            own = src == j
            cand = np.stack([np.where(own, -2.0 * bq, -bq - root), np.where(own, np.inf, -bq + root)], 1)
            cand = np.where(real[:, None] & (cand > TAU_MIN), cand, np.inf)
            best = np.full(n, np.inf)
            best_u = np.zeros(n)
            for k in (1, 0):
                t = cand[:, k]
                hit = pos + np.where(np.isfinite(t), t, 0.0)[:, None] * d
                phi = np.arctan2(hit[:, 1] - cc[1], hit[:, 0] - cc[0])
                rel = np.mod(c.orientation * (phi - c.start_angle), 2 * math.pi)
                if not c.is_full_circle:
                    rel = np.where(rel > 2 * math.pi - CLOSE_TOL / c.radius, 0.0, rel)
                    inside = rel <= c.span + CLOSE_TOL / c.radius
                else:
                    inside = np.ones(n, dtype=bool)
                take = np.isfinite(t) & inside & (t <= best)
                best = np.where(take, t, best)
                best_u = np.where(take, np.minimum(rel, c.span) * c.radius, best_u)
            taus[:, j] = best
            locs[:, j] = best_u
    return taus, locs


def step_arrays(table: BilliardTable, s, theta):
    """One bounce for arrays of states.

    Returns (s_next, theta_next, flight, component, status) where status is
    0 for a regular bounce, 1 tangential impact, 2 corner impact, 3 no hit.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    src, _ = table.locate(s)
    src = np.atleast_1d(src)
    pos, tan, nor = table.frame(s)
    d = np.cos(theta)[:, None] * tan + np.sin(theta)[:, None] * nor
    taus, locs = _ray_hits(table, pos, d, src)
    j = np.argmin(taus, axis=1)
    rows = np.arange(s.size)
    flight = taus[rows, j]
    status = np.zeros(s.size, dtype=np.int8)
    missed = ~np.isfinite(flight)
    status[missed] = MISSED
    s_new = np.mod(table.offsets[j] + locs[rows, j], table.length)
    _, t2, n2 = table.frame(s_new)
    dn = (d * n2).sum(1)
    dt = (d * t2).sum(1)
    theta_new = np.arctan2(-dn, dt)
    # a chord of a circle meets it at equal angles at both ends
    is_arc = np.array([c.kind == "arc" for c in table.components])
    same_arc = (j == src) & is_arc[j]
    theta_new = np.where(same_arc, theta, theta_new)
    status[(status == OK) & (np.abs(dn) < TOL_TANGENT)] = TANGENTIAL
    status[(status == OK) & table.near_corner(s_new)] = CORNER
    theta_new = np.where(status == OK, theta_new, np.nan)
    return s_new, theta_new, np.where(missed, np.nan, flight), j, status


@dataclass(frozen=True)
class StepResult:
    next: BilliardState
    flight_length: float
    hit_component: int


def billiard_step(table: BilliardTable, state: BilliardState, step: int = 1) -> StepResult:
    """Single bounce; raises TangentialHit / CornerHit / NoIntersection at singular impacts."""
    if table.near_corner(state.s).any():
        raise CornerHit(f"state starts at a corner (s = {state.s})", step=step - 1)
    s, th, fl, j, st = step_arrays(table, state.s, state.theta)
    if st[0] != OK:
        raise _ERRORS[int(st[0])](f"singular impact at s = {s[0]:.12g}", step=step)
    th0 = float(th[0])
    if not 0.0 < th0 < math.pi:
        raise TangentialHit(f"outgoing angle {th0} is tangential", step=step)
    return StepResult(BilliardState(float(s[0]), th0), float(fl[0]), int(j[0]))


@dataclass(frozen=True)
class BilliardOrbit:
    states: list
    flights: list
    components: list
    singular_stop: Singularity | None = None

    @property
    def stop_step(self) -> int | None:
        return None if self.singular_stop is None else self.singular_stop.step

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "s", "theta", "flight_length", "component"])
        for i, st in enumerate(self.states):
            fl = "" if i == 0 else repr(self.flights[i - 1])
            comp = "" if i == 0 else self.components[i - 1]
            w.writerow([i, repr(st.s), repr(st.theta), fl, comp])
        return buf.getvalue()


def billiard_orbit(table: BilliardTable, state: BilliardState, n: int) -> BilliardOrbit:
    """Iterate up to n bounces; a singularity ends the orbit and is reported, not raised."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    states, flights, comps = [state], [], []
    stop = None
    for k in range(1, n + 1):
        try:
            r = billiard_step(table, states[-1], k)
        except Singularity as exc:
            stop = exc
            break
        states.append(r.next)
        flights.append(r.flight_length)
        comps.append(r.hit_component)
    return BilliardOrbit(states, flights, comps, stop)


def reverse(state: BilliardState) -> BilliardState:
    """Time reversal (s, theta) -> (s, pi - theta)."""
    return BilliardState(state.s, math.pi - state.theta)


# --------------------------------------------------------------------------
# invariance of sin(theta) ds dtheta
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InvarianceReport:
    max_cell_drift: float
    max_drift_over_noise: float
    cells_beyond_3_noise: int
    max_s_marginal_drift: float
    homogeneity_pvalue: float
    loss_fraction: float
    n_samples: int
    n_steps: int
    bins: int
    seed: int

    @property
    def valid(self) -> bool:
        return self.loss_fraction <= 0.01

    @property
    def within_noise(self) -> bool:
        return self.cells_beyond_3_noise == 0

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d.update(valid=self.valid, within_noise=self.within_noise)
        return json.dumps(d, sort_keys=True)


def sample_invariant(table: BilliardTable, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw from (1/2L) sin(theta) ds dtheta by inverse CDF in theta."""
    s = rng.random(n) * table.length
    theta = np.arccos(1.0 - 2.0 * rng.random(n))
    return s, theta


def _push_chunk(table: BilliardTable, n: int, n_steps: int, seed: int, index: int):
    rng = np.random.default_rng([seed, index])
    s0, th0 = sample_invariant(table, n, rng)
    s, th = s0.copy(), th0.copy()
    alive = (th0 > 0) & (th0 < math.pi) & ~table.near_corner(s0)
    for _ in range(n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        sn, tn, _, _, st = step_arrays(table, s[idx], th[idx])
        ok = (st == OK) & (tn > 0) & (tn < math.pi)
        alive[idx[~ok]] = False
        s[idx[ok]], th[idx[ok]] = sn[ok], tn[ok]
    return s0, th0, s, th, alive


def invariance_check(table: BilliardTable, n_samples: int, n_steps: int, seed: int = 0,
                     threads: int = 1, bins: int = 32) -> InvarianceReport:
    """Compare (s, theta) histograms of sin(theta)-distributed samples before and after n_steps bounces.

    Cell masses are fractions of the respective sample sets; the per-cell
    noise level sqrt(p (1 - p) / N) uses the initial fractions p.  Samples
    are drawn in fixed chunks from RNG streams (seed, chunk), so the report
    does not depend on ``threads``.
    """
    if n_samples < 1000:
        raise InvalidParameter("invariance checks need at least 10^3 samples")
    if n_steps < 0:
        raise InvalidParameter("n_steps must be nonnegative")
    sizes = [min(SAMPLE_CHUNK, n_samples - i) for i in range(0, n_samples, SAMPLE_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        parts = list(ex.map(lambda a: _push_chunk(table, a[1], n_steps, seed, a[0]), enumerate(sizes)))
    s0, th0, s1, th1, alive = (np.concatenate([p[k] for p in parts]) for k in range(5))
    rng_s, rng_t = (0.0, table.length), (0.0, math.pi)
    h0, _, _ = np.histogram2d(s0, th0, bins=bins, range=(rng_s, rng_t))
    h1, _, _ = np.histogram2d(s1[alive], th1[alive], bins=bins, range=(rng_s, rng_t))
    p0 = h0 / n_samples
    p1 = h1 / max(1, int(alive.sum()))
    drift = np.abs(p1 - p0)
    noise = np.sqrt(p0 * (1.0 - p0) / n_samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(noise > 0, drift / noise, np.where(drift > 0, np.inf, 0.0))
    marg = np.abs(p1.sum(1) - p0.sum(1))
    return InvarianceReport(float(drift.max()), float(ratio.max()), int((ratio > 3.0).sum()),
                            float(marg.max()), _homogeneity_pvalue(h0, h1), float(1.0 - alive.mean()),
                            n_samples, n_steps, bins, seed)


def _homogeneity_pvalue(h0: np.ndarray, h1: np.ndarray) -> float:
    """Chi-square two-sample homogeneity p-value over the occupied cells."""
    keep = (h0 + h1).ravel() > 0
    if keep.sum() < 2:
        return 1.0
    table = np.stack([h0.ravel()[keep], h1.ravel()[keep]])
    return float(stats.chi2_contingency(table, correction=False)[1])


def billiard_lyapunov(table: BilliardTable, state: BilliardState, n: int, delta: float = 1e-8) -> float:
    """Top exponent per bounce from a twin orbit renormalized to distance delta after every step."""
    a = np.array([state.s, state.theta])
    b = a + np.array([delta, delta]) / math.sqrt(2)
    total = 0.0
    L = table.length
    for k in range(1, n + 1):
        s, th, _, _, st = step_arrays(table, [a[0], b[0]], [a[1], b[1]])
        if np.any(st != OK):
            raise _ERRORS[int(st[st != OK][0])]("singular impact on a twin orbit", step=k)
        a, b = np.array([s[0], th[0]]), np.array([s[1], th[1]])
        diff = b - a
        diff[0] = (diff[0] + L / 2) % L - L / 2
        dist = float(np.hypot(*diff))
        total += math.log(dist / delta)
        b = a + diff * (delta / dist)
    return total / n
