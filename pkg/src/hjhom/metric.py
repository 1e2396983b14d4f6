"""Lattice metric problem: minimal path cost m(t, 0, x) by value iteration.

The metric of the control formulation,
    m(t, x, y) = inf over paths from x to y in time t of integral of L,
is computed on a space-time lattice (time step dt, spatial spacing dx) by

    M(0, .) = +inf except M(0, 0) = 0,
    M(s + dt, z) = min over |z - w| <= vmax dt of
                     M(s, w) + dt L((w + z)/2 mod 1, (z - w)/dt),

i.e. midpoint rule in space, left endpoint in time.  dx must divide 1 and dt
must divide 1 so that integer space-time points are lattice points; the
per-step cost then depends on the source node only through its residue class
mod 1, which makes the cost arrays small periodic tiles.

Values are reported on the cone |x| <= C t.  The table keeps every layer (for
path backtracking) or only integer-time layers (to save memory on long
horizons).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, UnreachableError
from .legendre import LagrangianField
from .util import as_int_exact, format_float, round_half_toward_zero


@dataclass(frozen=True)
class Cone:
    """Space-time cone |x| <= speed * t (Euclidean norm in x)."""

    speed: float

    def contains(self, t, x, tol: float = 1e-9) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(t >= -tol and np.linalg.norm(x) <= self.speed * t + tol)


def default_speed_cap(lagrangian: LagrangianField, max_ratio: float,
                      c1: float | None = None, c2: float = 2.0) -> float:
    """Speed cap vmax = c1 + c2 * max|x|/t from the minimizer Lipschitz bound.

    c1 defaults to 4 sqrt(max V), generous enough that minimizers for targets
    with |x|/t <= max_ratio stay strictly inside the cap.
    """
    if c1 is None:
        c1 = 4.0 * np.sqrt(max(lagrangian.spec.potential.upper_bound(), 0.0))
    return float(c1 + c2 * max_ratio)


@dataclass
class DiscretePath:
    """Uniformly time-stepped polyline with its running cost.

    cost uses the same quadrature as the metric table (midpoint in space,
    left endpoint in time), so a backtracked minimizer's cost reproduces the
    table value exactly.
    """

    dt: float
    nodes: np.ndarray  # (n+1, d)
    cost: float
    quadrature: str = "midpoint-space/left-time"

    @property
    def duration(self) -> float:
        return self.dt * (len(self.nodes) - 1)

    def increments(self) -> np.ndarray:
        return np.diff(self.nodes, axis=0)

    def max_speed(self) -> float:
        if len(self.nodes) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(self.increments(), axis=1)) / self.dt)

    def recompute_cost(self, lagrangian: LagrangianField) -> float:
        inc = self.increments()
        mids = np.mod((self.nodes[:-1] + self.nodes[1:]) / 2.0, 1.0)
        vals = lagrangian(mids, inc / self.dt)
        return float(np.sum(self.dt * vals))


@dataclass
class MetricTable:
    """m(k dt, 0, z) for lattice z, organized per time layer.

    layers[k] is the value array over indices j in [-reach_k, reach_k]^d
    (position z = j dx); layer_times[k] = k dt for stored k.  Entries are
    +inf where unreachable.  Reported values are restricted to the cone.
    """

    dt: float
    dx: float
    vmax: float
    cone: Cone
    dimension: int
    layer_times: np.ndarray
    layers: list
    reaches: list
    provenance: dict = field(default_factory=dict)

    # -- lookups ---------------------------------------------------------

    def _layer_index(self, t: float) -> int:
        k = as_int_exact(t / self.dt, "t/dt")
        times = self.layer_times
        pos = np.searchsorted(times, k)
        if pos >= len(times) or times[pos] != k:
            raise ConfigurationError(
                f"layer t={t} not stored (mode without full layers?)")
        return int(pos)

    def value_at(self, t: float, z) -> float:
        """Exact lattice value at time t (a stored layer) and z = j dx."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        k = self._layer_index(t)
        j = np.asarray([as_int_exact(c / self.dx, "z/dx") for c in z])
        reach = self.reaches[k]
        if np.any(np.abs(j) > reach):
            return np.inf
        return float(self.layers[k][tuple(j + reach)])

    def interpolate(self, t: float, z) -> float:
        """Multilinear in space at a stored layer time; linear between layers."""
        k = t / self.dt
        kr = round(k)
        if abs(k - kr) < 1e-9:
            return self._interp_space(int(kr), z)
        k0 = int(np.floor(k))
        w = k - k0
        return (1 - w) * self._interp_space(k0, z) + w * self._interp_space(k0 + 1, z)

    def _interp_space(self, k: int, z) -> float:
        pos = np.searchsorted(self.layer_times, k)
        if pos >= len(self.layer_times) or self.layer_times[pos] != k:
            raise ConfigurationError(f"layer k={k} not stored")
        pos = int(pos)
        z = np.atleast_1d(np.asarray(z, dtype=float))
        arr = self.layers[pos]
        reach = self.reaches[pos]
        u = z / self.dx + reach
        i0 = np.floor(u).astype(int)
        w = u - i0
        d = self.dimension
        side = 2 * reach + 1
        if np.any(i0 < -1) or np.any(i0 > side - 1):
            return np.inf
        total = 0.0
        for corner in np.ndindex(*(2,) * d):
            idx = i0 + np.asarray(corner)
            wt = 1.0
            for ax in range(d):
                wt *= w[ax] if corner[ax] else 1.0 - w[ax]
            if wt == 0.0:
                continue
            if np.any(idx < 0) or np.any(idx >= side):
                return np.inf
            total += wt * arr[tuple(idx)]
        return float(total)

    def interpolate_many(self, t: float, Z: np.ndarray) -> np.ndarray:
        """Vectorized multilinear interpolation at one stored layer time.

        Z has shape (n, d) in physical coordinates; queries outside the
        reachable box return +inf (the DP value there), not a clamp.
        """
        pos = self._layer_index(t)
        arr = self.layers[pos]
        reach = self.reaches[pos]
        d = self.dimension
        Z = np.asarray(Z, dtype=float).reshape(-1, d)
        u = Z / self.dx + reach
        i0 = np.floor(u).astype(int)
        w = u - i0
        side = 2 * reach + 1
        out = np.zeros(len(Z))
        oob = np.zeros(len(Z), dtype=bool)
        for corner in np.ndindex(*(2,) * d):
            idx = i0 + np.asarray(corner)
            wt = np.ones(len(Z))
            for ax in range(d):
                wt *= w[:, ax] if corner[ax] else 1.0 - w[:, ax]
            inside = np.all((idx >= 0) & (idx < side), axis=1)
            active = (wt > 0)
            bad = active & ~inside
            oob |= bad
            take = active & inside
            if take.any():
                flat = np.ravel_multi_index([idx[take, ax] for ax in range(d)],
                                            (side,) * d)
                out[take] += wt[take] * arr.ravel()[flat]
        out[oob] = np.inf
        return out

    @property
    def horizon(self) -> float:
        return float(self.layer_times[-1] * self.dt)

    def cone_speed(self) -> float:
        return self.cone.speed

    def lipschitz_estimate(self) -> float:
        """Measured spatial Lipschitz constant of m over the final cone layer."""
        k = len(self.layer_times) - 1
        arr, reach = self.layers[k], self.reaches[k]
        t = self.layer_times[k] * self.dt
        lim = self.cone.speed * t
        worst = 0.0
        for ax in range(self.dimension):
            a = np.moveaxis(arr, ax, 0)
            with np.errstate(invalid="ignore"):
                diff = np.abs(a[1:] - a[:-1]) / self.dx
            finite = np.isfinite(diff)
            # keep only pairs inside the cone
            idxs = np.moveaxis(
                np.stack(np.meshgrid(*[np.arange(2 * reach + 1)] * self.dimension,
                                     indexing="ij")), 0, -1) - reach
            pos = idxs * self.dx
            inside = np.linalg.norm(pos, axis=-1) <= lim
            inside = np.moveaxis(inside, ax, 0)
            mask = finite & inside[1:] & inside[:-1]
            if mask.any():
                worst = max(worst, float(diff[mask].max()))
        return worst

    def integer_cone_points(self):
        """Iterate (k, z) with k integer time, z integer point, inside cone."""
        for pos, k in enumerate(self.layer_times):
            t = k * self.dt
            if abs(t - round(t)) > 1e-9 or round(t) == 0:
                continue
            reach = self.reaches[pos]
            m = int(np.floor(reach * self.dx + 1e-9))
            for j in np.ndindex(*(2 * m + 1,) * self.dimension):
                z = np.asarray(j) - m
                if np.linalg.norm(z) <= self.cone.speed * t + 1e-9:
                    yield int(round(t)), z

    def to_csv(self, path) -> None:
        """Cone-restricted export: k, z_1..z_d, value."""
        with open(path, "w") as fh:
            fh.write(
                "# schema=hjhom.metric.v1 "
                f"dt={format_float(self.dt)} dx={format_float(self.dx)} "
                f"vmax={format_float(self.vmax)} cone={format_float(self.cone.speed)} "
                f"spec={self.provenance.get('spec', '?')}\n")
            cols = ["k"] + [f"z{i+1}" for i in range(self.dimension)] + ["value"]
            fh.write(",".join(cols) + "\n")
            for pos, k in enumerate(self.layer_times):
                arr, reach = self.layers[pos], self.reaches[pos]
                t = k * self.dt
                lim = self.cone.speed * t
                for j in np.ndindex(arr.shape):
                    z = (np.asarray(j) - reach) * self.dx
                    if np.linalg.norm(z) <= lim + 1e-9 and np.isfinite(arr[j]):
                        row = [str(int(k))] + [format_float(c) for c in z]
                        row.append(format_float(arr[j]))
                        fh.write(",".join(row) + "\n")


def _offsets(dimension: int, step_radius: float) -> np.ndarray:
    """Integer vectors o with |o| <= step_radius, lexicographically sorted."""
    s = int(np.floor(step_radius + 1e-9))
    rng = np.arange(-s, s + 1)
    mesh = np.meshgrid(*[rng] * dimension, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    keep = np.linalg.norm(pts, axis=1) <= step_radius + 1e-9
    return pts[keep]


def _cost_tiles(lagrangian: LagrangianField, offsets: np.ndarray,
                big_m: int, dx: float, dt: float) -> list:
    """Per-offset cost tile over source residues r in [0, M)^d.

    tile[r] = dt * L( ((2 r + o) mod 2M) / (2M), o dx / dt ); the midpoint of
    the step from source w (residue r) to w + o dx.
    """
    d = offsets.shape[1]
    res = np.stack(np.meshgrid(*[np.arange(big_m)] * d, indexing="ij"), axis=-1)
    tiles = []
    for o in offsets:
        mid = np.mod((2 * res + o) , 2 * big_m) / (2.0 * big_m)
        v = o * dx / dt
        tiles.append(dt * lagrangian(mid, np.broadcast_to(v, mid.shape)))
    return tiles


def compute_metric_table(lagrangian: LagrangianField, horizon: float,
                         cone: Cone | None = None, dt: float = 0.25,
                         dx: float = 0.25, vmax: float = 4.0,
                         keep: str = "all") -> MetricTable:
    """Value-iterate the metric DP up to the horizon.

    keep: "all" stores every layer (needed for path backtracking);
    "integers" stores only integer-time layers (long-horizon memory saver).
    """
    d = lagrangian.dimension
    if vmax * dt < dx - 1e-12:
        raise ConfigurationError(
            f"vmax*dt = {vmax * dt} < dx = {dx}: neighbors unreachable")
    big_m = as_int_exact(1.0 / dx, "1/dx")
    per_unit = as_int_exact(1.0 / dt, "1/dt")
    n_layers = as_int_exact(horizon / dt, "horizon/dt")
    if n_layers < 1:
        raise ConfigurationError("horizon must cover at least one time step")
    if cone is None:
        cone = Cone(vmax)

    offsets = _offsets(d, vmax * dt / dx)
    if len(offsets) <= 1:
        raise ConfigurationError("empty reachable set: enlarge vmax*dt/dx")
    tiles = _cost_tiles(lagrangian, offsets, big_m, dx, dt)
    s_max = int(np.max(np.abs(offsets)))
    reach_final = s_max * n_layers

    keep_all = keep == "all"
    layer_times = [0]
    layers = [np.zeros((1,) * d)]
    reaches = [0]

    prev = layers[0]
    prev_reach = 0
    for k in range(1, n_layers + 1):
        new_reach = min(prev_reach + s_max, reach_final)
        side = 2 * new_reach + 1
        new = np.full((side,) * d, np.inf)
        # residue index arrays for the source block [-prev_reach, prev_reach]
        ax_idx = [np.mod(np.arange(-prev_reach, prev_reach + 1), big_m)] * d
        for o, tile in zip(offsets, tiles):
            cost = tile[np.ix_(*ax_idx)] if d > 1 else tile[ax_idx[0]]
            cand = prev + cost
            sl = tuple(
                slice(new_reach - prev_reach + o[ax], new_reach + prev_reach + o[ax] + 1)
                for ax in range(d))
            np.minimum(new[sl], cand, out=new[sl])
        if keep_all or (k % per_unit == 0) or k == n_layers:
            layer_times.append(k)
            layers.append(new)
            reaches.append(new_reach)
        prev, prev_reach = new, new_reach

    return MetricTable(
        dt=dt, dx=dx, vmax=vmax, cone=cone, dimension=d,
        layer_times=np.asarray(layer_times), layers=layers, reaches=reaches,
        provenance={
            "spec": lagrangian.spec.content_hash(),
            "quadrature": "midpoint-space/left-time",
            "keep": keep,
            "_tiles": tiles,
            "_offsets": offsets,
            "_lagrangian": lagrangian,
        },
    )


def extract_minimizing_path(table: MetricTable, t: float, x) -> DiscretePath:
    """Backtrack argmin choices from (t, x); ties take the lexicographically
    smallest increment.  Requires a table built with keep="all"."""
    if table.provenance.get("keep") != "all":
        raise ConfigurationError("path extraction requires keep='all' table")
    d = table.dimension
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not table.cone.contains(t, x):
        raise DomainError(f"({t}, {x}) outside the cone")
    k_final = as_int_exact(t / table.dt, "t/dt")
    j = np.asarray([as_int_exact(c / table.dx, "x/dx") for c in x])
    value = table.value_at(t, x)
    if not np.isfinite(value):
        raise UnreachableError(f"metric is +inf at ({t}, {x})")

    big_m = as_int_exact(1.0 / table.dx, "1/dx")
    offsets = table.provenance["_offsets"]
    tiles = table.provenance["_tiles"]

    nodes = [j.copy()]
    cur = j.copy()
    for k in range(k_final, 0, -1):
        arr_prev = table.layers[k - 1]
        reach_prev = table.reaches[k - 1]
        target_val = table.layers[k][tuple(cur + table.reaches[k])]
        best = None
        best_off = None
        for o, tile in zip(offsets, tiles):
            src = cur - o
            if np.any(np.abs(src) > reach_prev):
                continue
            pv = arr_prev[tuple(src + reach_prev)]
            if not np.isfinite(pv):
                continue
            r = tuple(np.mod(src, big_m)) if d > 1 else (int(np.mod(src[0], big_m)),)
            cand = pv + tile[r]
            if cand == target_val:
                best_off = o
                break
            if best is None or cand < best:
                best, best_off = cand, o
        if best_off is None:
            raise UnreachableError("backtracking found no predecessor")
        cur = cur - best_off
        nodes.append(cur.copy())
    nodes.reverse()
    pts = np.asarray(nodes, dtype=float) * table.dx
    return DiscretePath(dt=table.dt, nodes=pts, cost=float(value))


def speed_margin(table: MetricTable, targets) -> float:
    """vmax minus the largest speed used by minimizers to the given targets.

    A positive margin verifies the speed cap never binds for these targets
    (the boundary-attainment check of the cap design).
    """
    worst = 0.0
    for t, x in targets:
        path = extract_minimizing_path(table, t, x)
        worst = max(worst, path.max_speed())
    return table.vmax - worst


def round_into_cone(t: float, x, cone: Cone) -> tuple[int, np.ndarray]:
    """(ceil t, [x]) with half-ties toward 0, pulled toward the origin when
    plain rounding would exit the cone.  Requires t >= 1 and (t, x) in cone."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t < 1.0 - 1e-12:
        raise DomainError("round_into_cone requires t >= 1")
    if not cone.contains(t, x):
        raise DomainError(f"({t}, {x}) outside the cone")
    tc = int(np.ceil(t - 1e-12))
    xc = round_half_toward_zero(x)
    lim = cone.speed * tc
    for _ in range(len(xc) * 8):
        if np.linalg.norm(xc) <= lim + 1e-9:
            break
        i = int(np.argmax(np.abs(xc)))
        xc[i] -= np.sign(xc[i])
    return tc, xc.astype(int)


def metric_point(table: MetricTable, t: float, x, y) -> float:
    """m(t, x, y) reduced to the origin-based table.

    Integer x translates exactly: m(t, x, y) = m(t, 0, y - x), interpolated
    on the table.  Otherwise both endpoints are rounded to integers (ties
    toward 0, pulled into the cone) and the value at (ceil t, [y] - [x]) is
    returned, following the constant-error rounding reduction.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not table.cone.contains(t, y - x):
        raise DomainError(f"(t, y-x) = ({t}, {y - x}) outside the cone")
    xr = np.round(x)
    if np.max(np.abs(x - xr)) < 1e-9:
        return table.interpolate(t, y - xr)
    tc = int(np.ceil(t - 1e-12))
    z = round_half_toward_zero(y) - round_half_toward_zero(x)
    lim = table.cone.speed * tc
    for _ in range(len(z) * 8):
        if np.linalg.norm(z) <= lim + 1e-9:
            break
        i = int(np.argmax(np.abs(z)))
        z[i] -= np.sign(z[i])
    return table.value_at(float(tc), z)
