"""Homogenized quantities: the scaled metric limit, L-bar and H-bar.

The homogenized metric along a ray is the limit of n^{-1} m(n t, 0, n x)
over a doubling sequence of n.  The effective Lagrangian is sampled as
L-bar(v) = limit of n^{-1} m(n, 0, n v) (positive 1-homogeneity of the limit
makes this the t = 1 slice), and the effective Hamiltonian is its conjugate.
Two independent oracles cross-check H-bar: a long-horizon torus DP for the
shifted-momentum cell problem, and, in one dimension, quadrature plus
bisection on the classical flat-piece formula |p| = integral sqrt(Hbar + V).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import ConfigurationError, DomainError
from .hamiltonian import FAMILY_QUADRATIC, HamiltonianSpec
from .legendre import (
    VELOCITY_DOMAIN,
    ConvexFunctionTable,
    LagrangianField,
    legendre_transform,
)
from .metric import MetricTable, compute_metric_table, default_speed_cap
from .util import format_float


@dataclass
class EffectiveMetricResult:
    """Scaling-limit estimate along one ray."""

    limit: float
    ns: list
    gs: list
    flagged: bool = False

    @property
    def gaps(self) -> np.ndarray:
        return np.asarray(self.gs) - self.limit


def effective_metric(table, t: float, x, n_max: int) -> EffectiveMetricResult:
    """g_n = n^{-1} m(n t, 0, n x) for doubling n, with the two-level
    Richardson extrapolant 2 g_{2n} - g_n as the limit.

    ``table`` is a MetricTable or a callable horizon -> MetricTable.  If the
    available horizon cannot reach n_max, a partial result is returned with
    ``flagged`` set.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if callable(table):
        table = table(n_max * t)
    if not table.cone.contains(t, x):
        raise DomainError(f"({t}, {x}) outside the table cone")
    ns = []
    n = 1
    flagged = False
    while n <= n_max:
        if n * t > table.horizon + 1e-9:
            flagged = True
            break
        ns.append(n)
        n *= 2
    if not ns:
        raise ConfigurationError("table horizon does not even cover n = 1")
    gs = [table.interpolate(n * t, n * x) / n for n in ns]
    if len(gs) >= 2:
        limit = 2.0 * gs[-1] - gs[-2]
    else:
        limit = gs[-1]
        flagged = True
    return EffectiveMetricResult(limit=float(limit), ns=ns, gs=gs, flagged=flagged)


@dataclass
class EffectiveModel:
    """Homogenized Lagrangian / Hamiltonian tables with ray diagnostics."""

    lagrangian_table: ConvexFunctionTable
    hamiltonian_table: ConvexFunctionTable
    diagnostics: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def lagrangian_bar(self, v) -> float:
        val, clamped = self.lagrangian_table.interpolate(np.atleast_1d(v))
        if np.any(clamped):
            raise DomainError("velocity outside the effective table box")
        return float(val) if np.ndim(val) == 0 else val

    def hamiltonian_bar(self, p) -> float:
        """Exact grid conjugate max_v p . v - Lbar(v) at an arbitrary p."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        mesh = np.meshgrid(*self.lagrangian_table.axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        return float(np.max(nodes @ p - self.lagrangian_table.values.ravel()))

    def flat_piece_radius_estimate(self) -> float:
        """Subderivative of Lbar at v = 0 from chord slopes (d = 1).

        Hbar is flat (= -Lbar(0)) exactly for |p| below this value; chords of
        a convex table approach the corner slope from above as the grid
        refines.
        """
        if self.lagrangian_table.dimension != 1:
            raise DomainError("flat-piece estimate implemented for d = 1")
        vs = self.lagrangian_table.axes[0]
        lv = self.lagrangian_table.values
        i0 = int(np.argmin(np.abs(vs)))
        chords = [(lv[i] - lv[i0]) / abs(vs[i] - vs[i0])
                  for i in range(len(vs)) if vs[i] > vs[i0]]
        return float(min(chords))

    def to_csv(self, lbar_path, hbar_path, diag_path=None) -> None:
        self.lagrangian_table.to_csv(lbar_path)
        self.hamiltonian_table.to_csv(hbar_path)
        if diag_path is not None:
            with open(diag_path, "w") as fh:
                d = self.lagrangian_table.dimension
                fh.write("# schema=hjhom.effective-diagnostics.v1\n")
                cols = [f"v{i+1}" for i in range(d)] + ["n", "g_n", "gap"]
                fh.write(",".join(cols) + "\n")
                for rec in self.diagnostics:
                    for n, g in zip(rec["ns"], rec["gs"]):
                        row = [format_float(c) for c in rec["v"]]
                        row += [str(n), format_float(g),
                                format_float(g - rec["limit"])]
                        fh.write(",".join(row) + "\n")


def _rational_scale(v: np.ndarray, max_denominator: int) -> tuple[int, np.ndarray]:
    """Smallest b <= max_denominator with b v (nearly) integer, plus b v."""
    for b in range(1, max_denominator + 1):
        scaled = b * v
        if np.max(np.abs(scaled - np.round(scaled))) <= 1e-9:
            return b, np.round(scaled)
    # fall back to the best approximation by bounded-denominator rationals
    best_b, best_err = 1, np.inf
    for b in range(1, max_denominator + 1):
        err = np.max(np.abs(b * v - np.round(b * v)))
        if err < best_err - 1e-15:
            best_b, best_err = b, err
    return best_b, np.round(best_b * v)


def build_effective_model(lagrangian: LagrangianField,
                          v_box_half: float, v_step: float, n_max: int,
                          dt: float, dx: float, vmax: float | None = None,
                          p_box_half: float | None = None, p_step: float = 0.125,
                          max_denominator: int = 8,
                          table: MetricTable | None = None) -> EffectiveModel:
    """Sample Lbar(v) on a symmetric velocity grid and conjugate it to Hbar.

    One metric table with horizon n_max serves every velocity: the ray for v
    is first scaled by the denominator b of v (so targets are integer points),
    then read at n = b, 2b, 4b, ... <= n_max.  Velocities whose doubling
    sequence has fewer than two levels are flagged in the diagnostics.
    """
    d = lagrangian.dimension
    half_steps = int(round(v_box_half / v_step))
    axis = np.arange(-half_steps, half_steps + 1) * v_step
    v_axes = (axis,) * d
    if vmax is None:
        vmax = default_speed_cap(lagrangian, float(np.linalg.norm([v_box_half] * d)))
    if table is None:
        table = compute_metric_table(lagrangian, horizon=float(n_max), dt=dt, dx=dx,
                                     vmax=vmax, keep="integers")
    elif table.horizon + 1e-9 < n_max:
        raise ConfigurationError(
            f"supplied table horizon {table.horizon} < n_max = {n_max}")

    values = np.empty((len(axis),) * d)
    diagnostics = []
    for idx in np.ndindex(values.shape):
        v = np.asarray([axis[i] for i in idx])
        b, bv = _rational_scale(v, max_denominator)
        res = effective_metric(table, float(b), bv, n_max // b if b <= n_max else 1)
        lbar = res.limit / b
        values[idx] = lbar
        diagnostics.append({
            "v": v, "denominator": b, "ns": [n * b for n in res.ns],
            "gs": [g / b for g in res.gs], "limit": lbar,
            "flagged": res.flagged or (n_max // b) < 2,
        })
    ltab = ConvexFunctionTable(v_axes, values, VELOCITY_DOMAIN)
    if p_box_half is None:
        p_box_half = v_box_half / 2.0 + 1.0
    p_n = 2 * int(round(p_box_half / p_step)) + 1
    htab = legendre_transform(ltab, [(-p_box_half, p_box_half)] * d, p_n)
    return EffectiveModel(
        lagrangian_table=ltab, hamiltonian_table=htab, diagnostics=diagnostics,
        provenance={
            "spec": lagrangian.spec.content_hash(), "n_max": n_max,
            "dt": dt, "dx": dx, "vmax": vmax, "v_step": v_step,
            "v_box_half": v_box_half, "max_denominator": max_denominator,
            "shift": lagrangian.spec.normalization_shift,
        },
    )


def cell_problem_oracle(spec_or_lagrangian, p, t_long: float = 128.0,
                        dt: float = 0.125, dx: float = 0.125,
                        vmax: float = 6.0, tol: float = 0.05,
                        return_diagnostics: bool = False):
    """Independent H-bar estimate from the shifted-momentum torus problem.

    Solves w_t + H(x, p + D_x w) = 0, w(0, .) = 0 on the unit torus by value
    iteration (minimum over periodic lattice paths of cost minus p times
    displacement) and returns -w(T, 0)/T.  The torus lattice and the roll
    update are deliberately separate from the cone-table DP so the two
    routes stay independent.
    """
    if isinstance(spec_or_lagrangian, LagrangianField):
        lagr = spec_or_lagrangian
    else:
        lagr = _oracle_lagrangian(spec_or_lagrangian)
    d = lagr.dimension
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (d,):
        raise DomainError(f"p must have {d} components")
    big_m = int(round(1.0 / dx))
    if abs(big_m * dx - 1.0) > 1e-9:
        raise ConfigurationError("dx must divide 1")
    n_steps = int(round(t_long / dt))
    if n_steps < 4:
        raise ConfigurationError("t_long too small for the torus iteration")

    s = vmax * dt / dx
    s_int = int(np.floor(s + 1e-9))
    rng = np.arange(-s_int, s_int + 1)
    mesh = np.meshgrid(*[rng] * d, indexing="ij")
    offs = np.stack([m.ravel() for m in mesh], axis=-1)
    offs = offs[np.linalg.norm(offs, axis=1) <= s + 1e-9]

    # per-offset cost over torus nodes i: dt L((i + o/2) dx mod 1, o dx/dt) - p . o dx
    base = np.stack(np.meshgrid(*[np.arange(big_m)] * d, indexing="ij"), axis=-1)
    shifted = []
    for o in offs:
        mid = np.mod((base + o / 2.0) * dx, 1.0)
        vel = o * dx / dt
        cost = dt * lagr(mid, np.broadcast_to(vel, mid.shape)) - float(p @ (o * dx))
        shifted.append((tuple(int(c) for c in o), cost))

    w = np.zeros((big_m,) * d)
    half_value = None
    for k in range(1, n_steps + 1):
        new = np.full_like(w, np.inf)
        for o, cost in shifted:
            np.minimum(new, np.roll(w + cost, o, axis=tuple(range(d))), out=new)
        w = new
        if k == n_steps // 2:
            half_value = w[(0,) * d]
    est = -w[(0,) * d] / (n_steps * dt)
    est_half = -half_value / ((n_steps // 2) * dt)
    flagged = abs(est - est_half) > tol
    if return_diagnostics:
        return est, {"half_estimate": est_half, "flagged": flagged,
                     "t_long": n_steps * dt}
    return est


def _oracle_lagrangian(spec: HamiltonianSpec) -> LagrangianField:
    if spec.family != FAMILY_QUADRATIC or np.isfinite(spec.momentum_cap):
        from .legendre import build_lagrangian
        return build_lagrangian(spec)
    return LagrangianField(spec, closed_form=True)


# ---------------------------------------------------------------------------
# One-dimensional quadrature / bisection oracle.

def flat_piece_radius_1d(potential, n_quad: int = 8192) -> float:
    """p0 = integral over the torus of sqrt(V - min V); H-bar = -min V on |p| <= p0."""
    xs = np.arange(n_quad) / n_quad
    vals = np.atleast_1d(potential(xs[:, None]))
    vmin = vals.min()
    return float(np.mean(np.sqrt(np.maximum(vals - vmin, 0.0))))


def effective_hamiltonian_quadrature_1d(potential, p: float,
                                        n_quad: int = 8192,
                                        tol: float = 1e-10) -> float:
    """Solve |p| = integral sqrt(h + V(x)) dx for h by bisection (d = 1).

    Below the flat-piece radius the answer is -min V.  The integrand is
    smooth and periodic for h > -min V, so the uniform-grid mean converges
    rapidly.
    """
    xs = np.arange(n_quad) / n_quad
    vals = np.atleast_1d(potential(xs[:, None]))
    vmin = float(vals.min())
    p_abs = abs(float(p))

    def phi(h):
        return float(np.mean(np.sqrt(np.maximum(h + vals, 0.0))))

    if p_abs <= phi(-vmin):
        return -vmin
    lo, hi = -vmin, p_abs**2 + float(vals.max())
    while phi(hi) < p_abs:
        hi = 2 * hi + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) < p_abs:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
