"""Oscillatory and effective Cauchy solvers plus a finite-difference oracle.

The oscillatory solution comes from the control representation
    u_eps(t, y) = inf over |x - y| <= C t of u0(x) + eps m(t/eps, x/eps, y/eps),
with x restricted to eps Z^d so the metric reduction to the origin-based
table is exact, then refined by golden section on the interpolated
objective.  The effective solution is the same inf-convolution with t Lbar
((y - x)/t).  Both re-add the normalization shift t * a.  The
Lax-Friedrichs oracle solves the oscillatory PDE directly on a grid that
resolves the eps-scale; it is a cross-check only and never feeds the rate
measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .effective import EffectiveModel
from .errors import ConfigurationError, DomainError
from .legendre import LagrangianField
from .metric import MetricTable
from .util import format_float, golden_minimize


@dataclass
class InitialData:
    """Initial condition with a certified Lipschitz constant."""

    evaluator: object            # callable (n, d) -> (n,)
    lipschitz: float
    family: str
    dimension: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = self.evaluator(np.atleast_2d(x))
        return float(vals[0]) if single else vals

    def shifted(self, c: float) -> "InitialData":
        return InitialData(lambda x, _f=self.evaluator: _f(x) + c,
                           self.lipschitz, f"{self.family}+const", self.dimension)

    def check_lipschitz(self, rng: np.random.Generator, samples: int = 256,
                        box: float = 8.0) -> float:
        """max ratio |u0(x)-u0(y)| / |x-y| on random pairs; <= lipschitz."""
        a = rng.uniform(-box, box, size=(samples, self.dimension))
        b = rng.uniform(-box, box, size=(samples, self.dimension))
        num = np.abs(self(a) - self(b))
        den = np.linalg.norm(a - b, axis=1)
        keep = den > 1e-12
        return float(np.max(num[keep] / den[keep]))


def cone_data(dimension: int, scale: float = 1.0) -> InitialData:
    return InitialData(lambda x: scale * np.linalg.norm(x, axis=1),
                       abs(scale), "cone", dimension)


def affine_data(p) -> InitialData:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return InitialData(lambda x: x @ p, float(np.linalg.norm(p)), "affine", len(p))


def zero_data(dimension: int) -> InitialData:
    return InitialData(lambda x: np.zeros(len(x)), 0.0, "zero", dimension)


def bump_data(dimension: int, bumps) -> InitialData:
    """Sum of Gaussian bumps (amplitude, center, width)."""
    bumps = [(float(a), np.atleast_1d(np.asarray(c, dtype=float)), float(w))
             for a, c, w in bumps]

    def ev(x):
        out = np.zeros(len(x))
        for a, c, w in bumps:
            out += a * np.exp(-np.sum((x - c) ** 2, axis=1) / w**2)
        return out

    lip = sum(abs(a) * np.sqrt(2.0) * np.exp(-0.5) / w for a, _, w in bumps)
    return InitialData(ev, lip, "bumps", dimension)


@dataclass
class SolutionField:
    """Solution values on a target set, with provenance for reproducibility."""

    t: float
    points: np.ndarray
    values: np.ndarray
    eps: float                         # 0 for the effective solution
    provenance: dict = field(default_factory=dict)

    def lipschitz_measured(self) -> float:
        """max slope between consecutive target points (diagnostic)."""
        worst = 0.0
        for i in range(len(self.points)):
            for j in range(i + 1, len(self.points)):
                den = np.linalg.norm(self.points[i] - self.points[j])
                if den > 1e-12:
                    worst = max(worst, abs(self.values[i] - self.values[j]) / den)
        return worst

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        with open(path, "w") as fh:
            fh.write(
                "# schema=hjhom.solution.v1 "
                f"t={format_float(self.t)} eps={format_float(self.eps)} "
                + " ".join(f"{k}={v}" for k, v in sorted(self.provenance.items())
                           if not k.startswith("_")) + "\n")
            fh.write(",".join([f"y{i+1}" for i in range(d)] + ["value"]) + "\n")
            for pt, val in zip(self.points, self.values):
                fh.write(",".join([format_float(c) for c in pt]
                                  + [format_float(val)]) + "\n")


def solve_oscillatory(u0: InitialData, lagrangian: LagrangianField,
                      eps: float, t: float, targets,
                      table: MetricTable, refine: bool = True) -> SolutionField:
    """Representation-formula solution at scale eps on the target set.

    The table must cover horizon t/eps; the minimization runs over x in
    eps Z^d inside the cone ball |x - y| <= C t, then golden refinement
    moves x continuously using the spatially interpolated table.
    """
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    if t <= 0:
        raise DomainError("t must be positive")
    big_t = t / eps
    if big_t > table.horizon + 1e-9:
        raise ConfigurationError(
            f"metric table horizon {table.horizon} insufficient: need T = {big_t}")
    d = table.dimension
    shift = lagrangian.spec.normalization_shift
    radius = table.cone.speed * t
    targets = np.asarray(targets, dtype=float).reshape(-1, d)
    values = np.empty(len(targets))
    for i, y in enumerate(targets):
        lo = np.ceil((y - radius) / eps).astype(int)
        hi = np.floor((y + radius) / eps).astype(int)
        axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        js = np.stack([m.ravel() for m in mesh], axis=-1)
        xs = js * eps
        keep = np.linalg.norm(xs - y, axis=1) <= radius + 1e-12
        xs = xs[keep]
        mvals = table.interpolate_many(big_t, (y - xs) / eps)
        obj = u0(xs) + eps * mvals
        k = int(np.argmin(obj))
        best = obj[k]
        if refine:
            best = min(best, _refine_point(u0, table, big_t, eps, y, xs[k], radius))
        values[i] = best + t * shift
    return SolutionField(
        t=t, points=targets, values=values, eps=eps,
        provenance={"spec": lagrangian.spec.content_hash(),
                    "dt": table.dt, "dx": table.dx, "vmax": table.vmax,
                    "shift": shift, "refined": int(refine)})


def _refine_point(u0, table, big_t, eps, y, x0, radius):
    """Per-axis golden-section passes around the discrete argmin."""
    x = np.array(x0, dtype=float)

    def objective(pt):
        if np.linalg.norm(pt - y) > radius:
            return np.inf
        return float(u0(pt) + eps * table.interpolate_many(big_t, ((y - pt) / eps)[None, :])[0])

    best = objective(x)
    for _ in range(2):
        for ax in range(len(x)):
            def g(s, ax=ax):
                pt = x.copy()
                pt[ax] = s
                return objective(pt)
            s_opt, val = golden_minimize(g, x[ax] - eps, x[ax] + eps, iters=24)
            if val < best:
                best = val
                x[ax] = s_opt
    return best


def solve_effective(u0: InitialData, model: EffectiveModel, t: float,
                    targets, refine: bool = True) -> SolutionField:
    """Inf-convolution u-bar(t, y) = min_x u0(x) + t Lbar((y - x)/t)."""
    if t <= 0:
        raise DomainError("t must be positive")
    ltab = model.lagrangian_table
    d = ltab.dimension
    shift = model.provenance.get("shift", 0.0)
    mesh = np.meshgrid(*ltab.axes, indexing="ij")
    vgrid = np.stack([m.ravel() for m in mesh], axis=-1)
    lvals = ltab.values.ravel()
    targets = np.asarray(targets, dtype=float).reshape(-1, d)
    values = np.empty(len(targets))
    v_lo = np.asarray([a[0] for a in ltab.axes])
    v_hi = np.asarray([a[-1] for a in ltab.axes])
    v_step = np.asarray([a[1] - a[0] for a in ltab.axes])
    for i, y in enumerate(targets):
        obj = u0(y - t * vgrid) + t * lvals
        k = int(np.argmin(obj))
        best = obj[k]
        if refine:
            v = vgrid[k].copy()

            def objective(vv):
                lv, clamped = ltab.interpolate(vv[None, :])
                return float(u0((y - t * vv)[None, :])[0] + t * lv[0])

            for _ in range(2):
                for ax in range(d):
                    def g(s, ax=ax):
                        vv = v.copy()
                        vv[ax] = s
                        return objective(vv)
                    lo = max(v_lo[ax], v[ax] - v_step[ax])
                    hi = min(v_hi[ax], v[ax] + v_step[ax])
                    s_opt, val = golden_minimize(g, lo, hi, iters=24)
                    if val < best:
                        best = val
                        v[ax] = s_opt
        values[i] = best + t * shift
    return SolutionField(
        t=t, points=targets, values=values, eps=0.0,
        provenance={"spec": model.provenance.get("spec"), "shift": shift,
                    "n_max": model.provenance.get("n_max"),
                    "refined": int(refine)})


def solve_fd_oracle(u0: InitialData, spec, eps: float, t: float, targets,
                    points_per_eps: int = 64, cfl: float = 0.45,
                    box_margin: float = 1.0) -> SolutionField:
    """Monotone Lax-Friedrichs solution of the oscillatory problem (oracle).

    Central Hamiltonian evaluation with artificial viscosity alpha = max
    |D_p H| per axis; CFL keeps the scheme monotone.  The box is sized so
    boundary influence (finite speed) cannot reach the targets.
    """
    from .hamiltonian import evaluate_hamiltonian

    d = spec.dimension
    if d > 2:
        raise ConfigurationError("FD oracle supports d <= 2")
    targets = np.asarray(targets, dtype=float).reshape(-1, d)
    # gradient bound for the viscosity solution: |Du|^2 <= Lip^2 + osc(V)
    dv = spec.potential.upper_bound() - spec.potential.coefficient_lower_bound()
    pmax = np.sqrt(u0.lipschitz**2 + max(dv, 0.0)) + 0.2
    alpha = 2.0 * pmax
    speed = alpha * d + 1.0
    h = eps / points_per_eps
    lo = targets.min(axis=0) - speed * t - box_margin
    hi = targets.max(axis=0) + speed * t + box_margin
    axes = [np.arange(l, hh + h, h) for l, hh in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    u = u0(pts.reshape(-1, d)).reshape(pts.shape[:-1])
    dt_fd = cfl * h / (alpha * d)
    n_steps = int(np.ceil(t / dt_fd))
    if n_steps < 1:
        raise ConfigurationError("CFL produced no time steps")
    dt_fd = t / n_steps
    if dt_fd > cfl * h / (alpha * d) + 1e-15:
        raise ConfigurationError("CFL violation after rounding to the horizon")
    xov = np.mod(pts / eps, 1.0).reshape(-1, d)
    for _ in range(n_steps):
        up = np.pad(u, 1, mode="edge")
        grads = []
        visc = np.zeros_like(u)
        ctr = tuple(slice(1, -1) for _ in range(d))
        for ax in range(d):
            sl_p = list(ctr)
            sl_m = list(ctr)
            sl_p[ax] = slice(2, None)
            sl_m[ax] = slice(0, -2)
            fwd = up[tuple(sl_p)]
            bwd = up[tuple(sl_m)]
            grads.append((fwd - bwd) / (2 * h))
            visc += (fwd - 2 * u + bwd) / (2 * h)
        grad = np.stack(grads, axis=-1).reshape(-1, d)
        ham = evaluate_hamiltonian(spec, xov, grad).reshape(u.shape)
        u = u - dt_fd * ham + dt_fd * alpha * visc
    interp_axes = axes
    vals = _grid_interp(u, interp_axes, targets)
    vals = vals + t * spec.normalization_shift
    return SolutionField(
        t=t, points=targets, values=vals, eps=eps,
        provenance={"spec": spec.content_hash(), "scheme": "lax-friedrichs",
                    "h": h, "dt_fd": dt_fd, "alpha": alpha,
                    "shift": spec.normalization_shift})


def _grid_interp(u, axes, points):
    d = len(axes)
    out = np.zeros(len(points))
    i0s, ws = [], []
    for ax in range(d):
        nodes = axes[ax]
        q = np.clip(points[:, ax], nodes[0], nodes[-1])
        step = nodes[1] - nodes[0]
        t = (q - nodes[0]) / step
        i0 = np.clip(np.floor(t).astype(int), 0, len(nodes) - 2)
        i0s.append(i0)
        ws.append(t - i0)
    for corner in np.ndindex(*(2,) * d):
        w = np.ones(len(points))
        idx = []
        for ax in range(d):
            idx.append(i0s[ax] + corner[ax])
            w = w * (ws[ax] if corner[ax] else 1.0 - ws[ax])
        out += w * u[tuple(idx)]
    return out
