"""Run-level orchestration: eps sweeps, property suites, effective exports.

Each run_* function takes a parsed Config and an output directory and writes
versioned CSV files plus gnuplot-ready two-column .dat files.  Identical
configurations (including seeds) produce byte-identical outputs; the eps
sweep may evaluate entries on a thread pool, but results are assembled in
index order so threading never changes bytes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import Config, ConfigError, spec_from_config
from .effective import build_effective_model, cell_problem_oracle
from .errors import ResolutionError
from .legendre import build_lagrangian
from .metric import compute_metric_table, default_speed_cap, extract_minimizing_path
from .properties import (
    check_linear_growth,
    check_subadditivity,
    extract_approximate_geodesic,
    gap_vs_log_envelope,
)
from .rates import RateReport, fit_rate
from .solver import (
    InitialData,
    affine_data,
    bump_data,
    cone_data,
    solve_effective,
    solve_oscillatory,
    zero_data,
)
from .surgery import path_surgery, surgery_csv
from .util import format_float


def u0_from_config(cfg: Config, dimension: int) -> InitialData:
    family = cfg.get_str("u0.family", "cone")
    if family == "cone":
        return cone_data(dimension, cfg.get_float("u0.scale", 1.0))
    if family == "affine":
        p = cfg.get_floats("u0.p", [1.0] * dimension)
        if len(p) != dimension:
            raise ConfigError(f"u0.p needs {dimension} components")
        return affine_data(p)
    if family == "zero":
        return zero_data(dimension)
    if family == "bumps":
        bumps = []
        for vec in cfg.get_vectors("u0.bumps", []):
            if len(vec) != dimension + 2:
                raise ConfigError("each bump is amplitude,c1..cd,width")
            bumps.append((vec[0], vec[1:-1], vec[-1]))
        return bump_data(dimension, bumps)
    raise ConfigError(f"unknown u0.family {family!r}")


def target_set(dimension: int, count: int, radius: float) -> np.ndarray:
    """Fixed, recorded target pattern spanning |y| <= radius."""
    if dimension == 1:
        return np.linspace(-radius, radius, count)[:, None]
    pts = [np.zeros(dimension)]
    rings = max(1, int(np.ceil((count - 1) / 8)))
    for r_i in range(1, rings + 1):
        r = radius * r_i / rings
        for a_i in range(8):
            ang = 2 * np.pi * a_i / 8
            vec = np.zeros(dimension)
            vec[0] = r * np.cos(ang)
            vec[1] = r * np.sin(ang)
            pts.append(vec)
            if len(pts) == count:
                return np.asarray(pts)
    return np.asarray(pts[:count])


def _grids(cfg: Config, lagrangian, max_ratio: float):
    dt = cfg.get_float("grid.dt", 0.125)
    dx = cfg.get_float("grid.dx", 0.125)
    vmax = cfg.get_float("grid.vmax")
    if vmax is None:
        vmax = default_speed_cap(lagrangian, max_ratio,
                                 c1=cfg.get_float("cone.c1"),
                                 c2=cfg.get_float("cone.c2", 2.0))
    return dt, dx, vmax


def _write_dat(path, rows, header: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for a, b in rows:
            fh.write(f"{format_float(a)} {format_float(b)}\n")


# ---------------------------------------------------------------------------

def run_metric(cfg: Config, out_dir, verbose: bool = False):
    spec, _ = spec_from_config(cfg)
    lagr = build_lagrangian(spec)
    horizon = cfg.get_float("metric.horizon", 4.0)
    dt, dx, vmax = _grids(cfg, lagr, cfg.get_float("metric.max_ratio", 2.0))
    table = compute_metric_table(lagr, horizon=horizon, dt=dt, dx=dx, vmax=vmax,
                                 keep=cfg.get_str("metric.keep", "all"))
    os.makedirs(out_dir, exist_ok=True)
    table.to_csv(os.path.join(out_dir, "metric.csv"))
    # profile figure: m(T, z) along the first axis
    rows = []
    k = int(round(horizon))
    reach = table.cone.speed * k
    z = np.zeros(spec.dimension)
    for j in range(-int(reach / dx), int(reach / dx) + 1):
        z[0] = j * dx
        val = table.interpolate(float(k), z)
        if np.isfinite(val):
            rows.append((j * dx, val))
    _write_dat(os.path.join(out_dir, "metric_profile.dat"),
               rows, f"z1 m({k},0,z) profile")
    if verbose:
        print(f"metric table: horizon {horizon}, {len(table.layer_times)} layers")
    return table


def run_effective(cfg: Config, out_dir, verbose: bool = False):
    spec, _ = spec_from_config(cfg)
    lagr = build_lagrangian(spec)
    v_box = cfg.get_float("effective.v_box", 4.0)
    v_step = cfg.get_float("effective.v_step", 0.25)
    n_max = cfg.get_int("effective.n_max", 8)
    dt, dx, vmax = _grids(cfg, lagr, v_box * np.sqrt(spec.dimension))
    model = build_effective_model(
        lagr, v_box_half=v_box, v_step=v_step, n_max=n_max, dt=dt, dx=dx,
        vmax=vmax, p_box_half=cfg.get_float("effective.p_box"),
        p_step=cfg.get_float("effective.p_step", 0.125),
        max_denominator=cfg.get_int("effective.max_denominator", 8))
    os.makedirs(out_dir, exist_ok=True)
    model.to_csv(os.path.join(out_dir, "lbar.csv"),
                 os.path.join(out_dir, "hbar.csv"),
                 os.path.join(out_dir, "effective_diagnostics.csv"))
    axis = model.hamiltonian_table.axes[0]
    hrows = []
    for i, p in enumerate(axis):
        idx = (i,) + tuple(len(a) // 2 for a in model.hamiltonian_table.axes[1:])
        hrows.append((p, model.hamiltonian_table.values[idx]))
    _write_dat(os.path.join(out_dir, "hbar.dat"), hrows, "p1 Hbar(p1,0,...)")
    lrows = []
    for i, v in enumerate(model.lagrangian_table.axes[0]):
        idx = (i,) + tuple(len(a) // 2 for a in model.lagrangian_table.axes[1:])
        lrows.append((v, model.lagrangian_table.values[idx]))
    _write_dat(os.path.join(out_dir, "lbar.dat"), lrows, "v1 Lbar(v1,0,...)")
    if verbose:
        print(f"effective model: {len(model.diagnostics)} velocity rays")
    return model


def run_rate_sweep(cfg: Config, out_dir, threads: int = 1,
                   verbose: bool = False) -> RateReport:
    spec, _ = spec_from_config(cfg)
    lagr = build_lagrangian(spec)
    d = spec.dimension
    eps_list = cfg.get_floats("sweep.eps")
    if not eps_list:
        raise ConfigError("sweep.eps is required for rate runs")
    eps_list = sorted(set(eps_list), reverse=True)
    t = cfg.get_float("sweep.t", 1.0)
    count = cfg.get_int("targets.count", 33)
    radius = cfg.get_float("targets.radius", 2.0 * t)
    targets = target_set(d, count, radius)
    u0 = u0_from_config(cfg, d)

    v_box = cfg.get_float("effective.v_box", radius / t + 2.0)
    v_step = cfg.get_float("effective.v_step", 0.25)
    n_max = cfg.get_int("effective.n_max", 8)
    max_ratio = max(v_box * np.sqrt(d), radius / t + u0.lipschitz)
    dt, dx, vmax = _grids(cfg, lagr, max_ratio)

    horizon = t / min(eps_list)
    table = compute_metric_table(lagr, horizon=horizon, dt=dt, dx=dx, vmax=vmax,
                                 keep="integers")
    # reference effective solution from the double-resolution model; its
    # speed cap covers the velocity box corners, not just the sweep targets
    vmax_ref = cfg.get_float("effective.vmax", vmax)
    model_ref = build_effective_model(
        lagr, v_box_half=v_box, v_step=v_step, n_max=n_max,
        dt=dt / 2, dx=dx / 2, vmax=vmax_ref,
        max_denominator=cfg.get_int("effective.max_denominator", 8))
    u_bar = solve_effective(u0, model_ref, t, targets)

    def sup_error(eps):
        sol = solve_oscillatory(u0, lagr, eps, t, targets, table=table)
        return float(np.max(np.abs(sol.values - u_bar.values)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = list(pool.map(sup_error, eps_list))
    else:
        errors = [sup_error(e) for e in eps_list]
    # exact-zero errors (no oscillation) would break the log fit; 1e-14
    # records "zero up to roundoff" honestly
    errors = [max(e, 1e-14) for e in errors]

    # mesh-halving probe: discretization error must stay below half the
    # smallest measured homogenization error
    probe_eps = cfg.get_float("probe.eps", min(eps_list))
    probe_table = compute_metric_table(
        lagr, horizon=t / probe_eps, dt=dt / 2, dx=dx / 2, vmax=vmax,
        keep="integers")
    coarse = solve_oscillatory(u0, lagr, probe_eps, t, targets, table=table)
    fine = solve_oscillatory(u0, lagr, probe_eps, t, targets, table=probe_table)
    disc_err = float(np.max(np.abs(coarse.values - fine.values)))
    if disc_err > 0.5 * min(errors):
        raise ResolutionError(
            f"discretization error {disc_err:.4g} exceeds half the smallest "
            f"homogenization error {min(errors):.4g}; refine grid.dt/grid.dx")

    report = fit_rate(eps_list, errors, t=t)
    os.makedirs(out_dir, exist_ok=True)
    report.to_csv(os.path.join(out_dir, "rate.csv"),
                  extra_header=f"probe_eps={format_float(probe_eps)} "
                               f"probe_error={format_float(disc_err)}")
    report.to_plot_data(os.path.join(out_dir, "rate.dat"))
    if verbose:
        print(f"rate sweep: beta = {report.beta:.3f}, "
              f"probe {disc_err:.2e} vs min error {min(errors):.2e}")
    return report


@dataclass
class PropertyCheck:
    name: str
    value: float
    threshold: float
    passed: bool


def run_property_suite(cfg: Config, out_dir, verbose: bool = False):
    spec, _ = spec_from_config(cfg)
    lagr = build_lagrangian(spec)
    d = spec.dimension
    rng = np.random.default_rng(cfg.get_int("seed", 0))
    horizon = cfg.get_float("metric.horizon", 8.0)
    dt, dx, vmax = _grids(cfg, lagr, cfg.get_float("metric.max_ratio", 3.0))
    table = compute_metric_table(lagr, horizon=horizon, dt=dt, dx=dx, vmax=vmax,
                                 keep="all")
    checks: list[PropertyCheck] = []

    # subadditivity against the concatenation bound
    worst = check_subadditivity(table, cfg.get_int("properties.sample_size", 1000),
                                rng)
    lip = table.lipschitz_estimate()
    checks.append(PropertyCheck("subadditivity_max_violation", worst,
                                2 * dx * lip, worst <= 2 * dx * lip))

    # periodicity: integer translations must reproduce values exactly
    from .metric import metric_point
    per_worst = 0.0
    for k, z in list(table.integer_cone_points())[:50]:
        base = table.value_at(float(k), z.astype(float))
        shifted = metric_point(table, float(k), np.ones(d), np.ones(d) + z)
        per_worst = max(per_worst, abs(base - shifted))
    checks.append(PropertyCheck("periodicity_max_dev", per_worst, 0.0,
                                per_worst == 0.0))

    k_growth = check_linear_growth(table)
    checks.append(PropertyCheck("linear_growth_K", k_growth, np.inf,
                                np.isfinite(k_growth)))
    if cfg.get_int("properties.refine", 0):
        half = compute_metric_table(lagr, horizon=horizon, dt=dt / 2, dx=dx / 2,
                                    vmax=vmax, keep="integers")
        k_half = check_linear_growth(half)
        checks.append(PropertyCheck("linear_growth_K_mesh_drift",
                                    abs(k_half - k_growth), 0.1 * k_growth,
                                    abs(k_half - k_growth) <= 0.1 * k_growth))

    geo_x = cfg.get_floats("properties.geodesic_x", [])
    if geo_x:
        defects = []
        for xval in geo_x:
            x = np.zeros(d)
            x[0] = xval
            tt = max(1.0, np.ceil(abs(xval) / (table.cone.speed * 0.9)))
            if tt > table.horizon or not table.cone.contains(tt, x):
                continue
            defects.append(extract_approximate_geodesic(table, tt, x).defect)
        if len(defects) >= 2:
            lo = max(max(defects[:len(defects) // 2]), 0.05)
            hi = max(defects[len(defects) // 2:])
            checks.append(PropertyCheck("geodesic_defect_growth", hi, 1.25 * lo,
                                        hi <= 1.25 * lo))

    # oracle agreement on the configured momentum sample
    p_sample = cfg.get_vectors("oracle.p_sample", [[0.0] * d])
    if p_sample:
        v_box = cfg.get_float("effective.v_box", 2.5)
        model = build_effective_model(
            lagr, v_box_half=v_box,
            v_step=cfg.get_float("effective.v_step", 0.5),
            n_max=cfg.get_int("effective.n_max", 8), dt=dt, dx=dx,
            vmax=cfg.get_float("effective.vmax", vmax))
        tol = cfg.get_float("oracle.tol", 0.05)
        worst_dev = 0.0
        for p in p_sample:
            est = cell_problem_oracle(
                lagr, p, t_long=cfg.get_float("oracle.t_long", 128.0),
                dt=dt, dx=dx,
                vmax=cfg.get_float("oracle.vmax", vmax))
            worst_dev = max(worst_dev, abs(model.hamiltonian_bar(p) - est))
        checks.append(PropertyCheck("oracle_agreement", worst_dev, tol,
                                    worst_dev <= tol))

        directions = cfg.get_vectors("properties.directions")
        if directions:
            rep = gap_vs_log_envelope(table, model, directions)
            checks.append(PropertyCheck("gap_min", rep.min_gap, -0.06,
                                        rep.min_gap >= -0.06))
            checks.append(PropertyCheck("gap_log_envelope_C",
                                        rep.envelope_constant, np.inf,
                                        np.isfinite(rep.envelope_constant)))

    surgery_rows = []
    if d == 2 and cfg.get_int("properties.surgery_samples", 0) > 0:
        n_samples = cfg.get_int("properties.surgery_samples")
        t_vals = cfg.get_floats("properties.surgery_t", [2.0])
        gap_by_t = {}
        succ, tot = 0, 0
        for tv in t_vals:
            gaps = []
            for _ in range(n_samples):
                while True:
                    x = rng.integers(-int(2 * tv), int(2 * tv) + 1, size=2)
                    if 0 < np.linalg.norm(x) <= 2.0 * tv and \
                            table.cone.contains(2 * tv, 2 * x):
                        break
                gamma = extract_minimizing_path(table, 2 * tv, 2 * x.astype(float))
                tot += 1
                try:
                    res = path_surgery(gamma, table)
                    succ += 1
                    gaps.append(res.lemma_gap)
                    surgery_rows.append((tv, x.astype(float), res))
                except ResolutionError:
                    continue
            gap_by_t[tv] = max(gaps) if gaps else np.nan
        ts = sorted(gap_by_t)
        ok = all(gap_by_t[b] <= 1.25 * max(gap_by_t[a], 0.05) + 0.05
                 for a, b in zip(ts, ts[1:]))
        checks.append(PropertyCheck("lemma_gap_max", max(gap_by_t.values()),
                                    np.inf, ok))
        rate = succ / max(tot, 1)
        checks.append(PropertyCheck("surgery_success_rate", rate, 0.95,
                                    rate >= 0.95))

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "properties.csv"), "w") as fh:
        fh.write("# schema=hjhom.properties.v1\n")
        fh.write("check,value,threshold,passed\n")
        for c in checks:
            fh.write(f"{c.name},{format_float(c.value)},"
                     f"{format_float(c.threshold)},{int(c.passed)}\n")
    if surgery_rows:
        surgery_csv(surgery_rows, os.path.join(out_dir, "surgery.csv"))
    if verbose:
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: "
                  f"{c.value:.4g} (threshold {c.threshold:.4g})")
    return checks
