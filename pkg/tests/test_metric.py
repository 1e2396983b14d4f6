import itertools

import numpy as np
import pytest

from hjhom import (
    Cone,
    ConfigurationError,
    DomainError,
    UnreachableError,
    build_lagrangian,
    compute_metric_table,
    cosine_spec,
    extract_minimizing_path,
    metric_point,
    round_into_cone,
    speed_margin,
)


def brute_metric(lagrangian, n_steps, dt, dx, vmax):
    """Reference DP over a dict of integer lattice indices (independent of the
    array/tile implementation)."""
    d = lagrangian.dimension
    s = int(np.floor(vmax * dt / dx + 1e-9))
    offs = [o for o in itertools.product(range(-s, s + 1), repeat=d)
            if np.linalg.norm(o) <= vmax * dt / dx + 1e-9]
    vals = {(0,) * d: 0.0}
    for _ in range(n_steps):
        new = {}
        for j, val in vals.items():
            for o in offs:
                tgt = tuple(np.add(j, o))
                mid = np.mod((np.asarray(j) + np.asarray(o) / 2.0) * dx, 1.0)
                v = np.asarray(o) * dx / dt
                cost = val + dt * float(lagrangian(mid, v))
                if cost < new.get(tgt, np.inf):
                    new[tgt] = cost
        vals = new
    return vals


FREE = build_lagrangian(cosine_spec(1, 1.0))
OSC = build_lagrangian(cosine_spec(1, 2.0, (1.0, (1,))))
FREE2 = build_lagrangian(cosine_spec(2, 1.0))
OSC2 = build_lagrangian(cosine_spec(2, 3.0, (1.0, (1, 0)), (1.0, (0, 1))))


def closed_form_free(t, x):
    return np.linalg.norm(x) ** 2 / (4.0 * t) + t


def test_matches_brute_force_1d_oscillatory():
    table = compute_metric_table(OSC, horizon=1.0, dt=0.5, dx=0.5, vmax=2.0)
    ref = brute_metric(OSC, 2, 0.5, 0.5, 2.0)
    for j, want in ref.items():
        got = table.value_at(1.0, np.asarray(j) * 0.5)
        assert got == pytest.approx(want, abs=1e-12), f"j={j}"


def test_matches_brute_force_2d_oscillatory():
    table = compute_metric_table(OSC2, horizon=1.0, dt=0.5, dx=0.5, vmax=2.0)
    ref = brute_metric(OSC2, 2, 0.5, 0.5, 2.0)
    for j, want in ref.items():
        got = table.value_at(1.0, np.asarray(j) * 0.5)
        assert got == pytest.approx(want, abs=1e-12), f"j={j}"


def test_free_case_exact_on_aligned_velocities():
    # v = 2 is a lattice velocity, so the straight line is representable and
    # the DP value is exactly x^2/(4t) + t
    table = compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.25, vmax=4.0)
    assert table.value_at(1.0, 2.0) == pytest.approx(2.0, abs=1e-12)


def test_free_case_closed_form_within_tolerance():
    # dv = dx/dt = 0.5 keeps the velocity-mixing excess below 2 percent
    table = compute_metric_table(FREE, horizon=2.0, dt=0.25, dx=0.125, vmax=4.0)
    for t in (1.0, 2.0):
        for x in np.arange(-2 * t, 2 * t + 0.5, 0.5):
            want = closed_form_free(t, x)
            got = table.value_at(t, x)
            assert got == pytest.approx(want, rel=0.02), (t, x)
            assert got >= want - 1e-12  # DP minimizes over a path subset


def test_stationary_value_equals_time():
    table = compute_metric_table(FREE, horizon=4.0, dt=0.25, dx=0.25, vmax=4.0)
    for t in (1.0, 2.0, 4.0):
        assert table.value_at(t, 0.0) == pytest.approx(t, abs=1e-12)


def test_subadditivity_equality_free_case():
    table = compute_metric_table(FREE, horizon=2.0, dt=0.25, dx=0.25, vmax=4.0)
    m1 = table.value_at(1.0, 2.0)
    m2 = table.value_at(2.0, 4.0)
    assert m2 == pytest.approx(2 * m1, abs=1e-12)


def test_values_nonnegative_and_at_least_t():
    table = compute_metric_table(OSC, horizon=2.0, dt=0.25, dx=0.25, vmax=4.0)
    for k, z in table.integer_cone_points():
        assert table.value_at(float(k), z.astype(float)) >= k - 1e-12


def test_configuration_errors():
    with pytest.raises(ConfigurationError):
        compute_metric_table(FREE, horizon=1.0, dt=0.1, dx=0.5, vmax=2.0)
    with pytest.raises(ConfigurationError):
        compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.3, vmax=4.0)


def test_path_extraction_straight_line():
    table = compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.25, vmax=4.0)
    path = extract_minimizing_path(table, 1.0, 2.0)
    assert path.nodes[0] == pytest.approx(0.0)
    assert path.nodes[-1] == pytest.approx(2.0)
    np.testing.assert_allclose(np.diff(path.nodes[:, 0]), 0.5)  # speed 2
    assert path.cost == pytest.approx(table.value_at(1.0, 2.0), abs=0)
    assert path.recompute_cost(FREE) == pytest.approx(path.cost, abs=1e-10)


def test_path_extraction_stationary():
    table = compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.25, vmax=4.0)
    path = extract_minimizing_path(table, 1.0, 0.0)
    np.testing.assert_allclose(path.nodes, 0.0)
    assert path.cost == pytest.approx(1.0)


def test_path_speed_limit_measured():
    table = compute_metric_table(OSC, horizon=2.0, dt=0.125, dx=0.125, vmax=6.0)
    for t, x in [(1.0, 2.0), (2.0, 3.0), (1.0, -1.0)]:
        path = extract_minimizing_path(table, t, x)
        c = 4.0  # measured bound constant for this family
        assert path.max_speed() <= c + c * abs(x) / t
    assert speed_margin(table, [(1.0, 2.0), (2.0, 3.0)]) > 0


def test_unreachable_point_raises():
    table = compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.25, vmax=2.0,
                                 cone=Cone(4.0))
    with pytest.raises(UnreachableError):
        extract_minimizing_path(table, 0.25, 1.0)  # needs speed 4 > vmax


def test_round_into_cone_examples():
    cone = Cone(4.0)
    t, x = round_into_cone(3.0, np.array([2.0, 1.0]), cone)
    assert t == 3 and tuple(x) == (2, 1)
    t, x = round_into_cone(2.2, np.array([0.6, -0.2]), cone)
    assert t == 3 and tuple(x) == (1, 0)
    t, x = round_into_cone(1.0, np.array([4.0, 0.0]), cone)
    assert t == 1 and tuple(x) == (4, 0)
    with pytest.raises(DomainError):
        round_into_cone(0.5, np.array([0.0, 0.0]), cone)


def test_round_into_cone_pulls_inward():
    cone = Cone(1.0)
    t, x = round_into_cone(2.0, np.array([1.6, 1.2]), cone)
    assert np.linalg.norm(x) <= 2.0 + 1e-9


def test_metric_point_integer_translation():
    table = compute_metric_table(OSC, horizon=1.0, dt=0.25, dx=0.25, vmax=4.0)
    assert metric_point(table, 1.0, 5.0, 7.0) == table.value_at(1.0, 2.0)
    assert metric_point(table, 1.0, 0.3, 0.3 + 2.0) == table.value_at(1.0, 2.0)


def test_metric_point_free_case_translation():
    table = compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.25, vmax=4.0)
    got = metric_point(table, 1.0, 0.5, 2.5)
    assert got == pytest.approx(2.0, rel=0.02)


def test_metric_point_outside_cone():
    table = compute_metric_table(FREE, horizon=1.0, dt=0.25, dx=0.25, vmax=2.0)
    with pytest.raises(DomainError):
        metric_point(table, 1.0, 0.0, 5.0)


def test_refinement_convergence_free_case():
    # refining the velocity granularity dv = dx/dt drives free-case values to
    # the closed form (halving dt and dx alone keeps dv and stalls)
    errs = []
    for dt, dx in [(0.25, 0.25), (0.125, 0.0625)]:
        table = compute_metric_table(FREE, horizon=1.0, dt=dt, dx=dx, vmax=4.0)
        worst = 0.0
        for x in np.arange(-2, 2.01, 0.25):
            worst = max(worst, abs(table.value_at(1.0, x) - closed_form_free(1.0, x)))
        errs.append(worst)
    assert errs[1] <= 0.6 * errs[0] + 1e-9


def test_periodicity_of_metric_exact():
    table = compute_metric_table(OSC, horizon=1.0, dt=0.25, dx=0.25, vmax=4.0)
    for k in (-2.0, 1.0, 3.0):
        assert metric_point(table, 1.0, k, k + 1.0) == table.value_at(1.0, 1.0)


def test_integer_layers_mode_saves_paths_error():
    table = compute_metric_table(FREE, horizon=2.0, dt=0.25, dx=0.25, vmax=4.0,
                                 keep="integers")
    assert table.value_at(2.0, 0.0) == pytest.approx(2.0)
    with pytest.raises(ConfigurationError):
        extract_minimizing_path(table, 2.0, 0.0)


def test_csv_export_roundtrip(tmp_path):
    table = compute_metric_table(FREE, horizon=1.0, dt=0.5, dx=0.5, vmax=2.0)
    out = tmp_path / "metric.csv"
    table.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# schema=hjhom.metric.v1")
    assert lines[1] == "k,z1,value"
    assert any(line.startswith("2,0.0,") for line in lines)
