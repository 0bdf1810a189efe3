"""Taylor-Green vortex solver: exact solution, right-hand side, time stepping and filter."""
import csv
import json

import numpy as np
import pytest

from meshfree.diagnostics.providers import LabfmProvider
from meshfree.errors import InvalidArgument, UnstableRun
from meshfree.geometry import centered_square_cloud, generate_perturbed_grid, unit_square_cloud
from meshfree.pde_solver import (
    FlowState,
    SolverConfig,
    apply_filter,
    build_operators,
    initialize,
    rhs,
    run_tgv,
    step,
    tgv_exact,
    tgv_pressure,
)

RE = 100.0


@pytest.fixture(scope="module")
def cloud():
    return unit_square_cloud(1 / 24, 0.5, seed=5)


@pytest.fixture(scope="module")
def ops(cloud):
    return build_operators(LabfmProvider(4), cloud)


class TestExact:
    def test_point_values(self):
        u, v = tgv_exact([[0.0, 0.25], [0.25, 0.0]], 0.0, RE)
        np.testing.assert_allclose(u, [-1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(v, [0.0, 1.0], atol=1e-15)

    def test_decay_rate(self):
        pts = np.random.default_rng(0).uniform(0, 1, (20, 2))
        u0, _ = tgv_exact(pts, 0.0, RE)
        u1, _ = tgv_exact(pts, 0.3, RE)
        np.testing.assert_allclose(u1, u0 * np.exp(-8 * np.pi ** 2 * 0.3 / RE), rtol=1e-14)

    def test_kinetic_energy(self):
        n = 64
        g = (np.arange(n) + 0.5) / n
        pts = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
        for t in (0.0, 0.7):
            u, v = tgv_exact(pts, t, RE)
            assert np.mean(u ** 2 + v ** 2) == pytest.approx(0.5 * np.exp(-16 * np.pi ** 2 * t / RE), rel=1e-12)

    def test_divergence_free_and_pressure_balance(self):
        """Finite differences of the closed forms: div u = 0 and (u.grad)u = -grad p."""
        pts = np.random.default_rng(1).uniform(0, 1, (30, 2))
        h = 1e-5
        ex, ey = np.array([h, 0]), np.array([0, h])
        u, v = tgv_exact(pts, 0.0, RE)
        du_dx = (tgv_exact(pts + ex, 0, RE)[0] - tgv_exact(pts - ex, 0, RE)[0]) / (2 * h)
        du_dy = (tgv_exact(pts + ey, 0, RE)[0] - tgv_exact(pts - ey, 0, RE)[0]) / (2 * h)
        dv_dy = (tgv_exact(pts + ey, 0, RE)[1] - tgv_exact(pts - ey, 0, RE)[1]) / (2 * h)
        dp_dx = (tgv_pressure(pts + ex, 0, RE) - tgv_pressure(pts - ex, 0, RE)) / (2 * h)
        np.testing.assert_allclose(du_dx + dv_dy, 0.0, atol=1e-8)
        np.testing.assert_allclose(u * du_dx + v * du_dy, -dp_dx, atol=1e-8)


class TestInitialize:
    def test_uniform(self, cloud):
        s = initialize(cloud, RE)
        np.testing.assert_array_equal(s.rho, 1.0)
        np.testing.assert_array_equal(s.velocity()[0], tgv_exact(cloud.points, 0, RE)[0])

    def test_pressure(self, cloud):
        s = initialize(cloud, RE, mach=0.1, density="pressure")
        np.testing.assert_allclose(s.rho, 1 + 0.01 * tgv_pressure(cloud.points, 0, RE))
        np.testing.assert_allclose(s.velocity()[1], tgv_exact(cloud.points, 0, RE)[1], rtol=1e-14)

    def test_errors(self, cloud):
        with pytest.raises(InvalidArgument):
            initialize(cloud, RE, density="pressure")
        with pytest.raises(InvalidArgument):
            initialize(cloud, RE, mach=0.1, density="hydrostatic")
        with pytest.raises(InvalidArgument):
            initialize(centered_square_cloud(0.1, 0.0, seed=0), RE)


class TestOperators:
    def test_discrete_divergence(self, ops, cloud):
        u, v = tgv_exact(cloud.points, 0, RE)
        div = ops.dx @ u + ops.dy @ v
        assert np.max(np.abs(div)) / (2 * np.pi) < 1e-2

    def test_laplacian_eigenfunction(self, ops, cloud):
        u, _ = tgv_exact(cloud.points, 0, RE)
        np.testing.assert_allclose(ops.lap @ u, -8 * np.pi ** 2 * u, atol=2e-2 * 8 * np.pi ** 2)

    def test_requires_periodic(self):
        with pytest.raises(InvalidArgument):
            build_operators(LabfmProvider(2), centered_square_cloud(0.1, 0.0, seed=0))


class TestRhs:
    def test_zero_on_rest_state(self, ops, cloud):
        n = len(cloud)
        out = rhs(FlowState(np.ones(n), np.zeros(n), np.zeros(n)), ops, SolverConfig())
        for part in (out.rho, out.mom_x, out.mom_y):
            np.testing.assert_array_equal(part, 0.0)

    def test_matches_exact_time_derivative(self, ops, cloud):
        """With the pressure start the advective and pressure terms cancel, leaving viscous decay."""
        cfg = SolverConfig(mach=0.1)
        s = initialize(cloud, RE, cfg.mach, "pressure")
        out = rhs(s, ops, cfg)
        u, v = tgv_exact(cloud.points, 0, RE)
        scale = 2 * np.pi  # size of the individual terms
        np.testing.assert_allclose(out.mom_x, -8 * np.pi ** 2 / RE * u, atol=0.03 * scale)
        np.testing.assert_allclose(out.mom_y, -8 * np.pi ** 2 / RE * v, atol=0.03 * scale)
        assert np.max(np.abs(out.rho)) < 0.01 * scale

    def test_term_by_term(self, ops, cloud, rng):
        n = len(cloud)
        rho = 1 + 0.05 * rng.normal(size=n)
        mx, my = rng.normal(size=n), rng.normal(size=n)
        cfg = SolverConfig(reynolds=50.0, mach=0.2)
        out = rhs(FlowState(rho, mx, my), ops, cfg)
        u, v = mx / rho, my / rho
        np.testing.assert_allclose(out.rho, -(ops.dx @ mx) - ops.dy @ my)
        expected = -(ops.dx @ (mx * u)) - ops.dy @ (mx * v) - 25.0 * (ops.dx @ rho) + (ops.lap @ u) / 50
        np.testing.assert_allclose(out.mom_x, expected, rtol=1e-12, atol=1e-9)


class TestStepping:
    def test_zero_filter_is_plain_rk3(self, ops, cloud):
        cfg = SolverConfig(filter_coefficient=0.0)
        s = initialize(cloud, RE, cfg.mach, "pressure")
        a = step(s, ops, cfg, 1e-3, filter_now=True)
        b = step(s, ops, cfg, 1e-3, filter_now=False)
        assert a.stacked().tobytes() == b.stacked().tobytes()

    def test_third_order_in_time(self, ops, cloud):
        cfg = SolverConfig(filter_coefficient=0.0)
        s0 = initialize(cloud, RE, cfg.mach, "pressure")
        T = 0.02

        def run(n):
            s = s0
            for _ in range(n):
                s = step(s, ops, cfg, T / n)
            return s.stacked()

        q1, q2, q4 = run(4), run(8), run(16)
        ratio = np.linalg.norm(q1 - q2) / np.linalg.norm(q2 - q4)
        assert ratio == pytest.approx(8.0, rel=0.15)

    def test_filter_damps_checkerboard_only(self):
        c = generate_perturbed_grid(16, 16, 1 / 16, 0.0, seed=0, periodic=True)
        ops = build_operators(LabfmProvider(2), c)
        ix = np.rint(c.points / c.spacing - 0.5).astype(int)
        checker = (-1.0) ** (ix[:, 0] + ix[:, 1])
        smooth = np.sin(2 * np.pi * c.points[:, 0])
        one = np.ones(len(c))
        for field_, shrinks in ((checker, True), (smooth, False)):
            out = apply_filter(FlowState(field_, field_, field_), ops, 0.01).rho
            change = np.linalg.norm(out - field_) / np.linalg.norm(field_)
            if shrinks:
                assert np.linalg.norm(out) < 0.9 * np.linalg.norm(field_)
            else:
                assert change < 1e-5
        np.testing.assert_array_equal(apply_filter(FlowState(one, one, one), ops, 0.01).rho, 1.0)

    def test_filter_power_one(self, ops, cloud, rng):
        f = rng.normal(size=len(cloud))
        out = apply_filter(FlowState(f, f, f), ops, 0.02, power=1)
        np.testing.assert_allclose(out.mom_x, f - 0.02 * ops.spacing ** 4 * (ops.hyper @ f), rtol=1e-12)

    def test_mass_drift_small(self, ops, cloud):
        cfg = SolverConfig(end_time=0.05)
        res = run_tgv(cfg, cloud, ops=ops)
        s0 = initialize(cloud, RE, cfg.mach, "pressure")
        assert abs(res.state.rho.sum() / s0.rho.sum() - 1) < 1e-5
        assert res.errors[-1] < 2e-2

    def test_growth_limit_raises(self, ops, cloud):
        with pytest.raises(UnstableRun):
            run_tgv(SolverConfig(end_time=0.01, growth_limit=0.5), cloud, ops=ops)

    def test_needs_provider_or_ops(self, cloud):
        with pytest.raises(InvalidArgument):
            run_tgv(SolverConfig(), cloud)


class TestConfig:
    def test_time_step(self):
        cfg = SolverConfig(reynolds=100, mach=0.1, cfl=0.5)
        assert cfg.time_step(1 / 32) == pytest.approx(0.5 * min(0.1 / 32, 100 / 32 ** 2 / 4))
        assert SolverConfig(reynolds=1.0).time_step(0.1) == pytest.approx(0.5 * 0.01 / 4)

    @pytest.mark.parametrize("kw", [{"reynolds": 0}, {"cfl": 1.5}, {"filter_coefficient": -1},
                                    {"filter_interval": 0}, {"filter_power": 0},
                                    {"initial_density": "hot"}])
    def test_validation(self, kw):
        with pytest.raises(InvalidArgument):
            SolverConfig(**kw)

    def test_from_json(self, tmp_path):
        p = tmp_path / "run.json"
        p.write_text(json.dumps({"reynolds": 400, "filter_power": 1}))
        cfg = SolverConfig.from_json(p, base=SolverConfig(mach=0.05))
        assert (cfg.reynolds, cfg.filter_power, cfg.mach) == (400, 1, 0.05)
        p.write_text('{"viscosity": 1}')
        with pytest.raises(InvalidArgument, match="unknown"):
            SolverConfig.from_json(p)
        p.write_text("{not json")
        with pytest.raises(InvalidArgument):
            SolverConfig.from_json(p)


def test_outputs(tmp_path, ops, cloud):
    res = run_tgv(SolverConfig(end_time=0.01), cloud, ops=ops, sample_times=[0.005],
                  out_dir=tmp_path, snapshots=True)
    assert res.times == pytest.approx([0.0, 0.005, 0.01], abs=1e-12)
    rows = list(csv.reader((tmp_path / "tgv_error.csv").open()))
    assert rows[0] == ["t", "err"] and len(rows) == 4
    assert float(rows[1][1]) < 1e-12 or float(rows[1][1]) < 5e-3
    meta = json.loads((tmp_path / "tgv_config.json").read_text())
    assert meta["steps"] == res.steps and meta["filter_provider"] == "labfm-p4"
    assert len(list(tmp_path.glob("snapshot_t*.csv"))) == 3
