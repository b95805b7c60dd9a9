import numpy as np
import pytest

from conftest import random_instance, target_for
from lassosi.homotopy import (
    ParamLine,
    compute_solution_path,
    compute_step_size,
    segment_coefficients,
)
from lassosi.lasso import GramLassoSolver, kkt_violation
from lassosi.oracle import grid_path, refine_breakpoint


def _line_orthogonal_to_design(X, rng):
    # b in the null space of X^T so the path is constant in z
    q, _ = np.linalg.qr(X)
    b = rng.standard_normal(X.shape[0])
    b -= q @ (q.T @ b)
    a = rng.standard_normal(X.shape[0])
    return ParamLine(a, b, -3.0, 3.0)


class TestSegmentCoefficients:
    def test_orthogonal_direction_is_constant(self, rng):
        X = rng.standard_normal((12, 5))
        line = _line_orthogonal_to_design(X, rng)
        psi, gamma = segment_coefficients([0, 2], X, line, 0.0)
        assert np.allclose(psi, 0, atol=1e-10)
        assert np.allclose(gamma, 0, atol=1e-10)

    def test_orthonormal_full_active(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((10, 4)))
        line = ParamLine(rng.standard_normal(10), rng.standard_normal(10), -1, 1)
        psi, gamma = segment_coefficients(range(4), q, line, 0.0)
        assert np.allclose(psi, q.T @ line.b, atol=1e-10)
        assert gamma.size == 0

    def test_resolve_oracle_inside_segment(self):
        # affine prediction against a direct re-solve at a nearby point
        data, sol = random_instance(seed=12, n=12, p=6, lam=1.0)
        t = target_for(data, sol)
        solver = GramLassoSolver(data.X, data.lam)
        z0 = t.z_obs
        s0 = solver.solve(t.line.y_at(z0))
        psi, _ = segment_coefficients(s0.active, data.X, t.line, 0.0)
        tz, _, _ = compute_step_size(
            data.X, t.line.y_at(z0), data.lam, 0.0, t.line, z0
        )
        h = min(0.49 * tz, 0.05)
        s1 = solver.solve(t.line.y_at(z0 + h))
        assert np.array_equal(s0.active, s1.active)
        pred = s0.beta[s0.active] + psi * h
        assert np.max(np.abs(pred - s1.beta[s1.active])) < 1e-7

    def test_elastic_net_push_through_matches_direct(self, rng):
        # |A| > n route must agree with the small-|A| formula
        X = rng.standard_normal((8, 20))
        line = ParamLine(rng.standard_normal(8), rng.standard_normal(8), -1, 1)
        active = np.arange(12)
        psi, gamma = segment_coefficients(active, X, line, 0.05)
        Xa = X[:, active]
        M = Xa.T @ Xa + 8 * 0.05 * np.eye(12)
        psi_direct = np.linalg.solve(M, Xa.T @ line.b)
        assert np.allclose(psi, psi_direct, atol=1e-10)
        mask = np.ones(20, bool)
        mask[active] = False
        gamma_direct = (X[:, mask].T @ (line.b - Xa @ psi_direct)) / 8
        assert np.allclose(gamma, gamma_direct, atol=1e-10)


class TestComputeStepSize:
    def test_all_slopes_supporting_gives_infinity(self, rng):
        X = rng.standard_normal((12, 4))
        line = _line_orthogonal_to_design(X, rng)  # psi = gamma = 0
        t, sol, event = compute_step_size(
            X, line.y_at(0.0), 0.5, 0.0, line, 0.0
        )
        assert t == np.inf
        assert event.kind == "window-end"

    def test_scalar_deactivation_root(self):
        # one active unit column, beta(0) = 1, psi = -0.5 -> t1 = 2
        x = np.zeros(5)
        x[0] = 1.0
        X = x[:, None]
        lam = 0.4
        a = x * (1.0 + lam)  # beta(0) = soft(1+lam, lam) = 1
        b = -0.5 * x
        line = ParamLine(a, b, -4, 4)
        t, sol, event = compute_step_size(X, line.y_at(0.0), lam, 0.0, line, 0.0)
        assert sol.beta[0] == pytest.approx(1.0, abs=1e-12)
        assert t == pytest.approx(2.0, abs=1e-9)
        assert event.kind == "deactivation"
        assert event.coordinate == 0

    def test_grid_bisection_oracle(self):
        data, sol = random_instance(seed=3, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        z0 = t.z_obs
        tz, _, _ = compute_step_size(
            data.X, t.line.y_at(z0), data.lam, 0.0, t.line, z0
        )
        assert np.isfinite(tz)
        # dense scan for the first active-set change, then bisection
        solver = GramLassoSolver(data.X, data.lam)
        base = frozenset(solver.solve(t.line.y_at(z0)).active.tolist())
        step = min(tz / 7.3, 0.01)
        z = z0
        while frozenset(solver.solve(t.line.y_at(z + step)).active.tolist()) == base:
            z += step
        z_star = refine_breakpoint(data.X, data.lam, 0.0, t.line, z, z + step, tol=1e-9)
        assert abs((z0 + tz) - z_star) < 1e-6


class TestSolutionPath:
    def test_constant_path_single_segment(self, rng):
        X = rng.standard_normal((12, 5))
        line = _line_orthogonal_to_design(X, rng)
        path = compute_solution_path(X, 1.0, 0.0, line)
        assert len(path) == 1
        seg = path.segments[0]
        assert seg.z_lo == line.z_min and seg.z_hi == line.z_max
        assert seg.event.kind == "window-end"

    def test_grid_oracle_agreement(self):
        data, sol = random_instance(seed=9, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        path = compute_solution_path(data.X, data.lam, 0.0, t.line)
        pts = grid_path(data.X, data.lam, 0.0, t.line, step=0.01)
        bps = path.transition_points
        for pt in pts:
            if np.min(np.abs(bps - pt.z)) <= 1e-6:
                continue
            assert path.segment_containing(pt.z).active_set == pt.active

    def test_kkt_certificate_at_midpoints(self):
        data, sol = random_instance(seed=10, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        path = compute_solution_path(data.X, data.lam, 0.0, t.line)
        for seg in path.segments:
            zm = 0.5 * (seg.z_lo + seg.z_hi)
            beta = seg.beta_full_at(zm, data.p)
            assert kkt_violation(data.X, t.line.y_at(zm), data.lam, 0.0, beta) <= 1e-8

    def test_piecewise_linearity_random_triples(self):
        # 50 (instance, segment, interior point) triples
        checked = 0
        seed = 0
        solvercache = {}
        while checked < 50:
            seed += 1
            data, sol = random_instance(seed=seed, n=12, p=6, lam=1.0)
            t = target_for(data, sol)
            path = compute_solution_path(data.X, data.lam, 0.0, t.line)
            solver = GramLassoSolver(data.X, data.lam)
            r = np.random.default_rng(seed)
            for seg in path.segments:
                if checked >= 50 or seg.z_hi - seg.z_lo < 1e-6:
                    continue
                h = r.uniform(0.05, 0.95) * (seg.z_hi - seg.z_lo)
                direct = solver.solve(t.line.y_at(seg.z_lo + h))
                pred = seg.beta_full_at(seg.z_lo + h, data.p)
                assert np.max(np.abs(pred - direct.beta)) < 1e-6
                checked += 1

    def test_segments_tile_window_exactly(self):
        data, sol = random_instance(seed=11, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        path = compute_solution_path(data.X, data.lam, 0.0, t.line)
        assert path.segments[0].z_lo == t.line.z_min
        assert path.segments[-1].z_hi == t.line.z_max
        for a, b in zip(path.segments, path.segments[1:]):
            assert a.z_hi == b.z_lo

    def test_event_consistency(self):
        data, sol = random_instance(seed=13, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        path = compute_solution_path(data.X, data.lam, 0.0, t.line)
        assert len(path) > 1
        for seg, nxt in zip(path.segments, path.segments[1:]):
            j = seg.event.coordinate
            if seg.event.kind == "activation":
                assert j in nxt.active_set
            elif seg.event.kind == "deactivation":
                assert j not in nxt.active_set
                mid_beta = nxt.beta_full_at(nxt.z_lo + 1e-12, data.p)
                assert abs(mid_beta[j]) <= 1e-9

    def test_direction_reversible(self):
        data, sol = random_instance(seed=14, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        fwd = compute_solution_path(data.X, data.lam, 0.0, t.line)
        bwd = compute_solution_path(data.X, data.lam, 0.0, t.line.reversed())
        mirrored = np.sort(t.line.z_max - bwd.transition_points)
        assert np.allclose(np.sort(fwd.transition_points), mirrored, atol=1e-7)

    def test_elastic_net_survives_duplicated_columns(self, rng):
        X = rng.standard_normal((15, 4))
        X = np.hstack([X, X[:, :2]])  # exact duplicates
        y = rng.standard_normal(15)
        eta = X[:, 0] / (X[:, 0] @ X[:, 0])
        s2 = float(eta @ eta)
        b = eta / s2
        a = y - b * float(eta @ y)
        line = ParamLine(a, b, -20 * np.sqrt(s2), 20 * np.sqrt(s2))
        path = compute_solution_path(X, 0.02, 0.1, line)
        assert len(path) >= 1

    def test_path_dump_jsonl(self, tmp_path):
        import json

        data, sol = random_instance(seed=15, n=10, p=5, lam=1.0)
        t = target_for(data, sol)
        path = compute_solution_path(data.X, data.lam, 0.0, t.line)
        from lassosi.homotopy import dump_path_jsonl

        out = tmp_path / "path.jsonl"
        with open(out, "w") as fp:
            dump_path_jsonl(path, fp)
        lines = out.read_text().splitlines()
        assert len(lines) == len(path)
        rec = json.loads(lines[0])
        assert {"z_lo", "z_hi", "active", "signs", "event"} <= set(rec)
