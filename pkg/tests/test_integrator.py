"""Event-driven integrator: stepping, convolution, splitting, refinement."""

import math

import numpy as np
import pytest

from levyshell import integrator, levy, shell
from levyshell.errors import BlowUpError, DomainError, ParameterError, ShapeError
from levyshell.rng import make_rng


@pytest.fixture(scope="module")
def vg():
    return levy.LevyMeasureSpec.variance_gamma(1.0, 0.0, 1.0)


def multi_shell_state(n, h2):
    v = np.zeros((n, 2))
    v[0] = (0.8, 0.3)
    v[1] = (0.5, -0.4)
    v[2] = (0.35, 0.2)
    return shell.ShellState(v * math.sqrt(h2 / float(np.sum(v * v))))


class TestConfigAndGrid:
    def test_config_validation(self):
        with pytest.raises(ParameterError):
            integrator.SdePathConfig(dt=0.0, T=1.0)
        with pytest.raises(ParameterError):
            integrator.SdePathConfig(dt=0.5, T=0.25)
        with pytest.raises(ParameterError):
            integrator.SdePathConfig(dt=0.1, T=1.0, R=-1.0)
        with pytest.raises(ParameterError):
            integrator.SdePathConfig(dt=0.1, T=1.0, scheme="heun")

    def test_stiffness_guard_is_warning(self):
        params = shell.ModelParams(n=64)
        cfg = integrator.SdePathConfig(dt=1e-2, T=1.0)
        warns = cfg.warnings(params)
        assert len(warns) == 1 and "lam_n" in warns[0]
        assert not integrator.SdePathConfig(dt=1e-2, T=1.0).warnings(
            shell.ModelParams(n=3))

    def test_base_grid_ends_at_horizon(self):
        g = integrator.base_grid(1.0, 0.3)
        assert g[-1] == 1.0 and np.all(np.diff(g) > 0)
        g2 = integrator.base_grid(1.0, 0.25)
        assert g2.size == 4 and g2[-1] == 1.0

    def test_grid_contains_each_jump_once(self, vg):
        params = shell.ModelParams(n=4)
        cfg = integrator.SdePathConfig(dt=1 / 32, T=1.0, seed=3)
        traj = integrator.integrate(params, cfg, shell.ShellState.zero(4),
                                    levy_spec=vg)
        assert np.all(np.diff(traj.times) > 0)
        ev_t, _, _ = traj.noise.merged()
        for t in ev_t:
            assert np.sum(traj.times == t) == 1


class TestStepping:
    def test_exponential_linear_decay_exact(self, vg):
        params = shell.ModelParams(n=4, a=0.0, b=0.0)
        cfg = integrator.SdePathConfig(dt=0.01, T=1.0, scheme="exponential")
        traj = integrator.integrate(params, cfg, shell.ShellState.basis(4, 1),
                                    jump_path=levy.JumpPath.empty(1.0, 8))
        assert traj.states[-1, 0] == pytest.approx(
            math.exp(-params.kappa * params.lambda_1), abs=1e-14)

    def test_semi_implicit_linear_decay_first_order(self):
        params = shell.ModelParams(n=4, a=0.0, b=0.0)
        exact = math.exp(-params.kappa * params.lambda_1)
        errs = []
        for dt in (1e-2, 5e-3):
            cfg = integrator.SdePathConfig(dt=dt, T=1.0)
            traj = integrator.integrate(params, cfg,
                                        shell.ShellState.basis(4, 1),
                                        jump_path=levy.JumpPath.empty(1.0, 8))
            errs.append(abs(traj.states[-1, 0] - exact))
        assert 1.6 <= errs[0] / errs[1] <= 2.4  # O(dt)

    def test_single_jump_inserted_exactly(self):
        params = shell.ModelParams(n=4, a=0.0, b=0.0)
        cfg = integrator.SdePathConfig(dt=0.01, T=1.0, scheme="exponential")
        jp = levy.JumpPath(1.0, 1e-3,
                           (np.array([0.37]),) + (np.empty(0),) * 7,
                           (np.array([2.0]),) + (np.empty(0),) * 7,
                           np.zeros(8))
        traj = integrator.integrate(params, cfg, shell.ShellState.zero(4),
                                    jump_path=jp)
        i = int(np.searchsorted(traj.times, 0.37))
        assert traj.times[i] == 0.37
        assert traj.states[i, 0] == params.flat_betas[0] * 2.0
        assert traj.states[i - 1, 0] == 0.0

    def test_noise_free_energy_derivative(self, vg):
        """d|u|^2/dt = -2 kappa ||u||^2 without noise, to O(dt)."""
        params = shell.ModelParams(n=8)
        dt = 1e-4
        cfg = integrator.SdePathConfig(dt=dt, T=0.01)
        xi = multi_shell_state(8, 2.0)
        traj = integrator.integrate(params, cfg, xi,
                                    jump_path=levy.JumpPath.empty(0.01, 16))
        h2 = np.sum(traj.states ** 2, axis=1)
        v2 = traj.states ** 2 @ params.flat_eigenvalues
        for g in range(5, 50, 7):
            lhs = (h2[g + 1] - h2[g]) / dt
            mid = -2.0 * params.kappa * 0.5 * (v2[g] + v2[g + 1])
            assert lhs == pytest.approx(mid, rel=5e-3)

    def test_blowup_raises_with_time(self):
        params = shell.ModelParams(n=6)
        cfg = integrator.SdePathConfig(dt=0.25, T=2.0)
        xi = multi_shell_state(6, 1e8)
        with pytest.raises(BlowUpError) as err:
            integrator.integrate(params, cfg, xi,
                                 jump_path=levy.JumpPath.empty(2.0, 12))
        assert 0.0 < err.value.time <= 2.0

    def test_shape_mismatch(self, vg):
        params = shell.ModelParams(n=4)
        cfg = integrator.SdePathConfig(dt=0.1, T=1.0)
        with pytest.raises(ShapeError):
            integrator.integrate(params, cfg, shell.ShellState.zero(5),
                                 levy_spec=vg)
        with pytest.raises(ShapeError):
            integrator.integrate(params, cfg, shell.ShellState.zero(4),
                                 jump_path=levy.JumpPath.empty(1.0, 6))


class TestSingleStep:
    def test_step_applies_events_in_order(self):
        params = shell.ModelParams(n=3, a=0.0, b=0.0)
        cfg = integrator.SdePathConfig(dt=0.1, T=1.0, scheme="exponential")
        out = integrator.step_galerkin(params, cfg,
                                       shell.ShellState.zero(3),
                                       [(0.05, 0, 1.0), (0.08, 0, -0.5)])
        # first jump decays over the remaining 0.05, second over 0.02
        beta1 = params.flat_betas[0]
        lam1 = params.lambda_1
        expect = beta1 * (1.0 * math.exp(-lam1 * 0.05)
                          - 0.5 * math.exp(-lam1 * 0.02))
        assert out[0, 0] == pytest.approx(expect, rel=1e-12)

    def test_step_truncated_needs_R(self):
        params = shell.ModelParams(n=3)
        cfg = integrator.SdePathConfig(dt=0.1, T=1.0)
        with pytest.raises(ParameterError):
            integrator.step_truncated(params, cfg, shell.ShellState.zero(3))

    def test_truncated_equals_full_inside_ball(self):
        params = shell.ModelParams(n=6)
        cfg = integrator.SdePathConfig(dt=0.05, T=1.0, R=10.0)
        xi = multi_shell_state(6, 1.0)  # |u|^2 = 1 <= R
        full = integrator.step_galerkin(params, cfg, xi, [(0.03, 2, 0.4)])
        trunc = integrator.step_truncated(params, cfg, xi, [(0.03, 2, 0.4)])
        assert np.array_equal(full, trunc)


class TestTruncationAgreement:
    def test_bitwise_until_exit(self, vg):
        """Full and cutoff runs share every bit until |u|^2 first exceeds R."""
        params = shell.ModelParams(n=8)
        R = 0.05
        agree = 0
        for seed in range(10):
            cfg_full = integrator.SdePathConfig(dt=1 / 64, T=2.0, seed=seed)
            cfg_trunc = integrator.SdePathConfig(dt=1 / 64, T=2.0, seed=seed,
                                                 R=R)
            tf = integrator.integrate(params, cfg_full,
                                      shell.ShellState.zero(8), levy_spec=vg)
            tt = integrator.integrate(params, cfg_trunc,
                                      shell.ShellState.zero(8), levy_spec=vg)
            h2 = np.sum(tf.states ** 2, axis=1)
            above = np.flatnonzero(h2 > R)
            cut = above[0] if above.size else tf.n_grid - 1
            assert np.array_equal(tf.states[:cut + 1], tt.states[:cut + 1])
            if above.size:
                agree += int(not np.array_equal(tf.states, tt.states))
        assert agree >= 5  # the test actually exercised the divergence

    def test_tiny_R_reduces_to_linear(self, vg):
        """With the coupling cut off everywhere, the dynamics is the noise
        response plus the decayed initial condition."""
        params = shell.ModelParams(n=8)
        cfg = integrator.SdePathConfig(dt=1 / 64, T=1.0, seed=4, R=1e-12,
                                       scheme="exponential")
        path = levy.sample_path(vg, 1.0, 1e-3, make_rng(4, 0), 16)
        xi = multi_shell_state(8, 4.0)  # far above 2R: cutoff exactly 0
        traj = integrator.integrate(params, cfg, xi, jump_path=path)
        times, S = integrator.ou_convolution(params, cfg, path)
        lam = params.flat_eigenvalues
        lin = S + np.exp(-params.kappa * np.outer(times, lam)) * xi.flat
        assert np.max(np.abs(traj.states - lin)) <= 1e-12

    def test_continuity_in_R(self, vg):
        params = shell.ModelParams(n=8)
        xi = multi_shell_state(8, 1.3025)  # inside the transition zone of R=1
        path = levy.sample_path(vg, 0.5, 1e-3, make_rng(10, 0), 16)
        t1 = integrator.integrate(
            params, integrator.SdePathConfig(dt=1 / 128, T=0.5, R=1.0),
            xi, jump_path=path)
        t2 = integrator.integrate(
            params, integrator.SdePathConfig(dt=1 / 128, T=0.5, R=1.0 + 1e-6),
            xi, jump_path=path)
        d = np.max(np.abs(t1.states[-1] - t2.states[-1]))
        assert 0.0 < d < 1e-6


class TestConvolution:
    def test_zero_noise_is_zero(self, vg):
        params = shell.ModelParams(n=4)
        cfg = integrator.SdePathConfig(dt=0.1, T=1.0)
        _, S = integrator.ou_convolution(params, cfg,
                                         levy.JumpPath.empty(1.0, 8))
        assert np.array_equal(S, np.zeros_like(S))

    def test_single_jump_closed_form(self):
        params = shell.ModelParams(n=4)
        cfg = integrator.SdePathConfig(dt=0.01, T=1.0)
        jp = levy.JumpPath(1.0, 1e-3,
                           (np.array([0.25]),) + (np.empty(0),) * 7,
                           (np.array([1.5]),) + (np.empty(0),) * 7,
                           np.zeros(8))
        times, S = integrator.ou_convolution(params, cfg, jp)
        beta1, lam1 = params.flat_betas[0], params.lambda_1
        after = times >= 0.25
        expect = beta1 * 1.5 * np.exp(-params.kappa * lam1 * (times[after] - 0.25))
        assert np.allclose(S[after, 0], expect, rtol=1e-12)
        assert np.all(S[~after, 0] == 0.0)

    def test_representation_identity(self, vg):
        """S_k(t) = beta_k (l_k(t) - kappa lam_k int e^{-kappa lam_k (t-s)}
        l_k(s) ds), quadrature on the augmented grid at 1e-6 relative."""
        params = shell.ModelParams(n=3, k0=0.25)
        cfg = integrator.SdePathConfig(dt=2e-4, T=1.0, seed=3)
        path = levy.sample_path(vg, 1.0, 1e-3, make_rng(3, 0), 6)
        times, S = integrator.ou_convolution(params, cfg, path)
        lam, beta = params.flat_eigenvalues, params.flat_betas
        for c in range(6):
            lvals = np.zeros_like(times)
            jump_at = np.zeros_like(times)
            for t_, z_ in zip(path.times[c], path.sizes[c]):
                lvals[times >= t_] += z_
                jump_at[int(np.searchsorted(times, t_))] += z_
            lvals += path.small_jump_drift[c] * times
            left = lvals - jump_at  # left limits at the grid points
            T = times[-1]
            w = np.exp(-params.kappa * lam[c] * (T - times))
            h = np.diff(times)
            integral = float(np.sum(0.5 * h * (w[:-1] * lvals[:-1]
                                               + w[1:] * left[1:])))
            rep = beta[c] * (lvals[-1] - params.kappa * lam[c] * integral)
            scale = max(np.max(np.abs(S[:, c])), 1e-12)
            assert abs(S[-1, c] - rep) <= 1e-6 * scale


class TestSplitting:
    def test_zero_convolution_linear_decay(self):
        params = shell.ModelParams(n=4, a=0.0, b=0.0)
        cfg = integrator.SdePathConfig(dt=0.01, T=1.0)
        times = np.linspace(0.0, 1.0, 101)
        S = np.zeros((101, 8))
        v = integrator.solve_v(params, cfg, times, S,
                               shell.ShellState.basis(4, 1))
        # semi-implicit decay: the product of the per-step factors
        lam1 = params.lambda_1
        expect = (1.0 + 0.01 * params.kappa * lam1) ** -100
        assert v[-1, 0] == pytest.approx(expect, rel=1e-12)

    def test_decomposition_matches_direct(self, vg):
        """u = v + S from the split solvers vs the direct run, within ten
        times the dt-halving error estimate (sup over the grid in H)."""
        params = shell.ModelParams(n=16)
        for seed in range(3):
            path = levy.sample_path(vg, 1.0, 1e-3, make_rng(100 + seed, 1), 32)
            cfg = integrator.SdePathConfig(dt=1 / 256, T=1.0, seed=0, R=10.0)
            direct = integrator.integrate(params, cfg,
                                          shell.ShellState.zero(16),
                                          jump_path=path)
            times, S = integrator.ou_convolution(params, cfg, path)
            v = integrator.solve_v(params, cfg, times, S,
                                   shell.ShellState.zero(16))
            sup = np.max(np.linalg.norm(direct.states - (v + S), axis=1))
            half = integrator.integrate(
                params, integrator.SdePathConfig(dt=1 / 512, T=1.0, seed=0,
                                                 R=10.0),
                shell.ShellState.zero(16), jump_path=path)
            idx = np.searchsorted(half.times, direct.times)
            est = np.max(np.linalg.norm(direct.states - half.states[idx],
                                        axis=1))
            assert sup <= 10.0 * est

    def test_complement_energy_bound(self, vg):
        params = shell.ModelParams(n=16)
        cfg = integrator.SdePathConfig(dt=1 / 256, T=1.0, seed=0, R=10.0)
        path = levy.sample_path(vg, 1.0, 1e-3, make_rng(103, 1), 32)
        times, S = integrator.ou_convolution(params, cfg, path)
        xi = multi_shell_state(16, 2.0)
        v = integrator.solve_v(params, cfg, times, S, xi)
        c0 = shell.estimate_bilinear_constants(params, 200,
                                               np.random.default_rng(5))["C0"]
        sup_s2 = float(np.max(np.sum(S ** 2, axis=1)))
        bound = integrator.gronwall_complement_bound(
            params, c0, float(np.sum(xi.values ** 2)), sup_s2, 1.0)
        assert float(np.max(np.sum(v ** 2, axis=1))) <= bound


class TestRefinement:
    def test_identical_resolution_is_zero(self, vg):
        params = shell.ModelParams(n=4, a=0.0, b=0.0, k0=0.05)
        cfg = integrator.SdePathConfig(dt=1 / 64, T=0.5, seed=5,
                                       scheme="exponential")
        rep = integrator.galerkin_refinement(params, cfg, [4], 4, vg,
                                             n_seeds=2)
        assert np.allclose(rep["mean_errors"], 0.0)

    def test_linear_closed_form(self, vg):
        """Discarded-shell energy of the linear system vs the closed form.

        Mild stiffness so the grid resolves every retained relaxation time;
        the exponential scheme reproduces the linear dynamics exactly at
        grid points.
        """
        params = shell.ModelParams(n=6, a=0.0, b=0.0, k0=0.05)
        cfg = integrator.SdePathConfig(dt=1 / 512, T=1.0, seed=5,
                                       scheme="exponential")
        rep = integrator.galerkin_refinement(params, cfg, [2, 4], 6, vg,
                                             n_seeds=50)
        m2 = levy.restricted_moment(vg, 2.0, 1e-3)
        lam, beta = params.flat_eigenvalues, params.flat_betas

        def ou_time_integral(i):
            r = 2.0 * params.kappa * lam[i]
            return beta[i] ** 2 * m2 * (1.0 - (1.0 - math.exp(-r)) / r) / r

        for ci, nc in enumerate(rep["coarse_list"]):
            expect = sum(ou_time_integral(i) for i in range(2 * nc, 12))
            got = rep["l2_errors"][:, ci]
            z = (got.mean() - expect) / (got.std(ddof=1) / math.sqrt(got.size))
            assert abs(z) < 3.0

    def test_nonlinear_monotone_decrease(self, vg):
        params = shell.ModelParams(n=8)
        cfg = integrator.SdePathConfig(dt=1 / 128, T=1.0, seed=6, R=10.0)
        rep = integrator.galerkin_refinement(params, cfg, [2, 4, 6], 8, vg,
                                             n_seeds=30)
        assert rep["monotone_fraction"] >= 0.9
        assert np.all(np.diff(rep["mean_errors"]) < 0)


class TestEnsembleStatistics:
    def test_ito_energy_balance_symmetric(self, vg):
        """E|u(T)|^2 + 2 kappa E int ||u||^2 = |xi|^2 + T sum beta^2 m2."""
        params = shell.ModelParams(n=3)
        cfg = integrator.SdePathConfig(dt=1 / 2048, T=1.0, seed=9)
        xi = shell.ShellState(np.array([[1.0, 0.5], [0.6, -0.4], [0.3, 0.2]]))
        res = integrator.ensemble_stats(params, cfg, xi, 3000, [1.0], vg)
        h2_T = np.sum(res["probes"][:, 0, :] ** 2, axis=1)
        lhs = h2_T + 2.0 * params.kappa * res["diss2"]
        rhs = float(np.sum(xi.values ** 2)) + \
            float(np.sum(params.flat_betas ** 2)) * levy.moment(vg, 2.0)
        z = (lhs.mean() - rhs) / (lhs.std(ddof=1) / math.sqrt(lhs.size))
        assert abs(z) < 3.0

    def test_dt_halving_strong_order(self, vg):
        params = shell.ModelParams(n=8)
        path = levy.sample_path(vg, 1.0, 1e-3, make_rng(9, 0), 16)
        ref = integrator.integrate(
            params, integrator.SdePathConfig(dt=1 / 4096, T=1.0),
            shell.ShellState.zero(8), jump_path=path)
        errs = []
        for dt in (1 / 256, 1 / 512, 1 / 1024):
            tr = integrator.integrate(
                params, integrator.SdePathConfig(dt=dt, T=1.0),
                shell.ShellState.zero(8), jump_path=path)
            errs.append(np.linalg.norm(tr.states[-1] - ref.states[-1]))
        assert 1.5 <= errs[0] / errs[1] <= 3.0
        assert 1.5 <= errs[1] / errs[2] <= 3.0

    def test_running_sup_and_failures(self, vg):
        params = shell.ModelParams(n=4)
        cfg = integrator.SdePathConfig(dt=1 / 64, T=1.0, seed=2)
        res = integrator.ensemble_stats(params, cfg,
                                        shell.ShellState.zero(4), 200,
                                        [0.25, 0.5, 1.0], vg)
        sup = res["sup2_at_probes"]
        assert np.all(np.diff(sup, axis=1) >= 0)
        assert np.all(res["sup2"] >= sup[:, -1])
        assert np.all(res["fail"] == -1.0)
        h2 = np.sum(res["probes"] ** 2, axis=2)
        assert np.all(h2 <= sup + 1e-12)
