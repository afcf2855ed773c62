"""Levy measure module: densities, moments, sampling, structural checks."""

import math

import numpy as np
import pytest
from scipy import special, stats as sps

from levyshell import levy
from levyshell.errors import (DomainError, ParameterError, ResourceError)
from levyshell.rng import make_rng


def gamma_moment_oracle(c, beta, alpha, q):
    """Closed form of integral z^q c z^(-1-alpha) e^(-beta z) dz over (0, inf)."""
    return c * special.gamma(q - alpha) / beta ** (q - alpha)


class TestDensity:
    def test_tempered_stable_point_value(self, ts_half):
        # c |ز|^{-1-alpha} e^{-beta|z|} at z=1 collapses to e^{-1}
        assert levy.density(ts_half, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_variance_gamma_mapping(self, vg_unit):
        assert vg_unit.c_plus == pytest.approx(1.0)
        assert vg_unit.beta_plus == pytest.approx(math.sqrt(2.0), rel=1e-14)
        assert vg_unit.beta_minus == pytest.approx(math.sqrt(2.0), rel=1e-14)
        assert vg_unit.alpha == 0.0

    def test_origin_is_domain_error(self, ts_half, vg_unit):
        for spec in (ts_half, vg_unit):
            with pytest.raises(DomainError):
                levy.density(spec, 0.0)

    def test_nonnegative_and_smooth_tail(self, asym_spec):
        zs = np.concatenate((-np.geomspace(1e-4, 50, 100),
                             np.geomspace(1e-4, 50, 100)))
        g = levy.density(asym_spec, zs)
        assert np.all(g >= 0)
        # z^2 g decreasing along |z| = 1e2, 1e3, 1e4 on both sides
        for s in (1.0, -1.0):
            vals = [z * z * levy.density(asym_spec, s * z) for z in (1e2, 1e3, 1e4)]
            assert vals[0] >= vals[1] >= vals[2]

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            levy.LevyMeasureSpec.tempered_stable(1, 1, 1, 1, 1.0)  # alpha >= 1
        with pytest.raises(ParameterError):
            levy.LevyMeasureSpec.tempered_stable(0, 0, 1, 1, 0.5)
        with pytest.raises(ParameterError):
            levy.LevyMeasureSpec.tempered_stable(1, 1, 0.0, 1, 0.5)
        with pytest.raises(ParameterError):
            levy.LevyMeasureSpec.variance_gamma(-1.0, 0.0, 1.0)


class TestLogDensityRatio:
    def test_tempered_stable_value(self, ts_half):
        # d/dz log g = -(1+alpha)/z - beta on z > 0
        assert levy.log_density_ratio(ts_half, 2.0) == pytest.approx(-1.75, abs=1e-14)

    def test_variance_gamma_value(self, vg_unit):
        assert levy.log_density_ratio(vg_unit, 1.0) == pytest.approx(
            -1.0 - math.sqrt(2.0), rel=1e-14)

    def test_odd_symmetry(self, ts_half, vg_unit):
        for spec in (ts_half, vg_unit):
            for z in (0.1, 0.7, 3.0):
                assert levy.log_density_ratio(spec, -z) == pytest.approx(
                    -levy.log_density_ratio(spec, z), rel=1e-14)

    def test_matches_finite_differences_of_log_density(self, asym_spec, ts_half):
        h = 1e-7
        for spec in (asym_spec, ts_half):
            for z in np.concatenate((np.geomspace(0.05, 20, 25),
                                     -np.geomspace(0.05, 20, 25))):
                fd = (math.log(levy.density(spec, z + h))
                      - math.log(levy.density(spec, z - h))) / (2 * h)
                assert levy.log_density_ratio(spec, z) == pytest.approx(fd, rel=1e-6)

    def test_envelope_constant(self, asym_spec):
        c = levy.ratio_envelope_constant(asym_spec)
        zs = np.concatenate((np.geomspace(1e-3, 40, 200),
                             -np.geomspace(1e-3, 40, 200)))
        r = np.abs(levy.log_density_ratio(asym_spec, zs))
        assert np.all(r <= c * (1.0 + 1.0 / np.abs(zs)) + 1e-12)

    def test_one_sided_support_error(self):
        one = levy.LevyMeasureSpec.tempered_stable(1.0, 0.0, 1.0, 1.0, 0.2)
        with pytest.raises(DomainError):
            levy.log_density_ratio(one, -0.5)


class TestMoment:
    def test_variance_gamma_q2_closed_form(self, vg_unit):
        # 2 int_0^inf z e^{-sqrt2 z} dz = 2/2 = 1
        assert levy.moment(vg_unit, 2.0) == pytest.approx(1.0, rel=1e-9)

    def test_tempered_stable_alpha0_q1(self):
        spec = levy.LevyMeasureSpec.tempered_stable(1, 1, 1, 1, 0.0)
        assert levy.moment(spec, 1.0) == pytest.approx(2.0, rel=1e-9)

    def test_quadrature_matches_gamma_oracle(self, ts_half, asym_spec):
        for spec in (ts_half, asym_spec):
            for q in (1.0, 2.0, 3.0, 4.0, 2.5):
                oracle = (gamma_moment_oracle(spec.c_plus, spec.beta_plus,
                                              spec.alpha, q)
                          + gamma_moment_oracle(spec.c_minus, spec.beta_minus,
                                                spec.alpha, q))
                assert levy.moment(spec, q) == pytest.approx(oracle, rel=1e-7)

    def test_q_below_one_rejected(self, ts_half):
        with pytest.raises(ParameterError):
            levy.moment(ts_half, 0.5)

    def test_moment_vs_sampled_path(self, vg_unit):
        rng = make_rng(11, 0)
        batch = levy.sample_event_ensemble(vg_unit, 1.0, 1e-3, 1, 10000, rng)
        pid = np.repeat(np.arange(10000), np.diff(batch.offsets))
        for q in (1.0, 2.0):
            per = np.bincount(pid, weights=np.abs(batch.sizes) ** q,
                              minlength=10000)
            target = levy.restricted_moment(vg_unit, q, 1e-3)
            z = (per.mean() - target) / (per.std(ddof=1) / 100.0)
            assert abs(z) < 3.0


class TestSampler:
    def test_zero_horizon(self, vg_unit):
        path = levy.sample_path(vg_unit, 0.0, 1e-3, make_rng(0, 1),
                                n_components=3)
        assert path.counts().sum() == 0
        assert np.allclose(path.small_jump_drift, 0.0)  # symmetric measure

    def test_path_invariants(self, asym_spec):
        path = levy.sample_path(asym_spec, 2.0, 1e-3, make_rng(1, 2),
                                n_components=4)
        path.validate()
        for t in path.times:
            assert np.all(t > 0) and np.all(t <= 2.0)
            assert np.all(np.diff(t) > 0)
        for z in path.sizes:
            assert np.all(np.abs(z) >= 1e-3)

    def test_poisson_count_mean(self, ts_half):
        rng = make_rng(2, 3)
        lam = levy.restricted_mass(ts_half, 1e-2)
        batch = levy.sample_event_ensemble(ts_half, 1.0, 1e-2, 1, 10000, rng)
        counts = np.diff(batch.offsets)
        z = (counts.mean() - lam) / (counts.std(ddof=1) / 100.0)
        assert abs(z) < 3.0

    def test_poisson_chi_squared(self, vg_unit):
        """Goodness of fit of per-component event counts, significance 0.01."""
        rng = make_rng(3, 4)
        lam = levy.restricted_mass(vg_unit, 1e-3) * 0.5
        batch = levy.sample_event_ensemble(vg_unit, 0.5, 1e-3, 1, 10000, rng)
        counts = np.diff(batch.offsets)
        kmax = int(counts.max())
        observed = np.bincount(counts, minlength=kmax + 1).astype(float)
        expected = sps.poisson.pmf(np.arange(kmax + 1), lam) * counts.size
        expected[-1] = counts.size - expected[:-1].sum()  # fold the tail
        # merge bins with small expectation from the right
        while expected.size > 2 and expected[-1] < 5:
            expected[-2] += expected[-1]
            observed[-2] += observed[-1]
            expected, observed = expected[:-1], observed[:-1]
        chi2 = float(np.sum((observed - expected) ** 2 / expected))
        pval = sps.chi2.sf(chi2, df=expected.size - 1)
        assert pval > 0.01

    def test_symmetric_mean_jump_sum(self, ts_half):
        rng = make_rng(4, 5)
        batch = levy.sample_event_ensemble(ts_half, 1.0, 1e-2, 1, 10000, rng)
        pid = np.repeat(np.arange(10000), np.diff(batch.offsets))
        sums = np.bincount(pid, weights=batch.sizes, minlength=10000)
        z = sums.mean() / (sums.std(ddof=1) / 100.0)
        assert abs(z) < 3.0

    def test_asymmetric_signed_moment(self, asym_spec):
        rng = make_rng(5, 6)
        batch = levy.sample_event_ensemble(asym_spec, 1.0, 1e-3, 1, 20000, rng)
        pid = np.repeat(np.arange(20000), np.diff(batch.offsets))
        sums = np.bincount(pid, weights=batch.sizes, minlength=20000)
        # signed restricted first moment from the closed-form side integrals
        pos = levy._side_partial_moment(asym_spec.c_plus, asym_spec.beta_plus,
                                        asym_spec.alpha, 1.0, 1e-3, np.inf)
        neg = levy._side_partial_moment(asym_spec.c_minus, asym_spec.beta_minus,
                                        asym_spec.alpha, 1.0, 1e-3, np.inf)
        target = pos - neg
        z = (sums.mean() - target) / (sums.std(ddof=1) / np.sqrt(20000))
        assert abs(z) < 3.5

    def test_resource_cap(self, ts_half):
        with pytest.raises(ResourceError, match="delta_cut"):
            levy.sample_path(ts_half, 1e6, 1e-9, make_rng(0, 0),
                             n_components=64)

    def test_small_jump_drift_definition(self, asym_spec):
        # -integral of z nu(dz) over delta <= |z| <= 1, via closed forms
        d = 1e-3
        pos = levy._side_partial_moment(asym_spec.c_plus, asym_spec.beta_plus,
                                        asym_spec.alpha, 1.0, d, 1.0)
        neg = levy._side_partial_moment(asym_spec.c_minus, asym_spec.beta_minus,
                                        asym_spec.alpha, 1.0, d, 1.0)
        assert levy.small_jump_drift(asym_spec, d) == pytest.approx(
            -(pos - neg), rel=1e-12)

    def test_variance_gamma_subordination_oracle(self, vg_unit):
        """Path increments match the Brownian-over-Gamma construction in law.

        The subordinated sampler draws X(T) = theta G + sigma W(G) with
        G ~ Gamma(T/vartheta, vartheta); the compound-Poisson path sampler
        must reproduce the same law up to the tiny variance lost below the
        cutoff.
        """
        T, n = 1.0, 8000
        rng = make_rng(6, 7)
        g = rng.gamma(T / 1.0, 1.0, size=n)
        oracle = 0.0 * g + 1.0 * np.sqrt(g) * rng.standard_normal(n)
        batch = levy.sample_event_ensemble(vg_unit, T, 1e-3, 1, n, make_rng(6, 8))
        pid = np.repeat(np.arange(n), np.diff(batch.offsets))
        sampled = np.bincount(pid, weights=batch.sizes, minlength=n)
        res = sps.ks_2samp(oracle, sampled)
        assert res.pvalue > 0.01


class TestStructuralChecks:
    def test_symmetric_specs_hold(self, ts_half, vg_unit):
        for spec in (ts_half, vg_unit):
            v = levy.small_deviation_verdict(spec)
            assert v.status == "holds"
            assert v.type_one
            assert abs(v.mean_small_jump) < 1e-9

    def test_one_sided_cases_hold(self):
        pos_only = levy.LevyMeasureSpec.tempered_stable(1.0, 0.0, 1.0, 1.0, 0.2)
        v = levy.small_deviation_verdict(pos_only)
        assert v.status == "holds" and v.mean_small_jump < 0
        neg_only = levy.LevyMeasureSpec.tempered_stable(0.0, 1.0, 1.0, 1.0, 0.2)
        v = levy.small_deviation_verdict(neg_only)
        assert v.status == "holds" and v.mean_small_jump > 0

    def test_order_condition_tempered_stable(self, ts_half):
        est = levy.order_condition_estimate(ts_half, 1.0)
        assert est.alpha_hat == pytest.approx(0.5, abs=0.05)
        assert est.liminf_proxy > 0
        assert est.certified

    def test_order_condition_scale_invariance(self, ts_half):
        e1 = levy.order_condition_estimate(ts_half, 1.0)
        e2 = levy.order_condition_estimate(ts_half, 2.0)
        assert e1.alpha_hat == pytest.approx(e2.alpha_hat, abs=0.02)

    def test_order_condition_variance_gamma_undetermined(self, vg_unit):
        est = levy.order_condition_estimate(vg_unit, 1.0)
        assert est.alpha_hat < 0.2
        assert not est.certified

    def test_order_condition_grid_validation(self, ts_half):
        with pytest.raises(DomainError):
            levy.order_condition_estimate(ts_half, 1.0,
                                          eps_grid=np.geomspace(1e-2, 1e-3, 8))
        with pytest.raises(DomainError):
            levy.order_condition_estimate(ts_half, 0.0)

    def test_compensator_residual_small(self, ts_half, vg_unit, asym_spec):
        for spec in (ts_half, vg_unit, asym_spec):
            assert abs(levy.compensator_residual(spec)) <= 1e-8

    def test_moments_finite_q1_to_4(self, ts_half, vg_unit, asym_spec):
        for spec in (ts_half, vg_unit, asym_spec):
            for q in (1.0, 2.0, 3.0, 4.0):
                assert np.isfinite(levy.moment(spec, q))
