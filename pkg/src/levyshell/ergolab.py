"""Desk-scale ergodicity diagnostics for the stochastic shell system.

Four kinds of evidence about the long-time behavior:

- moment/decay diagnostics: finiteness and decay of ensemble energy
  statistics, with Monte Carlo error bars;
- small-deviation probes: the driving noise can stay arbitrarily small
  with positive probability;
- accessibility probes: on the small-noise event, every initial condition
  inside a ball lands in a small ball around 0 by an explicit horizon
  (a quantitative consequence of the dissipation/coupling bounds);
- mixing probes: empirical laws started from different initial conditions
  become statistically indistinguishable (two-sample KS tests on scalar
  observables), the falsifiable footprint of a unique invariant measure.

Every probability carries a Wilson score interval and every pass/fail
verdict is taken at the interval level, never at the point estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

from . import _kernels, integrator, levy, shell
from .errors import DomainError, InconclusiveError
from .rng import make_rng

__all__ = [
    "wilson_interval",
    "EnsembleSummary",
    "AccessibilityReport",
    "moment_diagnostics",
    "decay_probe",
    "small_deviation_probe",
    "accessibility_probe",
    "invariant_measure_convergence",
    "default_burn_in",
    "default_horizon",
]

QUANTILE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)
FAILURE_FLAG_FRACTION = 0.01


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise DomainError("need at least one trial")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return lo, hi


def default_burn_in(params: shell.ModelParams) -> float:
    return 5.0 / (params.kappa * params.lambda_1)


def default_horizon(params: shell.ModelParams) -> float:
    return 20.0 / (params.kappa * params.lambda_1)


@dataclass
class EnsembleSummary:
    """Time-resolved ensemble statistics of one Monte Carlo run."""

    sample_count: int
    times: np.ndarray
    h_norm_quantiles: dict          # level -> array over times
    v_norm_quantiles: dict
    mean_h2: np.ndarray             # E|u(t)|^2
    se_h2: np.ndarray
    mean_h4: np.ndarray
    se_h4: np.ndarray
    mean_sup2: np.ndarray           # E sup_{s<=t}|u|^2
    se_sup2: np.ndarray
    mean_sup4: np.ndarray
    se_sup4: np.ndarray
    dissipation_p2: float           # kappa E int ||u||^2 ds over [0, T]
    dissipation_p2_se: float
    dissipation_p4: float           # kappa E int ||u||^2 |u|^2 ds
    dissipation_p4_se: float
    envelope_rate: float            # fitted K1 in log E sup_{s<=t}|u|^p ~ K1 t
    envelope_level: float
    failure_count: int
    reliable: bool

    def as_rows(self):
        """Plot-ready rows (t, statistic, value, se)."""
        rows = []
        for i, t in enumerate(self.times):
            rows.append((t, "mean_h2", self.mean_h2[i], self.se_h2[i]))
            rows.append((t, "mean_h4", self.mean_h4[i], self.se_h4[i]))
            rows.append((t, "mean_sup2", self.mean_sup2[i], self.se_sup2[i]))
            rows.append((t, "mean_sup4", self.mean_sup4[i], self.se_sup4[i]))
            for lev in QUANTILE_LEVELS:
                rows.append((t, f"q{lev:g}_h_norm",
                             self.h_norm_quantiles[lev][i], 0.0))
        return rows


def _mean_se(x: np.ndarray):
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def moment_diagnostics(params: shell.ModelParams,
                       config: integrator.SdePathConfig, xi,
                       levy_spec: levy.LevyMeasureSpec,
                       n_paths: int = 1000,
                       probe_times=None,
                       stream: int = 100) -> EnsembleSummary:
    """Empirical energy/dissipation moments of an ensemble.

    Reports E sup_{s<=t}|u|^p and kappa E int ||u||^2 |u|^{p-2} ds for
    p in {2, 4} with standard errors, per-time quantiles of the norms, and
    the fitted exponential envelope of the running sup (its finiteness and
    monotonicity are the testable content; the growth constants have no
    reference values).
    """
    if probe_times is None:
        probe_times = np.linspace(config.T / 8.0, config.T, 8)
    res = integrator.ensemble_stats(params, config, xi, n_paths, probe_times,
                                    levy_spec, stream=stream)
    probes = res["probes"]
    h2 = np.sum(probes ** 2, axis=2)
    vnorm2 = np.einsum("pqi,i->pq", probes ** 2, params.flat_eigenvalues)
    sup2 = res["sup2_at_probes"]
    failures = int(np.sum(res["fail"] >= 0.0))
    hq = {lev: np.quantile(np.sqrt(h2), lev, axis=0) for lev in QUANTILE_LEVELS}
    vq = {lev: np.quantile(np.sqrt(vnorm2), lev, axis=0) for lev in QUANTILE_LEVELS}

    def mse(arr):
        return (arr.mean(axis=0),
                arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0]))

    m2, s2 = mse(h2)
    m4, s4 = mse(h2 ** 2)
    ms2, ss2 = mse(sup2)
    ms4, ss4 = mse(sup2 ** 2)
    d2, d2se = _mean_se(params.kappa * res["diss2"])
    d4, d4se = _mean_se(params.kappa * res["diss4"])
    tt = np.asarray(probe_times, dtype=float)
    coeffs = np.polyfit(tt, np.log(np.maximum(ms2, 1e-300)), 1)
    return EnsembleSummary(
        sample_count=n_paths, times=tt,
        h_norm_quantiles=hq, v_norm_quantiles=vq,
        mean_h2=m2, se_h2=s2, mean_h4=m4, se_h4=s4,
        mean_sup2=ms2, se_sup2=ss2, mean_sup4=ms4, se_sup4=ss4,
        dissipation_p2=d2, dissipation_p2_se=d2se,
        dissipation_p4=d4, dissipation_p4_se=d4se,
        envelope_rate=float(coeffs[0]), envelope_level=float(math.exp(coeffs[1])),
        failure_count=failures,
        reliable=(failures <= FAILURE_FLAG_FRACTION * n_paths))


def decay_probe(params: shell.ModelParams, config: integrator.SdePathConfig,
                xi, levy_spec: levy.LevyMeasureSpec,
                n_paths: int = 1000, stream: int = 200) -> dict:
    """Energy decay from a large initial condition under symmetric noise.

    Tracks E|u(t)|^2 on a grid up to the horizon T* = ln(2) lambda_1^2 /
    kappa suggested by the a-priori decay rate kappa/lambda_1^2, fits the
    observed exponential rate, and checks that the energy has dropped below
    half its initial value by T* (at three standard errors).
    """
    if not levy_spec.symmetric:
        raise DomainError("the decay probe assumes a symmetric measure")
    lam1 = params.lambda_1
    t_star = math.log(2.0) * lam1 ** 2 / params.kappa
    cfg = replace(config, T=t_star)
    probe_times = np.linspace(t_star / 10.0, t_star, 10)
    res = integrator.ensemble_stats(params, cfg, xi, n_paths, probe_times,
                                    levy_spec, stream=stream)
    h2 = np.sum(res["probes"] ** 2, axis=2)
    mean = h2.mean(axis=0)
    se = h2.std(axis=0, ddof=1) / math.sqrt(n_paths)
    xi0 = float(np.sum(shell._values(xi) ** 2))
    # observed rate from the early decaying window
    dec = mean < 0.9 * xi0
    if np.any(dec) and np.sum(dec) >= 2:
        tt = probe_times[dec]
        rate = -np.polyfit(tt, np.log(np.maximum(mean[dec], 1e-300)), 1)[0]
    else:
        rate = math.nan
    predicted = params.kappa / lam1 ** 2
    passed = bool(mean[-1] - 3.0 * se[-1] <= 0.5 * xi0) if xi0 > 0 else True
    return {"times": probe_times, "mean_h2": mean, "se_h2": se,
            "initial_h2": xi0, "horizon": t_star,
            "fitted_rate": float(rate), "reference_rate": predicted,
            "passed_half_decay": passed,
            "failure_count": int(np.sum(res["fail"] >= 0.0))}


def small_deviation_probe(levy_spec: levy.LevyMeasureSpec, T: float,
                          epsilon: float, n_samples: int = 10000,
                          delta_cut: float = 1e-3, seed: int = 0) -> dict:
    """Monte Carlo estimate of P(sup_{[0,T]} |l(t)| < epsilon).

    One-component paths; between jumps l is linear (compensating drift), so
    the sup is attained at event endpoints and is evaluated exactly.
    """
    rng = make_rng(seed, 77)
    batch = levy.sample_event_ensemble(levy_spec, T, delta_cut, 1, n_samples, rng)
    drift = batch.drift
    hits = 0
    for p in range(n_samples):
        lo, hi = batch.offsets[p], batch.offsets[p + 1]
        ts = batch.times[lo:hi]
        zs = batch.sizes[lo:hi]
        vals = np.concatenate(([0.0], np.cumsum(zs)))   # level after each jump
        seg_start = np.concatenate(([0.0], ts))
        seg_end = np.concatenate((ts, [T]))
        # piecewise linear between jumps: the sup sits at segment endpoints
        cand = np.abs(np.concatenate((vals + drift * seg_start,
                                      vals + drift * seg_end)))
        if float(np.max(cand)) < epsilon:
            hits += 1
    lo_w, hi_w = wilson_interval(hits, n_samples)
    return {"p_hat": hits / n_samples, "wilson_low": lo_w, "wilson_high": hi_w,
            "n_samples": n_samples, "epsilon": epsilon, "horizon": T,
            "excludes_zero": lo_w > 0.0}


@dataclass
class AccessibilityReport:
    """Quantified accessibility of the origin: the two-step probability bound."""

    epsilon: float        # threshold on sup |S|^2
    gamma: float
    T0: float
    delta0: float
    C0: float
    p_hat_convolution_small: float
    wilson_low: float
    wilson_high: float
    conditional_success_rate: float
    n_convolution_samples: int
    n_small: int
    lower_bound: float    # p_hat * conditional rate

    @property
    def passed(self) -> bool:
        return self.wilson_low > 0.0 and self.conditional_success_rate >= 0.99


def accessibility_probe(params: shell.ModelParams,
                        config: integrator.SdePathConfig,
                        levy_spec: levy.LevyMeasureSpec,
                        xi_set, gamma: float,
                        n_conv: int = 20000,
                        C0: float | None = None,
                        noise_floor: float | None = None,
                        stream: int = 300) -> AccessibilityReport:
    """Estimate the probability route to a small ball around the origin.

    Step 1 estimates p = P(sup_{[0,T0]} |S(t)|^2 < eps) on the linear noise
    response alone, with eps and T0 derived from the dissipation/coupling
    constants so that, deterministically on that event (up to
    discretization), every |xi| <= max radius lands in |u(T0)|^2 <= gamma.
    Step 2 verifies the landing on the retained paths for every xi in the
    probe set.  The product of the two factors is the reported lower bound
    for the transition probability into the gamma-ball.
    """
    xi_set = [shell._values(x) for x in xi_set]
    radius2 = max(float(np.sum(x * x)) for x in xi_set)
    if C0 is None:
        C0 = shell.estimate_bilinear_constants(params, 300,
                                               make_rng(0, 5))["C0"]
    lam1 = params.lambda_1
    kappa = params.kappa
    if noise_floor is not None and gamma <= noise_floor:
        raise DomainError(f"gamma={gamma} is below the stationary noise floor "
                          f"{noise_floor:.3g}; the landing ball is unreachable")
    if C0 > 1e-12:
        delta0 = min(gamma / 4.0, math.sqrt(gamma * kappa) / (4.0 * C0))
        eps = min(delta0, kappa ** 2 / (4.0 * lam1 * C0 * C0))
    else:  # no coupling: only the landing-ball constraint remains
        delta0 = gamma / 4.0
        eps = delta0
    T0 = (2.0 * lam1 / kappa) * math.log(max(8.0 * radius2 / gamma, 2.0))
    cfg = replace(config, T=T0)
    N = 2 * params.n
    rng = make_rng(cfg.seed, stream)
    batch = levy.sample_event_ensemble(levy_spec, T0, cfg.delta_cut, N,
                                       n_conv, rng)
    lam, beta_eff, drift_vec, _, _ = integrator.flat_arrays(params, cfg,
                                                            batch.drift)
    base = integrator.base_grid(T0, cfg.dt)
    sup_out = np.empty(n_conv)
    term = np.empty((n_conv, N))
    _kernels.run_conv_sup(batch.offsets, batch.times, batch.components,
                          batch.sizes, base, kappa, lam, beta_eff, drift_vec,
                          N, sup_out, term)
    small = np.flatnonzero(sup_out < eps)
    lo_w, hi_w = wilson_interval(small.size, n_conv)
    if small.size == 0:
        raise InconclusiveError(
            "no sampled path kept the noise response below the threshold; "
            "enlarge the sample or relax (gamma, radius)")
    successes = 0
    for p in small:
        path = batch.path(int(p))
        ok = True
        for x in xi_set:
            traj = integrator.integrate(params, cfg, x, jump_path=path,
                                        raise_on_blowup=False)
            if float(np.sum(traj.states[-1] ** 2)) > gamma:
                ok = False
                break
        successes += int(ok)
    rate = successes / small.size
    return AccessibilityReport(
        epsilon=eps, gamma=gamma, T0=T0, delta0=delta0, C0=C0,
        p_hat_convolution_small=small.size / n_conv,
        wilson_low=lo_w, wilson_high=hi_w,
        conditional_success_rate=rate,
        n_convolution_samples=n_conv, n_small=int(small.size),
        lower_bound=(small.size / n_conv) * rate)


OBSERVABLES = ("h_norm", "u1_re", "v_norm")


def invariant_measure_convergence(params: shell.ModelParams,
                                  config: integrator.SdePathConfig,
                                  levy_spec: levy.LevyMeasureSpec,
                                  xi_a, xi_b,
                                  burn_in: float | None = None,
                                  horizon: float | None = None,
                                  n_paths: int = 1000,
                                  n_times: int = 6,
                                  stream: int = 400) -> dict:
    """Two-sample KS comparison of ensembles from two initial conditions.

    After the burn-in, the empirical laws of |u(t)|, Re u_1(t), and ||u(t)||
    from the two ensembles are compared at each probe time; decaying KS
    statistics and non-small p-values are the observable footprint of
    convergence to a common law.
    """
    burn_in = default_burn_in(params) if burn_in is None else burn_in
    horizon = default_horizon(params) if horizon is None else horizon
    if np.allclose(shell._values(xi_a), shell._values(xi_b)):
        same = True
    else:
        same = False
    probe_times = np.linspace(burn_in, horizon, n_times)
    cfg = replace(config, T=horizon)
    res_a = integrator.ensemble_stats(params, cfg, xi_a, n_paths, probe_times,
                                      levy_spec, stream=stream)
    res_b = integrator.ensemble_stats(params, cfg, xi_b, n_paths, probe_times,
                                      levy_spec, stream=stream + 1)
    fail = int(np.sum(res_a["fail"] >= 0)) + int(np.sum(res_b["fail"] >= 0))

    def observables(res):
        pr = res["probes"]
        return {
            "h_norm": np.sqrt(np.sum(pr ** 2, axis=2)),
            "u1_re": pr[:, :, 0],
            "v_norm": np.sqrt(np.einsum("pqi,i->pq", pr ** 2,
                                        params.flat_eigenvalues)),
        }

    oa, ob = observables(res_a), observables(res_b)
    ks_stat = {}
    p_value = {}
    for name in OBSERVABLES:
        stats_row = np.empty(probe_times.size)
        pvals_row = np.empty(probe_times.size)
        for q in range(probe_times.size):
            r = sps.ks_2samp(oa[name][:, q], ob[name][:, q])
            stats_row[q] = r.statistic
            pvals_row[q] = r.pvalue
        ks_stat[name] = stats_row
        p_value[name] = pvals_row
    return {"times": probe_times, "ks_stat": ks_stat, "p_value": p_value,
            "identical_initial": same, "n_paths": n_paths,
            "failure_count": fail,
            "reliable": fail <= FAILURE_FLAG_FRACTION * 2 * n_paths}
