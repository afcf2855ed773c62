"""Ensemble energetics and the loss of memory of the initial condition.

First the energy budget: the Ito balance ties the terminal energy plus the
accumulated dissipation to the initial energy plus the noise input rate.
Then mixing: ensembles started at rest and at |xi| = 10 become
statistically indistinguishable, the observable footprint of a unique
statistical steady state.
"""

import numpy as np

from levyshell import ergolab, integrator, levy, shell

spec = levy.LevyMeasureSpec.variance_gamma(1.0, 0.0, 1.0)

print("=== energy budget (symmetric noise) ===")
params = shell.ModelParams(n=3)
cfg = integrator.SdePathConfig(dt=1 / 1024, T=1.0, seed=1)
xi = shell.ShellState(np.array([[1.0, 0.5], [0.6, -0.4], [0.3, 0.2]]))
res = integrator.ensemble_stats(params, cfg, xi, 2000, [1.0], spec)
h2_T = np.sum(res["probes"][:, 0, :] ** 2, axis=1)
lhs = h2_T + 2.0 * params.kappa * res["diss2"]
rhs = float(np.sum(xi.values ** 2)) + \
    float(np.sum(params.flat_betas ** 2)) * levy.moment(spec, 2.0)
print(f"E|u(T)|^2 + 2k E int ||u||^2 = {lhs.mean():.4f} "
      f"(se {lhs.std(ddof=1) / np.sqrt(2000):.4f})")
print(f"|xi|^2 + T sum beta^2 m2      = {rhs:.4f}")

print("\n=== decay from a large initial condition ===")
params8 = shell.ModelParams(n=8)
cfg8 = integrator.SdePathConfig(dt=1 / 512, T=1.0, seed=2)
big = shell.ShellState.basis(8, 1, amplitude=np.sqrt(1000.0))
rep = ergolab.decay_probe(params8, cfg8, big, spec, n_paths=200)
print(f"|xi|^2 = 1000 -> E|u(T)|^2 = {rep['mean_h2'][-1]:.3f} at "
      f"T = {rep['horizon']:.1f} (fitted rate {rep['fitted_rate']:.3f}, "
      f"reference {rep['reference_rate']:.4f})")

print("\n=== two-ensemble mixing probe ===")
pm = shell.ModelParams(n=16, kappa=0.5)
tp = 5.0 / (pm.kappa * pm.lambda_1)
cfgm = integrator.SdePathConfig(dt=1 / 128, T=tp, seed=3)
mix = ergolab.invariant_measure_convergence(
    pm, cfgm, levy.LevyMeasureSpec.variance_gamma(2.0, 0.0, 1.0),
    shell.ShellState.zero(16), shell.ShellState.basis(16, 1, amplitude=10.0),
    burn_in=tp / 2, horizon=tp, n_paths=600, n_times=3)
print(f"KS p-values on [{tp / 2:.1f}, {tp:.1f}]:")
for name in ergolab.OBSERVABLES:
    vals = " ".join(f"{p:.3f}" for p in mix["p_value"][name])
    print(f"  {name:>7}: {vals}")
