"""Portrait of the driving noise: densities, moments, structural verdicts.

Walks through the two measure families, checks the conditions the rest of
the laboratory relies on (finite moments, vanishing compensator boundary,
small-deviation property, small-jump order exponent), and samples a path
to show the compound-Poisson-above-cutoff representation at work.
"""

import numpy as np

from levyshell import levy
from levyshell.rng import make_rng

ts = levy.LevyMeasureSpec.tempered_stable(1.0, 1.0, 1.0, 1.0, 0.5)
vg = levy.LevyMeasureSpec.variance_gamma(1.0, 0.0, 1.0)

print("=== density values and log-derivative ratios ===")
for name, spec in (("tempered stable a=1/2", ts), ("variance gamma", vg)):
    print(f"{name}: g(1) = {levy.density(spec, 1.0):.6f}, "
          f"g'( 1)/g(1) = {levy.log_density_ratio(spec, 1.0):+.4f}, "
          f"g'(-1)/g(-1) = {levy.log_density_ratio(spec, -1.0):+.4f}")

print("\n=== absolute moments (adaptive quadrature) ===")
for q in (1.0, 2.0, 3.0, 4.0):
    print(f"q={q:g}: TS {levy.moment(ts, q):10.4f}   VG {levy.moment(vg, q):10.4f}")

print("\n=== structural verdicts ===")
for name, spec in (("TS", ts), ("VG", vg)):
    v = levy.small_deviation_verdict(spec)
    print(f"{name}: small-deviation {v.status} ({v.explanation}); "
          f"compensator residual {levy.compensator_residual(spec):.2e}")

print("\n=== small-jump order exponent ===")
for name, spec in (("TS", ts), ("VG", vg)):
    est = levy.order_condition_estimate(spec, 1.0)
    print(f"{name}: alpha_hat = {est.alpha_hat:.3f}, "
          f"liminf proxy = {est.liminf_proxy:.3f}, certified = {est.certified}")
    print(f"     note: {est.note}")

print("\n=== one sampled path (3 components, T = 1, cutoff 1e-3) ===")
path = levy.sample_path(vg, 1.0, 1e-3, make_rng(7, 0), n_components=3)
for c in range(3):
    t, z = path.times[c], path.sizes[c]
    big = np.abs(z) > 0.25
    print(f"component {c}: {t.size} jumps, largest |z| = {np.abs(z).max():.3f}, "
          f"{int(big.sum())} jumps above 0.25, drift rate "
          f"{path.small_jump_drift[c]:+.2e}")
