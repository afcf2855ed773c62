"""Monte Carlo gradients of the Markov semigroup from jump statistics.

For the finite system dX = alpha(X) dt + sum_i beta_i dl_i e_i the
derivative of E[Phi(X(t, x))] in the k-th initial coordinate admits the
representation

    d/dx_k E[Phi(X(t,x))] = E[Phi K_k / A^2] - E[Phi J_k / A],

where, summing over all simulated jumps (s, component c, size z),

    A   = sum z^2,
    K_k = -2  sum (z / beta_c) U[c, k](s-),
    J_k =     sum ((z^2 g'(z)/g(z) + 2 z) / beta_c) U[c, k](s-),

and U is the Jacobian flow of the state with respect to x (continuous
across jumps: the noise is additive).  The J weight is a compensated
integral, but its time compensator vanishes identically because
integral d/dz (z^2 g) dz = 0 (z^2 g vanishes at 0 and infinity) -- the
quadrature check for this identity lives in :mod:`levyshell.levy`
(`compensator_residual`).

Paths carrying no jumps make A = 0 and are rejected (counted, never
silently dropped): under an infinite-activity measure the event has
probability zero and is purely an artifact of the simulation cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, integrator, levy, shell
from .errors import DomainError, InconclusiveError, ParameterError, ShapeError
from .rng import make_rng

__all__ = [
    "BumpOfNormSq",
    "CosineOfCoordinate",
    "LogisticOfLinear",
    "JacobianFlow",
    "BelWeights",
    "BelEstimate",
    "jacobian_flow",
    "bel_weights",
    "bel_gradient",
    "gradient_bound_check",
    "a_inverse_moments",
]


# ---------------------------------------------------------------------------
# smooth bounded test functions with analytic gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpOfNormSq:
    """Phi(x) = exp(-|x - center|^2 / scale^2); sup norm 1."""

    center: float = 0.0
    scale: float = 1.0

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        d = x - self.center
        return np.exp(-np.sum(d * d, axis=-1) / self.scale ** 2)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        d = x - self.center
        return -2.0 / self.scale ** 2 * d * self.value(x)[:, None]

    @property
    def sup_norm(self) -> float:
        return 1.0


@dataclass(frozen=True)
class CosineOfCoordinate:
    """Phi(x) = cos(frequency * x_coord); coord is 1-based."""

    coord: int = 1
    frequency: float = 1.0

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.cos(self.frequency * x[:, self.coord - 1])

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        g = np.zeros_like(x)
        g[:, self.coord - 1] = -self.frequency * np.sin(
            self.frequency * x[:, self.coord - 1])
        return g

    @property
    def sup_norm(self) -> float:
        return 1.0


@dataclass(frozen=True)
class LogisticOfLinear:
    """Phi(x) = 1 / (1 + exp(-w . x)); sup norm 1."""

    weights: tuple

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        w = np.asarray(self.weights, dtype=float)
        return 1.0 / (1.0 + np.exp(-(x @ w)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        v = self.value(x)
        return (v * (1.0 - v))[:, None] * w[None, :]

    @property
    def sup_norm(self) -> float:
        return 1.0


# ---------------------------------------------------------------------------
# jacobian flow along a stored trajectory
# ---------------------------------------------------------------------------

@dataclass
class JacobianFlow:
    """U[g, i, k] = dX_i(t_g)/dx_k on the trajectory grid; U[0] = identity."""

    times: np.ndarray
    matrices: np.ndarray  # (G, N, N)

    def at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t - 1e-12))
        return self.matrices[min(idx, self.times.size - 1)]


def jacobian_flow(params: shell.ModelParams, config: integrator.SdePathConfig,
                  trajectory: integrator.Trajectory) -> JacobianFlow:
    """Integrate the linearized flow along a trajectory, column by column.

    Uses the same grid and scheme as the trajectory, with the coupling
    Jacobian assembled from the cutoff-aware directional derivative, so the
    result is exactly the derivative of the discrete flow map.  Jumps leave
    the columns unchanged.
    """
    lam, _, _, karr, model_id = integrator.flat_arrays(params, config, 0.0)
    G, N = trajectory.states.shape
    out = np.empty((G, N, N))
    R = -1.0 if config.R is None else float(config.R)
    _kernels.run_jacobian_path(trajectory.times, trajectory.states,
                               params.kappa, lam, model_id, params.a, params.b,
                               karr, R, integrator.scheme_id(config.scheme), out)
    return JacobianFlow(trajectory.times.copy(), out)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

@dataclass
class BelWeights:
    """Accumulated jump weights of one path; flagged when no jump occurred."""

    a_total: float
    k_vec: np.ndarray
    j_vec: np.ndarray
    score_vec: np.ndarray
    flagged: bool

    def estimator_weight(self) -> np.ndarray:
        """K/A^2 - J/A; only meaningful when not flagged."""
        if self.flagged:
            raise DomainError("no jumps on this path: the weight divides by A = 0")
        return self.k_vec / self.a_total ** 2 - self.j_vec / self.a_total


def bel_weights(trajectory: integrator.Trajectory, jacobian: JacobianFlow,
                levy_spec: levy.LevyMeasureSpec) -> BelWeights:
    """Evaluate (A, K, J) and the per-component score sum for one trajectory.

    The Jacobian at each jump time is taken at that grid point: the flow is
    continuous across jumps, so this value is the left limit, exactly.
    """
    if jacobian.times.size != trajectory.times.size:
        raise ShapeError("jacobian and trajectory grids differ")
    params = trajectory.params
    beta_eff = params.flat_betas * trajectory.config.noise_scale
    N = beta_eff.size
    ev_t, ev_c, ev_z = trajectory.noise.merged()
    a_total = 0.0
    k_vec = np.zeros(N)
    j_vec = np.zeros(N)
    sc = np.zeros((N, N))
    mcount = np.zeros(N, dtype=np.int64)
    for t, c, z in zip(ev_t, ev_c, ev_z):
        g = int(np.searchsorted(jacobian.times, t - 1e-12))
        U = jacobian.matrices[g]
        ratio = levy.log_density_ratio(levy_spec, z)
        a_total += z * z
        mcount[c] += 1
        k_vec += -2.0 * z / beta_eff[c] * U[c]
        j_vec += (z * z * ratio + 2.0 * z) / beta_eff[c] * U[c]
        sc[c] += ratio * U[c]
    score = np.zeros(N)
    for c in range(N):
        if mcount[c]:
            score -= sc[c] / (beta_eff[c] * mcount[c])
    return BelWeights(a_total, k_vec, j_vec, score, flagged=(a_total == 0.0))


# ---------------------------------------------------------------------------
# the estimator
# ---------------------------------------------------------------------------

@dataclass
class BelEstimate:
    """Per-coordinate gradient estimate with its Monte Carlo error bars."""

    mean: np.ndarray
    se: np.ndarray
    n_samples: int
    n_accepted: int
    n_rejected: int
    fd_mean: np.ndarray | None
    fd_se: np.ndarray | None
    stats: dict

    @property
    def rejected_fraction(self) -> float:
        return self.n_rejected / max(self.n_samples, 1)


def _mean_se(values: np.ndarray):
    m = values.mean(axis=0)
    if values.shape[0] < 2:
        return m, np.zeros_like(m)
    se = values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])
    return m, se


def bel_gradient(params: shell.ModelParams, config: integrator.SdePathConfig,
                 x, t: float | None, phi, M: int,
                 levy_spec: levy.LevyMeasureSpec,
                 fd_h: float | None = None,
                 delta_exponent: float = 0.0,
                 stream: int = 0,
                 estimator: str = "jump_score",
                 batch: levy.EventBatch | None = None) -> BelEstimate:
    """Monte Carlo gradient of x -> E[Phi(X(t, x))] at x.

    Two weight choices average Phi(X(t)) times a jump functional over M
    independent paths:

    - "jump_score" (default): per-component score weights
          W_k = - sum_c (1/m_c) sum_{jumps i of c} r(z_i) U[c,k](s_i-)/beta_c
      from a direct one-jump-at-a-time integration by parts.  Exact (up to
      an O(delta_cut) boundary term) for uncoupled dynamics and for
      symmetric measures; for damped coupled shell systems the remaining
      bias is of the order of the off-diagonal Jacobian mass.  Requires a
      symmetric measure (the +-delta_cut boundary terms cancel only then).

    - "a_weighted": W = K/A^2 - J/A with the quadratic-variation-normalized
      weights.  This is the classical closed form; empirically it carries
      an O(1) multi-component normalization bias (each component's score is
      paired with the total A instead of its own component's), so it is
      kept for reference and for its scalar-system validity.

    Paths with no jumps are rejected and counted.  With fd_h set, the same
    paths also carry 2N common-random-number trajectories from x +- fd_h e_k
    whose central difference quotients give an independent estimate of the
    same gradient (`fd_mean`, `fd_se`).

    stats collects the raw weight statistics: the inverse moments
    C_p = E[A^(-2p)] on accepted paths, the mean weighted Jacobian energy
    E int |A^delta U|_F^2 ds, the mean squared weights, and the count of
    per-component slices that carried no jump.
    """
    if M < 2:
        raise DomainError("M must be at least 2")
    if estimator not in ("jump_score", "a_weighted"):
        raise ParameterError(f"unknown estimator {estimator!r}")
    if estimator == "jump_score" and not levy_spec.symmetric:
        raise ParameterError(
            "the jump_score estimator requires a symmetric measure (its "
            "cutoff boundary terms cancel only then); use estimator="
            "'a_weighted' or a symmetric spec")
    horizon = config.T if t is None else float(t)
    cfg = replace(config, T=horizon)
    N = 2 * params.n
    x0 = np.ascontiguousarray(shell._values(x).reshape(-1), dtype=float)
    if x0.size != N:
        raise ShapeError(f"x has {x0.size} coordinates, expected {N}")
    if batch is None:
        rng = make_rng(cfg.seed, stream)
        batch = levy.sample_event_ensemble(levy_spec, horizon, cfg.delta_cut,
                                           N, M, rng)
    lam, beta_eff, drift_vec, karr, model_id = integrator.flat_arrays(
        params, cfg, batch.drift)
    if np.any(beta_eff == 0.0):
        raise DomainError("the gradient weights divide by beta; "
                          "noise_scale must be positive here")
    base = integrator.base_grid(horizon, cfg.dt)
    with_fd = fd_h is not None
    P = batch.n_paths
    xt = np.empty((P, 1 + 2 * N if with_fd else 1, N))
    a_out = np.empty(P)
    k_out = np.empty((P, N))
    j_out = np.empty((P, N))
    score_out = np.empty((P, N))
    mcount = np.empty((P, N), dtype=np.int64)
    jacint = np.empty(P)
    fail = np.empty(P)
    lam2delta = lam ** (2.0 * delta_exponent)
    R = -1.0 if cfg.R is None else float(cfg.R)
    _kernels.run_ensemble_bel(
        x0, fd_h if with_fd else 0.0, batch.offsets, batch.times,
        batch.components, batch.sizes, base, params.kappa, lam, beta_eff,
        drift_vec, model_id, params.a, params.b, karr, R,
        integrator.scheme_id(cfg.scheme), levy_spec.alpha,
        levy_spec.beta_plus, levy_spec.beta_minus, lam2delta, with_fd,
        xt, a_out, k_out, j_out, score_out, mcount, jacint, fail)
    ok = (a_out > 0.0) & (fail < 0.0)
    n_rejected = int(np.sum(~ok))
    if n_rejected > 0.5 * P:
        raise InconclusiveError(
            f"{n_rejected}/{P} paths carried no jumps; decrease delta_cut "
            "so the estimator sees enough jump activity")
    phis = list(phi) if isinstance(phi, (list, tuple)) else [phi]
    if estimator == "jump_score":
        w = score_out[ok]
    else:
        w = (k_out[ok] / a_out[ok, None] ** 2 - j_out[ok] / a_out[ok, None])
    per_phi = []
    for ph in phis:
        phi_vals = ph.value(xt[ok, 0])
        mean, se = _mean_se(phi_vals[:, None] * w)
        fd_mean = fd_se = None
        if with_fd:
            plus = xt[ok][:, 1::2]   # rows 1, 3, ... are x + h e_k
            minus = xt[ok][:, 2::2]
            quot = np.empty((int(ok.sum()), N))
            for k in range(N):
                quot[:, k] = (ph.value(plus[:, k]) - ph.value(minus[:, k])) \
                    / (2.0 * fd_h)
        if with_fd:
            fd_mean, fd_se = _mean_se(quot)
        per_phi.append((mean, se, fd_mean, fd_se))
    mean, se, fd_mean, fd_se = per_phi[0]
    inv2 = 1.0 / a_out[ok] ** 2
    stats = {
        "C1_hat": float(np.mean(inv2)),
        "C1_se": float(np.std(inv2, ddof=1) / math.sqrt(inv2.size)),
        "C2_hat": float(np.mean(inv2 ** 2)),
        "C2_se": float(np.std(inv2 ** 2, ddof=1) / math.sqrt(inv2.size)),
        "jacint_mean": float(np.mean(jacint[ok])),
        "mean_K_sq": float(np.mean(np.sum(k_out[ok] ** 2, axis=1))),
        "mean_J_sq": float(np.mean(np.sum(j_out[ok] ** 2, axis=1))),
        "mean_A": float(np.mean(a_out[ok])),
        "delta_exponent": delta_exponent,
        "horizon": horizon,
        "estimator": estimator,
        "empty_slices": int(np.sum(mcount[ok] == 0)),
        "n_failed": int(np.sum(fail >= 0.0)),
    }
    out = [BelEstimate(m, s, P, int(ok.sum()), n_rejected, fm, fs, stats)
           for (m, s, fm, fs) in per_phi]
    if isinstance(phi, (list, tuple)):
        return out
    return out[0]


def gradient_bound_check(params: shell.ModelParams,
                         config: integrator.SdePathConfig,
                         phi, estimate: BelEstimate,
                         levy_spec: levy.LevyMeasureSpec) -> dict:
    """Check the semigroup gradient bound against the estimate.

    The right-hand side assembled from the estimate's raw statistics is

        RHS = |Phi|_inf sqrt(C_n) sqrt(E int |A^delta U|^2 ds)
              * ( sqrt(C2 M_K) + sqrt(C1 M_J) )

    with C_n = sum beta_i^-2 lam_i^(-2 delta), M_J the squared-ratio moment
    int (z^2 g'/g + 2z)^2 nu(dz), and M_K = 4 m2 for symmetric measures
    (8 (m2 + t m1^2) otherwise, the t-dependent part coming from the
    uncompensated drift of the K weight).  The estimated gradient norm must
    sit below RHS; an unstable C_p estimate yields verdict "inconclusive".
    """
    delta = estimate.stats["delta_exponent"]
    t = estimate.stats["horizon"]
    beta_eff = params.flat_betas * config.noise_scale
    lam = params.flat_eigenvalues
    c_n = float(np.sum(beta_eff ** -2.0 * lam ** (-2.0 * delta)))
    m2 = levy.moment(levy_spec, 2.0)
    m1_signed = levy.integrate_against(levy_spec, lambda z: z)
    if abs(m1_signed) < 1e-14:
        mk = 4.0 * m2
    else:
        mk = 8.0 * (m2 + t * m1_signed ** 2)
    a = levy_spec.alpha

    def jsq_pos(z):
        return ((1.0 - a) * z - levy_spec.beta_plus * z * z) ** 2

    def jsq_neg(w):
        return ((1.0 - a) * w - levy_spec.beta_minus * w * w) ** 2

    mj = (levy._side_quad(levy_spec.c_plus, levy_spec.beta_plus, a, jsq_pos,
                          0.0, np.inf)
          + levy._side_quad(levy_spec.c_minus, levy_spec.beta_minus, a,
                            jsq_neg, 0.0, np.inf))
    c1, c2 = estimate.stats["C1_hat"], estimate.stats["C2_hat"]
    c1_se, c2_se = estimate.stats["C1_se"], estimate.stats["C2_se"]
    unstable = (c1_se > 0.5 * c1) or (c2_se > 0.5 * max(c2, 1e-300))
    rhs = (phi.sup_norm * math.sqrt(c_n)
           * math.sqrt(estimate.stats["jacint_mean"])
           * (math.sqrt(c2 * mk) + math.sqrt(c1 * mj)))
    lhs = float(np.linalg.norm(estimate.mean))
    return {
        "lhs": lhs,
        "rhs": rhs,
        "slack": rhs / lhs if lhs > 0 else math.inf,
        "holds": lhs <= rhs,
        "verdict": "inconclusive" if unstable else
                   ("holds" if lhs <= rhs else "violated"),
        "C_n": c_n,
        "M_K": mk,
        "M_J": mj,
        "C1_hat": c1,
        "C2_hat": c2,
        "delta": delta,
        "jacint_mean": estimate.stats["jacint_mean"],
    }


def a_inverse_moments(levy_spec: levy.LevyMeasureSpec, n_components: int,
                      t_grid, delta_cut: float, M: int, seed: int,
                      p: int = 1) -> dict:
    """Empirical C_p(t) = E[A(t)^(-2p)] profile on accepted paths.

    A(t) is the running sum of squared jump sizes over all components; it
    needs no trajectory integration.  The profile documents the small-time
    degeneracy of the estimator: the theoretical envelope grows like
    t^(-2p) + t^(-4p/alpha) as t -> 0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    rng = make_rng(seed, 31)
    batch = levy.sample_event_ensemble(levy_spec, float(t_grid.max()),
                                       delta_cut, n_components, M, rng)
    out = np.empty(t_grid.size)
    rejected = np.empty(t_grid.size, dtype=np.int64)
    pid = np.repeat(np.arange(M), np.diff(batch.offsets))
    z2 = batch.sizes ** 2
    for i, t in enumerate(t_grid):
        mask = batch.times <= t
        a_t = np.bincount(pid[mask], weights=z2[mask], minlength=M)
        ok = a_t > 0
        rejected[i] = int(np.sum(~ok))
        out[i] = float(np.mean(a_t[ok] ** (-2.0 * p))) if np.any(ok) else math.inf
    return {"t": t_grid, "c_p": out, "rejected": rejected, "p": p}
