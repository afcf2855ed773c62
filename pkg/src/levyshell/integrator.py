"""Event-driven time stepping for the shell jump-SDE and its split form.

The state equation on the n-shell system (flat dimension N = 2 n) is

    du + [kappa A u + Pi_n B(u, u)] dt = sum_i beta_i dl_i(t) e_i,

optionally with the coupling replaced by its cutoff version
rho(|u|^2 / R) B(u, u).  Each flat coordinate i carries an independent
copy of the driving jump process; both coordinates of shell j share the
roughness coefficient beta_j.

Jump times enter the time grid exactly (no binning): the grid is the union
of the base grid {dt, 2 dt, ..., T} with all jump times, and stored states
are the right limits at jump instants.  Two schemes are available; both are
unconditionally stable in the dissipative part:

- semi_implicit: implicit in the diagonal dissipation, explicit coupling;
- exponential:   exact dissipation factor exp(-kappa lam_i h) per step.

The module also provides the linear noise convolution (exact per-component
recursion), the deterministic complement solver for the pathwise splitting
u = v + S, and a resolution-refinement report across nested shell counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, levy, shell
from .errors import BlowUpError, DomainError, ParameterError, ShapeError
from .rng import make_rng

__all__ = [
    "SdePathConfig",
    "Trajectory",
    "base_grid",
    "merged_grid",
    "integrate",
    "step_galerkin",
    "step_truncated",
    "ou_convolution",
    "solve_v",
    "gronwall_complement_bound",
    "galerkin_refinement",
    "ensemble_stats",
    "scheme_id",
    "flat_arrays",
]

SCHEMES = ("semi_implicit", "exponential")

# guard threshold for explicit treatment of stiff scales; violations are
# reported as warnings, not errors: both schemes are unconditionally stable
# in the dissipative part, and a hard error would forbid large shell counts
STIFFNESS_GUARD = 1e3


@dataclass(frozen=True)
class SdePathConfig:
    """Time-stepping configuration for one stochastic trajectory.

    R is the truncation level of the cutoff coupling; None selects the full
    equation.  noise_scale multiplies every beta_i (0 switches the noise
    off while keeping the grid machinery intact).
    """

    dt: float
    T: float
    delta_cut: float = 1e-3
    seed: int = 0
    R: float | None = None
    scheme: str = "semi_implicit"
    noise_scale: float = 1.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ParameterError("; ".join(problems))

    def violations(self) -> list:
        out = []
        if self.dt <= 0:
            out.append(f"dt={self.dt} must be positive")
        if self.T < 0:
            out.append(f"T={self.T} must be nonnegative")
        if self.T > 0 and self.dt > self.T:
            out.append(f"dt={self.dt} exceeds the horizon T={self.T}")
        if self.delta_cut <= 0:
            out.append(f"delta_cut={self.delta_cut} must be positive")
        if self.R is not None and self.R <= 0:
            out.append(f"R={self.R} must be positive (or None for the full equation)")
        if self.scheme not in SCHEMES:
            out.append(f"scheme={self.scheme!r} not one of {SCHEMES}")
        if self.noise_scale < 0:
            out.append(f"noise_scale={self.noise_scale} must be nonnegative")
        return out

    def warnings(self, params: shell.ModelParams) -> list:
        out = []
        stiff = self.dt * params.kappa * float(params.eigenvalues[-1])
        if stiff >= STIFFNESS_GUARD:
            out.append(
                f"dt*kappa*lam_n = {stiff:.3g} exceeds {STIFFNESS_GUARD:.0e}; "
                "harmless for the implicit/exponential dissipation used here, "
                "but the explicit coupling term may limit accuracy")
        return out

    def with_R(self, R: float | None) -> "SdePathConfig":
        return replace(self, R=R)


@dataclass
class Trajectory:
    """A stored path: grid times, flat states, and the noise that drove it."""

    times: np.ndarray          # (G,)
    states: np.ndarray         # (G, N) flat
    noise: levy.JumpPath
    params: shell.ModelParams
    config: SdePathConfig
    convolution: np.ndarray | None = None  # (G, N) when computed

    @property
    def n_grid(self) -> int:
        return self.times.size

    def states_shells(self) -> np.ndarray:
        """(G, n, 2) view of the flat states."""
        g, n2 = self.states.shape
        return self.states.reshape(g, n2 // 2, 2)

    def state_at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t - 1e-12))
        return self.states[min(idx, self.n_grid - 1)]


def scheme_id(name: str) -> int:
    if name not in SCHEMES:
        raise ParameterError(f"scheme={name!r} not one of {SCHEMES}")
    return _kernels.SEMI_IMPLICIT if name == "semi_implicit" else _kernels.EXPONENTIAL


def base_grid(T: float, dt: float) -> np.ndarray:
    """Strictly increasing base times (0, T] ending exactly at T."""
    if T == 0:
        return np.empty(0)
    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    g = np.empty(nsteps)
    g[:-1] = dt * np.arange(1, nsteps)
    g[-1] = T
    return g


def merged_grid(base: np.ndarray, ev_times: np.ndarray) -> np.ndarray:
    """Union of base and event times with t = 0 prepended."""
    return np.concatenate(([0.0], np.union1d(base, ev_times)))


def flat_arrays(params: shell.ModelParams, config: SdePathConfig, drift=0.0):
    """(lam, beta_eff, drift_vec, karr, model_id) in kernel layout.

    drift is the per-component compensating rate, scalar or length-2n.
    """
    lam = params.flat_eigenvalues
    beta_eff = params.flat_betas * config.noise_scale
    drift_vec = np.ascontiguousarray(beta_eff * np.asarray(drift, dtype=float))
    karr = params.k0 * params.lam ** np.arange(0.0, params.n + 2.0)
    model_id = _kernels.SABRA if params.model == "sabra" else _kernels.GOY
    return lam, beta_eff, drift_vec, karr, model_id


def _resolve_noise(params: shell.ModelParams, config: SdePathConfig,
                   levy_spec: levy.LevyMeasureSpec | None,
                   jump_path: levy.JumpPath | None,
                   stream: int = 0) -> levy.JumpPath:
    if jump_path is not None:
        if jump_path.n_components != 2 * params.n:
            raise ShapeError(
                f"jump path has {jump_path.n_components} components; the "
                f"{params.n}-shell system needs {2 * params.n}")
        return jump_path
    if levy_spec is None:
        raise DomainError("either a jump_path or a levy_spec is required")
    rng = make_rng(config.seed, stream)
    return levy.sample_path(levy_spec, config.T, config.delta_cut, rng,
                            n_components=2 * params.n)


def integrate(params: shell.ModelParams, config: SdePathConfig, xi,
              levy_spec: levy.LevyMeasureSpec | None = None,
              jump_path: levy.JumpPath | None = None,
              raise_on_blowup: bool = True,
              extra_times: np.ndarray | None = None) -> Trajectory:
    """Run one trajectory of the full (R=None) or cutoff (R>0) equation.

    extra_times forces additional grid points (used to step two resolutions
    on a shared grid so their retained coordinates are comparable step by
    step).
    """
    path = _resolve_noise(params, config, levy_spec, jump_path)
    y0 = np.ascontiguousarray(shell._values(xi).reshape(-1), dtype=float)
    if y0.size != 2 * params.n:
        raise ShapeError(f"initial state has {y0.size} coordinates, expected {2 * params.n}")
    lam, beta_eff, drift_vec, karr, model_id = flat_arrays(
        params, config, path.small_jump_drift)
    base = base_grid(config.T, config.dt)
    if extra_times is not None and extra_times.size:
        base = np.union1d(base, extra_times[(extra_times > 0)
                                            & (extra_times <= config.T)])
    ev_t, ev_c, ev_z = path.merged()
    gmax = base.size + ev_t.size + 1
    times = np.empty(gmax)
    states = np.empty((gmax, y0.size))
    R = -1.0 if config.R is None else float(config.R)
    g, fail = _kernels.run_path(y0, base, ev_t, ev_c, ev_z, params.kappa, lam,
                                beta_eff, drift_vec, model_id, params.a,
                                params.b, karr, R, scheme_id(config.scheme),
                                times, states)
    if fail >= 0.0 and raise_on_blowup:
        raise BlowUpError(f"trajectory exceeded the blow-up limit at t={fail:.6g}",
                          fail)
    return Trajectory(times[:g].copy(), states[:g].copy(), path, params, config)


def _one_step(params: shell.ModelParams, config: SdePathConfig, state,
              events, R: float | None) -> np.ndarray:
    """Advance one step of length config.dt with the given in-step events."""
    ev = sorted(events, key=lambda e: e[0])
    n_comp = 2 * params.n
    for (t, c, z) in ev:
        if not (0.0 < t <= config.dt):
            raise DomainError(f"event time {t} outside the step (0, {config.dt}]")
        if not (0 <= c < n_comp):
            raise DomainError(f"component {c} outside 0..{n_comp - 1}")
    times = [np.empty(0)] * n_comp
    sizes = [np.empty(0)] * n_comp
    for c in range(n_comp):
        mine = [(t, z) for (t, cc, z) in ev if cc == c]
        if mine:
            times[c] = np.array([t for t, _ in mine])
            sizes[c] = np.array([z for _, z in mine])
    path = levy.JumpPath(config.dt, config.delta_cut, tuple(times), tuple(sizes),
                         np.zeros(n_comp))
    one = replace(config, T=config.dt, R=R)
    traj = integrate(params, one, state, jump_path=path)
    return traj.states[-1].reshape(params.n, 2)


def step_galerkin(params: shell.ModelParams, config: SdePathConfig, state,
                  jump_events_in_step=()) -> np.ndarray:
    """One step of the full equation.

    jump_events_in_step: iterable of (time_in_step, flat_component, size)
    with times in (0, dt]; they are applied in time order after the
    deterministic update, exactly as in full trajectories.
    """
    return _one_step(params, config, state, jump_events_in_step, None)


def step_truncated(params: shell.ModelParams, config: SdePathConfig, state,
                   jump_events_in_step=()) -> np.ndarray:
    """One step of the cutoff equation (config.R must be set)."""
    if config.R is None:
        raise ParameterError("step_truncated requires config.R")
    return _one_step(params, config, state, jump_events_in_step, config.R)


def ou_convolution(params: shell.ModelParams, config: SdePathConfig,
                   jump_path: levy.JumpPath, grid: np.ndarray | None = None):
    """The linear dissipative response to the noise, exactly per component.

    Solves dS_i = -kappa lam_i S_i dt + beta_i dl_i with S(0) = 0 by the
    exact recursion over the merged grid: between grid points the decay
    factor is exact and the compensating drift is integrated in closed
    form; jumps land undamped on their own grid points.

    Returns (times, S) with S of shape (G, N).
    """
    if jump_path.n_components != 2 * params.n:
        raise ShapeError("jump path component count does not match the model")
    lam, beta_eff, drift_vec, _, _ = flat_arrays(params, config,
                                                 jump_path.small_jump_drift)
    ev_t, ev_c, ev_z = jump_path.merged()
    times = merged_grid(base_grid(config.T, config.dt), ev_t) if grid is None else grid
    N = 2 * params.n
    S = np.zeros((times.size, N))
    cur = np.zeros(N)
    ptr = 0
    for g in range(1, times.size):
        h = times[g] - times[g - 1]
        decay = np.exp(-params.kappa * lam * h)
        cur = decay * cur + drift_vec * (1.0 - decay) / (params.kappa * lam)
        while ptr < ev_t.size and ev_t[ptr] <= times[g]:
            c = ev_c[ptr]
            cur[c] += beta_eff[c] * ev_z[ptr] * math.exp(
                -params.kappa * lam[c] * (times[g] - ev_t[ptr]))
            ptr += 1
        S[g] = cur
    return times, S


def solve_v(params: shell.ModelParams, config: SdePathConfig,
            times: np.ndarray, S: np.ndarray, v0) -> np.ndarray:
    """Deterministic complement of the splitting u = v + S.

    Integrates dv/dt + kappa A v + rho(|v+S|^2/R) B(v+S, v+S) = 0 on the
    given grid with the semi-implicit scheme (the coupling evaluated at the
    left endpoint).  With R = None the cutoff factor is 1.
    """
    v = np.empty_like(S)
    cur = np.ascontiguousarray(shell._values(v0).reshape(-1), dtype=float)
    if cur.size != S.shape[1]:
        raise ShapeError("v0 does not match the convolution dimension")
    v[0] = cur
    lam = params.flat_eigenvalues
    n = params.n
    for g in range(1, times.size):
        h = times[g] - times[g - 1]
        w = (cur + S[g - 1]).reshape(n, 2)
        if config.R is None:
            rho = 1.0
        else:
            rho = shell.cutoff_rho(float(np.sum(w * w)) / config.R)
        bw = rho * shell.nonlinearity(params, w, w).reshape(-1) if rho != 0.0 \
            else np.zeros_like(cur)
        cur = (cur - h * bw) / (1.0 + h * params.kappa * lam)
        if not np.all(np.isfinite(cur)) or np.max(np.abs(cur)) > _kernels.BLOWUP_LIMIT:
            raise BlowUpError(f"complement solver blew up at t={times[g]:.6g}",
                              float(times[g]))
        v[g] = cur
    return v


def gronwall_complement_bound(params: shell.ModelParams, C0: float,
                              v0_norm_sq: float, sup_S_sq: float,
                              T: float) -> float:
    """A priori bound on sup_t |v(t)|^2 for the complement equation.

    With C_kappa = 2 C0^2 / kappa:
        sup |v|^2 <= (|v0|^2 + C_kappa T sup|S|^4) exp(C_kappa T sup|S|^2).
    """
    ck = 2.0 * C0 * C0 / params.kappa
    return (v0_norm_sq + ck * T * sup_S_sq ** 2) * math.exp(ck * T * sup_S_sq)


def ensemble_stats(params: shell.ModelParams, config: SdePathConfig, xi,
                   n_paths: int, probe_times, levy_spec: levy.LevyMeasureSpec,
                   stream: int = 0,
                   batch: levy.EventBatch | None = None) -> dict:
    """Monte Carlo ensemble of trajectories, summarized without storage.

    Returns per-path arrays: `probes` (n_paths, n_probes, N) right-limit
    states at the probe times, `sup2` running sup of |u|^2, `diss2`/`diss4`
    the integrals of ||u||^2 and ||u||^2 |u|^2, and `fail` blow-up times
    (-1 when none).  All noise is drawn up front from the stream
    (config.seed, stream).
    """
    N = 2 * params.n
    if batch is None:
        rng = make_rng(config.seed, stream)
        batch = levy.sample_event_ensemble(levy_spec, config.T, config.delta_cut,
                                           N, n_paths, rng)
    probe_times = np.asarray(probe_times, dtype=float)
    y0 = np.ascontiguousarray(shell._values(xi).reshape(-1), dtype=float)
    lam, beta_eff, drift_vec, karr, model_id = flat_arrays(params, config,
                                                           batch.drift)
    base = base_grid(config.T, config.dt)
    P = batch.n_paths
    probes = np.empty((P, probe_times.size, N))
    sup2probe = np.empty((P, probe_times.size))
    sup2 = np.empty(P)
    diss2 = np.empty(P)
    diss4 = np.empty(P)
    fail = np.empty(P)
    R = -1.0 if config.R is None else float(config.R)
    _kernels.run_ensemble_stats(y0, batch.offsets, batch.times, batch.components,
                                batch.sizes, base, probe_times, params.kappa,
                                lam, beta_eff, drift_vec, model_id, params.a,
                                params.b, karr, R, scheme_id(config.scheme),
                                probes, sup2probe, sup2, diss2, diss4, fail)
    return {"probes": probes, "sup2_at_probes": sup2probe, "sup2": sup2,
            "diss2": diss2, "diss4": diss4, "fail": fail, "batch": batch,
            "probe_times": probe_times}


def galerkin_refinement(params: shell.ModelParams, config: SdePathConfig,
                        coarse_list, n_fine: int,
                        levy_spec: levy.LevyMeasureSpec,
                        n_seeds: int = 20) -> dict:
    """Squared L^2(0,T;H) distance between nested shell resolutions.

    Every coarse run shares both the jump path (restricted to its
    components) and the fine run's full time grid, so in the linear case
    the retained coordinates agree exactly and the distance is exactly the
    energy in the discarded shells.
    """
    coarse_list = sorted(coarse_list)
    if coarse_list[-1] > n_fine:
        raise DomainError("coarse shell counts must not exceed n_fine")
    fine_params = replace(params, n=n_fine)
    errors = np.empty((n_seeds, len(coarse_list)))
    for s in range(n_seeds):
        rng = make_rng(config.seed, 7_000 + s)
        path = levy.sample_path(levy_spec, config.T, config.delta_cut, rng,
                                n_components=2 * n_fine)
        fine = integrate(fine_params, config, shell.ShellState.zero(n_fine),
                         jump_path=path)
        all_ev_times = np.concatenate(path.times) if any(
            t.size for t in path.times) else np.empty(0)
        for ci, nc in enumerate(coarse_list):
            cparams = replace(params, n=nc)
            cpath = levy.JumpPath(
                path.horizon, path.delta_cut, path.times[:2 * nc],
                path.sizes[:2 * nc], path.small_jump_drift[:2 * nc])
            # share the fine grid so retained coordinates take the same steps
            coarse = integrate(cparams, config, shell.ShellState.zero(nc),
                               jump_path=cpath, extra_times=all_ev_times)
            if coarse.times.size != fine.times.size:
                raise ShapeError("refinement grids failed to align")
            diff = fine.states[:, :2 * nc] - coarse.states
            err2 = (np.sum(diff * diff, axis=1)
                    + np.sum(fine.states[:, 2 * nc:] ** 2, axis=1))
            errors[s, ci] = float(np.trapezoid(err2, fine.times))
    return {"coarse_list": coarse_list, "n_fine": n_fine,
            "l2_errors": errors,
            "mean_errors": errors.mean(axis=0),
            "monotone_fraction": float(np.mean(np.all(np.diff(errors, axis=1) < 0,
                                                      axis=1)))}
