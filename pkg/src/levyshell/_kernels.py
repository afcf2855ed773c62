"""Compiled hot loops: event-driven jump-SDE stepping on flat shell states.

Everything here works on flat states of length N = 2 n (two real
coordinates per shell) and on pre-generated, time-sorted event arrays.  No
randomness is drawn inside a kernel, so results are independent of
scheduling and identical across reruns.

Conventions shared by all kernels:

- ``base`` is the sorted array of non-zero base grid times ending exactly
  at T; jump times are merged in on the fly (event-driven stepping).
- A step from t to t' applies the drift/dissipation update with h = t' - t
  and then adds every jump whose time equals t', so stored states are the
  right limits at jump times.
- ``R <= 0`` means no truncation (the cutoff factor is literally 1.0, which
  multiplies bitwise-neutrally); R > 0 multiplies the coupling by
  rho(|u|^2 / R).
- ``scheme``: 0 = semi-implicit (implicit diagonal dissipation, explicit
  coupling), 1 = exponential (exact dissipation factor per step).
"""

import math

import numpy as np
from numba import njit

GOY = 0
SABRA = 1
SEMI_IMPLICIT = 0
EXPONENTIAL = 1

BLOWUP_LIMIT = 1e12


@njit(cache=True, inline="always")
def _shell_re_im(u, j, nsh):
    """(re, im) of shell j (1-based); zero outside 1..nsh."""
    if j < 1 or j > nsh:
        return 0.0, 0.0
    return u[2 * j - 2], u[2 * j - 1]


@njit(cache=True)
def bilinear(model, a, b, karr, u, v, out):
    """out = B(u, v) on flat states; karr[m] = k0 * lam**m, m = 0..nsh+1."""
    nsh = u.shape[0] // 2
    for j in range(1, nsh + 1):
        u1r, u1i = _shell_re_im(u, j + 1, nsh)
        v2r, v2i = _shell_re_im(v, j + 2, nsh)
        umr, umi = _shell_re_im(u, j - 1, nsh)
        vpr, vpi = _shell_re_im(v, j + 1, nsh)
        vmr, vmi = _shell_re_im(v, j - 2, nsh)
        u2r, u2i = _shell_re_im(u, j - 2, nsh)
        vnr, vni = _shell_re_im(v, j - 1, nsh)
        ka = a * karr[j + 1]
        kb = b * karr[j]
        kc = a * karr[j - 1]
        kd = b * karr[j - 1]
        if model == SABRA:
            # t = ka conj(u_{j+1}) v_{j+2} + kb conj(u_{j-1}) v_{j+1}
            #     + kc u_{j-1} v_{j-2} + kd u_{j-2} v_{j-1};  b_j = -i t
            tr = (ka * (u1r * v2r + u1i * v2i)
                  + kb * (umr * vpr + umi * vpi)
                  + kc * (umr * vmr - umi * vmi)
                  + kd * (u2r * vnr - u2i * vni))
            ti = (ka * (u1r * v2i - u1i * v2r)
                  + kb * (umr * vpi - umi * vpr)
                  + kc * (umr * vmi + umi * vmr)
                  + kd * (u2r * vni + u2i * vnr))
            out[2 * j - 2] = ti
            out[2 * j - 1] = -tr
        else:
            # t = ka conj(u_{j+1} v_{j+2}) + kb conj(u_{j-1} v_{j+1})
            #     - kc conj(u_{j-1} v_{j-2}) - kd conj(u_{j-2} v_{j-1});  b_j = i t
            tr = (ka * (u1r * v2r - u1i * v2i)
                  + kb * (umr * vpr - umi * vpi)
                  - kc * (umr * vmr - umi * vmi)
                  - kd * (u2r * vnr - u2i * vni))
            ti = (-ka * (u1r * v2i + u1i * v2r)
                  - kb * (umr * vpi + umi * vpr)
                  + kc * (umr * vmi + umi * vmr)
                  + kd * (u2r * vni + u2i * vnr))
            out[2 * j - 2] = -ti
            out[2 * j - 1] = tr


@njit(cache=True, inline="always")
def _rho(x):
    if x <= 1.0:
        return 1.0
    if x >= 2.0:
        return 0.0
    s = math.exp(-1.0 / (2.0 - x))
    t = math.exp(-1.0 / (x - 1.0))
    return s / (s + t)


@njit(cache=True, inline="always")
def _rho_prime(x):
    if x <= 1.0 or x >= 2.0:
        return 0.0
    s = math.exp(-1.0 / (2.0 - x))
    t = math.exp(-1.0 / (x - 1.0))
    ds = -s / (2.0 - x) ** 2
    dt = t / (x - 1.0) ** 2
    return (ds * t - s * dt) / (s + t) ** 2


@njit(cache=True, inline="always")
def _rho_of_state(y, R):
    if R <= 0.0:
        return 1.0
    q = 0.0
    for i in range(y.shape[0]):
        q += y[i] * y[i]
    return _rho(q / R)


@njit(cache=True)
def _drift_step(y, h, kap, lam, dr, model, a, b, karr, R, scheme, bu):
    """One deterministic substep of length h, in place; bu is scratch."""
    rho = _rho_of_state(y, R)
    if rho != 0.0:
        bilinear(model, a, b, karr, y, y, bu)
    else:
        for i in range(y.shape[0]):
            bu[i] = 0.0
    if scheme == SEMI_IMPLICIT:
        for i in range(y.shape[0]):
            y[i] = (y[i] + h * (dr[i] - rho * bu[i])) / (1.0 + h * kap * lam[i])
    else:
        for i in range(y.shape[0]):
            y[i] = math.exp(-kap * lam[i] * h) * (y[i] + h * (dr[i] - rho * bu[i]))


@njit(cache=True, inline="always")
def _finite(y):
    for i in range(y.shape[0]):
        if not np.isfinite(y[i]) or abs(y[i]) > BLOWUP_LIMIT:
            return False
    return True


@njit(cache=True)
def run_path(y0, base, ev_t, ev_c, ev_z, kap, lam, beta, dr,
             model, a, b, karr, R, scheme, times_out, states_out):
    """Integrate one path, storing the state at every grid time.

    Returns (g, fail_time): g is the number of grid points written
    (including t = 0); fail_time is the blow-up time or -1.0.
    """
    N = y0.shape[0]
    y = y0.copy()
    bu = np.empty(N)
    times_out[0] = 0.0
    for i in range(N):
        states_out[0, i] = y[i]
    g = 1
    t = 0.0
    ib = 0
    ie = 0
    nb = base.shape[0]
    ne = ev_t.shape[0]
    while ib < nb or ie < ne:
        tb = base[ib] if ib < nb else np.inf
        te = ev_t[ie] if ie < ne else np.inf
        tn = tb if tb <= te else te
        h = tn - t
        if h > 0.0:
            _drift_step(y, h, kap, lam, dr, model, a, b, karr, R, scheme, bu)
        while ie < ne and ev_t[ie] == tn:
            c = ev_c[ie]
            y[c] += beta[c] * ev_z[ie]
            ie += 1
        if tb == tn:
            ib += 1
        times_out[g] = tn
        for i in range(N):
            states_out[g, i] = y[i]
        g += 1
        t = tn
        if not _finite(y):
            return g, t
    return g, -1.0


@njit(cache=True)
def run_ensemble_stats(y0, offsets, ev_t, ev_c, ev_z, base, probe_times,
                       kap, lam, beta, dr, model, a, b, karr, R, scheme,
                       probes_out, sup2probe_out, sup2_out, diss2_out,
                       diss4_out, fail_out):
    """Ensemble statistics without storing trajectories.

    For each path p: states at the probe times (first grid time at or past
    each probe), the running sup of |u|^2 at each probe time and over the
    whole horizon, the left-rectangle integrals of ||u||^2 and
    ||u||^2 |u|^2, and the blow-up time (-1 if none).
    """
    P = offsets.shape[0] - 1
    N = y0.shape[0]
    nq = probe_times.shape[0]
    nb = base.shape[0]
    bu = np.empty(N)
    y = np.empty(N)
    for p in range(P):
        for i in range(N):
            y[i] = y0[i]
        sup2 = 0.0
        for i in range(N):
            sup2 += y[i] * y[i]
        d2 = 0.0
        d4 = 0.0
        iq = 0
        fail = -1.0
        t = 0.0
        ib = 0
        ie = offsets[p]
        e1 = offsets[p + 1]
        while ib < nb or ie < e1:
            tb = base[ib] if ib < nb else np.inf
            te = ev_t[ie] if ie < e1 else np.inf
            tn = tb if tb <= te else te
            h = tn - t
            if h > 0.0:
                # trapezoid over the smooth stretch: left value after the
                # previous grid point's jumps, right value before this one's
                h2l = 0.0
                v2l = 0.0
                for i in range(N):
                    h2l += y[i] * y[i]
                    v2l += lam[i] * y[i] * y[i]
                _drift_step(y, h, kap, lam, dr, model, a, b, karr, R, scheme, bu)
                h2r = 0.0
                v2r = 0.0
                for i in range(N):
                    h2r += y[i] * y[i]
                    v2r += lam[i] * y[i] * y[i]
                d2 += 0.5 * h * (v2l + v2r)
                d4 += 0.5 * h * (v2l * h2l + v2r * h2r)
            while ie < e1 and ev_t[ie] == tn:
                c = ev_c[ie]
                y[c] += beta[c] * ev_z[ie]
                ie += 1
            if tb == tn:
                ib += 1
            t = tn
            q = 0.0
            for i in range(N):
                q += y[i] * y[i]
            if q > sup2:
                sup2 = q
            while iq < nq and tn >= probe_times[iq] - 1e-12:
                for i in range(N):
                    probes_out[p, iq, i] = y[i]
                sup2probe_out[p, iq] = sup2
                iq += 1
            if fail < 0.0 and not _finite(y):
                fail = t
                break
        while iq < nq:  # blown-up path: fill remaining probes with last state
            for i in range(N):
                probes_out[p, iq, i] = y[i]
            sup2probe_out[p, iq] = sup2
            iq += 1
        sup2_out[p] = sup2
        diss2_out[p] = d2
        diss4_out[p] = d4
        fail_out[p] = fail


@njit(cache=True)
def run_ensemble_bel(x0, h_fd, offsets, ev_t, ev_c, ev_z, base,
                     kap, lam, beta, dr, model, a, b, karr, R, scheme,
                     alpha_g, beta_g_pos, beta_g_neg, lam2delta,
                     with_fd, xt_out, a_out, k_out, j_out, score_out,
                     mcount_out, jacint_out, fail_out):
    """Gradient-estimation ensemble: terminal states, Jacobian, jump weights.

    Integrates, per path, the main state (row 0 of xt_out), the full
    Jacobian of the flow map, and optionally 2N finite-difference states
    started from x0 +- h_fd e_k (rows 1..2N).  At each jump (s, c, z) two
    weight families accumulate, both using the Jacobian at s- (continuous
    across jumps: the noise is additive) and the analytic ratio
    r(z) = g'(z)/g(z) = -(1 + alpha)/z -+ beta_g:

    quadratic-variation weights
        A += z^2
        K[k] -= 2 (z / beta_c) U[c, k]
        J[k] += (z^2 r(z) + 2 z) / beta_c * U[c, k]

    per-component score sums (normalized by the per-component jump counts
    mcount at the end of the path)
        score[k] -= r(z) / beta_c * U[c, k] / m_c .

    jacint_out accumulates the left-rectangle integral of
    sum_{c,k} lam2delta[c] U[c,k]^2 dt (the weighted Jacobian energy used
    by the gradient bound).
    """
    P = offsets.shape[0] - 1
    N = x0.shape[0]
    nrows = 1 + 2 * N if with_fd else 1
    nb = base.shape[0]
    bu = np.empty(N)
    dbu = np.empty(N)
    dbu2 = np.empty(N)
    tmpc = np.empty(N)
    S = np.empty((nrows, N))
    U = np.empty((N, N))
    SC = np.empty((N, N))
    for p in range(P):
        for r in range(nrows):
            for i in range(N):
                S[r, i] = x0[i]
        if with_fd:
            for k in range(N):
                S[1 + 2 * k, k] += h_fd
                S[2 + 2 * k, k] -= h_fd
        for i in range(N):
            for k in range(N):
                U[i, k] = 1.0 if i == k else 0.0
                SC[i, k] = 0.0
            mcount_out[p, i] = 0
        av = 0.0
        jacint = 0.0
        for k in range(N):
            k_out[p, k] = 0.0
            j_out[p, k] = 0.0
        fail = -1.0
        t = 0.0
        ib = 0
        ie = offsets[p]
        e1 = offsets[p + 1]
        while ib < nb or ie < e1:
            tb = base[ib] if ib < nb else np.inf
            te = ev_t[ie] if ie < e1 else np.inf
            tn = tb if tb <= te else te
            h = tn - t
            if h > 0.0:
                # jacobian energy integral (left rectangle)
                acc = 0.0
                for c in range(N):
                    w = lam2delta[c]
                    for k in range(N):
                        acc += w * U[c, k] * U[c, k]
                jacint += h * acc
                # main state: remember rho, rho', B(u,u) for the jacobian
                y = S[0]
                q = 0.0
                for i in range(N):
                    q += y[i] * y[i]
                if R > 0.0:
                    rho = _rho(q / R)
                    rhop = _rho_prime(q / R)
                else:
                    rho = 1.0
                    rhop = 0.0
                if rho != 0.0 or rhop != 0.0:
                    bilinear(model, a, b, karr, y, y, bu)
                else:
                    for i in range(N):
                        bu[i] = 0.0
                # jacobian columns first (need y at the left endpoint)
                for k in range(N):
                    # directional derivative of the coupling along U[:, k]
                    dot = 0.0
                    for i in range(N):
                        dot += y[i] * U[i, k]
                    if rho != 0.0:
                        for i in range(N):
                            tmpc[i] = U[i, k]
                        bilinear(model, a, b, karr, y, tmpc, dbu)
                        bilinear(model, a, b, karr, tmpc, y, dbu2)
                        for i in range(N):
                            dbu[i] = rho * (dbu[i] + dbu2[i])
                    else:
                        for i in range(N):
                            dbu[i] = 0.0
                    if rhop != 0.0:
                        s = rhop * 2.0 * dot / R
                        for i in range(N):
                            dbu[i] += s * bu[i]
                    if scheme == SEMI_IMPLICIT:
                        for i in range(N):
                            U[i, k] = (U[i, k] - h * dbu[i]) / (1.0 + h * kap * lam[i])
                    else:
                        for i in range(N):
                            U[i, k] = math.exp(-kap * lam[i] * h) * (U[i, k] - h * dbu[i])
                # main state update, reusing bu
                if scheme == SEMI_IMPLICIT:
                    for i in range(N):
                        y[i] = (y[i] + h * (dr[i] - rho * bu[i])) / (1.0 + h * kap * lam[i])
                else:
                    for i in range(N):
                        y[i] = math.exp(-kap * lam[i] * h) * (y[i] + h * (dr[i] - rho * bu[i]))
                # finite-difference rows
                if with_fd:
                    for r in range(1, nrows):
                        _drift_step(S[r], h, kap, lam, dr, model, a, b, karr,
                                    R, scheme, dbu)
            while ie < e1 and ev_t[ie] == tn:
                c = ev_c[ie]
                z = ev_z[ie]
                for r in range(nrows):
                    S[r, c] += beta[c] * z
                av += z * z
                mcount_out[p, c] += 1
                if z > 0.0:
                    gr = -(1.0 + alpha_g) / z - beta_g_pos
                else:
                    gr = -(1.0 + alpha_g) / z + beta_g_neg
                wk = -2.0 * z / beta[c]
                wj = (z * z * gr + 2.0 * z) / beta[c]
                for k in range(N):
                    k_out[p, k] += wk * U[c, k]
                    j_out[p, k] += wj * U[c, k]
                    SC[c, k] += gr * U[c, k]
                ie += 1
            if tb == tn:
                ib += 1
            t = tn
            if fail < 0.0 and not _finite(S[0]):
                fail = t
                break
        for r in range(nrows):
            for i in range(N):
                xt_out[p, r, i] = S[r, i]
        for k in range(N):
            acc = 0.0
            for c in range(N):
                if mcount_out[p, c] > 0:
                    acc -= SC[c, k] / (beta[c] * mcount_out[p, c])
            score_out[p, k] = acc
        a_out[p] = av
        jacint_out[p] = jacint
        fail_out[p] = fail


@njit(cache=True)
def run_jacobian_path(traj_times, traj_states, kap, lam, model, a, b, karr,
                      R, scheme, u_out):
    """Jacobian flow along a stored trajectory; u_out has shape (G, N, N).

    u_out[g, i, k] = d X_i(t_g) / d x_k; columns evolve with the same scheme
    and grid as the trajectory and are continuous across jump times.
    """
    G = traj_times.shape[0]
    N = traj_states.shape[1]
    U = np.empty((N, N))
    dbu = np.empty(N)
    dbu2 = np.empty(N)
    tmpc = np.empty(N)
    bu = np.empty(N)
    for i in range(N):
        for k in range(N):
            U[i, k] = 1.0 if i == k else 0.0
            u_out[0, i, k] = U[i, k]
    for g in range(1, G):
        h = traj_times[g] - traj_times[g - 1]
        if h > 0.0:
            y = traj_states[g - 1]
            q = 0.0
            for i in range(N):
                q += y[i] * y[i]
            if R > 0.0:
                rho = _rho(q / R)
                rhop = _rho_prime(q / R)
            else:
                rho = 1.0
                rhop = 0.0
            if rho != 0.0 or rhop != 0.0:
                bilinear(model, a, b, karr, y, y, bu)
            else:
                for i in range(N):
                    bu[i] = 0.0
            for k in range(N):
                dot = 0.0
                for i in range(N):
                    dot += y[i] * U[i, k]
                if rho != 0.0:
                    for i in range(N):
                        tmpc[i] = U[i, k]
                    bilinear(model, a, b, karr, y, tmpc, dbu)
                    bilinear(model, a, b, karr, tmpc, y, dbu2)
                    for i in range(N):
                        dbu[i] = rho * (dbu[i] + dbu2[i])
                else:
                    for i in range(N):
                        dbu[i] = 0.0
                if rhop != 0.0:
                    s = rhop * 2.0 * dot / R
                    for i in range(N):
                        dbu[i] += s * bu[i]
                if scheme == SEMI_IMPLICIT:
                    for i in range(N):
                        U[i, k] = (U[i, k] - h * dbu[i]) / (1.0 + h * kap * lam[i])
                else:
                    for i in range(N):
                        U[i, k] = math.exp(-kap * lam[i] * h) * (U[i, k] - h * dbu[i])
        for i in range(N):
            for k in range(N):
                u_out[g, i, k] = U[i, k]


@njit(cache=True)
def run_conv_sup(offsets, ev_t, ev_c, ev_z, base, kap, lam, beta, dr, N,
                 sup_out, terminal_out):
    """Exact per-component dissipative recursion for the noise convolution.

    Returns, per path, the sup over grid points of the squared H-norm and
    the terminal value.  Between grid points each component relaxes toward
    its drift equilibrium, so for zero drift the grid sup is the exact sup.
    """
    P = offsets.shape[0] - 1
    nb = base.shape[0]
    S = np.empty(N)
    for p in range(P):
        for i in range(N):
            S[i] = 0.0
        sup = 0.0
        t = 0.0
        ib = 0
        ie = offsets[p]
        e1 = offsets[p + 1]
        while ib < nb or ie < e1:
            tb = base[ib] if ib < nb else np.inf
            te = ev_t[ie] if ie < e1 else np.inf
            tn = tb if tb <= te else te
            h = tn - t
            if h > 0.0:
                for i in range(N):
                    e = math.exp(-kap * lam[i] * h)
                    S[i] = e * S[i] + dr[i] * (1.0 - e) / (kap * lam[i])
            while ie < e1 and ev_t[ie] == tn:
                c = ev_c[ie]
                S[c] += beta[c] * ev_z[ie]
                ie += 1
            if tb == tn:
                ib += 1
            t = tn
            q = 0.0
            for i in range(N):
                q += S[i] * S[i]
            if q > sup:
                sup = q
        sup_out[p] = sup
        for i in range(N):
            terminal_out[p, i] = S[i]
