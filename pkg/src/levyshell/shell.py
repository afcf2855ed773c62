"""Finite shell vectors: the dissipative operator, GOY/SABRA couplings, cutoff.

State convention: a shell vector is an ``(n, 2)`` float array; row ``j``
holds the real and imaginary part of the complex amplitude of shell ``j+1``.
Wave numbers are geometric, ``k_j = k0 * lam**j``, and the dissipative
operator acts diagonally with eigenvalues ``lam_j = k0 * lam**(2 j)``
(each eigenvalue carried by both real coordinates of its shell).

Both couplings are quadratic with nearest/next-nearest shell interactions
and satisfy the energy-pairing identity <B(u, v), v> = 0 exactly under the
ghost-shell convention u_{-1} = u_0 = 0 and truncation of the terms that
would reference shells beyond n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, ShapeError

__all__ = [
    "ModelParams",
    "ShellState",
    "apply_A",
    "nonlinearity",
    "cutoff_rho",
    "cutoff_rho_prime",
    "truncated_nonlinearity",
    "linearized_nonlinearity",
    "h_norm",
    "v_norm",
    "v_star_norm",
    "estimate_bilinear_constants",
    "estimate_truncated_lipschitz",
]

MODELS = ("goy", "sabra")


@dataclass(frozen=True)
class ModelParams:
    """Shell-model constants.

    kappa   viscosity (> 0)
    a, b    coupling coefficients
    k0      wave-number scale (> 0)
    lam     shell spacing (> 1)
    theta   noise-roughness exponent, in (1/4, 1/2); beta_j = lam_j**(-theta)
    n       shell count (>= 2)
    model   "goy" or "sabra"
    """

    kappa: float = 1.0
    a: float = 1.0
    b: float = -0.5
    k0: float = 1.0
    lam: float = 2.0
    theta: float = 0.3
    n: int = 32
    model: str = "sabra"

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ParameterError("; ".join(problems))

    def violations(self) -> list:
        """All constraint violations (empty when valid)."""
        out = []
        if self.kappa <= 0:
            out.append(f"kappa={self.kappa} must be positive")
        if self.k0 <= 0:
            out.append(f"k0={self.k0} must be positive")
        if self.lam <= 1:
            out.append(f"lam={self.lam} must exceed 1")
        if not (0.25 < self.theta < 0.5):
            out.append(f"theta={self.theta} violates theta in (1/4, 1/2)")
        if self.n < 2:
            out.append(f"n={self.n} must be at least 2")
        if self.model not in MODELS:
            out.append(f"model={self.model!r} not one of {MODELS}")
        return out

    # -- derived spectra ----------------------------------------------------

    def wave_numbers(self, up_to: int | None = None) -> np.ndarray:
        """k_j = k0 lam**j for j = 1..up_to (default n + 1, as used by B)."""
        m = self.n + 1 if up_to is None else up_to
        return self.k0 * self.lam ** np.arange(1, m + 1, dtype=float)

    @property
    def eigenvalues(self) -> np.ndarray:
        """lam_j = k0 lam**(2 j), j = 1..n, strictly increasing."""
        return self.k0 * self.lam ** (2.0 * np.arange(1, self.n + 1))

    @property
    def betas(self) -> np.ndarray:
        """Noise coefficients beta_j = lam_j**(-theta), strictly decreasing."""
        return self.eigenvalues ** (-self.theta)

    @property
    def flat_eigenvalues(self) -> np.ndarray:
        """Eigenvalues repeated per real coordinate, length 2 n."""
        return np.repeat(self.eigenvalues, 2)

    @property
    def flat_betas(self) -> np.ndarray:
        return np.repeat(self.betas, 2)

    @property
    def lambda_1(self) -> float:
        return float(self.k0 * self.lam ** 2)

    def c_beta(self, alpha: float) -> float:
        """Closed form of the full tail sum over all shells of beta_j**alpha.

        sum_{j>=1} lam_j^(-theta alpha) = k0^(-theta alpha) r / (1 - r)
        with r = lam^(-2 theta alpha); finite for every alpha > 0.
        """
        if alpha <= 0:
            raise DomainError("alpha must be positive")
        r = self.lam ** (-2.0 * self.theta * alpha)
        return float(self.k0 ** (-self.theta * alpha) * r / (1.0 - r))


@dataclass(frozen=True)
class ShellState:
    """Length-n sequence of (re, im) shell amplitudes."""

    values: np.ndarray  # (n, 2) float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ShapeError(f"expected (n, 2) array, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def flat(self) -> np.ndarray:
        """Flat view [u_{1,re}, u_{1,im}, u_{2,re}, ...] of length 2 n."""
        return self.values.reshape(-1)

    @classmethod
    def zero(cls, n: int) -> "ShellState":
        return cls(np.zeros((n, 2)))

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> "ShellState":
        flat = np.asarray(flat, dtype=float)
        if flat.size % 2:
            raise ShapeError("flat state length must be even")
        return cls(flat.reshape(-1, 2))

    @classmethod
    def basis(cls, n: int, shell: int, im: bool = False,
              amplitude: float = 1.0) -> "ShellState":
        """amplitude * e_shell (1-based shell index), real or imaginary part."""
        if not (1 <= shell <= n):
            raise DomainError(f"shell index {shell} outside 1..{n}")
        v = np.zeros((n, 2))
        v[shell - 1, 1 if im else 0] = amplitude
        return cls(v)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, ShellState) else np.asarray(u, dtype=float)


def h_norm(u) -> float:
    return float(np.linalg.norm(_values(u)))


def v_norm(params: ModelParams, u) -> float:
    """|A^(1/2) u|, the dissipation norm."""
    v = _values(u)
    return float(math.sqrt(np.sum(params.eigenvalues[:, None] * v * v)))


def v_star_norm(params: ModelParams, u) -> float:
    """|A^(-1/2) u|, the dual norm the coupling bound is stated in."""
    v = _values(u)
    return float(math.sqrt(np.sum(v * v / params.eigenvalues[:, None])))


def apply_A(params: ModelParams, u, power: float = 1.0) -> np.ndarray:
    """Fractional power of the dissipative operator: shell j scales by lam_j**power."""
    v = _values(u)
    if v.shape[0] != params.n:
        raise ShapeError(f"state has {v.shape[0]} shells, params.n={params.n}")
    return params.eigenvalues[:, None] ** power * v


def nonlinearity(params: ModelParams, u, v) -> np.ndarray:
    """The quadratic coupling B(u, v) with ghost shells outside 1..n set to 0.

    Terms that would reference shells n+1 or n+2 are dropped, which is the
    finite-dimensional projection of the infinite system.
    """
    uv = _values(u)
    vv = _values(v)
    n = params.n
    if uv.shape[0] != n or vv.shape[0] != n:
        raise ShapeError(f"operands must have {n} shells, "
                         f"got {uv.shape[0]} and {vv.shape[0]}")
    # padded complex amplitudes: index m+1 holds shell m, shells -1,0 and
    # n+1, n+2 are zero ghosts
    uc = np.zeros(n + 4, dtype=complex)
    vc = np.zeros(n + 4, dtype=complex)
    uc[2:n + 2] = uv[:, 0] + 1j * uv[:, 1]
    vc[2:n + 2] = vv[:, 0] + 1j * vv[:, 1]
    # k[m+1] = k_m for m = -1..n+2 (k of ghost shells is irrelevant: the
    # ghost amplitude is zero)
    k = params.k0 * params.lam ** np.arange(-1.0, n + 3.0)
    m = np.arange(2, n + 2)  # padded index of shells 1..n
    a, b = params.a, params.b
    if params.model == "sabra":
        bn = -1j * (a * k[m + 1] * np.conj(uc[m + 1]) * vc[m + 2]
                    + b * k[m] * np.conj(uc[m - 1]) * vc[m + 1]
                    + a * k[m - 1] * uc[m - 1] * vc[m - 2]
                    + b * k[m - 1] * uc[m - 2] * vc[m - 1])
    else:  # goy
        bn = 1j * (a * k[m + 1] * np.conj(uc[m + 1]) * np.conj(vc[m + 2])
                   + b * k[m] * np.conj(uc[m - 1]) * np.conj(vc[m + 1])
                   - a * k[m - 1] * np.conj(uc[m - 1]) * np.conj(vc[m - 2])
                   - b * k[m - 1] * np.conj(uc[m - 2]) * np.conj(vc[m - 1]))
    return np.column_stack([bn.real, bn.imag])


def cutoff_rho(x: float) -> float:
    """Smooth cutoff: exactly 1 on [0, 1], exactly 0 on [2, inf).

    On (1, 2) it is the standard bump-quotient psi(2-x)/(psi(2-x)+psi(x-1))
    with psi(t) = exp(-1/t); its steepest slope is -2, attained at x = 3/2.
    """
    if x < 0:
        raise DomainError(f"cutoff argument {x} is negative")
    if x <= 1.0:
        return 1.0
    if x >= 2.0:
        return 0.0
    s = math.exp(-1.0 / (2.0 - x))
    t = math.exp(-1.0 / (x - 1.0))
    return s / (s + t)


def cutoff_rho_prime(x: float) -> float:
    """Derivative of :func:`cutoff_rho`; |rho'| <= 2 everywhere."""
    if x < 0:
        raise DomainError(f"cutoff argument {x} is negative")
    if x <= 1.0 or x >= 2.0:
        return 0.0
    s = math.exp(-1.0 / (2.0 - x))
    t = math.exp(-1.0 / (x - 1.0))
    ds = -s / (2.0 - x) ** 2
    dt = t / (x - 1.0) ** 2
    return (ds * t - s * dt) / (s + t) ** 2


def truncated_nonlinearity(params: ModelParams, R: float, u) -> np.ndarray:
    """rho(|u|^2 / R) B(u, u): equals B(u, u) inside |u|^2 <= R, vanishes
    beyond |u|^2 >= 2R, and is globally Lipschitz in between."""
    if R <= 0:
        raise DomainError("R must be positive")
    uv = _values(u)
    rho = cutoff_rho(float(np.sum(uv * uv)) / R)
    return rho * nonlinearity(params, uv, uv)


def linearized_nonlinearity(params: ModelParams, R: float, u, w) -> np.ndarray:
    """Directional derivative of u -> rho(|u|^2/R) B(u, u) at u along w.

    d/dh [rho(|u+hw|^2/R) B(u+hw, u+hw)] at h = 0
        = rho'(q) (2 <u, w> / R) B(u, u) + rho(q) [B(u, w) + B(w, u)],
    with q = |u|^2 / R.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    uv = _values(u)
    wv = _values(w)
    q = float(np.sum(uv * uv)) / R
    rho = cutoff_rho(q)
    out = np.zeros_like(uv)
    if rho != 0.0:
        out = rho * (nonlinearity(params, uv, wv) + nonlinearity(params, wv, uv))
    rp = cutoff_rho_prime(q)
    if rp != 0.0:
        out = out + rp * (2.0 * float(np.sum(uv * wv)) / R) * nonlinearity(params, uv, uv)
    return out


def _random_pair(params: ModelParams, rng: np.random.Generator):
    """A random state pair: diffuse Gaussian, or co-localized on a few
    adjacent shells.  The bilinear-bound ratios are maximized by localized
    interactions, so diffuse sampling alone would underestimate the sup more
    and more as n grows."""
    u = rng.standard_normal((params.n, 2))
    v = rng.standard_normal((params.n, 2))
    if rng.random() < 0.5:
        center = int(rng.integers(0, params.n))
        mask = np.zeros((params.n, 1))
        mask[max(0, center - 2):min(params.n, center + 3)] = 1.0
        u = u * mask
        v = v * mask
    return u, v


def estimate_bilinear_constants(params: ModelParams, n_pairs: int = 400,
                                rng: np.random.Generator | None = None) -> dict:
    """Empirical constants for the coupling bounds.

    C0: sup of |B(u,v)|_{V*} / (|u| |v|)
    C1: sup of |B(u,v)| / max(||u|| |v|, |u| ||v||)

    No closed-form values exist for these constants; every check that needs
    them uses these estimates.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    c0 = 0.0
    c1 = 0.0
    for _ in range(n_pairs):
        u, v = _random_pair(params, rng)
        buv = nonlinearity(params, u, v)
        hu, hv = h_norm(u), h_norm(v)
        c0 = max(c0, v_star_norm(params, buv) / (hu * hv))
        denom = max(v_norm(params, u) * hv, hu * v_norm(params, v))
        c1 = max(c1, h_norm(buv) / denom)
    return {"C0": c0, "C1": c1, "n_pairs": n_pairs}


def estimate_truncated_lipschitz(params: ModelParams, R: float,
                                 n_pairs: int = 400,
                                 rng: np.random.Generator | None = None) -> float:
    """Empirical C_R with |B^R(u,u) - B^R(w,w)|_{V*} <= C_R |u - w|.

    Pairs are drawn across the active region |u|^2 in [0, 3R] where the
    cutoff actually varies.
    """
    rng = rng if rng is not None else np.random.default_rng(1)
    best = 0.0
    for _ in range(n_pairs):
        u = rng.standard_normal((params.n, 2))
        u *= math.sqrt(rng.uniform(0.0, 3.0 * R)) / h_norm(u)
        w = u + rng.standard_normal((params.n, 2)) * rng.uniform(1e-3, 1.0)
        du = h_norm(u - w)
        if du == 0:
            continue
        diff = truncated_nonlinearity(params, R, u) - truncated_nonlinearity(params, R, w)
        best = max(best, v_star_norm(params, diff) / du)
    return best
