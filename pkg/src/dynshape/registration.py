"""Curve registration under a common-shape model.

Every curve in a set is modeled as a shared pattern deformed by a per-curve
amplitude scale, time shift and vertical shift,

    Y_k(t_j) = alpha_k f(t_j - theta_k) + v_k + noise,

with f an unknown 2*pi-periodic function observed on an equispaced grid.  In
the Fourier domain the deformation acts coefficient-wise, so the parameters
are estimated by minimizing a weighted contrast between each curve's
"rephased" coefficients and their cross-curve mean.  The first curve is the
reference and is pinned to (alpha, theta, v) = (1, 0, 0) for identifiability.

The weight at frequency zero is null, which removes the vertical shifts from
the contrast entirely; they are recovered afterwards in closed form from the
DC coefficients.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import EstimationFailureError

__all__ = [
    "ALPHA_FLOOR",
    "CurveSet",
    "FourierTable",
    "TransformParams",
    "WeightSequence",
    "Pattern",
    "EstimationConfig",
    "EstimationDiagnostics",
    "wrap_angle",
    "fft_int_freqs",
    "to_fourier",
    "inverse_fourier",
    "make_weights",
    "rephase",
    "contrast",
    "contrast_with_gradient",
    "estimate_params",
    "estimate_params_blocked",
    "extract_pattern",
    "align_curves",
    "forward_transform",
]

# validity floor for amplitude scales; estimation bounds are configured separately
ALPHA_FLOOR = 1e-6

_TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Wrap angles to [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % _TWO_PI - np.pi


def fft_int_freqs(j: int) -> np.ndarray:
    """Integer frequencies 0, 1, ..., (J-1)/2, -(J-1)/2, ..., -1 in FFT order."""
    return np.rint(np.fft.fftfreq(j, d=1.0 / j)).astype(int)


@dataclass(frozen=True)
class CurveSet:
    """n curves sampled on a shared equispaced grid covering one period.

    The grid is t_j = j/J * period for j = 0..J-1 (half-open, never reaching
    the period itself); J must be odd so the Fourier frequencies pair up
    without a Nyquist leftover.
    """

    values: np.ndarray
    t_grid: np.ndarray
    period: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        t_grid = np.asarray(self.t_grid, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t_grid", t_grid)
        if values.ndim != 2:
            raise ValueError("curve values must form an n x J matrix")
        j = values.shape[1]
        if j < 3 or j % 2 == 0:
            raise ValueError(f"the time grid must have an odd number >= 3 of samples, got J={j}")
        if t_grid.shape != (j,):
            raise ValueError("t_grid length must match the number of columns")
        if not self.period > 0:
            raise ValueError("period must be positive")
        step = self.period / j
        expected = step * np.arange(j)
        if not np.allclose(t_grid, expected, rtol=0.0, atol=1e-9 * max(step, 1.0)):
            raise ValueError("t_grid must equal j/J * period, j = 0..J-1")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def j(self) -> int:
        return self.values.shape[1]

    @property
    def angular_grid(self) -> np.ndarray:
        return _TWO_PI * np.arange(self.j) / self.j


def curve_set_on_grid(values: np.ndarray, period: float) -> CurveSet:
    """CurveSet with the canonical grid j/J * period."""
    values = np.asarray(values, dtype=float)
    j = values.shape[1]
    return CurveSet(values=values, t_grid=(period / j) * np.arange(j), period=period)


@dataclass(frozen=True)
class FourierTable:
    """Per-curve discrete Fourier coefficients, 1/J-normalized, in FFT order."""

    coeffs: np.ndarray
    ell: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "ell", np.asarray(self.ell, dtype=int))
        if coeffs.ndim != 2 or self.ell.shape != (coeffs.shape[1],):
            raise ValueError("coeffs must be n x J with one integer frequency per column")

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def j(self) -> int:
        return self.coeffs.shape[1]


@dataclass(frozen=True)
class TransformParams:
    """Per-curve deformation parameters with the reference pinned to identity."""

    alpha: np.ndarray
    theta: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "v", v)
        if not (alpha.shape == theta.shape == v.shape):
            raise ValueError("alpha, theta and v must have one entry per curve")
        if alpha[0] != 1.0 or theta[0] != 0.0 or v[0] != 0.0:
            raise ValueError("reference curve must carry (alpha, theta, v) = (1, 0, 0)")
        if np.any(alpha <= 0.0):
            raise ValueError("amplitude scales must be positive")

    @property
    def n(self) -> int:
        return self.alpha.size


def identity_params(n: int) -> TransformParams:
    return TransformParams(alpha=np.ones(n), theta=np.zeros(n), v=np.zeros(n))


@dataclass(frozen=True)
class WeightSequence:
    """Frequency weights delta_l = |l|^-beta with delta_0 = 0, in FFT order."""

    delta: np.ndarray
    ell: np.ndarray
    beta_exponent: float

    def __post_init__(self):
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=float))
        object.__setattr__(self, "ell", np.asarray(self.ell, dtype=int))
        if self.delta.shape != self.ell.shape:
            raise ValueError("delta must carry one weight per frequency")


@dataclass(frozen=True)
class Pattern:
    """Estimated common shape: grid values plus their Fourier coefficients."""

    values: np.ndarray
    coeffs: np.ndarray

    @property
    def j(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class EstimationConfig:
    """Settings for the contrast minimization."""

    alpha_bounds: tuple[float, float] = (0.05, 20.0)
    beta_exponent: float = 1.5
    l_max: int | None = None
    multistarts: int = 3
    max_iters: int = 1000
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.alpha_bounds
        if not (0 < lo < hi):
            raise ValueError("alpha bounds must satisfy 0 < lo < hi")
        if self.beta_exponent <= 0:
            raise ValueError("weight exponent must be positive")
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")


@dataclass
class EstimationDiagnostics:
    contrast: float
    iterations: int
    nfev: int
    seconds: float = 0.0
    starts: list = field(default_factory=list)
    block_index: int | None = None


def to_fourier(curves: CurveSet) -> FourierTable:
    """Discrete Fourier coefficients d_kl = (1/J) sum_j Y_kj e^{-2 pi i j l / J}.

    Real input curves give Hermitian-symmetric tables: d_{k,-l} = conj(d_{k,l}).
    """
    j = curves.j
    if j % 2 == 0:
        raise ValueError("Fourier analysis here requires an odd number of samples")
    coeffs = np.fft.fft(curves.values, axis=1) / j
    return FourierTable(coeffs=coeffs, ell=fft_int_freqs(j))


def inverse_fourier(table: FourierTable) -> np.ndarray:
    """Real curve values from a coefficient table (inverse of :func:`to_fourier`)."""
    return (np.fft.ifft(table.coeffs, axis=1) * table.j).real


def make_weights(j: int, beta_exponent: float = 1.5, l_max: int | None = None) -> WeightSequence:
    """Weights delta_l = |l|^-beta, zero at l = 0 and beyond an optional cap."""
    if j < 3 or j % 2 == 0:
        raise ValueError(f"J must be odd and >= 3, got {j}")
    ell = fft_int_freqs(j)
    with np.errstate(divide="ignore"):
        delta = np.where(ell == 0, 0.0, np.abs(ell, dtype=float) ** (-beta_exponent))
    if l_max is not None:
        if l_max < 1:
            raise ValueError("l_max must be >= 1")
        delta = np.where(np.abs(ell) > l_max, 0.0, delta)
    return WeightSequence(delta=delta, ell=ell, beta_exponent=beta_exponent)


def _check_alpha(alpha: np.ndarray, alpha_min: float) -> None:
    if np.any(alpha < alpha_min):
        raise ValueError(f"amplitude scales below the floor {alpha_min:g}")


def rephase(table: FourierTable, params: TransformParams, alpha_min: float = ALPHA_FLOOR) -> np.ndarray:
    """Undo each curve's deformation in the Fourier domain.

    Returns the n x J complex matrix with entries (1/alpha_k) e^{i l theta_k}
    d_kl away from l = 0 and (d_k0 - v_k)/alpha_k at l = 0.  When the
    parameters are exact, every row equals the pattern's coefficients.
    """
    if params.n != table.n:
        raise ValueError("parameter vectors must have one entry per curve")
    _check_alpha(params.alpha, alpha_min)
    phases = np.exp(1j * np.outer(params.theta, table.ell))
    out = table.coeffs * phases / params.alpha[:, None]
    out[:, 0] = (table.coeffs[:, 0] - params.v) / params.alpha
    return out


def contrast(params: TransformParams, table: FourierTable, weights: WeightSequence) -> float:
    """Empirical registration contrast.

    (1/n) sum_k sum_l delta_l^2 |ctilde_kl - chat_l|^2 with chat the
    cross-curve mean of the rephased coefficients.  Nonnegative; zero exactly
    when all rephased rows coincide on the support of the weights.
    """
    wrapped = TransformParams(alpha=params.alpha, theta=_wrap_keep_reference(params.theta), v=params.v)
    reph = rephase(table, wrapped)
    resid = reph - reph.mean(axis=0)
    d2 = weights.delta ** 2
    return float((d2 * (resid.real ** 2 + resid.imag ** 2)).sum() / table.n)


def _wrap_keep_reference(theta: np.ndarray) -> np.ndarray:
    out = wrap_angle(theta)
    out[0] = 0.0
    return out


def contrast_with_gradient(
    alpha: np.ndarray,
    theta: np.ndarray,
    coeffs: np.ndarray,
    ell: np.ndarray,
    delta2: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrast and its analytic gradient in (alpha_k, theta_k), k >= 2.

    Because the rephased-coefficient mean is the minimizer of the quadratic
    form, the gradient of the mean drops out and, writing u = ctilde - chat,

        dM/dalpha_k = -(2 / n alpha_k) sum_l delta_l^2 Re(conj(u_kl) ctilde_kl)
        dM/dtheta_k = -(2 / n)         sum_l delta_l^2 l Im(conj(u_kl) ctilde_kl)

    The reference curve's entries are fixed, so its components are omitted.
    """
    n = coeffs.shape[0]
    ct = coeffs * np.exp(1j * np.outer(theta, ell)) / alpha[:, None]
    u = ct - ct.mean(axis=0)
    m_val = float((delta2 * (u.real ** 2 + u.imag ** 2)).sum() / n)
    re_uc = u.real * ct.real + u.imag * ct.imag
    im_uc = u.real * ct.imag - u.imag * ct.real
    g_alpha = -(2.0 / n) * (delta2 * re_uc).sum(axis=1) / alpha
    g_theta = -(2.0 / n) * (delta2 * ell * im_uc).sum(axis=1)
    return m_val, g_alpha[1:], g_theta[1:]


def _coarse_start(
    coeffs: np.ndarray, delta2: np.ndarray, alpha_bounds: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """Initial (alpha, theta) per curve from a grid scan against the reference.

    For each curve the weighted cross-correlation with curve 1 is evaluated at
    all J grid shifts through a single FFT; the best shift seeds theta and the
    matching closed-form scale seeds alpha.
    """
    n, j = coeffs.shape
    q = delta2 * np.conj(coeffs) * coeffs[0][None, :]
    corr = np.fft.fft(q, axis=1).real
    s_best = corr.argmax(axis=1)
    theta0 = wrap_angle(_TWO_PI * s_best / j)
    denom = (delta2 * (coeffs.real ** 2 + coeffs.imag ** 2)).sum(axis=1)
    num = corr[np.arange(n), s_best]
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha0 = np.where(num > 0, denom / np.where(num > 0, num, 1.0), 1.0)
    alpha0 = np.clip(alpha0, alpha_bounds[0], alpha_bounds[1])
    theta0[0] = 0.0
    alpha0[0] = 1.0
    return alpha0, theta0


def estimate_params(
    curves: CurveSet, config: EstimationConfig | None = None
) -> tuple[TransformParams, EstimationDiagnostics]:
    """Estimate the per-curve deformation parameters by contrast minimization.

    A coarse grid alignment seeds a multistart bound-constrained quasi-Newton
    search with analytic gradients over (alpha_k, theta_k), k >= 2; each
    theta_k is refined inside a full period centered at its seed and reported
    wrapped to [-pi, pi).  Vertical shifts carry no weight in the contrast and
    are recovered afterwards as v_k = d_k0 - alpha_k * d_10.
    """
    if config is None:
        config = EstimationConfig()
    if curves.n < 2:
        raise ValueError("registration needs at least 2 curves")
    t_begin = time.perf_counter()
    table = to_fourier(curves)
    weights = make_weights(curves.j, config.beta_exponent, config.l_max)
    delta2 = weights.delta ** 2
    coeffs = table.coeffs
    ell = table.ell
    n = curves.n

    alpha0, theta0 = _coarse_start(coeffs, delta2, config.alpha_bounds)
    lo, hi = config.alpha_bounds
    bounds = [(lo, hi)] * (n - 1) + [(t - np.pi, t + np.pi) for t in theta0[1:]]

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        alpha = np.concatenate(([1.0], x[: n - 1]))
        theta = np.concatenate(([0.0], x[n - 1 :]))
        m_val, g_a, g_t = contrast_with_gradient(alpha, theta, coeffs, ell, delta2)
        return m_val, np.concatenate((g_a, g_t))

    starts = [np.concatenate((alpha0[1:], theta0[1:]))]
    for s in range(1, config.multistarts):
        rng = np.random.default_rng([config.seed, s])
        jitter_t = rng.uniform(-1.5, 1.5, n - 1) * (_TWO_PI / curves.j)
        jitter_a = np.exp(rng.uniform(-0.15, 0.15, n - 1))
        starts.append(
            np.concatenate((np.clip(alpha0[1:] * jitter_a, lo, hi), theta0[1:] + jitter_t))
        )

    attempts = []
    for idx, x0 in enumerate(starts):
        res = minimize(
            objective,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": config.max_iters, "ftol": 1e-16, "gtol": 1e-10},
        )
        attempts.append(
            {
                "start": idx,
                "fun": float(res.fun),
                "nit": int(res.nit),
                "nfev": int(res.nfev),
                "message": str(res.message),
                "x": res.x,
                "usable": bool(np.isfinite(res.fun)),
            }
        )
    usable = [a for a in attempts if a["usable"]]
    if not usable:
        raise EstimationFailureError("no contrast-minimization start converged", starts=attempts)
    best = min(usable, key=lambda a: a["fun"])

    alpha_hat = np.concatenate(([1.0], best["x"][: n - 1]))
    theta_hat = _wrap_keep_reference(np.concatenate(([0.0], best["x"][n - 1 :])))
    c0 = coeffs[:, 0].real
    v_hat = c0 - alpha_hat * c0[0]
    v_hat[0] = 0.0
    params = TransformParams(alpha=alpha_hat, theta=theta_hat, v=v_hat)
    diag = EstimationDiagnostics(
        contrast=contrast(params, table, weights),
        iterations=best["nit"],
        nfev=best["nfev"],
        seconds=time.perf_counter() - t_begin,
        starts=[{k: a[k] for k in ("start", "fun", "nit", "message")} for a in attempts],
    )
    return params, diag


def estimate_params_blocked(
    curves: CurveSet,
    block_size: int,
    config: EstimationConfig | None = None,
    threads: int = 1,
) -> tuple[TransformParams, list[EstimationDiagnostics]]:
    """Blockwise estimation for large curve sets.

    Curves 2..n are split into ceil((n-1)/K) blocks of at most K curves; the
    reference curve is prepended to every block, each block is solved
    independently and the per-block estimates are concatenated.  With
    K >= n-1 this reduces to a single call of :func:`estimate_params`.
    Blocks share no state, so with ``threads`` > 1 they are solved in a
    thread pool; the result does not depend on the execution order.
    """
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    n = curves.n
    if block_size >= n - 1:
        params, diag = estimate_params(curves, config)
        return params, [diag]

    blocks = [
        np.arange(start, min(start + block_size, n)) for start in range(1, n, block_size)
    ]

    def solve(b: int):
        rows = blocks[b]
        sub = CurveSet(
            values=curves.values[np.concatenate(([0], rows))],
            t_grid=curves.t_grid,
            period=curves.period,
        )
        try:
            return estimate_params(sub, config)
        except EstimationFailureError as err:
            raise EstimationFailureError(f"block {b}: {err}", starts=err.starts) from err

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve, range(len(blocks))))
    else:
        results = [solve(b) for b in range(len(blocks))]

    alpha = np.ones(n)
    theta = np.zeros(n)
    v = np.zeros(n)
    diags: list[EstimationDiagnostics] = []
    for b, (sub_params, sub_diag) in enumerate(results):
        rows = blocks[b]
        alpha[rows] = sub_params.alpha[1:]
        theta[rows] = sub_params.theta[1:]
        v[rows] = sub_params.v[1:]
        sub_diag.block_index = b
        diags.append(sub_diag)
    return TransformParams(alpha=alpha, theta=theta, v=v), diags


def extract_pattern(
    table: FourierTable, params: TransformParams, alpha_min: float = ALPHA_FLOOR
) -> Pattern:
    """Common-shape estimate: mean of the rephased coefficients, inverted to the grid."""
    reph = rephase(table, params, alpha_min)
    chat = reph.mean(axis=0)
    values = np.fft.ifft(chat) * table.j
    return Pattern(values=values.real, coeffs=chat)


def align_curves(
    curves: CurveSet, params: TransformParams, alpha_min: float = ALPHA_FLOOR
) -> CurveSet:
    """Apply the inverse deformation to every curve.

    Each curve is recentered, rescaled and advanced in time by its shift via a
    Fourier phase rotation (exact for the trigonometric interpolant), so on
    exact parameters every row reproduces the pattern.
    """
    reph = rephase(to_fourier(curves), params, alpha_min)
    values = (np.fft.ifft(reph, axis=1) * curves.j).real
    return CurveSet(values=values, t_grid=curves.t_grid, period=curves.period)


def forward_transform(pattern: Pattern, alpha: float, theta: float, v: float) -> np.ndarray:
    """Evaluate alpha * f(t - theta) + v on the pattern's grid by phase shift."""
    j = pattern.j
    ell = fft_int_freqs(j)
    coeffs = alpha * pattern.coeffs * np.exp(-1j * ell * theta)
    coeffs[0] = coeffs[0] + v
    return (np.fft.ifft(coeffs) * j).real
