"""End-to-end pipeline: registration plus kriging of the deformation maps.

Training registers the curves to a common pattern, then fits one GP per
deformation-parameter family (amplitude scale, time shift, vertical shift)
over the experimental design.  Prediction evaluates the three GP means at a
new input and applies the forward deformation to the pattern, so a full
output curve costs three GP evaluations and one FFT regardless of the number
of time steps.  Families whose estimated values are numerically constant are
held fixed at their mean instead of being GP-fitted.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .doe import DesignMatrix, InputBox
from .errors import DegenerateResponseError, FitFailureError, EstimationFailureError, TrainingError
from .gp import FitConfig, GpModel, fit_gp, predict_many, prediction_metrics
from .registration import (
    CurveSet,
    EstimationConfig,
    Pattern,
    TransformParams,
    estimate_params_blocked,
    extract_pattern,
    fft_int_freqs,
    to_fourier,
)

__all__ = [
    "TrainConfig",
    "SegmentModel",
    "FunctionalSurrogate",
    "CurvePrediction",
    "ValidationReport",
    "BenchmarkReport",
    "train",
    "predict_curve",
    "predict_curves",
    "validate",
    "benchmark_against_per_step",
]

FAMILIES = ("alpha", "theta", "v")


@dataclass(frozen=True)
class TrainConfig:
    """Pipeline settings: registration block size, GP settings, fixing rules."""

    block_size: int = 10
    var_fix_tol: float = 1e-10  # families with var <= tol * max(1, scale^2) are fixed
    time_windows: int = 1
    threads: int = 1
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    gp: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block size must be >= 1")
        if self.time_windows < 1:
            raise ValueError("time_windows must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class SegmentModel:
    """Surrogate for one contiguous time window.

    ``start``/``stop`` are the output column range this segment is
    responsible for; ``grid_start``/``grid_stop`` the (possibly one step
    wider) range it was trained on, kept odd for the Fourier machinery.
    Each family maps to either a fitted GpModel or a fixed float.
    """

    start: int
    stop: int
    grid_start: int
    grid_stop: int
    pattern: Pattern
    models: dict

    def family(self, name: str):
        return self.models[name]

    def evaluate_params(self, points: np.ndarray) -> dict:
        out = {}
        for name in FAMILIES:
            m = self.models[name]
            if isinstance(m, GpModel):
                out[name] = predict_many(m, points)
            else:
                out[name] = np.full(points.shape[0], float(m))
        return out


@dataclass(frozen=True)
class FunctionalSurrogate:
    """Trained curve surrogate: pattern(s) plus deformation-parameter models."""

    box: InputBox
    t_grid: np.ndarray
    period: float
    segments: tuple
    params: TransformParams = field(repr=False, default=None)
    train_seconds: float = 0.0
    registration_seconds: float = 0.0
    gp_seconds: float = 0.0

    @property
    def j(self) -> int:
        return self.t_grid.shape[0]

    @property
    def d(self) -> int:
        return self.box.dims

    # single-window conveniences
    @property
    def pattern(self) -> Pattern:
        return self.segments[0].pattern

    @property
    def gp_alpha(self):
        return self.segments[0].models["alpha"]

    @property
    def gp_theta(self):
        return self.segments[0].models["theta"]

    @property
    def gp_v(self):
        return self.segments[0].models["v"]

    @property
    def fixed_components(self) -> dict:
        return {name: not isinstance(self.segments[0].models[name], GpModel) for name in FAMILIES}


@dataclass(frozen=True)
class CurvePrediction:
    values: np.ndarray
    extrapolated: bool
    params: dict


@dataclass
class ValidationReport:
    per_step_rmse: np.ndarray
    per_step_q2: np.ndarray
    flags: np.ndarray
    overall_rmse: float
    runtime_train: float = float("nan")
    runtime_predict: float = float("nan")

    @property
    def mean_q2_unflagged(self) -> float:
        ok = ~self.flags
        return float(np.nanmean(self.per_step_q2[ok])) if ok.any() else float("nan")


@dataclass
class BenchmarkReport:
    sim_report: ValidationReport
    step_report: ValidationReport
    sim_train_seconds: float
    sim_registration_seconds: float
    sim_gp_seconds: float
    step_train_seconds: float
    sim_predicted: np.ndarray
    step_predicted: np.ndarray
    test_values: np.ndarray


def _window_ranges(j: int, windows: int) -> list[tuple[int, int, int, int]]:
    """Output ranges plus odd-width training ranges for each time window."""
    if windows == 1:
        return [(0, j, 0, j)]
    edges = np.linspace(0, j, windows + 1).astype(int)
    out = []
    for w in range(windows):
        s, e = int(edges[w]), int(edges[w + 1])
        gs, ge = s, e
        if (ge - gs) % 2 == 0:
            gs = gs - 1 if gs > 0 else gs  # borrow one step from the neighbour
            if (ge - gs) % 2 == 0:
                ge += 1
        if ge - gs < 3:
            raise ValueError("time windows are too narrow; use fewer windows")
        out.append((s, e, gs, ge))
    return out


def _should_fix(values: np.ndarray, tol: float) -> bool:
    scale = np.abs(values).max()
    return float(np.var(values)) <= tol * max(1.0, scale * scale)


def train(
    design: DesignMatrix,
    curves: CurveSet,
    config: TrainConfig | None = None,
    box: InputBox | None = None,
) -> FunctionalSurrogate:
    """Train a functional surrogate on simulator runs at the design points.

    Stages: blockwise registration of the output curves, pattern extraction,
    then one GP fit per non-fixed parameter family on (design, estimates).
    Raises :class:`TrainingError` when the estimated time shifts span more
    than pi, which would wrap around the period; re-reference the curves (for
    example to the earliest curve) before training in that case.
    """
    if config is None:
        config = TrainConfig()
    pts = design.points
    if pts.shape[0] != curves.n:
        raise ValueError("design and curve set must have the same number of rows")
    if curves.n < 4:
        raise ValueError("training needs at least 4 curves")
    if box is None:
        box = InputBox(lower=pts.min(axis=0), upper=pts.max(axis=0) + np.where(np.ptp(pts, axis=0) > 0, 0.0, 1.0))

    t_start = time.perf_counter()
    reg_seconds = 0.0
    gp_seconds = 0.0
    segments = []
    all_params = None
    for s, e, gs, ge in _window_ranges(curves.j, config.time_windows):
        jw = ge - gs
        sub = CurveSet(
            values=curves.values[:, gs:ge],
            t_grid=(curves.period * jw / curves.j / jw) * np.arange(jw),
            period=curves.period * jw / curves.j,
        )
        t0 = time.perf_counter()
        try:
            params, _ = estimate_params_blocked(
                sub, config.block_size, config.estimation, threads=config.threads
            )
        except EstimationFailureError as err:
            raise EstimationFailureError(f"registration stage: {err}", starts=err.starts) from err
        reg_seconds += time.perf_counter() - t0
        if all_params is None:
            all_params = params

        theta_span = params.theta.max() - params.theta.min()
        if theta_span > np.pi:
            raise TrainingError(
                f"estimated time shifts span {theta_span:.3f} rad (> pi), so they wrap around "
                "the period; re-reference the curves to a central curve and train again"
            )

        pattern = extract_pattern(to_fourier(sub), params)
        models = {}
        t0 = time.perf_counter()
        for name in FAMILIES:
            values = getattr(params, name)
            if _should_fix(values, config.var_fix_tol):
                models[name] = float(values.mean())
                continue
            try:
                models[name] = fit_gp(design, values, config.gp)
            except (FitFailureError, DegenerateResponseError) as err:
                raise FitFailureError(
                    f"parameter-model stage ({name}): {err}",
                    starts=getattr(err, "starts", []),
                ) from err
        gp_seconds += time.perf_counter() - t0
        segments.append(
            SegmentModel(start=s, stop=e, grid_start=gs, grid_stop=ge, pattern=pattern, models=models)
        )

    return FunctionalSurrogate(
        box=box,
        t_grid=curves.t_grid,
        period=curves.period,
        segments=tuple(segments),
        params=all_params,
        train_seconds=time.perf_counter() - t_start,
        registration_seconds=reg_seconds,
        gp_seconds=gp_seconds,
    )


def _segment_curves(segment: SegmentModel, params: dict) -> np.ndarray:
    """Forward-transform the segment pattern for a batch of parameter values."""
    jw = segment.grid_stop - segment.grid_start
    ell = fft_int_freqs(jw)
    coeffs = (
        params["alpha"][:, None]
        * segment.pattern.coeffs[None, :]
        * np.exp(-1j * np.outer(params["theta"], ell))
    )
    coeffs[:, 0] += params["v"]
    values = (np.fft.ifft(coeffs, axis=1) * jw).real
    lo = segment.start - segment.grid_start
    return values[:, lo : lo + (segment.stop - segment.start)]


def predict_curves(surrogate: FunctionalSurrogate, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predict full output curves at several input points.

    Returns (m x J value matrix, length-m extrapolation flags); points
    outside the surrogate's box are flagged, not rejected.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != surrogate.d:
        raise ValueError(f"points must be m x {surrogate.d}")
    out = np.empty((points.shape[0], surrogate.j))
    for seg in surrogate.segments:
        out[:, seg.start : seg.stop] = _segment_curves(seg, seg.evaluate_params(points))
    tol = 1e-12 * np.maximum(surrogate.box.span, 1.0)
    outside = (points < surrogate.box.lower - tol) | (points > surrogate.box.upper + tol)
    return out, outside.any(axis=1)


def predict_curve(surrogate: FunctionalSurrogate, x0: np.ndarray) -> CurvePrediction:
    """Predict the full output curve at one input configuration."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (surrogate.d,):
        raise ValueError(f"x0 must have {surrogate.d} coordinates")
    values, flags = predict_curves(surrogate, x0[None, :])
    params = {
        name: float(surrogate.segments[0].evaluate_params(x0[None, :])[name][0]) for name in FAMILIES
    }
    return CurvePrediction(values=values[0], extrapolated=bool(flags[0]), params=params)


def _report_from_predictions(
    predicted: np.ndarray, truth: np.ndarray, degenerate_rel: float = 1e-9
) -> ValidationReport:
    j = truth.shape[1]
    rmse = np.sqrt(((predicted - truth) ** 2).mean(axis=0))
    step_var = truth.var(axis=0)
    flags = step_var <= degenerate_rel * max(float(step_var.max()), 1e-300)
    q2 = np.full(j, np.nan)
    for col in np.nonzero(~flags)[0]:
        _, q2[col] = prediction_metrics(truth[:, col], predicted[:, col])
    overall = float(np.sqrt(((predicted - truth) ** 2).mean()))
    return ValidationReport(per_step_rmse=rmse, per_step_q2=q2, flags=flags, overall_rmse=overall)


def validate(
    surrogate: FunctionalSurrogate, test_design: DesignMatrix, test_curves: CurveSet
) -> ValidationReport:
    """Per-time-step RMSE and Q2 of surrogate predictions on held-out runs.

    Steps whose true values have (near-)zero variance across the test points
    are flagged and get a NaN Q2 instead of failing the run.
    """
    if test_design.points.shape[0] != test_curves.n:
        raise ValueError("test design and test curves must have the same number of rows")
    if test_curves.j != surrogate.j:
        raise ValueError("test curves must share the surrogate's time grid")
    t0 = time.perf_counter()
    predicted, _ = predict_curves(surrogate, test_design.points)
    dt = time.perf_counter() - t0
    report = _report_from_predictions(predicted, test_curves.values)
    report.runtime_train = surrogate.train_seconds
    report.runtime_predict = dt
    return report


def benchmark_against_per_step(
    design: DesignMatrix,
    curves: CurveSet,
    test_design: DesignMatrix,
    test_curves: CurveSet,
    config: TrainConfig | None = None,
) -> BenchmarkReport:
    """Head-to-head: the curve surrogate versus one GP per time step.

    Both approaches share the GP settings from ``config``; the baseline fits
    an independent kriging model on the raw responses of every time step and
    predicts steps one by one.  Reports per-step metrics, wall times and the
    raw predictions (crossplot data) for both methods.
    """
    if config is None:
        config = TrainConfig()

    surrogate = train(design, curves, config)
    sim_report = validate(surrogate, test_design, test_curves)
    sim_pred, _ = predict_curves(surrogate, test_design.points)

    t0 = time.perf_counter()
    step_pred = np.empty((test_curves.n, curves.j))
    for col in range(curves.j):
        model = fit_gp(design, curves.values[:, col], config.gp)
        step_pred[:, col] = predict_many(model, test_design.points)
    step_seconds = time.perf_counter() - t0
    step_report = _report_from_predictions(step_pred, test_curves.values)
    step_report.runtime_train = step_seconds

    return BenchmarkReport(
        sim_report=sim_report,
        step_report=step_report,
        sim_train_seconds=surrogate.train_seconds,
        sim_registration_seconds=surrogate.registration_seconds,
        sim_gp_seconds=surrogate.gp_seconds,
        step_train_seconds=step_seconds,
        sim_predicted=sim_pred,
        step_predicted=step_pred,
        test_values=test_curves.values,
    )
