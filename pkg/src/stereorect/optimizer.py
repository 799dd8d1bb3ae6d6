"""Rectification parameter estimation.

Two modes share one engine:

  - ``usr``: minimize the Sampson error alone over the 9 rectification
    parameters with a trust-region Levenberg-Marquardt solver started
    from the zero vector.
  - ``usr-cgd``: wrap the same solver in an adaptive outer loop.  After
    the Sampson-only solve, any geometric distortion measure outside its
    threshold band switches a penalty term into the cost; the weighted
    problem is re-solved until the weight-normalized cost stops
    decreasing, at which point the previous round's parameters win.

The least-squares residual vector stacks the per-pair Sampson residuals
with one weighted deviation term per side per active measure; the scalar
cost reported in traces is always recomputed from its closed form, never
from the residual norm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FocalRangeWarning, InsufficientInliers, NonFiniteResidual
from .metrics import (
    CorrespondenceSet,
    DistortionReport,
    aspect_ratio_modified,
    full_report,
    rotation_measure,
    sampson_residuals,
    size_ratio,
    skewness,
)
from .model import HomographyPair, RectParams, homography_pair
from .geometry import fundamental_from_homographies

MEASURE_KEYS = ("ar", "sk", "r", "sr")
NORMALIZERS = {"ar": 1.5, "sk": 6.5, "r": 18.5, "sr": 2.5}
IDEALS = {"ar": 1.0, "sk": 0.0, "r": 0.0, "sr": 1.0}
MEASURE_FUNCS = {
    "ar": aspect_ratio_modified,
    "sk": skewness,
    "r": rotation_measure,
    "sr": size_ratio,
}
SWITCH_VALUE = 0.25


@dataclass(frozen=True)
class Weights:
    """Pre-normalization penalty switches; each is exactly 0 or 0.25."""

    rho_ar: float = 0.0
    rho_sk: float = 0.0
    rho_r: float = 0.0
    rho_sr: float = 0.0

    def __post_init__(self) -> None:
        for key in MEASURE_KEYS:
            value = getattr(self, f"rho_{key}")
            if value not in (0.0, SWITCH_VALUE):
                raise ValueError(f"rho_{key} must be 0 or {SWITCH_VALUE}, got {value}")

    @staticmethod
    def zero() -> "Weights":
        return Weights()

    def value(self, key: str) -> float:
        return getattr(self, f"rho_{key}")

    def switch_sum(self) -> float:
        return sum(self.value(k) for k in MEASURE_KEYS)

    def active(self) -> tuple[str, ...]:
        return tuple(k for k in MEASURE_KEYS if self.value(k) > 0)

    def all_zero(self) -> bool:
        return self.switch_sum() == 0.0

    def effective(self, key: str) -> float:
        """Weight actually applied in the cost: rho / normalizer."""
        return self.value(key) / NORMALIZERS[key]

    def to_dict(self) -> dict:
        return {f"rho_{k}": self.value(k) for k in MEASURE_KEYS}


@dataclass(frozen=True)
class Thresholds:
    """Band limits deciding which penalty terms switch on."""

    ar_low: float = 0.8
    ar_high: float = 1.2
    sk_max: float = 5.0
    sv_low: float = 0.8
    sv_high: float = 1.2
    r_max: float = 30.0


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "usr-cgd"
    max_outer_iters: int = 10
    trust_radius_init: float = 0.1
    max_inner_iters: int = 200
    gradient_tol: float = 1e-8
    step_tol: float = 1e-10
    fd_step_rel: float = 1e-6
    thresholds: Thresholds = Thresholds()

    def __post_init__(self) -> None:
        if self.mode not in ("usr", "usr-cgd"):
            raise ValueError(f"mode must be 'usr' or 'usr-cgd', got {self.mode!r}")
        for name in ("trust_radius_init", "gradient_tol", "step_tol", "fd_step_rel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @staticmethod
    def from_dict(data: dict) -> "SolverConfig":
        data = dict(data)
        th = data.pop("thresholds", None)
        kwargs = {k: v for k, v in data.items() if k in SolverConfig.__dataclass_fields__}
        if th is not None:
            kwargs["thresholds"] = Thresholds(**th)
        return SolverConfig(**kwargs)


def update_weights(report: DistortionReport, thresholds: Thresholds) -> Weights:
    """Switch each penalty on iff its averaged measure leaves the band."""
    th = thresholds
    on = {
        "ar": not (th.ar_low <= report.e_ar <= th.ar_high),
        "sk": report.e_sk > th.sk_max,
        "r": abs(report.e_r) > th.r_max,
        "sr": not (th.sv_low <= report.e_sr <= th.sv_high),
    }
    return Weights(**{f"rho_{k}": SWITCH_VALUE if on[k] else 0.0 for k in MEASURE_KEYS})


def cost_from_report(report: DistortionReport, weights: Weights) -> float:
    """Closed-form cost: Sampson error plus weighted mean deviations."""
    total = report.e_s
    for key in weights.active():
        dev_left = abs(getattr(report, f"e_{key}_left") - IDEALS[key])
        dev_right = abs(getattr(report, f"e_{key}_right") - IDEALS[key])
        total += weights.effective(key) * 0.5 * (dev_left + dev_right)
    return float(total)


def cost(params: RectParams, c: CorrespondenceSet, weights: Weights) -> float:
    """Evaluate the scalar cost at a parameter vector."""
    h_left, h_right = homography_pair(params, c.dims)
    return cost_from_report(full_report(h_left, h_right, c), weights)


def normalized_cost(raw: float, weights: Weights) -> float:
    """Compensate for the varying number of active terms between rounds."""
    return raw / (1.0 + weights.switch_sum())


def cost_from_residuals(params: RectParams, c: CorrespondenceSet, weights: Weights) -> float:
    """Reassemble the scalar cost from the least-squares residual vector.

    Independent path to the same number as cost(): the Sampson block and
    the weighted deviation entries are unpacked and recombined.  Used to
    guard against residual-assembly bugs; both paths must agree to
    machine precision.
    """
    res = _residual_vector(params.to_array(), c, weights)
    n = len(c)
    total = float(np.sqrt(np.sum(res[:n] ** 2)) / n)
    offset = n
    for key in weights.active():
        scale = np.sqrt(weights.effective(key))
        dev_left = abs(res[offset] / scale)
        dev_right = abs(res[offset + 1] / scale)
        offset += 2
        total += weights.effective(key) * 0.5 * (dev_left + dev_right)
    return total


def _residual_vector(x: np.ndarray, c: CorrespondenceSet, weights: Weights) -> np.ndarray:
    params = RectParams.from_array(x)
    with warnings.catch_warnings():
        # trial points may probe the clamped focal range; that is expected
        warnings.simplefilter("ignore", FocalRangeWarning)
        h_left, h_right = homography_pair(params, c.dims)
    f = fundamental_from_homographies(h_left, h_right)
    parts = [sampson_residuals(f, c)]
    for key in weights.active():
        scale = np.sqrt(weights.effective(key))
        func = MEASURE_FUNCS[key]
        for h in (h_left, h_right):
            parts.append([scale * (func(h, c.dims) - IDEALS[key])])
    return np.concatenate(parts)


@dataclass(frozen=True)
class InnerResult:
    """Outcome of one trust-region least-squares run."""

    params: RectParams
    objective: float
    initial_objective: float
    accepted_objectives: tuple[float, ...]
    iterations: int
    reason: str


def solve_inner(
    c: CorrespondenceSet,
    weights: Weights,
    init: RectParams,
    cfg: SolverConfig,
) -> InnerResult:
    """Trust-region Levenberg-Marquardt over the stacked residual vector.

    Forward-difference Jacobian at relative step ``cfg.fd_step_rel``;
    steps are accepted only when they reduce the sum of squares, so the
    accepted-objective sequence is non-increasing by construction.  On
    hitting the iteration budget the best-so-far parameters are returned
    with reason "max_iterations".
    """
    if len(c) < 8:
        raise InsufficientInliers(f"need at least 8 correspondences, got {len(c)}")

    def residuals(x: np.ndarray) -> np.ndarray:
        return _residual_vector(x, c, weights)

    x = init.to_array()
    r = residuals(x)
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidual("residuals are not finite at the initial point")
    objective = float(r @ r)
    initial_objective = objective
    accepted = [objective]
    radius = cfg.trust_radius_init
    reason = "max_iterations"
    n_params = x.size

    it = 0
    while it < cfg.max_inner_iters:
        it += 1
        jac = np.empty((r.size, n_params))
        for i in range(n_params):
            h = cfg.fd_step_rel * max(abs(x[i]), 1.0)
            xp = x.copy()
            xp[i] += h
            jac[:, i] = (residuals(xp) - r) / h
        if not np.all(np.isfinite(jac)):
            raise NonFiniteResidual("Jacobian is not finite")
        grad = jac.T @ r
        if np.max(np.abs(grad)) < cfg.gradient_tol:
            reason = "gradient"
            break
        jtj = jac.T @ jac

        # damped step confined to the trust region
        lam = 0.0
        step = None
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * np.eye(n_params), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.linalg.norm(step) <= radius:
                break
            lam = max(lam * 4.0, 1e-8 * max(np.trace(jtj) / n_params, 1e-12))
        if step is None:
            reason = "singular_normal_equations"
            break

        predicted = -(2.0 * grad @ step + step @ jtj @ step)
        x_trial = x + step
        r_trial = residuals(x_trial)
        finite = np.all(np.isfinite(r_trial))
        trial_objective = float(r_trial @ r_trial) if finite else np.inf

        if finite and trial_objective < objective:
            ratio = (objective - trial_objective) / max(predicted, 1e-300)
            step_norm = np.linalg.norm(step)
            x, r, objective = x_trial, r_trial, trial_objective
            accepted.append(objective)
            if ratio > 0.75 and step_norm > 0.9 * radius:
                radius *= 2.0
            elif ratio < 0.25:
                radius *= 0.5
            if step_norm < cfg.step_tol * (np.linalg.norm(x) + cfg.step_tol):
                reason = "step"
                break
            if predicted < 1e-16 * max(objective, 1e-300):
                reason = "function"
                break
        else:
            radius *= 0.25
            if radius < 1e-14:
                reason = "trust_radius"
                break

    return InnerResult(
        params=RectParams.from_array(x),
        objective=objective,
        initial_objective=initial_objective,
        accepted_objectives=tuple(accepted),
        iterations=it,
        reason=reason,
    )


@dataclass(frozen=True)
class RoundRecord:
    """One outer-loop round: solution, weights, costs, and quality."""

    index: int
    params: RectParams
    weights: Weights
    cost_raw: float
    cost_normalized: float
    e_v: float
    report: DistortionReport
    inner_iterations: int
    inner_reason: str

    def to_dict(self) -> dict:
        return {
            "round": self.index,
            "params": self.params.to_dict(),
            "weights": self.weights.to_dict(),
            "cost_raw": self.cost_raw,
            "cost_normalized": self.cost_normalized,
            "e_v": self.e_v,
            "report": self.report.to_dict(),
            "inner_iterations": self.inner_iterations,
            "inner_reason": self.inner_reason,
        }


@dataclass(frozen=True)
class SolveTrace:
    rounds: tuple[RoundRecord, ...]
    termination: str

    def to_records(self) -> list[dict]:
        return [r.to_dict() for r in self.rounds]


@dataclass(frozen=True)
class SolveResult:
    params: RectParams
    pair: HomographyPair
    trace: SolveTrace


def _round_record(
    index: int,
    params: RectParams,
    weights: Weights,
    c: CorrespondenceSet,
    inner: InnerResult,
) -> tuple[RoundRecord, DistortionReport]:
    h_left, h_right = homography_pair(params, c.dims)
    report = full_report(h_left, h_right, c)
    raw = cost_from_report(report, weights)
    record = RoundRecord(
        index=index,
        params=params,
        weights=weights,
        cost_raw=raw,
        cost_normalized=normalized_cost(raw, weights),
        e_v=report.e_v,
        report=report,
        inner_iterations=inner.iterations,
        inner_reason=inner.reason,
    )
    return record, report


def solve(c: CorrespondenceSet, cfg: SolverConfig | None = None) -> SolveResult:
    """Full estimation: Sampson-only solve, then the adaptive outer loop.

    Round 0 minimizes the Sampson error from the zero vector.  In
    usr-cgd mode, weights are switched on from round 0's report; each
    following round re-solves with the current weights, re-evaluates the
    weights from scratch, and the loop stops when the weight-normalized
    cost fails to decrease strictly (the previous round's parameters are
    returned, matching the non-strict-decrease rule) or when every
    measure returns inside its band.

    The first weighted round has no comparable predecessor (round 0
    minimizes a different cost), so it is always accepted as the
    comparison baseline.
    """
    cfg = cfg or SolverConfig()
    inner0 = solve_inner(c, Weights.zero(), RectParams.zero(), cfg)
    record0, report0 = _round_record(0, inner0.params, Weights.zero(), c, inner0)
    rounds = [record0]

    def result(params: RectParams, termination: str) -> SolveResult:
        return SolveResult(
            params=params,
            pair=HomographyPair.from_params(params, c.dims),
            trace=SolveTrace(rounds=tuple(rounds), termination=termination),
        )

    if cfg.mode == "usr":
        return result(inner0.params, "usr_mode")

    weights = update_weights(report0, cfg.thresholds)
    if weights.all_zero():
        return result(inner0.params, "within_bands")

    params_prev = inner0.params
    cnorm_prev: float | None = None
    for index in range(1, cfg.max_outer_iters + 1):
        inner = solve_inner(c, weights, params_prev, cfg)
        record, report = _round_record(index, inner.params, weights, c, inner)
        if cnorm_prev is not None and record.cost_normalized >= cnorm_prev:
            return result(params_prev, "cost_non_decrease")
        rounds.append(record)
        params_prev = inner.params
        cnorm_prev = record.cost_normalized
        weights_next = update_weights(report, cfg.thresholds)
        if weights_next.all_zero():
            return result(params_prev, "within_bands")
        weights = weights_next
    return result(params_prev, "max_outer_iterations")
