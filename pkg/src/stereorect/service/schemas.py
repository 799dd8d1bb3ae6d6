"""Request/response models for the rectification service."""

from __future__ import annotations

from pydantic import BaseModel, Field

Matrix3 = list[list[float]]


class CorrespondencesPayload(BaseModel):
    width: float = Field(gt=0)
    height: float = Field(gt=0)
    pairs: list[list[float]]


class RansacOptions(BaseModel):
    max_iterations: int = 2000
    inlier_threshold: float = 1.5
    confidence: float = 0.999
    seed: int = 0


class ThresholdOptions(BaseModel):
    ar_low: float = 0.8
    ar_high: float = 1.2
    sk_max: float = 5.0
    sv_low: float = 0.8
    sv_high: float = 1.2
    r_max: float = 30.0


class SolverOptions(BaseModel):
    max_outer_iters: int = 10
    trust_radius_init: float = 0.1
    max_inner_iters: int = 200
    gradient_tol: float = 1e-8
    step_tol: float = 1e-10
    fd_step_rel: float = 1e-6
    thresholds: ThresholdOptions = ThresholdOptions()


class RectifyRequest(BaseModel):
    correspondences: CorrespondencesPayload
    mode: str = "usr-cgd"
    ransac: RansacOptions = RansacOptions()
    solver: SolverOptions = SolverOptions()


class TraceRound(BaseModel):
    round: int
    params: dict[str, float]
    weights: dict[str, float]
    cost_raw: float
    cost_normalized: float
    e_v: float
    report: dict[str, float]
    inner_iterations: int
    inner_reason: str


class RunInfo(BaseModel):
    tool_version: str
    mode: str
    ransac_seed: int


class RectifyResponse(BaseModel):
    h_left: Matrix3
    h_right: Matrix3
    fundamental: Matrix3
    params: dict[str, float]
    report: dict[str, float]
    trace: list[TraceRound]
    termination: str
    input_pairs: int
    inlier_pairs: int
    run: RunInfo


class SynthRequest(BaseModel):
    width: float = 1920.0
    height: float = 1080.0
    seed: int = 0
    n_points: int = 300
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0


class SynthCase(BaseModel):
    name: str
    correspondences: CorrespondencesPayload
    ground_truth: dict


class SynthResponse(BaseModel):
    cases: list[SynthCase]


class WarpRequest(BaseModel):
    image_png_b64: str
    homography: Matrix3
    out_width: int | None = None
    out_height: int | None = None
    auto_fit: bool = False


class WarpResponse(BaseModel):
    image_png_b64: str
    width: int
    height: int


class OverlayRequest(BaseModel):
    left_png_b64: str
    right_png_b64: str
    correspondences: CorrespondencesPayload
    h_left: Matrix3 | None = None
    h_right: Matrix3 | None = None
    scanlines: int = 10


class OverlayResponse(BaseModel):
    image_png_b64: str
    width: int
    height: int


class HealthResponse(BaseModel):
    status: str
    version: str
