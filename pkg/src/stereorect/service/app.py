"""FastAPI service exposing the rectification pipeline.

Stateless wrapper around the core package: every endpoint is a pure
function of the request body, so the service scales to any number of
workers and the CLI can run it in-process.

Error contract: domain failures map to HTTP 422 with a body of
``{"detail": {"error": <category>, "message": ...}}`` where category is
"data" (bad/degenerate input) or "solver" (optimization failure).
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import (
    DegenerateConfiguration,
    InsufficientInliers,
    NonFiniteResidual,
    StereoRectError,
    TooFewVisiblePoints,
)
from ..files import correspondences_from_dict, ground_truth_to_dict
from ..imaging import from_png_bytes, overlay_scanlines, png_bytes, warp
from ..matching import RansacConfig, ransac_filter
from ..metrics import CorrespondenceSet, map_points
from ..model import RigDims
from ..optimizer import SolverConfig, Thresholds, solve
from ..synthgen import make_suite
from . import schemas

app = FastAPI(
    title="stereorect",
    version=__version__,
    description="Uncalibrated stereo rectification with constrained geometric distortions",
)

_DATA_ERRORS = (InsufficientInliers, DegenerateConfiguration, TooFewVisiblePoints, ValueError)


def _fail(category: str, exc: Exception) -> HTTPException:
    return HTTPException(
        status_code=422,
        detail={"error": category, "message": str(exc)},
    )


def _correspondences(payload: schemas.CorrespondencesPayload) -> CorrespondenceSet:
    try:
        return correspondences_from_dict(payload.model_dump())
    except ValueError as exc:
        raise _fail("data", exc) from exc


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/rectify", response_model=schemas.RectifyResponse)
def rectify(request: schemas.RectifyRequest) -> schemas.RectifyResponse:
    c = _correspondences(request.correspondences)
    try:
        ransac_cfg = RansacConfig(
            max_iterations=request.ransac.max_iterations,
            inlier_threshold=request.ransac.inlier_threshold,
            confidence=request.ransac.confidence,
            seed=request.ransac.seed,
        )
        solver_cfg = SolverConfig(
            mode=request.mode,
            max_outer_iters=request.solver.max_outer_iters,
            trust_radius_init=request.solver.trust_radius_init,
            max_inner_iters=request.solver.max_inner_iters,
            gradient_tol=request.solver.gradient_tol,
            step_tol=request.solver.step_tol,
            fd_step_rel=request.solver.fd_step_rel,
            thresholds=Thresholds(**request.solver.thresholds.model_dump()),
        )
    except ValueError as exc:
        raise _fail("data", exc) from exc

    try:
        inliers, _ = ransac_filter(c, ransac_cfg)
        result = solve(inliers, solver_cfg)
    except _DATA_ERRORS as exc:
        raise _fail("data", exc) from exc
    except (NonFiniteResidual, StereoRectError) as exc:
        raise _fail("solver", exc) from exc

    final = result.trace.rounds[-1]
    return schemas.RectifyResponse(
        h_left=result.pair.h_left.tolist(),
        h_right=result.pair.h_right.tolist(),
        fundamental=result.pair.fundamental.tolist(),
        params=result.params.to_dict(),
        report=final.report.to_dict(),
        trace=[schemas.TraceRound(**r) for r in result.trace.to_records()],
        termination=result.trace.termination,
        input_pairs=len(c),
        inlier_pairs=len(inliers),
        run=schemas.RunInfo(
            tool_version=__version__, mode=request.mode, ransac_seed=request.ransac.seed
        ),
    )


@app.post("/synth", response_model=schemas.SynthResponse)
def synth(request: schemas.SynthRequest) -> schemas.SynthResponse:
    try:
        suite = make_suite(
            RigDims(request.width, request.height),
            request.seed,
            n_points=request.n_points,
            noise_sigma=request.noise_sigma,
            outlier_fraction=request.outlier_fraction,
        )
    except _DATA_ERRORS as exc:
        raise _fail("data", exc) from exc
    cases = [
        schemas.SynthCase(
            name=name,
            correspondences=schemas.CorrespondencesPayload(
                width=c.dims.width, height=c.dims.height, pairs=c.pairs.tolist()
            ),
            ground_truth=ground_truth_to_dict(gt),
        )
        for name, c, gt in suite
    ]
    return schemas.SynthResponse(cases=cases)


def _decode_image(b64: str):
    try:
        return from_png_bytes(base64.b64decode(b64))
    except Exception as exc:
        raise _fail("data", exc) from exc


@app.post("/warp", response_model=schemas.WarpResponse)
def warp_image(request: schemas.WarpRequest) -> schemas.WarpResponse:
    img = _decode_image(request.image_png_b64)
    out_dims = None
    if request.out_width is not None and request.out_height is not None:
        out_dims = (request.out_width, request.out_height)
    try:
        warped = warp(img, np.asarray(request.homography, dtype=float),
                      out_dims=out_dims, auto_fit=request.auto_fit)
    except StereoRectError as exc:
        raise _fail("data", exc) from exc
    return schemas.WarpResponse(
        image_png_b64=base64.b64encode(png_bytes(warped)).decode("ascii"),
        width=warped.width,
        height=warped.height,
    )


@app.post("/overlay", response_model=schemas.OverlayResponse)
def overlay(request: schemas.OverlayRequest) -> schemas.OverlayResponse:
    left = _decode_image(request.left_png_b64)
    right = _decode_image(request.right_png_b64)
    matches = _correspondences(request.correspondences)
    if request.h_left is not None and request.h_right is not None:
        # draw the lines where the matches land after rectification
        try:
            mapped_left = map_points(np.asarray(request.h_left, dtype=float), matches.left)
            mapped_right = map_points(np.asarray(request.h_right, dtype=float), matches.right)
        except StereoRectError as exc:
            raise _fail("data", exc) from exc
        matches = CorrespondenceSet(matches.dims, np.hstack([mapped_left, mapped_right]))
    composite = overlay_scanlines(left, right, matches, k=request.scanlines)
    return schemas.OverlayResponse(
        image_png_b64=base64.b64encode(png_bytes(composite)).decode("ascii"),
        width=composite.width,
        height=composite.height,
    )
