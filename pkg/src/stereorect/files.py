"""File formats and run manifests.

Correspondences travel as minimal JSON:

    {"width": W, "height": H, "pairs": [[ul, vl, ur, vr], ...]}

Ground-truth sidecars, result documents, and manifests are plain JSON
with sorted keys so identical runs produce identical bytes; the run
timestamp lives only inside the manifest block.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import CameraIntrinsics, CameraPose
from .metrics import CorrespondenceSet
from .model import RigDims
from .optimizer import SolverConfig
from .matching import RansacConfig
from .synthgen import GroundTruth

try:
    import tomllib  # python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib


def canonical_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, document: dict) -> None:
    Path(path).write_text(canonical_json(document), encoding="utf-8")


def _matrix(m: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(m, dtype=float)]


# --------------------------------------------------------- correspondences


def correspondences_to_dict(c: CorrespondenceSet) -> dict:
    return {
        "width": c.dims.width,
        "height": c.dims.height,
        "pairs": [[float(v) for v in row] for row in c.pairs],
    }


def correspondences_from_dict(data: dict) -> CorrespondenceSet:
    dims = RigDims(float(data["width"]), float(data["height"]))
    return CorrespondenceSet(dims, np.asarray(data["pairs"], dtype=float))


def save_correspondences(path: str | Path, c: CorrespondenceSet) -> None:
    write_json(path, correspondences_to_dict(c))


def load_correspondences(path: str | Path) -> CorrespondenceSet:
    with open(path, "r", encoding="utf-8") as fh:
        return correspondences_from_dict(json.load(fh))


# ------------------------------------------------------------ ground truth


def ground_truth_to_dict(gt: GroundTruth) -> dict:
    return {
        "fundamental": _matrix(gt.fundamental),
        "h_left": _matrix(gt.h_left),
        "h_right": _matrix(gt.h_right),
        "inlier_mask": [bool(v) for v in gt.inlier_mask],
        "pose_left": {
            "rotation": _matrix(gt.pose_left.rotation),
            "translation": [float(v) for v in gt.pose_left.translation],
        },
        "pose_right": {
            "rotation": _matrix(gt.pose_right.rotation),
            "translation": [float(v) for v in gt.pose_right.translation],
        },
        "intrinsics_left": {
            "alpha": gt.intrinsics_left.alpha,
            "width": gt.intrinsics_left.width,
            "height": gt.intrinsics_left.height,
        },
        "intrinsics_right": {
            "alpha": gt.intrinsics_right.alpha,
            "width": gt.intrinsics_right.width,
            "height": gt.intrinsics_right.height,
        },
    }


def ground_truth_from_dict(data: dict) -> GroundTruth:
    def pose(d: dict) -> CameraPose:
        return CameraPose(np.asarray(d["rotation"], dtype=float),
                          np.asarray(d["translation"], dtype=float))

    def intr(d: dict) -> CameraIntrinsics:
        return CameraIntrinsics(float(d["alpha"]), float(d["width"]), float(d["height"]))

    return GroundTruth(
        fundamental=np.asarray(data["fundamental"], dtype=float),
        h_left=np.asarray(data["h_left"], dtype=float),
        h_right=np.asarray(data["h_right"], dtype=float),
        inlier_mask=np.asarray(data["inlier_mask"], dtype=bool),
        pose_left=pose(data["pose_left"]),
        pose_right=pose(data["pose_right"]),
        intrinsics_left=intr(data["intrinsics_left"]),
        intrinsics_right=intr(data["intrinsics_right"]),
    )


# ---------------------------------------------------------------- manifest


@dataclass(frozen=True)
class RunManifest:
    """Provenance block embedded verbatim in result documents."""

    command: str
    inputs: dict
    mode: str
    seed: int
    out_dir: str
    config: dict = field(default_factory=dict)
    tool_version: str = __version__
    created_utc: str = ""

    @staticmethod
    def create(command: str, inputs: dict, mode: str, seed: int,
               out_dir: str, config: dict | None = None) -> "RunManifest":
        return RunManifest(
            command=command,
            inputs=inputs,
            mode=mode,
            seed=seed,
            out_dir=str(out_dir),
            config=config or {},
            created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "mode": self.mode,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "config": self.config,
            "tool_version": self.tool_version,
            "created_utc": self.created_utc,
        }


# ------------------------------------------------------------------ config


def load_config_file(path: str | Path) -> dict:
    """Read a solver/RANSAC config from TOML or JSON."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def resolve_config(explicit_path: str | None, env: dict[str, str] | None = None) -> dict:
    """--config flag wins; STEREORECT_CONFIG is the fallback; else empty."""
    env = os.environ if env is None else env
    path = explicit_path or env.get("STEREORECT_CONFIG")
    if not path:
        return {}
    return load_config_file(path)


def solver_config_from_dict(data: dict, mode: str | None = None) -> SolverConfig:
    solver_part = dict(data.get("solver", {}))
    if mode is not None:
        solver_part["mode"] = mode
    return SolverConfig.from_dict(solver_part)


def ransac_config_from_dict(data: dict, **overrides) -> RansacConfig:
    ransac_part = dict(data.get("ransac", {}))
    ransac_part.update({k: v for k, v in overrides.items() if v is not None})
    known = {k: v for k, v in ransac_part.items() if k in RansacConfig.__dataclass_fields__}
    return RansacConfig(**known)
