"""Command-line pipeline driver.

Thin client over the HTTP service: every subcommand builds JSON requests
and posts them to a stereorect server.  By default the service app runs
in-process (no server needed); pass --server to target a remote
deployment with the same wire format.

Exit codes: 0 success, 2 usage/config/input errors, 3 data errors
(insufficient inliers, degenerate geometry), 4 solver failures.
"""

from __future__ import annotations

import argparse
import base64
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .files import RunManifest, canonical_json, resolve_config, write_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

TABLE_COLUMNS = ("e_v", "e_o", "e_sk", "e_ar", "e_r", "e_sr")
TABLE_HEADERS = ("E_v", "E_O", "E_Sk", "E_AR", "E_R", "E_SR")


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def make_client(server: str | None):
    """HTTP client: remote when --server is given, in-process otherwise."""
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # this fastapi/starlette pairing warns about httpx at import time
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def post(client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except Exception:
        detail = None
    if isinstance(detail, dict) and "error" in detail:
        category = detail["error"]
        message = detail.get("message", "request failed")
        raise CliError(EXIT_DATA if category == "data" else EXIT_SOLVER,
                       f"{path}: {message}")
    if 400 <= response.status_code < 500:
        raise CliError(EXIT_USAGE, f"{path}: rejected ({response.status_code}): {detail}")
    raise CliError(EXIT_SOLVER, f"{path}: server error ({response.status_code})")


def _parse_dims(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        dims = float(w), float(h)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"--dims expects WxH, got {text!r}") from exc
    if dims[0] <= 0 or dims[1] <= 0:
        raise CliError(EXIT_USAGE, "--dims values must be positive")
    return dims


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(EXIT_USAGE, f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"corrupt JSON in {path}: {exc}") from exc


def _load_config(args) -> dict:
    try:
        return resolve_config(getattr(args, "config", None))
    except FileNotFoundError as exc:
        raise CliError(EXIT_USAGE, f"config file not found: {exc.filename}") from exc
    except Exception as exc:
        raise CliError(EXIT_USAGE, f"cannot parse config: {exc}") from exc


def _ransac_payload(args, config: dict) -> dict:
    payload = dict(config.get("ransac", {}))
    payload.setdefault("seed", args.seed)
    if getattr(args, "ransac_threshold", None) is not None:
        payload["inlier_threshold"] = args.ransac_threshold
    if getattr(args, "ransac_seed", None) is not None:
        payload["seed"] = args.ransac_seed
    if getattr(args, "ransac_iters", None) is not None:
        payload["max_iterations"] = args.ransac_iters
    return payload


_SOLVER_FLAGS = {
    "max_outer_iters": "max_outer_iters",
    "max_inner_iters": "max_inner_iters",
    "trust_radius": "trust_radius_init",
    "gradient_tol": "gradient_tol",
    "step_tol": "step_tol",
    "fd_step": "fd_step_rel",
}


def _solver_payload(config: dict, args=None) -> dict:
    solver = dict(config.get("solver", {}))
    solver.pop("mode", None)  # mode comes from the CLI flag
    if args is not None:
        for flag, field in _SOLVER_FLAGS.items():
            value = getattr(args, flag, None)
            if value is not None:
                solver[field] = value
    return solver


def _read_image_b64(path: str) -> str:
    from .imaging import png_bytes, read_image

    try:
        img = read_image(path)
    except FileNotFoundError as exc:
        raise CliError(EXIT_USAGE, f"image not found: {path}") from exc
    except Exception as exc:
        raise CliError(EXIT_USAGE, f"cannot read image {path}: {exc}") from exc
    return base64.b64encode(png_bytes(img)).decode("ascii")


def _write_b64_png(b64: str, path: Path) -> None:
    path.write_bytes(base64.b64decode(b64))


# ------------------------------------------------------------------ synth


def cmd_synth(args) -> int:
    width, height = _parse_dims(args.dims)
    request = {
        "width": width,
        "height": height,
        "seed": args.seed,
        "n_points": args.n_points,
        "noise_sigma": args.noise_sigma,
        "outlier_fraction": args.outlier_fraction,
    }
    with make_client(args.server) as client:
        response = post(client, "/synth", request)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for case in response["cases"]:
        name = case["name"]
        write_json(out / f"{name}.json", case["correspondences"])
        write_json(out / f"{name}.gt.json", case["ground_truth"])
    manifest = RunManifest.create(
        command="synth",
        inputs={"dims": args.dims},
        mode="n/a",
        seed=args.seed,
        out_dir=str(out),
        config=request,
    )
    write_json(out / "manifest.json", manifest.to_dict())
    print(f"wrote {len(response['cases'])} cases to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- rectify


def _rectify_once(client, matches_doc: dict, mode: str, ransac: dict, solver: dict) -> dict:
    return post(client, "/rectify", {
        "correspondences": matches_doc,
        "mode": mode,
        "ransac": ransac,
        "solver": solver,
    })


def cmd_rectify(args) -> int:
    if bool(args.left) != bool(args.right):
        raise CliError(EXIT_USAGE, "--left and --right must be given together")
    matches_doc = _load_json(args.matches)
    config = _load_config(args)
    ransac = _ransac_payload(args, config)
    solver = _solver_payload(config, args)
    out = Path(args.out)

    effective = {"file": config, "ransac": ransac, "solver": solver}
    with make_client(args.server) as client:
        try:
            response = _rectify_once(client, matches_doc, args.mode, ransac, solver)
        except CliError as exc:
            if exc.exit_code in (EXIT_DATA, EXIT_SOLVER):
                out.mkdir(parents=True, exist_ok=True)
                manifest = _rectify_manifest(args, effective)
                write_json(out / "error.json",
                           {"manifest": manifest.to_dict(), "error": str(exc), "trace": []})
            raise

        manifest = _rectify_manifest(args, effective)
        out.mkdir(parents=True, exist_ok=True)
        document = {
            "manifest": manifest.to_dict(),
            "h_left": response["h_left"],
            "h_right": response["h_right"],
            "fundamental": response["fundamental"],
            "params": response["params"],
            "report": response["report"],
            "termination": response["termination"],
            "input_pairs": response["input_pairs"],
            "inlier_pairs": response["inlier_pairs"],
            "trace": response["trace"],
        }
        write_json(out / "result.json", document)
        with open(out / "trace.jsonl", "w", encoding="utf-8") as fh:
            for record in response["trace"]:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

        if args.left and args.right:
            left_b64 = _read_image_b64(args.left)
            right_b64 = _read_image_b64(args.right)
            warped = {}
            for side, b64 in (("left", left_b64), ("right", right_b64)):
                warped[side] = post(client, "/warp", {
                    "image_png_b64": b64,
                    "homography": response[f"h_{side}"],
                })
                _write_b64_png(warped[side]["image_png_b64"], out / f"{side}_rectified.png")
            composite = post(client, "/overlay", {
                "left_png_b64": warped["left"]["image_png_b64"],
                "right_png_b64": warped["right"]["image_png_b64"],
                "correspondences": matches_doc,
                "h_left": response["h_left"],
                "h_right": response["h_right"],
                "scanlines": args.scanlines,
            })
            _write_b64_png(composite["image_png_b64"], out / "overlay.png")

    report = response["report"]
    print(f"E_v={report['e_v']:.4f} E_s={report['e_s']:.6f} "
          f"E_O={report['e_o']:.2f} E_Sk={report['e_sk']:.2f} "
          f"E_AR={report['e_ar']:.3f} E_R={report['e_r']:.2f} E_SR={report['e_sr']:.3f} "
          f"({response['termination']}, {response['inlier_pairs']}/{response['input_pairs']} inliers)")
    return EXIT_OK


def _rectify_manifest(args, config: dict) -> RunManifest:
    inputs = {"matches": args.matches}
    if args.left:
        inputs["left"] = args.left
    if args.right:
        inputs["right"] = args.right
    return RunManifest.create(
        command="rectify",
        inputs=inputs,
        mode=args.mode,
        seed=args.seed,
        out_dir=args.out,
        config=config,
    )


# ------------------------------------------------------------------- eval


def _suite_cases(suite_dir: str) -> list[tuple[str, Path]]:
    root = Path(suite_dir)
    if not root.is_dir():
        raise CliError(EXIT_USAGE, f"suite directory not found: {suite_dir}")
    cases = sorted(
        (p.stem, p)
        for p in root.glob("*.json")
        if not p.name.endswith(".gt.json") and p.name != "manifest.json"
    )
    if not cases:
        raise CliError(EXIT_USAGE, f"no correspondence files in {suite_dir}")
    return cases


def cmd_eval(args) -> int:
    cases = _suite_cases(args.suite)
    config = _load_config(args)
    solver = _solver_payload(config, args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    tasks = [(name, path, seed) for name, path in cases for seed in seeds]

    def run_one(task):
        name, path, seed = task
        matches_doc = _load_json(str(path))
        ransac = _ransac_payload(args, config)
        ransac["seed"] = seed
        with make_client(args.server) as client:
            try:
                response = _rectify_once(client, matches_doc, args.mode, ransac, solver)
                return name, seed, response["report"], None
            except CliError as exc:
                return name, seed, None, exc

    jobs = max(1, args.jobs)
    if jobs == 1:
        results = [run_one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, tasks))

    per_case: dict[str, list[dict]] = {}
    failures: list[tuple[str, int, CliError]] = []
    for name, seed, report, error in results:
        if error is not None:
            failures.append((name, seed, error))
        else:
            per_case.setdefault(name, []).append(report)

    rows = []
    for name, _ in cases:
        reports = per_case.get(name)
        if not reports:
            continue
        mean = {col: sum(r[col] for r in reports) / len(reports) for col in TABLE_COLUMNS}
        rows.append((name, mean))

    _print_table(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "eval.csv", rows)
    manifest = RunManifest.create(
        command="eval",
        inputs={"suite": args.suite},
        mode=args.mode,
        seed=args.seed,
        out_dir=args.out,
        config={"seeds": args.seeds, "jobs": args.jobs},
    )
    write_json(out / "manifest.json", manifest.to_dict())

    if failures:
        for name, seed, error in failures:
            print(f"FAILED {name} (seed {seed}): {error}", file=sys.stderr)
        return max(f[2].exit_code for f in failures)
    return EXIT_OK


def _print_table(rows) -> None:
    name_width = max([len("case")] + [len(name) for name, _ in rows]) + 2
    header = "case".ljust(name_width) + "".join(h.rjust(9) for h in TABLE_HEADERS)
    print(header)
    print("-" * len(header))
    for name, mean in rows:
        print(name.ljust(name_width)
              + "".join(f"{mean[c]:9.3f}" for c in TABLE_COLUMNS))
    if rows:
        overall = {c: sum(m[c] for _, m in rows) / len(rows) for c in TABLE_COLUMNS}
        print("mean".ljust(name_width)
              + "".join(f"{overall[c]:9.3f}" for c in TABLE_COLUMNS))


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", *TABLE_COLUMNS])
        for name, mean in rows:
            writer.writerow([name] + [repr(mean[c]) for c in TABLE_COLUMNS])


# ------------------------------------------------------------------ parser


def _add_solver_flags(parser_obj) -> None:
    parser_obj.add_argument("--max-outer-iters", type=int, default=None, dest="max_outer_iters")
    parser_obj.add_argument("--max-inner-iters", type=int, default=None, dest="max_inner_iters")
    parser_obj.add_argument("--trust-radius", type=float, default=None, dest="trust_radius")
    parser_obj.add_argument("--gradient-tol", type=float, default=None, dest="gradient_tol")
    parser_obj.add_argument("--step-tol", type=float, default=None, dest="step_tol")
    parser_obj.add_argument("--fd-step", type=float, default=None, dest="fd_step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stereorect",
        description="Uncalibrated stereo rectification pipeline",
    )
    parser.add_argument("--server", default=None,
                        help="URL of a stereorect service; default runs in-process")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate the 8-case synthetic benchmark")
    p_synth.add_argument("--dims", default="1920x1080", help="image dimensions WxH")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--n-points", type=int, default=300)
    p_synth.add_argument("--noise-sigma", type=float, default=0.0)
    p_synth.add_argument("--outlier-fraction", type=float, default=0.0)
    p_synth.set_defaults(func=cmd_synth)

    p_rect = sub.add_parser("rectify", help="rectify one correspondence set")
    p_rect.add_argument("--matches", required=True, help="correspondence JSON file")
    p_rect.add_argument("--out", required=True, help="output directory")
    p_rect.add_argument("--mode", choices=("usr", "usr-cgd"), default="usr-cgd")
    p_rect.add_argument("--seed", type=int, default=0, help="run seed (default RANSAC seed)")
    p_rect.add_argument("--config", default=None,
                        help="TOML/JSON config (fallback: $STEREORECT_CONFIG)")
    p_rect.add_argument("--ransac-threshold", type=float, default=None)
    p_rect.add_argument("--ransac-seed", type=int, default=None)
    p_rect.add_argument("--ransac-iters", type=int, default=None)
    p_rect.add_argument("--left", default=None, help="left image (PNG/PPM)")
    p_rect.add_argument("--right", default=None, help="right image (PNG/PPM)")
    p_rect.add_argument("--scanlines", type=int, default=10,
                        help="epipolar scanlines in the overlay (0 disables)")
    _add_solver_flags(p_rect)
    p_rect.set_defaults(func=cmd_rectify)

    p_eval = sub.add_parser("eval", help="evaluate a suite directory")
    p_eval.add_argument("--suite", required=True, help="directory of correspondence files")
    p_eval.add_argument("--out", required=True, help="output directory for eval.csv")
    p_eval.add_argument("--mode", choices=("usr", "usr-cgd"), default="usr-cgd")
    p_eval.add_argument("--seeds", type=int, default=3, help="number of RANSAC seeds")
    p_eval.add_argument("--seed", type=int, default=0, help="first RANSAC seed")
    p_eval.add_argument("--jobs", type=int, default=1, help="parallel requests")
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--ransac-threshold", type=float, default=None)
    p_eval.add_argument("--ransac-seed", type=int, default=None)
    p_eval.add_argument("--ransac-iters", type=int, default=None)
    _add_solver_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
