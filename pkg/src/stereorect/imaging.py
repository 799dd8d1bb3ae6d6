"""Raster warping and visualization of rectified pairs.

Homographies are applied by inverse mapping with bilinear sampling;
pixels that map outside the source image are black.  PPM (binary P6) is
the bit-exact interchange format for tests; PNG is supported for end
users.  All operations are pure functions of their inputs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import SingularHomography
from .metrics import CorrespondenceSet

SCANLINE_COLOR = (255, 52, 52)


@dataclass(frozen=True)
class RasterImage:
    """8-bit RGB image; pixels array has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = np.repeat(px[:, :, None], 3, axis=2)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixels, got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be at least 1x1")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px, dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def mapped_corner_bounds(h: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """(min_xy, max_xy) of the frame corners mapped through ``h``."""
    corners = np.array([
        [0.0, 0.0, 1.0],
        [width - 1.0, 0.0, 1.0],
        [width - 1.0, height - 1.0, 1.0],
        [0.0, height - 1.0, 1.0],
    ])
    mapped = corners @ np.asarray(h, dtype=float).T
    mapped = mapped[:, :2] / mapped[:, 2:3]
    return mapped.min(axis=0), mapped.max(axis=0)


def warp(
    img: RasterImage,
    h: np.ndarray,
    out_dims: tuple[int, int] | None = None,
    auto_fit: bool = False,
) -> RasterImage:
    """Warp an image by a homography (inverse mapping, bilinear sampling).

    ``out_dims`` is (width, height) of the output; None keeps the input
    size.  With ``auto_fit`` the output is translated and sized so the
    mapped corner quadrilateral fits exactly; out_dims is then ignored.
    """
    h = np.asarray(h, dtype=float)
    if abs(np.linalg.det(h)) < 1e-12:
        raise SingularHomography("cannot warp by a singular homography")

    if auto_fit:
        lo, hi = mapped_corner_bounds(h, img.width, img.height)
        shift = np.array([[1.0, 0.0, -lo[0]], [0.0, 1.0, -lo[1]], [0.0, 0.0, 1.0]])
        h = shift @ h
        out_w = int(np.ceil(hi[0] - lo[0])) + 1
        out_h = int(np.ceil(hi[1] - lo[1])) + 1
    elif out_dims is not None:
        out_w, out_h = int(out_dims[0]), int(out_dims[1])
    else:
        out_w, out_h = img.width, img.height

    h_inv = np.linalg.inv(h)
    xs, ys = np.meshgrid(np.arange(out_w, dtype=float), np.arange(out_h, dtype=float))
    denom = h_inv[2, 0] * xs + h_inv[2, 1] * ys + h_inv[2, 2]
    denom = np.where(np.abs(denom) < 1e-12, np.nan, denom)
    sx = (h_inv[0, 0] * xs + h_inv[0, 1] * ys + h_inv[0, 2]) / denom
    sy = (h_inv[1, 0] * xs + h_inv[1, 1] * ys + h_inv[1, 2]) / denom

    valid = (sx >= 0.0) & (sx <= img.width - 1.0) & (sy >= 0.0) & (sy <= img.height - 1.0)
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)

    x0 = np.clip(np.floor(sx).astype(int), 0, img.width - 2) if img.width > 1 else np.zeros_like(sx, dtype=int)
    y0 = np.clip(np.floor(sy).astype(int), 0, img.height - 2) if img.height > 1 else np.zeros_like(sy, dtype=int)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)

    src = img.pixels.astype(np.float64)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    blended = top * (1.0 - fy) + bottom * fy
    out = np.where(valid[..., None], np.rint(blended), 0.0)
    return RasterImage(out.astype(np.uint8))


def side_by_side(left: RasterImage, right: RasterImage) -> RasterImage:
    """Horizontal composite; shorter image padded with black at the bottom."""
    height = max(left.height, right.height)
    canvas = np.zeros((height, left.width + right.width, 3), dtype=np.uint8)
    canvas[: left.height, : left.width] = left.pixels
    canvas[: right.height, left.width:] = right.pixels
    return RasterImage(canvas)


def overlay_scanlines(
    left: RasterImage,
    right: RasterImage,
    matches: CorrespondenceSet,
    k: int = 10,
) -> RasterImage:
    """Side-by-side composite with k horizontal epipolar scanlines.

    The k line rows come from k matches evenly distributed along the
    vertical direction (by left-image row); k = 0 gives the plain
    composite.  On a perfectly rectified pair every line passes through
    both points of its match after pixel rounding.
    """
    composite = side_by_side(left, right)
    if k <= 0:
        return composite
    canvas = composite.pixels.copy()
    k = min(k, len(matches))
    order = np.argsort(matches.pairs[:, 1], kind="stable")
    picks = order[np.round(np.linspace(0, len(matches) - 1, k)).astype(int)]
    rows = np.round(matches.pairs[picks, 1]).astype(int)
    for row in rows:
        if 0 <= row < canvas.shape[0]:
            canvas[row, :] = SCANLINE_COLOR
    return RasterImage(canvas)


# ------------------------------------------------------------------- io


def write_ppm(img: RasterImage, path: str | Path) -> None:
    """Binary P6, maxval 255; byte-for-byte deterministic."""
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.pixels.tobytes())


def read_ppm(path: str | Path) -> RasterImage:
    with open(path, "rb") as fh:
        data = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError(f"not a binary PPM file: magic {fields[0]!r}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace after the header
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    return RasterImage(pixels.reshape(height, width, 3))


def write_png(img: RasterImage, path: str | Path) -> None:
    Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")


def read_png(path: str | Path) -> RasterImage:
    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("RGB")))


def read_image(path: str | Path) -> RasterImage:
    """Dispatch on suffix: .ppm handled natively, everything else via PIL."""
    if str(path).lower().endswith(".ppm"):
        return read_ppm(path)
    return read_png(path)


def png_bytes(img: RasterImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes) -> RasterImage:
    with Image.open(io.BytesIO(data)) as im:
        return RasterImage(np.asarray(im.convert("RGB")))
