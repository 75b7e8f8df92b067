"""View-ring cameras, depth rendering, block masks, and depth post-processing.

Depth maps are rendered by marching each primary ray across the shape bounds
at step diagonal/1024 and refining the first outside-to-inside transition
with 24 bisection steps.  Per-block masks attribute each first-hit point to
its owning irreducible block, so sibling masks are disjoint and their union
is exactly the silhouette.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image
from scipy import ndimage

from .blocks import CodeBlock
from .errors import DegenerateBoundsError, DimensionMismatchError
from .geometry import Shape, backend
from .geometry.program import AABB

DEFAULT_VIEWS = 10
DEFAULT_ELEVATION_DEG = 55.0
DEFAULT_FOV_DEG = 40.0
DEFAULT_RESOLUTION = 512
RADIUS_FACTOR = 2.2
MARCH_DIVISIONS = 1024
BISECT_STEPS = 24
DEPTH_FLOOR = 32  # farthest-depth gray level; 0 is reserved for background


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    vertical_fov: float = DEFAULT_FOV_DEG
    resolution: tuple[int, int] = (DEFAULT_RESOLUTION, DEFAULT_RESOLUTION)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = np.asarray(self.position, dtype=float)
        target = np.asarray(self.look_at, dtype=float)
        fwd = target - pos
        norm = np.linalg.norm(fwd)
        if norm == 0:
            raise DegenerateBoundsError("camera position equals look_at")
        fwd = fwd / norm
        right = np.cross(fwd, np.asarray(self.up, dtype=float))
        right = right / np.linalg.norm(right)
        cam_up = np.cross(right, fwd)
        return fwd, right, cam_up

    def ray_directions(self) -> np.ndarray:
        """Unit direction per pixel, row-major, [H*W, 3]."""
        w, h = self.resolution
        fwd, right, cam_up = self.basis()
        half_h = math.tan(math.radians(self.vertical_fov) / 2.0)
        half_w = half_h * w / h
        xs = ((np.arange(w) + 0.5) / w * 2.0 - 1.0) * half_w
        ys = (1.0 - (np.arange(h) + 0.5) / h * 2.0) * half_h
        u, v = np.meshgrid(xs, ys)
        dirs = fwd[None, :] + u.reshape(-1, 1) * right[None, :] + v.reshape(-1, 1) * cam_up[None, :]
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)

    def to_json_obj(self) -> dict:
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "up": list(self.up),
            "vertical_fov": self.vertical_fov,
            "resolution": list(self.resolution),
        }


@dataclass(frozen=True)
class ViewRing:
    cameras: tuple[Camera, ...]
    elevation: float
    radius: float


@dataclass
class DepthImage:
    width: int
    height: int
    depth: np.ndarray  # float64 [H,W]; np.inf marks background
    _t_inside: Optional[np.ndarray] = field(default=None, repr=False)
    _block_map: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def silhouette(self) -> np.ndarray:
        return np.isfinite(self.depth)


@dataclass
class BinaryMask:
    width: int
    height: int
    bits: np.ndarray  # bool [H,W]

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def bounding_box(self) -> Optional[tuple[int, int, int, int]]:
        """(x0, y0, x1, y1) pixel box, half-open, or None when empty."""
        rows = np.any(self.bits, axis=1)
        cols = np.any(self.bits, axis=0)
        if not rows.any():
            return None
        y0, y1 = np.nonzero(rows)[0][[0, -1]]
        x0, x1 = np.nonzero(cols)[0][[0, -1]]
        return int(x0), int(y0), int(x1) + 1, int(y1) + 1


def make_view_ring(bounds: AABB, n: int = DEFAULT_VIEWS,
                   elevation: float = DEFAULT_ELEVATION_DEG,
                   resolution: int = DEFAULT_RESOLUTION,
                   fov: float = DEFAULT_FOV_DEG,
                   radius_factor: float = RADIUS_FACTOR) -> ViewRing:
    """Cameras evenly spaced on a ring above the shape, all aimed at its center."""
    if bounds.empty or bounds.diagonal == 0.0:
        raise DegenerateBoundsError("cannot fit a view ring to empty bounds")
    center = bounds.center
    radius = radius_factor * bounds.diagonal / 2.0
    el = math.radians(elevation)
    cams = []
    for k in range(n):
        az = 2.0 * math.pi * k / n
        offset = radius * np.array(
            [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)]
        )
        cams.append(
            Camera(
                position=tuple(center + offset),
                look_at=tuple(center),
                vertical_fov=fov,
                resolution=(resolution, resolution),
            )
        )
    return ViewRing(cameras=tuple(cams), elevation=elevation, radius=radius)


def _ray_box_interval(origin: np.ndarray, dirs: np.ndarray, box: AABB
                      ) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        ta = (lo[None, :] - origin[None, :]) * inv
        tb = (hi[None, :] - origin[None, :]) * inv
    # 0*inf NaNs appear when the origin sits exactly on a slab plane of a
    # zero-component axis; the ray then runs inside the closed slab, which
    # imposes no constraint on t
    nan_axis = np.isnan(ta) | np.isnan(tb)
    near = np.where(nan_axis, -np.inf, np.minimum(ta, tb))
    far = np.where(nan_axis, np.inf, np.maximum(ta, tb))
    tmin = near.max(axis=1)
    tmax = far.min(axis=1)
    t0 = np.maximum(tmin, 0.0)
    t1 = tmax
    miss = tmax < t0
    t0[miss] = 1.0
    t1[miss] = 0.0  # empty interval marks a miss
    return t0, t1


def render_depth(shape: Shape, cam: Camera) -> DepthImage:
    """Depth = Euclidean distance from the camera to the first surface hit."""
    shape.require_nonempty()
    w, h = cam.resolution
    origin = np.asarray(cam.position, dtype=float)
    dirs = cam.ray_directions()
    t0, t1 = _ray_box_interval(origin, dirs, shape.bounds())
    step = shape.diag / MARCH_DIVISIONS
    t, t_in = backend.render_rays(shape.program, origin, dirs, t0, t1, step, BISECT_STEPS)
    depth = np.where(t < 0, np.inf, t).reshape(h, w)
    return DepthImage(width=w, height=h, depth=depth,
                      _t_inside=t_in.reshape(h, w))


def _block_map(shape: Shape, cam: Camera, base: DepthImage) -> np.ndarray:
    """int32 [H,W] irreducible block id of the first hit per pixel, -1 background."""
    if base._block_map is not None:
        return base._block_map
    sil = base.silhouette
    t_hit = base._t_inside if base._t_inside is not None else np.where(sil, base.depth, -1.0)
    origin = np.asarray(cam.position, dtype=float)
    dirs = cam.ray_directions().reshape(base.height, base.width, 3)
    pts = origin[None, :] + t_hit[sil][:, None] * dirs[sil]
    ids = shape.attribute_block(pts)
    block_map = np.full((base.height, base.width), -1, dtype=np.int32)
    block_map[sil] = ids
    base._block_map = block_map
    return block_map


def render_block_mask(shape: Shape, block: CodeBlock, cam: Camera,
                      base: DepthImage) -> BinaryMask:
    """Mask of pixels whose first visible surface belongs to the block.

    Composite blocks see the union of their descendants' visibility.
    """
    block_map = _block_map(shape, cam, base)
    leaf_ids = shape.blocks.leaves_under(block.id)
    bits = np.isin(block_map, np.asarray(leaf_ids, dtype=np.int32))
    return BinaryMask(width=base.width, height=base.height, bits=bits)


def render_all_block_masks(shape: Shape, cam: Camera, base: DepthImage
                           ) -> dict[int, BinaryMask]:
    return {
        b.id: render_block_mask(shape, b, cam, base)
        for b in shape.blocks.in_source_order()
    }


def encode_depth_8bit(d: DepthImage) -> bytes:
    """PNG bytes: background 0; nearest depth 255, farthest DEPTH_FLOOR."""
    sil = d.silhouette
    out = np.zeros((d.height, d.width), dtype=np.uint8)
    if sil.any():
        vals = d.depth[sil]
        dmin = float(vals.min())
        dmax = float(vals.max())
        if dmax == dmin:
            out[sil] = 255
        else:
            scaled = 255.0 - (d.depth[sil] - dmin) / (dmax - dmin) * (255.0 - DEPTH_FLOOR)
            out[sil] = np.rint(scaled).astype(np.uint8)
    return png_from_u8(out)


def morphological_close(img: np.ndarray, iterations: int) -> np.ndarray:
    """Grayscale closing with a full 3x3 element, repeated `iterations` times."""
    if iterations <= 0:
        return img.copy()
    out = img
    # border padding: -inf-equivalent for dilation, +inf-equivalent for erosion,
    # so closing is extensive (never darkens a pixel) up to the image edge
    for _ in range(iterations):
        out = ndimage.grey_dilation(out, size=(3, 3), mode="constant", cval=0)
    for _ in range(iterations):
        out = ndimage.grey_erosion(out, size=(3, 3), mode="constant", cval=255)
    return out


# --- image codecs ---


def pgm16_from_depth(d: DepthImage) -> bytes:
    """Lossless 16-bit PGM dump: background 0, foreground scaled to 1..65535."""
    out = np.zeros((d.height, d.width), dtype=np.uint16)
    sil = d.silhouette
    if sil.any():
        vals = d.depth[sil]
        dmin = float(vals.min())
        dmax = float(vals.max())
        if dmax == dmin:
            out[sil] = 65535
        else:
            out[sil] = np.rint(
                1 + (d.depth[sil] - dmin) / (dmax - dmin) * 65534).astype(np.uint16)
    header = f"P5\n{d.width} {d.height}\n65535\n".encode("ascii")
    return header + out.astype(">u2").tobytes()


def depth_u16_from_pgm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5" or parts[2] != b"65535":
        raise ValueError("not a 16-bit PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(h, w).astype(np.uint16)


def png_from_u8(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def u8_from_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("L")
    return np.asarray(img, dtype=np.uint8)


def png_from_mask(mask: BinaryMask) -> bytes:
    img = Image.fromarray(mask.bits.astype(np.uint8) * 255, mode="L").convert("1")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png(data: bytes) -> BinaryMask:
    arr = u8_from_png(data)
    return BinaryMask(width=arr.shape[1], height=arr.shape[0], bits=arr >= 128)


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatchError(
            f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
    inter = np.count_nonzero(a.bits & b.bits)
    union = np.count_nonzero(a.bits | b.bits)
    return inter / union if union else 0.0
