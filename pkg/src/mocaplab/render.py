"""Software rasterizer for camera-facing part trapezoids.

Parts paint nearest-first (reverse painter): a pixel belongs to the first
part that claims it. Outlines follow each part's fill and set the edge flag
only on pixels that part owns or that are still unpainted, emulating a
depth-tested line pass. Pixels follow the model-image encoding of
imaging (label bits 0..6, edge flag bit 7).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import Roi, decode_model, write_pgm


@dataclass
class ScreenTriangle:
    v: np.ndarray  # (3, 2) float pixel coordinates
    label: int
    depth: float


@dataclass
class OutlineSegment:
    p0: tuple  # (x, y) ints
    p1: tuple
    label: int
    depth: float


def triangle_aabb(tri, clip):
    """Integer bounding box of a triangle intersected with a clip Roi.

    Returns (x0, y0, x1, y1) inclusive, or None when the intersection is
    empty.
    """
    v = np.asarray(tri.v if isinstance(tri, ScreenTriangle) else tri, dtype=np.float64)
    x0 = max(int(math.floor(v[:, 0].min())), clip.x)
    x1 = min(int(math.ceil(v[:, 0].max())), clip.x + clip.w - 1)
    y0 = max(int(math.floor(v[:, 1].min())), clip.y)
    y1 = min(int(math.ceil(v[:, 1].max())), clip.y + clip.h - 1)
    if x0 > x1 or y0 > y1:
        return None
    return x0, y0, x1, y1


def point_in_triangle(px, py, v):
    """Boundary-inclusive barycentric point test; degenerate triangles reject."""
    ax, ay = float(v[0][0]), float(v[0][1])
    bx, by = float(v[1][0]), float(v[1][1])
    cx, cy = float(v[2][0]), float(v[2][1])
    d1x = bx - ax
    d1y = by - ay
    d2x = cx - ax
    d2y = cy - ay
    den = d1x * d2y - d1y * d2x
    if den == 0.0:
        return False
    wx = float(px) - ax
    wy = float(py) - ay
    s1 = wx * d2y - wy * d2x
    s2 = d1x * wy - d1y * wx
    if den > 0.0:
        return s1 >= 0.0 and s2 >= 0.0 and s1 + s2 <= den
    return s1 <= 0.0 and s2 <= 0.0 and s1 + s2 >= den


def bresenham(p0, p1):
    """8-connected raster line including both endpoints.

    Endpoints are canonicalized (lexicographically smaller first) so the
    pixel set does not depend on traversal direction.
    """
    x0, y0 = int(p0[0]), int(p0[1])
    x1, y1 = int(p1[0]), int(p1[1])
    if (x1, y1) < (x0, y0):
        x0, y0, x1, y1 = x1, y1, x0, y0
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pts = []
    x, y = x0, y0
    while True:
        pts.append((x, y))
        if x == x1 and y == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


_NO_ANCHOR = np.zeros((0, 3))


def rasterize_pose(triangles, outlines, roi, out, ref=None, accum=None):
    """Rasterize projected part triangles and outline segments into out.

    Parts (grouped by (depth, label)) process nearest-first; fills skip
    painted pixels, outlines flag own-label or unpainted pixels. When accum
    is given (with ref), every touched pixel also updates the fitness
    components in the same pass; the result is identical to scoring the
    finished image. Writes are clipped to roi.
    """
    if accum is not None and ref is None:
        raise ValueError("accumulation needs a reference image")
    if ref is None:
        ref = np.zeros_like(out)
    acc = np.zeros(4, dtype=np.int64)
    x0c = roi.x
    y0c = roi.y
    x1c = roi.x + roi.w - 1
    y1c = roi.y + roi.h - 1
    parts = {}
    for t in triangles:
        parts.setdefault((t.depth, t.label), ([], []))[0].append(t)
    for s in outlines:
        parts.setdefault((s.depth, s.label), ([], []))[1].append(s)
    for (depth, label), (tris, segs) in sorted(parts.items()):
        for t in tris:
            v = np.asarray(t.v, dtype=np.float64)
            kernels.fill_triangle(
                out, ref, x0c, y0c, x1c, y1c,
                v[0, 0], v[0, 1], v[1, 0], v[1, 1], v[2, 0], v[2, 1],
                label, acc,
            )
        for s in segs:
            kernels.draw_edge(
                out, ref, x0c, y0c, x1c, y1c,
                int(s.p0[0]), int(s.p0[1]), int(s.p1[0]), int(s.p1[1]),
                label, acc,
            )
    if accum is not None:
        accum.area_model += int(acc[0])
        accum.overlap += int(acc[1])
        accum.edge_count += int(acc[2])
        accum.distance_q += int(acc[3])
    return out


def write_debug_pgm(path, img):
    """Dump a model image as a viewable PGM: labels doubled, edge pixels 255."""
    labels, edges = decode_model(img)
    vis = np.minimum(labels.astype(np.uint16) * 2, 255).astype(np.uint8)
    vis[edges] = 255
    write_pgm(path, vis)


def round_half_up(x):
    return int(math.floor(x + 0.5))


def render_model(model, pose, cam, img=None, roi=None, ref=None,
                 anchor_r=None, anchor_ok=None):
    """Project and rasterize a posed model into one camera.

    Returns (img, ok, acc, facing) where ok is False if any trapezoid vertex
    fell behind the camera, acc holds the fused fitness components
    (meaningful only when ref is given), and facing is the per-part facing
    direction actually used (seed for the degenerate-billboard cache).
    """
    pack = model.pack()
    campack = kernels.pack_camera(cam)
    w = np.empty((pack["n_bones"], 4, 4))
    kernels.build_globals(
        model.check_pose(pose), pack["parents"], pack["offsets"],
        pack["dof_bone"], pack["dof_slot"], w,
    )
    if img is None:
        img = np.zeros((cam.img_h, cam.img_w), dtype=np.uint8)
    if roi is None:
        roi = Roi(0, 0, img.shape[1], img.shape[0])
    if ref is None:
        ref = np.zeros_like(img)
    if anchor_r is None:
        anchor_r = np.zeros((pack["n_parts"], 3))
        anchor_ok = np.zeros(pack["n_parts"], dtype=np.uint8)
    acc = np.zeros(4, dtype=np.int64)
    facing = np.empty((pack["n_parts"], 3))
    ok = kernels.render_pose(
        w, pack["part_bone"], pack["part_tp"], pack["part_bp"],
        pack["part_tr"], pack["part_br"], pack["part_label"],
        campack, np.array(roi, dtype=np.int64), img, ref, acc,
        anchor_r, anchor_ok, facing,
    )
    return img, bool(ok), acc, facing
