"""Compiled inner loops: pose kinematics, projection, rasterization, chamfer.

Everything here mirrors the plain-Python module surfaces expression for
expression so results are bit-identical; the tests assert that equality.
All kernels are nogil so a thread pool can run independent jobs in parallel,
and none of them touches any random state.
"""

import math

import numpy as np
from numba import njit

# packed camera layout (float64[24]):
# 0:9 R row-major | 9:12 t | 12 f | 13 kappa | 14 c_x | 15 c_y | 16 s_x
# 17 d_px | 18 d_py | 19:22 camera centre | 22 img_w | 23 img_h
CAM_PACK = 24


def pack_camera(cam):
    v = np.empty(CAM_PACK)
    v[0:9] = cam.rotation_matrix.reshape(-1)
    v[9] = cam.t_x
    v[10] = cam.t_y
    v[11] = cam.t_z
    v[12] = cam.f
    v[13] = cam.kappa
    v[14] = cam.c_x
    v[15] = cam.c_y
    v[16] = cam.s_x
    v[17] = cam.d_px
    v[18] = cam.d_py
    v[19:22] = cam.position()
    v[22] = cam.img_w
    v[23] = cam.img_h
    return v


def pack_cameras(cams):
    return np.stack([pack_camera(c) for c in cams])


# -- distance transform ----------------------------------------------------------


@njit(cache=True, nogil=True)
def chamfer_transform(d, a, b):
    """In-place two-pass chamfer distance with axial weight a, diagonal weight b."""
    h, w = d.shape
    for y in range(h):
        for x in range(w):
            v = d[y, x]
            if x > 0 and d[y, x - 1] + a < v:
                v = d[y, x - 1] + a
            if y > 0:
                if d[y - 1, x] + a < v:
                    v = d[y - 1, x] + a
                if x > 0 and d[y - 1, x - 1] + b < v:
                    v = d[y - 1, x - 1] + b
                if x < w - 1 and d[y - 1, x + 1] + b < v:
                    v = d[y - 1, x + 1] + b
            d[y, x] = v
    for y in range(h - 1, -1, -1):
        for x in range(w - 1, -1, -1):
            v = d[y, x]
            if x < w - 1 and d[y, x + 1] + a < v:
                v = d[y, x + 1] + a
            if y < h - 1:
                if d[y + 1, x] + a < v:
                    v = d[y + 1, x] + a
                if x < w - 1 and d[y + 1, x + 1] + b < v:
                    v = d[y + 1, x + 1] + b
                if x > 0 and d[y + 1, x - 1] + b < v:
                    v = d[y + 1, x - 1] + b
            d[y, x] = v


# -- kinematics -------------------------------------------------------------------


@njit(cache=True, nogil=True)
def build_globals(pose, parents, offsets, dof_bone, dof_slot, out):
    """Global bone matrices for a compact pose vector; out is (n_bones, 4, 4)."""
    nb = parents.shape[0]
    full = np.zeros(nb * 6)
    for i in range(pose.shape[0]):
        full[dof_bone[i] * 6 + dof_slot[i]] = pose[i]
    loc = np.empty((4, 4))
    for b in range(nb):
        tx = offsets[b, 0] + full[b * 6 + 0]
        ty = offsets[b, 1] + full[b * 6 + 1]
        tz = offsets[b, 2] + full[b * 6 + 2]
        ca = math.cos(full[b * 6 + 3])
        sa = math.sin(full[b * 6 + 3])
        cb = math.cos(full[b * 6 + 4])
        sb = math.sin(full[b * 6 + 4])
        cg = math.cos(full[b * 6 + 5])
        sg = math.sin(full[b * 6 + 5])
        loc[0, 0] = cb * cg
        loc[0, 1] = -cb * sg
        loc[0, 2] = sb
        loc[0, 3] = tx
        loc[1, 0] = sa * sb * cg + ca * sg
        loc[1, 1] = -sa * sb * sg + ca * cg
        loc[1, 2] = -sa * cb
        loc[1, 3] = ty
        loc[2, 0] = -ca * sb * cg + sa * sg
        loc[2, 1] = ca * sb * sg + sa * cg
        loc[2, 2] = ca * cb
        loc[2, 3] = tz
        loc[3, 0] = 0.0
        loc[3, 1] = 0.0
        loc[3, 2] = 0.0
        loc[3, 3] = 1.0
        p = parents[b]
        if p < 0:
            for i in range(4):
                for j in range(4):
                    out[b, i, j] = loc[i, j]
        else:
            for i in range(4):
                for j in range(4):
                    s = 0.0
                    for k in range(4):
                        s += out[p, i, k] * loc[k, j]
                    out[b, i, j] = s


# -- projection -------------------------------------------------------------------


@njit(cache=True, nogil=True)
def solve_rd(ru, kappa):
    """Distorted radius solving r_d (1 + kappa r_d^2) = r_u (Newton + bisection)."""
    if ru == 0.0 or kappa == 0.0:
        return ru
    r = ru
    for _ in range(20):
        g = r * (1.0 + kappa * r * r) - ru
        gp = 1.0 + 3.0 * kappa * r * r
        if gp == 0.0:
            break
        rn = r - g / gp
        if rn == r:
            break  # stationary: further iterations reproduce r exactly
        r = rn
    if r >= 0.0 and abs(r * (1.0 + kappa * r * r) - ru) <= 1e-9:
        return r
    if kappa > 0.0:
        lo = 0.0
        hi = ru
    else:
        fold = 1.0 / math.sqrt(-3.0 * kappa)
        if fold * (1.0 + kappa * fold * fold) <= ru:
            return fold
        lo = 0.0
        hi = fold
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * (1.0 + kappa * mid * mid) < ru:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, ru):
            break
    return 0.5 * (lo + hi)


@njit(cache=True, nogil=True)
def project(cam, x, y, z):
    """World point -> (x_f, y_f, z_k, in_front) under a packed camera."""
    xk = cam[0] * x + cam[1] * y + cam[2] * z + cam[9]
    yk = cam[3] * x + cam[4] * y + cam[5] * z + cam[10]
    zk = cam[6] * x + cam[7] * y + cam[8] * z + cam[11]
    if zk <= 1e-6:
        return 0.0, 0.0, zk, False
    xu = cam[12] * xk / zk
    yu = cam[12] * yk / zk
    kappa = cam[13]
    if kappa == 0.0:
        xd = xu
        yd = yu
    else:
        ru = math.sqrt(xu * xu + yu * yu)
        rd = solve_rd(ru, kappa)
        den = 1.0 + kappa * rd * rd
        xd = xu / den
        yd = yu / den
    xf = cam[16] * xd / cam[17] + cam[14]
    yf = yd / cam[18] + cam[15]
    return xf, yf, zk, True


# -- rasterization ----------------------------------------------------------------


@njit(cache=True, nogil=True)
def fill_triangle(img, ref, x0c, y0c, x1c, y1c, ax, ay, bx, by, cx, cy, label, acc):
    """Paint unpainted pixels inside the triangle; accumulate area/overlap."""
    minx = ax
    if bx < minx:
        minx = bx
    if cx < minx:
        minx = cx
    maxx = ax
    if bx > maxx:
        maxx = bx
    if cx > maxx:
        maxx = cx
    miny = ay
    if by < miny:
        miny = by
    if cy < miny:
        miny = cy
    maxy = ay
    if by > maxy:
        maxy = by
    if cy > maxy:
        maxy = cy
    ix0 = int(math.floor(minx))
    ix1 = int(math.ceil(maxx))
    iy0 = int(math.floor(miny))
    iy1 = int(math.ceil(maxy))
    if ix0 < x0c:
        ix0 = x0c
    if ix1 > x1c:
        ix1 = x1c
    if iy0 < y0c:
        iy0 = y0c
    if iy1 > y1c:
        iy1 = y1c
    if ix0 > ix1 or iy0 > iy1:
        return
    d1x = bx - ax
    d1y = by - ay
    d2x = cx - ax
    d2y = cy - ay
    den = d1x * d2y - d1y * d2x
    if den == 0.0:
        return
    if den < 0.0:
        # negating both edge vectors flips the signs of s1, s2 and den
        # exactly (IEEE negation is exact), so one orientation suffices
        d1x = -d1x
        d1y = -d1y
        d2x = -d2x
        d2y = -d2y
        den = -den
    for py in range(iy0, iy1 + 1):
        wy = py - ay
        for px in range(ix0, ix1 + 1):
            wx = px - ax
            s1 = wx * d2y - wy * d2x
            s2 = d1x * wy - d1y * wx
            take = (
                (s1 >= 0.0)
                & (s2 >= 0.0)
                & (s1 + s2 <= den)
                & (img[py, px] == 0)
            )
            t = np.uint8(take)
            img[py, px] = label * t + img[py, px] * (1 - t)
            acc[0] += t
            acc[1] += t * (ref[py, px] >> 7)


@njit(cache=True, nogil=True)
def draw_edge(img, ref, x0c, y0c, x1c, y1c, xa, ya, xb, yb, label, acc):
    """Bresenham outline segment; flags pixels owned by this label or unpainted."""
    if xb < xa or (xb == xa and yb < ya):
        xa, xb = xb, xa
        ya, yb = yb, ya
    dx = xb - xa
    if dx < 0:
        dx = -dx
    dy = yb - ya
    if dy < 0:
        dy = -dy
    dy = -dy
    sx = 1 if xa < xb else -1
    sy = 1 if ya < yb else -1
    err = dx + dy
    x = xa
    y = ya
    while True:
        if x0c <= x <= x1c and y0c <= y <= y1c:
            v = img[y, x]
            lab = v & 0x7F
            if lab == 0:
                img[y, x] = label | 0x80
                acc[0] += 1
                if ref[y, x] & 0x80:
                    acc[1] += 1
                acc[2] += 1
                acc[3] += ref[y, x] & 0x7F
            elif lab == label and (v & 0x80) == 0:
                img[y, x] = v | 0x80
                acc[2] += 1
                acc[3] += ref[y, x] & 0x7F
        if x == xb and y == yb:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


@njit(cache=True, nogil=True)
def render_pose(
    W,
    part_bone,
    part_tp,
    part_bp,
    part_tr,
    part_br,
    part_label,
    cam,
    roi,
    img,
    ref,
    acc,
    anchor_r,
    anchor_ok,
    out_r,
):
    """Render every part of a posed model into img (reverse painter order).

    Returns False when any trapezoid vertex falls behind the camera. out_r
    receives the facing direction used per part so a caller can seed the
    degenerate-billboard cache; anchor_r/anchor_ok supply that cache.
    """
    P = part_bone.shape[0]
    depth = np.empty(P)
    vx = np.empty((P, 4))
    vy = np.empty((P, 4))
    for p in range(P):
        b = part_bone[p]
        tpx = W[b, 0, 0] * part_tp[p, 0] + W[b, 0, 1] * part_tp[p, 1] + W[b, 0, 2] * part_tp[p, 2] + W[b, 0, 3]
        tpy = W[b, 1, 0] * part_tp[p, 0] + W[b, 1, 1] * part_tp[p, 1] + W[b, 1, 2] * part_tp[p, 2] + W[b, 1, 3]
        tpz = W[b, 2, 0] * part_tp[p, 0] + W[b, 2, 1] * part_tp[p, 1] + W[b, 2, 2] * part_tp[p, 2] + W[b, 2, 3]
        bpx = W[b, 0, 0] * part_bp[p, 0] + W[b, 0, 1] * part_bp[p, 1] + W[b, 0, 2] * part_bp[p, 2] + W[b, 0, 3]
        bpy = W[b, 1, 0] * part_bp[p, 0] + W[b, 1, 1] * part_bp[p, 1] + W[b, 1, 2] * part_bp[p, 2] + W[b, 1, 3]
        bpz = W[b, 2, 0] * part_bp[p, 0] + W[b, 2, 1] * part_bp[p, 1] + W[b, 2, 2] * part_bp[p, 2] + W[b, 2, 3]
        ux = tpx - bpx
        uy = tpy - bpy
        uz = tpz - bpz
        nx = cam[19] - bpx
        ny = cam[20] - bpy
        nz = cam[21] - bpz
        rx = uy * nz - uz * ny
        ry = uz * nx - ux * nz
        rz = ux * ny - uy * nx
        norm = math.sqrt(rx * rx + ry * ry + rz * rz)
        if norm < 1e-9:
            if anchor_ok[p]:
                rx = anchor_r[p, 0]
                ry = anchor_r[p, 1]
                rz = anchor_r[p, 2]
            else:
                # world x-axis projected orthogonal to the part axis
                un = math.sqrt(ux * ux + uy * uy + uz * uz)
                if un > 0.0:
                    hx = ux / un
                    hy = uy / un
                    hz = uz / un
                else:
                    hx = 0.0
                    hy = 1.0
                    hz = 0.0
                rx = 1.0 - hx * hx
                ry = -hx * hy
                rz = -hx * hz
                n2 = math.sqrt(rx * rx + ry * ry + rz * rz)
                if n2 < 1e-9:
                    rx = -hz * hx
                    ry = -hz * hy
                    rz = 1.0 - hz * hz
                    n2 = math.sqrt(rx * rx + ry * ry + rz * rz)
                rx /= n2
                ry /= n2
                rz /= n2
        else:
            rx /= norm
            ry /= norm
            rz /= norm
        out_r[p, 0] = rx
        out_r[p, 1] = ry
        out_r[p, 2] = rz
        tr = part_tr[p]
        br = part_br[p]
        # v1 = tp + tr*r, v2 = bp + br*r, v3 = bp - br*r, v4 = tp - tr*r
        for k in range(4):
            if k == 0:
                wx = tpx + tr * rx
                wy = tpy + tr * ry
                wz = tpz + tr * rz
            elif k == 1:
                wx = bpx + br * rx
                wy = bpy + br * ry
                wz = bpz + br * rz
            elif k == 2:
                wx = bpx - br * rx
                wy = bpy - br * ry
                wz = bpz - br * rz
            else:
                wx = tpx - tr * rx
                wy = tpy - tr * ry
                wz = tpz - tr * rz
            xf, yf, zk, good = project(cam, wx, wy, wz)
            if not good:
                return False
            vx[p, k] = xf
            vy[p, k] = yf
        mx = 0.5 * (tpx + bpx)
        my = 0.5 * (tpy + bpy)
        mz = 0.5 * (tpz + bpz)
        depth[p] = cam[6] * mx + cam[7] * my + cam[8] * mz + cam[11]
    # nearest part first, ties by part index
    order = np.empty(P, np.int64)
    for p in range(P):
        order[p] = p
    for a in range(1, P):
        key = order[a]
        kd = depth[key]
        b2 = a - 1
        while b2 >= 0 and (
            depth[order[b2]] > kd or (depth[order[b2]] == kd and order[b2] > key)
        ):
            order[b2 + 1] = order[b2]
            b2 -= 1
        order[b2 + 1] = key
    x0c = roi[0]
    y0c = roi[1]
    x1c = roi[0] + roi[2] - 1
    y1c = roi[1] + roi[3] - 1
    for oi in range(P):
        p = order[oi]
        lab = part_label[p]
        fill_triangle(
            img, ref, x0c, y0c, x1c, y1c,
            vx[p, 0], vy[p, 0], vx[p, 1], vy[p, 1], vx[p, 2], vy[p, 2], lab, acc,
        )
        fill_triangle(
            img, ref, x0c, y0c, x1c, y1c,
            vx[p, 0], vy[p, 0], vx[p, 2], vy[p, 2], vx[p, 3], vy[p, 3], lab, acc,
        )
        xi0 = int(math.floor(vx[p, 0] + 0.5))
        yi0 = int(math.floor(vy[p, 0] + 0.5))
        xi1 = int(math.floor(vx[p, 1] + 0.5))
        yi1 = int(math.floor(vy[p, 1] + 0.5))
        xi2 = int(math.floor(vx[p, 2] + 0.5))
        yi2 = int(math.floor(vy[p, 2] + 0.5))
        xi3 = int(math.floor(vx[p, 3] + 0.5))
        yi3 = int(math.floor(vy[p, 3] + 0.5))
        draw_edge(img, ref, x0c, y0c, x1c, y1c, xi0, yi0, xi1, yi1, lab, acc)
        draw_edge(img, ref, x0c, y0c, x1c, y1c, xi1, yi1, xi2, yi2, lab, acc)
        draw_edge(img, ref, x0c, y0c, x1c, y1c, xi2, yi2, xi3, yi3, lab, acc)
        draw_edge(img, ref, x0c, y0c, x1c, y1c, xi3, yi3, xi0, yi0, lab, acc)
    return True


@njit(cache=True, nogil=True)
def evaluate_chunk(
    poses,
    parents,
    offsets,
    dof_bone,
    dof_slot,
    part_bone,
    part_tp,
    part_bp,
    part_tr,
    part_br,
    part_label,
    cams,
    refs,
    rois,
    anchor_r,
    anchor_ok,
    comps,
    behind,
):
    """Score-component pass for a chunk of poses over every camera.

    comps is (n, C, 4) int64 out: area_model, overlap, edge_count, dist_q.
    behind is (n,) uint8 out, set when any camera rejects the pose.
    """
    n = poses.shape[0]
    C = cams.shape[0]
    nb = parents.shape[0]
    P = part_bone.shape[0]
    h = refs.shape[1]
    w = refs.shape[2]
    W = np.empty((nb, 4, 4))
    img = np.empty((h, w), np.uint8)
    out_r = np.empty((P, 3))
    for i in range(n):
        build_globals(poses[i], parents, offsets, dof_bone, dof_slot, W)
        behind[i] = 0
        for c in range(C):
            x0 = rois[c, 0]
            y0 = rois[c, 1]
            img[y0 : y0 + rois[c, 3], x0 : x0 + rois[c, 2]] = 0
            for k in range(4):
                comps[i, c, k] = 0
            ok = render_pose(
                W,
                part_bone,
                part_tp,
                part_bp,
                part_tr,
                part_br,
                part_label,
                cams[c],
                rois[c],
                img,
                refs[c],
                comps[i, c],
                anchor_r[c],
                anchor_ok[c],
                out_r,
            )
            if not ok:
                behind[i] = 1
                break
