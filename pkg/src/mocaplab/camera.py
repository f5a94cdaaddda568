"""Tsai camera model: extrinsics, perspective projection, radial distortion.

A camera is described by 11 calibration parameters plus pixel pitches and
image size. World points are mapped camera -> sensor (mm) -> pixel:

    p_k = R p_w + t,  R = R_x(r_x) R_y(r_y) R_z(r_z)
    x_u = f x_k / z_k,  y_u = f y_k / z_k
    x_u = x_d (1 + kappa r^2),  r^2 = x_d^2 + y_d^2   (inverted numerically)
    x_f = s_x x_d / d_px + c_x,  y_f = y_d / d_py + c_y
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry


class BehindCamera(Exception):
    """Point is on or behind the camera plane (z_k <= eps)."""


Z_EPS = 1e-6

RIG_FIELDS = (
    "r_x", "r_y", "r_z", "t_x", "t_y", "t_z",
    "f", "kappa", "c_x", "c_y", "s_x", "d_px", "d_py",
    "img_w", "img_h",
)


@dataclass
class TsaiCamera:
    r_x: float
    r_y: float
    r_z: float
    t_x: float
    t_y: float
    t_z: float
    f: float
    kappa: float
    c_x: float
    c_y: float
    s_x: float
    d_px: float
    d_py: float
    img_w: int
    img_h: int
    _r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rx = geometry.rotation("x", self.r_x)
        ry = geometry.rotation("y", self.r_y)
        rz = geometry.rotation("z", self.r_z)
        self._r = geometry.multiply(geometry.multiply(rx, ry), rz)[:3, :3]

    @property
    def rotation_matrix(self):
        return self._r

    def extrinsic_matrix(self):
        m = np.eye(4, dtype=np.float64)
        m[:3, :3] = self._r
        m[0, 3] = self.t_x
        m[1, 3] = self.t_y
        m[2, 3] = self.t_z
        return m

    def position(self):
        """Camera centre in world coordinates: solves R C + t = 0."""
        t = np.array([self.t_x, self.t_y, self.t_z])
        return -(self._r.T @ t)

    def world_to_camera(self, p):
        r = self._r
        x, y, z = float(p[0]), float(p[1]), float(p[2])
        return np.array(
            [
                r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + self.t_x,
                r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + self.t_y,
                r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + self.t_z,
            ]
        )

    def project(self, p):
        """World point -> (x_f, y_f, depth). Raises BehindCamera for z_k <= eps."""
        pk = self.world_to_camera(p)
        zk = pk[2]
        if zk <= Z_EPS:
            raise BehindCamera(f"z_k = {zk}")
        xu = self.f * pk[0] / zk
        yu = self.f * pk[1] / zk
        if self.kappa == 0.0:
            xd = xu
            yd = yu
        else:
            ru = math.sqrt(xu * xu + yu * yu)
            rd = solve_distorted_radius(ru, self.kappa)
            den = 1.0 + self.kappa * rd * rd
            xd = xu / den
            yd = yu / den
        xf = self.s_x * xd / self.d_px + self.c_x
        yf = yd / self.d_py + self.c_y
        return xf, yf, zk


def solve_distorted_radius(ru, kappa, tol=1e-9, max_iter=20):
    """Solve r_d (1 + kappa r_d^2) = r_u for the distorted radius r_d.

    Newton iteration seeded at r_d = r_u, with a bisection fallback when it
    fails to converge. For barrel distortion (kappa < 0) the radius is capped
    at the fold point 1/sqrt(-3 kappa) beyond which no solution exists.
    """
    if ru == 0.0 or kappa == 0.0:
        return ru
    r = ru
    for _ in range(max_iter):
        g = r * (1.0 + kappa * r * r) - ru
        gp = 1.0 + 3.0 * kappa * r * r
        if gp == 0.0:
            break
        rn = r - g / gp
        if rn == r:
            break  # stationary: further iterations reproduce r exactly
        r = rn
    if r >= 0.0 and abs(r * (1.0 + kappa * r * r) - ru) <= tol:
        return r
    # bisection fallback on the monotone branch
    if kappa > 0.0:
        lo, hi = 0.0, ru
    else:
        fold = 1.0 / math.sqrt(-3.0 * kappa)
        if fold * (1.0 + kappa * fold * fold) <= ru:
            return fold
        lo, hi = 0.0, fold
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * (1.0 + kappa * mid * mid) < ru:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, ru):
            break
    return 0.5 * (lo + hi)


def load_rig(path):
    """Read an ordered camera list from JSON ({"cameras": [...]} or a bare list)."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data["cameras"]
    cams = []
    for i, entry in enumerate(data):
        missing = [k for k in RIG_FIELDS if k not in entry]
        if missing:
            raise ValueError(f"camera {i} missing fields: {missing}")
        cams.append(TsaiCamera(**{k: entry[k] for k in RIG_FIELDS}))
    return cams


def save_rig(cams, path):
    entries = []
    for c in cams:
        d = asdict(c)
        d.pop("_r", None)
        entries.append({k: d[k] for k in RIG_FIELDS})
    with open(path, "w") as fh:
        json.dump({"cameras": entries}, fh, indent=2)
        fh.write("\n")
