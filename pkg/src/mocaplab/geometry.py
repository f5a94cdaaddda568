"""Homogeneous 4x4 transforms over right-handed coordinate frames.

Matrices are row-major numpy float64 arrays that act on column vectors:
p' = M @ [x, y, z, 1]^T. All angles are radians, translations are mm.
"""

import math

import numpy as np


class NonRigid(ValueError):
    """Raised when a matrix expected to be rigid fails the orthonormality check."""


AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


def identity():
    return np.eye(4, dtype=np.float64)


def rotation(axis, angle):
    """Rotation about a principal axis ('x'|'y'|'z' or 0|1|2)."""
    if axis not in AXES:
        raise ValueError("axis must be one of 'x', 'y', 'z'")
    c = math.cos(angle)
    s = math.sin(angle)
    m = np.eye(4, dtype=np.float64)
    a = AXES[axis]
    if a == 0:
        m[1, 1] = c
        m[1, 2] = -s
        m[2, 1] = s
        m[2, 2] = c
    elif a == 1:
        m[0, 0] = c
        m[0, 2] = s
        m[2, 0] = -s
        m[2, 2] = c
    else:
        m[0, 0] = c
        m[0, 1] = -s
        m[1, 0] = s
        m[1, 1] = c
    return m


def translation(t):
    m = np.eye(4, dtype=np.float64)
    m[0, 3] = t[0]
    m[1, 3] = t[1]
    m[2, 3] = t[2]
    return m


def scale(s):
    m = np.eye(4, dtype=np.float64)
    m[0, 0] = s[0]
    m[1, 1] = s[1]
    m[2, 2] = s[2]
    return m


def multiply(a, b):
    """Matrix product a @ b with a fixed left-to-right summation order.

    Spelled out term by term so the result is bit-identical to the naive
    k-ascending loop used by the compiled kernels.
    """
    return (
        a[:, 0:1] * b[0:1, :]
        + a[:, 1:2] * b[1:2, :]
        + a[:, 2:3] * b[2:3, :]
        + a[:, 3:4] * b[3:4, :]
    )


def apply_point(m, p):
    """Transform a 3-point by a 4x4 matrix (w = 1)."""
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    return np.array(
        [
            m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3],
            m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3],
            m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3],
        ]
    )


def rigid_inverse(m, tol=1e-9):
    """Inverse of a rigid transform: [R | t] -> [R^T | -R^T t].

    Raises NonRigid when the rotation block is not orthonormal within tol
    or the bottom row is not (0, 0, 0, 1).
    """
    r = m[:3, :3]
    if not np.allclose(r @ r.T, np.eye(3), atol=tol):
        raise NonRigid("rotation block is not orthonormal")
    if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=tol):
        raise NonRigid("bottom row is not (0, 0, 0, 1)")
    out = np.eye(4, dtype=np.float64)
    rt = r.T
    out[:3, :3] = rt
    out[:3, 3] = -(rt @ m[:3, 3])
    return out


def fused_trxyz(t, ax, ay, az):
    """translation(t) @ rotation('x', ax) @ rotation('y', ay) @ rotation('z', az)
    expanded symbolically into one matrix fill."""
    ca = math.cos(ax)
    sa = math.sin(ax)
    cb = math.cos(ay)
    sb = math.sin(ay)
    cg = math.cos(az)
    sg = math.sin(az)
    m = np.empty((4, 4), dtype=np.float64)
    m[0, 0] = cb * cg
    m[0, 1] = -cb * sg
    m[0, 2] = sb
    m[0, 3] = t[0]
    m[1, 0] = sa * sb * cg + ca * sg
    m[1, 1] = -sa * sb * sg + ca * cg
    m[1, 2] = -sa * cb
    m[1, 3] = t[1]
    m[2, 0] = -ca * sb * cg + sa * sg
    m[2, 1] = ca * sb * sg + sa * cg
    m[2, 2] = ca * cb
    m[2, 3] = t[2]
    m[3, 0] = 0.0
    m[3, 1] = 0.0
    m[3, 2] = 0.0
    m[3, 3] = 1.0
    return m
