"""Articulated skeleton: bone hierarchy, pose state, skinning, flat body parts.

A model is a forest of bones (in practice one tree rooted at the pelvis).
Each bone owns an ordered subset of the six rigid DoF; concatenating every
bone's DoF in bone order yields the compact pose vector. Only the root may
carry translational DoF. A bone's local transform is L = T(offset + t) R,
with R built from the bone's rotation angles applied in x, y, z order.
Body geometry is a set of flat parts: camera-facing trapezoids attached to
bones by two axis points (top/bottom centre) and two half-widths.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry

DOF_SLOTS = ("t_x", "t_y", "t_z", "r_x", "r_y", "r_z")
TRANSLATION_SLOTS = frozenset(("t_x", "t_y", "t_z"))


class LengthMismatch(ValueError):
    """Pose vector length does not match the model's DoF count."""


class DegenerateBillboard(Exception):
    """Part axis points at the camera; the facing direction is undefined."""


@dataclass
class Bone:
    name: str
    parent: int  # -1 for the root
    dof: tuple
    offset: np.ndarray  # bind translation from the parent, mm
    limits: dict  # dof name -> (lo, hi)


@dataclass
class FlatPart:
    name: str
    bone: int
    t_p: np.ndarray  # top centre, bone-local mm
    b_p: np.ndarray  # bottom centre, bone-local mm
    t_r: float  # top half-width, mm
    b_r: float  # bottom half-width, mm
    label: int  # 1..127, unique per part


class SkeletonModel:
    def __init__(self, bones, parts, bind_pose=None):
        self.bones = list(bones)
        self.parts = list(parts)
        self._validate()
        self.dof_bone, self.dof_slot, self.dof_names = self._index_dof()
        self.n_dof = len(self.dof_bone)
        lo = np.full(self.n_dof, -np.inf)
        hi = np.full(self.n_dof, np.inf)
        for i, (b, s) in enumerate(zip(self.dof_bone, self.dof_slot)):
            lim = self.bones[b].limits.get(DOF_SLOTS[s])
            if lim is not None:
                lo[i], hi[i] = float(lim[0]), float(lim[1])
        self.limits_lo = lo
        self.limits_hi = hi
        if bind_pose is None:
            bind_pose = np.zeros(self.n_dof)
        self.bind_pose = np.asarray(bind_pose, dtype=np.float64)
        if self.bind_pose.shape != (self.n_dof,):
            raise LengthMismatch(
                f"bind pose has {self.bind_pose.size} values, model has {self.n_dof} DoF"
            )
        self._bind_matrices = None
        self._pack = None

    def _validate(self):
        for i, b in enumerate(self.bones):
            if not (-1 <= b.parent < i):
                raise ValueError(f"bone {i} ({b.name}): parent must precede it")
            for d in b.dof:
                if d not in DOF_SLOTS:
                    raise ValueError(f"bone {i}: unknown dof {d!r}")
            if b.parent != -1 and TRANSLATION_SLOTS & set(b.dof):
                raise ValueError(f"bone {i} ({b.name}): only the root may translate")
            b.offset = np.asarray(b.offset, dtype=np.float64)
            for d, (lo, hi) in b.limits.items():
                if not lo < hi:
                    raise ValueError(f"bone {i}: limit {d} has lo >= hi")
        labels = [p.label for p in self.parts]
        if len(set(labels)) != len(labels):
            raise ValueError("part labels must be unique")
        for p in self.parts:
            if not 1 <= p.label <= 127:
                raise ValueError(f"part {p.name}: label must be in 1..127")
            if not 0 <= p.bone < len(self.bones):
                raise ValueError(f"part {p.name}: bone index out of range")
            p.t_p = np.asarray(p.t_p, dtype=np.float64)
            p.b_p = np.asarray(p.b_p, dtype=np.float64)

    def _index_dof(self):
        dof_bone, dof_slot, names = [], [], []
        for i, b in enumerate(self.bones):
            for d in b.dof:
                dof_bone.append(i)
                dof_slot.append(DOF_SLOTS.index(d))
                names.append(f"{b.name}.{d}")
        return (
            np.asarray(dof_bone, dtype=np.int64),
            np.asarray(dof_slot, dtype=np.int64),
            names,
        )

    # -- state ---------------------------------------------------------------

    def check_pose(self, pose):
        pose = np.asarray(pose, dtype=np.float64)
        if pose.shape != (self.n_dof,):
            raise LengthMismatch(f"expected {self.n_dof} values, got {pose.shape}")
        return pose

    def expand(self, pose):
        """Compact pose -> full per-bone state (6 slots per bone, zeros elsewhere)."""
        pose = self.check_pose(pose)
        full = np.zeros(len(self.bones) * 6)
        full[self.dof_bone * 6 + self.dof_slot] = pose
        return full

    def collapse(self, full):
        full = np.asarray(full, dtype=np.float64)
        if full.shape != (len(self.bones) * 6,):
            raise LengthMismatch(f"expected {len(self.bones) * 6} values")
        return full[self.dof_bone * 6 + self.dof_slot].copy()

    def clamp(self, pose):
        return np.clip(self.check_pose(pose), self.limits_lo, self.limits_hi)

    def dof_index(self, name):
        """Index of 'Bone.r_x' style DoF name in the compact pose vector."""
        return self.dof_names.index(name)

    # -- kinematics ----------------------------------------------------------

    def local_matrices(self, pose):
        full = self.expand(pose)
        mats = np.empty((len(self.bones), 4, 4))
        for i, b in enumerate(self.bones):
            s = full[i * 6 : i * 6 + 6]
            t = (b.offset[0] + s[0], b.offset[1] + s[1], b.offset[2] + s[2])
            mats[i] = geometry.fused_trxyz(t, s[3], s[4], s[5])
        return mats

    def global_matrices(self, pose):
        local = self.local_matrices(pose)
        out = np.empty_like(local)
        for i, b in enumerate(self.bones):
            if b.parent < 0:
                out[i] = local[i]
            else:
                out[i] = geometry.multiply(out[b.parent], local[i])
        return out

    def bind_matrices(self):
        if self._bind_matrices is None:
            self._bind_matrices = self.global_matrices(self.bind_pose)
        return self._bind_matrices

    @staticmethod
    def skin_point(v_local, w):
        """Bone-local point -> world under the bone's global matrix."""
        return geometry.apply_point(w, v_local)

    @staticmethod
    def skin_bind_point(v_world, w, b):
        """World point rigged at bind pose -> world under the current pose."""
        return geometry.apply_point(
            geometry.multiply(w, geometry.rigid_inverse(b)), v_world
        )

    def trapezoid_vertices(self, part, w_bone, cam_pos):
        """World-space corners v1..v4 of a camera-facing part trapezoid.

        The facing direction r is the unit vector along u x n where
        u = bottom->top and n = bottom->camera. Raises DegenerateBillboard
        when the part axis points at the camera (|u x n| < 1e-9).
        """
        tp = geometry.apply_point(w_bone, part.t_p)
        bp = geometry.apply_point(w_bone, part.b_p)
        ux = tp[0] - bp[0]
        uy = tp[1] - bp[1]
        uz = tp[2] - bp[2]
        nx = cam_pos[0] - bp[0]
        ny = cam_pos[1] - bp[1]
        nz = cam_pos[2] - bp[2]
        rx = uy * nz - uz * ny
        ry = uz * nx - ux * nz
        rz = ux * ny - uy * nx
        norm = math.sqrt(rx * rx + ry * ry + rz * rz)
        if norm < 1e-9:
            raise DegenerateBillboard(part.name)
        rx /= norm
        ry /= norm
        rz /= norm
        r = np.array([rx, ry, rz])
        return np.stack(
            [
                tp + part.t_r * r,
                bp + part.b_r * r,
                bp - part.b_r * r,
                tp - part.t_r * r,
            ]
        )

    def marker_positions(self, pose):
        """Skinned part axis endpoints (two per part), used for accuracy checks."""
        w = self.global_matrices(pose)
        out = np.empty((2 * len(self.parts), 3))
        for i, p in enumerate(self.parts):
            out[2 * i] = geometry.apply_point(w[p.bone], p.t_p)
            out[2 * i + 1] = geometry.apply_point(w[p.bone], p.b_p)
        return out

    def height(self):
        """Vertical marker extent at bind pose, mm."""
        m = self.marker_positions(self.bind_pose)
        return float(m[:, 1].max() - m[:, 1].min())

    # -- kernel packing -------------------------------------------------------

    def pack(self):
        """Flat numpy views of the model for the compiled kernels (cached)."""
        if self._pack is None:
            nb = len(self.bones)
            np_ = len(self.parts)
            self._pack = {
                "parents": np.array([b.parent for b in self.bones], dtype=np.int64),
                "offsets": np.stack([b.offset for b in self.bones]).astype(np.float64),
                "dof_bone": self.dof_bone.copy(),
                "dof_slot": self.dof_slot.copy(),
                "part_bone": np.array([p.bone for p in self.parts], dtype=np.int64),
                "part_tp": np.stack([p.t_p for p in self.parts]).astype(np.float64),
                "part_bp": np.stack([p.b_p for p in self.parts]).astype(np.float64),
                "part_tr": np.array([p.t_r for p in self.parts], dtype=np.float64),
                "part_br": np.array([p.b_r for p in self.parts], dtype=np.float64),
                "part_label": np.array([p.label for p in self.parts], dtype=np.int64),
                "n_bones": nb,
                "n_parts": np_,
            }
        return self._pack


# -- model files ---------------------------------------------------------------


def model_from_dict(data):
    name_to_idx = {}
    bones = []
    for i, b in enumerate(data["bones"]):
        parent = b.get("parent")
        if parent is None:
            pidx = -1
        elif isinstance(parent, int):
            pidx = parent
        else:
            pidx = name_to_idx[parent]
        bones.append(
            Bone(
                name=b["name"],
                parent=pidx,
                dof=tuple(b.get("dof", ())),
                offset=np.asarray(b.get("offset", (0.0, 0.0, 0.0)), dtype=np.float64),
                limits={k: tuple(v) for k, v in b.get("limits", {}).items()},
            )
        )
        name_to_idx[b["name"]] = i
    parts = []
    for p in data.get("flat_parts", ()):
        bone = p["bone"]
        parts.append(
            FlatPart(
                name=p.get("name", f"part{p['label']}"),
                bone=bone if isinstance(bone, int) else name_to_idx[bone],
                t_p=np.asarray(p["t_p"], dtype=np.float64),
                b_p=np.asarray(p["b_p"], dtype=np.float64),
                t_r=float(p["t_r"]),
                b_r=float(p["b_r"]),
                label=int(p["label"]),
            )
        )
    return SkeletonModel(bones, parts, bind_pose=data.get("bind_pose"))


def model_to_dict(model):
    return {
        "bones": [
            {
                "name": b.name,
                "parent": None if b.parent < 0 else model.bones[b.parent].name,
                "dof": list(b.dof),
                "offset": [float(v) for v in b.offset],
                "limits": {k: [float(v[0]), float(v[1])] for k, v in b.limits.items()},
            }
            for b in model.bones
        ],
        "flat_parts": [
            {
                "name": p.name,
                "bone": model.bones[p.bone].name,
                "t_p": [float(v) for v in p.t_p],
                "b_p": [float(v) for v in p.b_p],
                "t_r": p.t_r,
                "b_r": p.b_r,
                "label": p.label,
            }
            for p in model.parts
        ],
        "bind_pose": [float(v) for v in model.bind_pose],
    }


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def default_model():
    """The built-in 31-DoF, 15-bone, 15-part human model."""
    from importlib.resources import files

    data = files("mocaplab.data").joinpath("default_model.json").read_text()
    return model_from_dict(json.loads(data))
