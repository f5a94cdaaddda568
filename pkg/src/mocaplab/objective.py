"""Silhouette/edge fitness of a rendered hypothesis against reference images.

Per camera, five components are tallied over the ROI:
  area_ref    reference silhouette pixels
  area_model  rendered (labeled) pixels
  overlap     rendered pixels on the reference silhouette
  edge_count  rendered edge-flagged pixels
  distance_sum  sum of decoded reference distances under those edges

f1 rewards silhouette overlap from both directions, f2 rewards rendered
edges landing near observed edges. Five combination variants are supported:
ws and sp pool components across cameras; aows/aosp average per-camera
scores; posp multiplies them.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels


class BadConfig(ValueError):
    pass


VARIANTS = ("ws", "sp", "aows", "aosp", "posp")


@dataclass
class FitnessComponents:
    area_ref: int = 0
    area_model: int = 0
    overlap: int = 0
    edge_count: int = 0
    distance_q: int = 0  # integer sum of quantized distances (q = 127 n)

    @property
    def distance_sum(self):
        return self.distance_q / 127.0


@dataclass
class ObjectiveConfig:
    variant: str = "sp"
    beta: float = 0.5
    w1: float = 0.5
    w2: float = 0.5
    omega1: float = 0.7
    omega2: float = 0.3
    label_weights: dict = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise BadConfig(f"variant must be one of {VARIANTS}")
        if not 0.0 <= self.beta <= 1.0:
            raise BadConfig("beta must be in [0, 1]")
        if self.w1 < 0.0 or self.w2 < 0.0 or abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise BadConfig("w1, w2 must be nonnegative and sum to 1")
        if not (0.0 <= self.omega1 < 1.0 and 0.0 <= self.omega2 < 1.0):
            raise BadConfig("omega exponents must be in [0, 1)")


def components(model_img, ref_img, roi, labeled=False):
    """Tally fitness components of a model image against a reference over roi."""
    sl = (slice(roi.y, roi.y + roi.h), slice(roi.x, roi.x + roi.w))
    m = np.asarray(model_img)[sl]
    r = np.asarray(ref_img)[sl]
    labels = m & 0x7F
    present = labels != 0
    edges = ((m & 0x80) != 0) & present
    sil = (r & 0x80) != 0
    q = (r & 0x7F).astype(np.int64)
    fc = FitnessComponents(
        area_ref=int(sil.sum()),
        area_model=int(present.sum()),
        overlap=int((present & sil).sum()),
        edge_count=int(edges.sum()),
        distance_q=int(q[edges].sum()),
    )
    if not labeled:
        return fc
    n = 128
    per_label = {
        "area_model": np.bincount(labels[present], minlength=n),
        "overlap": np.bincount(labels[present & sil], minlength=n),
        "edge_count": np.bincount(labels[edges], minlength=n),
        "distance_q": np.bincount(labels[edges], weights=q[edges], minlength=n),
    }
    return fc, per_label


def f1(c, beta=0.5):
    """Two-sided silhouette coverage; zero-denominator terms contribute 0."""
    t1 = c.overlap / c.area_ref if c.area_ref > 0 else 0.0
    t2 = c.overlap / c.area_model if c.area_model > 0 else 0.0
    return beta * t1 + (1.0 - beta) * t2


def f2(c):
    """Mean normalized distance score under rendered edges."""
    return c.distance_sum / c.edge_count if c.edge_count > 0 else 0.0


def f1_labeled(per_label, area_ref, beta=0.5, weights=None):
    """Per-part-weighted silhouette coverage; unweighted labels count 0."""
    total = 0.0
    labels = np.nonzero(per_label["area_model"])[0]
    if weights is None:
        weights = {int(l): 1.0 / len(labels) for l in labels} if len(labels) else {}
    for l in labels:
        wl = weights.get(int(l), 0.0)
        if wl == 0.0:
            continue
        ov = per_label["overlap"][l]
        am = per_label["area_model"][l]
        t1 = ov / area_ref if area_ref > 0 else 0.0
        t2 = ov / am if am > 0 else 0.0
        total += wl * (beta * t1 + (1.0 - beta) * t2)
    return total


def pooled(comps):
    """Sum components across cameras."""
    out = FitnessComponents()
    for c in comps:
        out.area_ref += c.area_ref
        out.area_model += c.area_model
        out.overlap += c.overlap
        out.edge_count += c.edge_count
        out.distance_q += c.distance_q
    return out


def objective(comps, cfg):
    """Combine per-camera components into one score per the configured variant."""
    if isinstance(comps, FitnessComponents):
        comps = [comps]
    stack = np.array(
        [[c.area_model, c.overlap, c.edge_count, c.distance_q] for c in comps],
        dtype=np.int64,
    )[None]
    area_ref = np.array([c.area_ref for c in comps], dtype=np.int64)
    return float(scores_from_components(stack, area_ref, np.zeros(1, np.uint8), cfg)[0])


def scores_from_components(comps, area_ref, behind, cfg):
    """Vectorized objective over (n, C, 4) integer component tallies.

    comps columns are area_model, overlap, edge_count, distance_q; area_ref
    is per camera. Poses flagged behind score 0.
    """
    am = comps[:, :, 0].astype(np.float64)
    ov = comps[:, :, 1].astype(np.float64)
    ec = comps[:, :, 2].astype(np.float64)
    dq = comps[:, :, 3].astype(np.float64)
    ar = area_ref.astype(np.float64)

    if cfg.variant in ("ws", "sp"):
        am_s = am.sum(axis=1)
        ov_s = ov.sum(axis=1)
        ec_s = ec.sum(axis=1)
        dq_s = dq.sum(axis=1)
        ar_s = ar.sum()
        t1 = ov_s / ar_s if ar_s > 0 else np.zeros_like(ov_s)
        t2 = np.where(am_s > 0, ov_s / np.where(am_s > 0, am_s, 1.0), 0.0)
        f1v = cfg.beta * t1 + (1.0 - cfg.beta) * t2
        f2v = np.where(ec_s > 0, (dq_s / 127.0) / np.where(ec_s > 0, ec_s, 1.0), 0.0)
        if cfg.variant == "ws":
            s = cfg.w1 * f1v + cfg.w2 * f2v
        else:
            s = np.power(f1v, cfg.omega1) * np.power(f2v, cfg.omega2)
    else:
        t1 = np.where(ar > 0, ov / np.where(ar > 0, ar, 1.0), 0.0)
        t2 = np.where(am > 0, ov / np.where(am > 0, am, 1.0), 0.0)
        f1v = cfg.beta * t1 + (1.0 - cfg.beta) * t2
        f2v = np.where(ec > 0, (dq / 127.0) / np.where(ec > 0, ec, 1.0), 0.0)
        if cfg.variant == "aows":
            s = (cfg.w1 * f1v + cfg.w2 * f2v).mean(axis=1)
        elif cfg.variant == "aosp":
            s = (np.power(f1v, cfg.omega1) * np.power(f2v, cfg.omega2)).mean(axis=1)
        else:  # posp
            s = (np.power(f1v, cfg.omega1) * np.power(f2v, cfg.omega2)).prod(axis=1)
    return np.where(behind != 0, 0.0, s)


def resolve_workers(workers=None):
    """Worker-count precedence: argument, MOCAPLAB_WORKERS, cpu count."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("MOCAPLAB_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class BatchEvaluator:
    """Scores pose hypotheses against per-camera reference images.

    The render jobs for a batch are independent; they are split into chunks
    across a thread pool (the kernels drop the GIL) and reduced by index, so
    scores do not depend on the worker count. No randomness is consumed.
    """

    def __init__(self, model, cams, cfg=None, workers=None):
        self.model = model
        self.cams = list(cams)
        self.cfg = cfg or ObjectiveConfig()
        self.workers = resolve_workers(workers)
        self._pack = model.pack()
        self._campack = kernels.pack_cameras(self.cams)
        self._h = max(c.img_h for c in self.cams)
        self._w = max(c.img_w for c in self.cams)
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None
        self._refs = None
        self.evaluations = 0

    def set_frame(self, refs, rois, anchor=None):
        """Install per-camera reference images and ROIs for the current frame.

        anchor (usually the previous frame's estimate) is rendered once,
        sequentially, to seed the facing-direction cache used when a part
        axis degenerates toward a camera during the batch.
        """
        c = len(self.cams)
        if len(refs) != c or len(rois) != c:
            raise ValueError("need one reference image and roi per camera")
        self._refs = np.zeros((c, self._h, self._w), dtype=np.uint8)
        for i, r in enumerate(refs):
            self._refs[i, : r.shape[0], : r.shape[1]] = r
        self._rois = np.array([tuple(r) for r in rois], dtype=np.int64)
        self.area_ref = np.array(
            [
                int(((refs[i][rois[i].y : rois[i].y + rois[i].h,
                              rois[i].x : rois[i].x + rois[i].w] & 0x80) != 0).sum())
                for i in range(c)
            ],
            dtype=np.int64,
        )
        p = self._pack["n_parts"]
        self._anchor_r = np.zeros((c, p, 3))
        self._anchor_ok = np.zeros((c, p), dtype=np.uint8)
        if anchor is not None:
            from .render import render_model

            for i, cam in enumerate(self.cams):
                img = np.zeros((cam.img_h, cam.img_w), dtype=np.uint8)
                _, ok, _, facing = render_model(self.model, anchor, cam, img=img)
                if ok:
                    self._anchor_r[i] = facing
                    self._anchor_ok[i] = 1

    def evaluate(self, poses):
        """Score an (n, D) array of poses; returns (n,) float scores."""
        if self._refs is None:
            raise RuntimeError("set_frame must be called before evaluate")
        poses = np.ascontiguousarray(poses, dtype=np.float64)
        if poses.ndim == 1:
            poses = poses[None]
        n = poses.shape[0]
        c = len(self.cams)
        comps = np.empty((n, c, 4), dtype=np.int64)
        behind = np.empty(n, dtype=np.uint8)
        k = self._pack
        args = (
            k["parents"], k["offsets"], k["dof_bone"], k["dof_slot"],
            k["part_bone"], k["part_tp"], k["part_bp"], k["part_tr"],
            k["part_br"], k["part_label"],
            self._campack, self._refs, self._rois,
            self._anchor_r, self._anchor_ok,
        )
        if self._pool is None or n < 2 * self.workers:
            kernels.evaluate_chunk(poses, *args, comps, behind)
        else:
            bounds = np.linspace(0, n, self.workers + 1).astype(int)
            futures = [
                self._pool.submit(
                    kernels.evaluate_chunk,
                    poses[a:b], *args, comps[a:b], behind[a:b],
                )
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            for f in futures:
                f.result()
        self.evaluations += n
        return scores_from_components(comps, self.area_ref, behind, self.cfg)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def evaluate_batch(poses, model, cams, refs, rois, cfg=None, workers=None, anchor=None):
    """One-shot convenience wrapper around BatchEvaluator."""
    with BatchEvaluator(model, cams, cfg=cfg, workers=workers) as ev:
        ev.set_frame(refs, rois, anchor=anchor)
        return ev.evaluate(poses)
