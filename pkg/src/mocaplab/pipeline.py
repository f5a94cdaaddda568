"""End-to-end flows: synthetic sequences, tracking, accuracy reports, bench.

A sequence directory holds manifest.json, rig.json, model.json, truth.csv
(for synthetic data) and per-camera PGM frames cam00/frame_000000.pgm, ...
By default frames carry the packed model-image encoding produced by the
renderer (silhouette = nonzero label bits, edges = bit 7), which feeds the
tracker directly; grayscale frames for the full vision path are optional.
"""

import csv
import json
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import imaging, optimize
from .camera import TsaiCamera, load_rig, save_rig
from .imaging import Roi
from .objective import BatchEvaluator, ObjectiveConfig
from .render import render_model
from .skeleton import default_model, load_model, model_from_dict, save_model


class MissingFrame(FileNotFoundError):
    pass


class BadScript(ValueError):
    pass


@dataclass
class FeatureConfig:
    metric: str = "chessboard"
    normalize: str = "proportional"
    d_min: float = 0.0
    d_max: float = 20.0
    n_range: float = 1.0
    m: float = 0.1
    roi_margin: int = 5
    min_area: int = 4
    sobel_threshold: float = 300.0
    edge_grow: int = 1
    mog_alpha: float = 0.01
    mog_t_bg: float = 0.7
    mog_k: int = 3


# -- camera rigs -----------------------------------------------------------------


def default_ring_rig(n_cams=4, radius=3000.0, height=1000.0, image=(160, 120),
                     f=8.0, pitch=0.05, kappa=-2e-4):
    """Cameras on a horizontal ring, evenly spaced, aimed at the ring axis.

    Each camera sits at distance `radius` from the vertical axis at the given
    height and looks at the point (0, height, 0). The pi roll about x keeps
    image rows increasing downward in the world, so frames display upright.
    """
    cams = []
    w, h = image
    for i in range(n_cams):
        theta = 2.0 * math.pi * i / n_cams
        cam = TsaiCamera(
            r_x=math.pi, r_y=theta, r_z=0.0, t_x=0.0, t_y=0.0, t_z=0.0,
            f=f, kappa=kappa, c_x=w / 2.0, c_y=h / 2.0, s_x=1.0,
            d_px=pitch, d_py=pitch, img_w=w, img_h=h,
        )
        forward = cam.rotation_matrix[2]
        center = np.array([0.0, height, 0.0]) - radius * forward
        t = -(cam.rotation_matrix @ center)
        cam.t_x, cam.t_y, cam.t_z = float(t[0]), float(t[1]), float(t[2])
        cams.append(cam)
    return cams


# -- motion scripts ----------------------------------------------------------------


DEFAULT_WALK = {
    "root_velocity": [0.0, 0.0, 250.0],
    "sinusoids": [
        {"joint": "LeftHip.r_x", "amplitude": 0.45, "period_s": 1.6, "phase": 0.0},
        {"joint": "RightHip.r_x", "amplitude": 0.45, "period_s": 1.6, "phase": math.pi},
        {"joint": "LeftKnee.r_y", "amplitude": 0.35, "period_s": 1.6, "phase": 0.6},
        {"joint": "RightKnee.r_y", "amplitude": 0.35, "period_s": 1.6, "phase": 0.6 + math.pi},
        {"joint": "LeftShoulder.r_x", "amplitude": 0.3, "period_s": 1.6, "phase": math.pi},
        {"joint": "RightShoulder.r_x", "amplitude": 0.3, "period_s": 1.6, "phase": 0.0},
        {"joint": "LeftElbow.r_y", "amplitude": 0.25, "period_s": 1.6, "phase": 0.4},
        {"joint": "RightElbow.r_y", "amplitude": 0.25, "period_s": 1.6, "phase": 0.4 + math.pi},
        {"joint": "Thorax.r_z", "amplitude": 0.06, "period_s": 0.8, "phase": 0.0},
        {"joint": "Pelvis.r_y", "amplitude": 0.12, "period_s": 1.6, "phase": 0.3},
    ],
}


def script_pose(model, script, initial_pose, frame, fps):
    """Pose at a frame of a scripted motion: linear root drift plus sinusoids."""
    t = frame / fps
    pose = np.asarray(initial_pose, dtype=np.float64).copy()
    vel = script.get("root_velocity")
    if vel:
        pose[0] += vel[0] * t
        pose[1] += vel[1] * t
        pose[2] += vel[2] * t
    for s in script.get("sinusoids", ()):
        joint = s["joint"]
        try:
            idx = joint if isinstance(joint, int) else model.dof_index(joint)
        except ValueError as exc:
            raise BadScript(f"unknown joint dof {joint!r}") from exc
        if not 0 <= idx < model.n_dof:
            raise BadScript(f"joint index {idx} out of range")
        period = s.get("period_s", 1.0)
        phase = s.get("phase", 0.0)
        pose[idx] += s["amplitude"] * math.sin(2.0 * math.pi * t / period + phase)
    return model.clamp(pose)


# -- synthetic sequences -------------------------------------------------------------


def resolve_model(spec_model):
    if spec_model in (None, "default"):
        return default_model()
    if isinstance(spec_model, dict):
        return model_from_dict(spec_model)
    return load_model(spec_model)


def resolve_rig(spec_rig, ring=None):
    if spec_rig in (None, "ring"):
        ring = ring or {}
        return default_ring_rig(
            n_cams=ring.get("cameras", 4),
            radius=ring.get("radius", 3000.0),
            height=ring.get("height", 1000.0),
            image=tuple(ring.get("image", (160, 120))),
        )
    if isinstance(spec_rig, list):
        return [TsaiCamera(**c) for c in spec_rig]
    return load_rig(spec_rig)


def frame_path(seq_dir, cam_idx, frame_idx, gray=False):
    sub = os.path.join("gray", f"cam{cam_idx:02d}") if gray else f"cam{cam_idx:02d}"
    return os.path.join(seq_dir, sub, f"frame_{frame_idx:06d}.pgm")


def synth_generate(spec, out_dir):
    """Render a scripted ground-truth sequence into a sequence directory.

    spec keys: model, rig, ring, frames, fps, seed, noise, gray, warmup,
    initial_pose, script. Returns the manifest dict.
    """
    model = resolve_model(spec.get("model"))
    cams = resolve_rig(spec.get("rig"), spec.get("ring"))
    frames = int(spec.get("frames", 100))
    fps = float(spec.get("fps", 25.0))
    seed = int(spec.get("seed", 0))
    noise = float(spec.get("noise", 0.0))
    gray = bool(spec.get("gray", False))
    warmup = int(spec.get("warmup", 25)) if gray else 0
    script = spec.get("script", DEFAULT_WALK)
    initial = spec.get("initial_pose")
    initial = model.bind_pose if initial is None else np.asarray(initial, float)

    os.makedirs(out_dir, exist_ok=True)
    for i in range(len(cams)):
        os.makedirs(os.path.join(out_dir, f"cam{i:02d}"), exist_ok=True)
        if gray:
            os.makedirs(os.path.join(out_dir, "gray", f"cam{i:02d}"), exist_ok=True)
    save_rig(cams, os.path.join(out_dir, "rig.json"))
    save_model(model, os.path.join(out_dir, "model.json"))

    rng = np.random.default_rng(seed)
    truth_rows = []
    if gray:
        for j in range(warmup):
            for ci, cam in enumerate(cams):
                bg = _gray_background(cam, rng)
                imaging.write_pgm(frame_path(out_dir, ci, j, gray=True), bg)
    for fi in range(frames):
        pose = script_pose(model, script, initial, fi, fps)
        truth_rows.append(pose)
        for ci, cam in enumerate(cams):
            img, ok, _, _ = render_model(model, pose, cam)
            if not ok:
                raise ValueError(f"frame {fi}: pose falls behind camera {ci}")
            out = img
            if noise > 0.0:
                out = _salt_pepper(out, noise, rng)
            imaging.write_pgm(frame_path(out_dir, ci, fi), out)
            if gray:
                g = _gray_background(cam, rng)
                labels = img & 0x7F
                fg = labels != 0
                g[fg] = np.clip(60 + 12 * labels[fg].astype(np.int32), 0, 255).astype(
                    np.uint8
                )
                if noise > 0.0:
                    g = _salt_pepper(g, noise, rng)
                imaging.write_pgm(
                    frame_path(out_dir, ci, warmup + fi, gray=True), g
                )

    _write_truth(os.path.join(out_dir, "truth.csv"), model, truth_rows)
    manifest = {
        "frames": frames,
        "fps": fps,
        "cameras": len(cams),
        "seed": seed,
        "noise": noise,
        "encoding": "features",
        "gray": gray,
        "warmup": warmup,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _gray_background(cam, rng, level=20.0, sigma=2.0):
    g = level + sigma * rng.standard_normal((cam.img_h, cam.img_w))
    return np.clip(np.floor(g + 0.5), 0, 255).astype(np.uint8)


def _salt_pepper(img, prob, rng):
    out = img.copy()
    u = rng.random(img.shape)
    out[u < prob / 2.0] = 0
    out[(u >= prob / 2.0) & (u < prob)] = 255
    return out


def _write_truth(path, model, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame"] + model.dof_names)
        for i, pose in enumerate(rows):
            wr.writerow([i] + [repr(float(v)) for v in pose])


def load_pose_csv(path):
    """Read a frame-indexed pose table (truth.csv or track.csv)."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = list(rd)
    has_score = header[-1] == "score"
    n_dof = len(header) - 1 - (1 if has_score else 0)
    frames = np.array([int(r[0]) for r in rows])
    poses = np.array([[float(v) for v in r[1 : 1 + n_dof]] for r in rows])
    scores = np.array([float(r[-1]) for r in rows]) if has_score else None
    return frames, poses, scores


# -- feature extraction -------------------------------------------------------------


def extract_features(sil, edges, fcfg):
    """Silhouette + edge masks -> (reference image, roi, saturated flag)."""
    roi = imaging.compute_roi(sil, margin=fcfg.roi_margin, min_area=fcfg.min_area)
    saturated = not edges.any()
    dist = imaging.distance_map(
        edges, metric=fcfg.metric, d_sat=fcfg.d_max if saturated else None
    )
    nmap = imaging.normalize_map(
        dist, fn=fcfg.normalize, d_min=fcfg.d_min, d_max=fcfg.d_max,
        n_range=fcfg.n_range, m=fcfg.m,
    )
    ref = imaging.encode_reference(sil, nmap)
    return ref, roi, saturated


def features_from_model_frame(img, fcfg):
    labels, edges = imaging.decode_model(img)
    return extract_features(labels != 0, edges, fcfg)


def features_from_gray_frame(gray, mog, fcfg):
    sil = mog.apply(gray)
    edges = imaging.mask_edges(
        imaging.sobel_edges(gray, threshold=fcfg.sobel_threshold),
        sil,
        grow=fcfg.edge_grow,
    )
    return extract_features(sil, edges, fcfg)


# -- tracking ------------------------------------------------------------------------


def load_tracker_config(path):
    """Tracker JSON -> (TrackerConfig, ObjectiveConfig, FeatureConfig)."""
    with open(path) as fh:
        data = json.load(fh)
    obj = ObjectiveConfig(**data.pop("objective", {}))
    fcfg = FeatureConfig(**data.pop("features", {}))
    if "omega" in data:
        data["omega"] = tuple(data["omega"])
    tracker = optimize.TrackerConfig(**data)
    return tracker, obj, fcfg


def track_sequence(
    seq_dir,
    cams,
    model,
    tracker,
    out_dir,
    obj_cfg=None,
    fcfg=None,
    full_vision=False,
    realtime_fps=None,
    overlay=False,
    workers=None,
):
    """Track a sequence and write track.csv, timing.csv and run.json.

    track.csv depends only on the configuration and seed (timing lives in a
    sidecar so the trajectory file is byte-reproducible). With realtime_fps,
    frames are dropped exactly as a live feed would: after finishing a
    frame, processing resumes at the newest frame the virtual clock has made
    available.
    """
    fcfg = fcfg or FeatureConfig()
    obj_cfg = obj_cfg or ObjectiveConfig()
    with open(os.path.join(seq_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    n_frames = manifest["frames"]
    if manifest["cameras"] != len(cams):
        raise ValueError("rig camera count does not match the sequence")

    truth_path = os.path.join(seq_dir, "truth.csv")
    if tracker.initial_pose is not None:
        init = model.check_pose(np.asarray(tracker.initial_pose, dtype=np.float64))
    elif os.path.exists(truth_path):
        _, poses, _ = load_pose_csv(truth_path)
        init = poses[0]
    else:
        raise ValueError("no initial pose: tracker config has none and truth.csv is absent")

    sigma = tracker.resolve_sigma(model)
    lo, hi = model.limits_lo, model.limits_hi
    pool = optimize.RngPool(tracker.seed)
    os.makedirs(out_dir, exist_ok=True)
    if overlay:
        for ci in range(len(cams)):
            os.makedirs(os.path.join(out_dir, "overlay", f"cam{ci:02d}"), exist_ok=True)

    mogs = None
    warmup = manifest.get("warmup", 0)
    if full_vision:
        if not manifest.get("gray"):
            raise ValueError("sequence has no grayscale frames for the vision path")
        mogs = [
            imaging.MoGBackground(
                (c.img_h, c.img_w), k=fcfg.mog_k, alpha=fcfg.mog_alpha, t_bg=fcfg.mog_t_bg
            )
            for c in cams
        ]
        for ci in range(len(cams)):
            mogs[ci].prime(imaging.read_pgm(frame_path(seq_dir, ci, 0, gray=True)))
        for j in range(warmup):
            for ci, cam in enumerate(cams):
                mogs[ci].apply(imaging.read_pgm(frame_path(seq_dir, ci, j, gray=True)))

    rows = []
    timings = []
    saturated_frames = []
    degenerate_frames = []
    prev = init.copy()
    particles = (
        optimize.init_particles(init, tracker.particles)
        if tracker.algorithm == "pf"
        else None
    )
    evaluator = BatchEvaluator(model, cams, cfg=obj_cfg, workers=workers)
    wall_start = time.perf_counter()
    sim_t = 0.0
    fi = 0
    try:
        while fi < n_frames:
            t0 = time.perf_counter()
            refs, rois = [], []
            any_sat = False
            for ci, cam in enumerate(cams):
                if full_vision:
                    gray = imaging.read_pgm(
                        frame_path(seq_dir, ci, warmup + fi, gray=True)
                    )
                    ref, roi, sat = features_from_gray_frame(gray, mogs[ci], fcfg)
                else:
                    path = frame_path(seq_dir, ci, fi)
                    if not os.path.exists(path):
                        raise MissingFrame(path)
                    ref, roi, sat = features_from_model_frame(
                        imaging.read_pgm(path), fcfg
                    )
                refs.append(ref)
                rois.append(roi)
                any_sat = any_sat or sat
            if any_sat:
                saturated_frames.append(fi)
            evaluator.set_frame(refs, rois, anchor=prev)
            if tracker.algorithm == "pso":
                pose, score = optimize.pso_track_frame(
                    prev, evaluator.evaluate, tracker, pool, lo, hi, sigma
                )
            else:
                res = optimize.pf_track_frame(
                    particles, evaluator.evaluate, tracker, pool, lo, hi, sigma
                )
                pose, score, particles = res.pose, res.score, res.particles
                if res.degenerate:
                    degenerate_frames.append(fi)
            dt = time.perf_counter() - t0
            rows.append((fi, pose, score))
            timings.append((fi, dt * 1000.0))
            prev = pose
            if overlay:
                for ci, cam in enumerate(cams):
                    _write_overlay(out_dir, seq_dir, model, pose, cam, ci, fi, refs[ci])
            if realtime_fps:
                sim_t += dt
                newest = int(math.floor(sim_t * realtime_fps))
                nxt = max(fi + 1, newest)
                if nxt > fi + 1:
                    pass  # frames fi+1 .. nxt-1 arrive too late and are dropped
                fi = nxt
                sim_t = max(sim_t, fi / realtime_fps)
            else:
                fi += 1
    finally:
        evaluator.close()
    wall = time.perf_counter() - wall_start

    _write_track_csv(os.path.join(out_dir, "track.csv"), model, rows)
    with open(os.path.join(out_dir, "timing.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame", "ms"])
        for fi2, ms in timings:
            wr.writerow([fi2, f"{ms:.3f}"])
    save_model(model, os.path.join(out_dir, "model.json"))
    processed = [r[0] for r in rows]
    run_info = {
        "seed": tracker.seed,
        "tracker": _jsonable(asdict(tracker)),
        "objective": asdict(obj_cfg),
        "features": asdict(fcfg),
        "sequence": os.path.abspath(seq_dir),
        "full_vision": full_vision,
        "realtime_fps": realtime_fps,
        "frames_processed": len(rows),
        "frames_skipped": sorted(set(range(n_frames)) - set(processed)),
        "saturated_frames": saturated_frames,
        "degenerate_frames": degenerate_frames,
        "evaluations": evaluator.evaluations,
        "wall_s": wall,
    }
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(run_info, fh, indent=2)
        fh.write("\n")
    return run_info


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, np.ndarray):
            out[k] = [float(x) for x in v]
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


def _write_track_csv(path, model, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame"] + model.dof_names + ["score"])
        for fi, pose, score in rows:
            wr.writerow([fi] + [repr(float(v)) for v in pose] + [repr(float(score))])


def _write_overlay(out_dir, seq_dir, model, pose, cam, ci, fi, ref):
    img, ok, _, _ = render_model(model, pose, cam)
    base = ((ref & 0x80) != 0).astype(np.uint8) * 96
    if ok:
        base[(img & 0x80) != 0] = 255
    imaging.write_pgm(
        os.path.join(out_dir, "overlay", f"cam{ci:02d}", f"frame_{fi:06d}.pgm"), base
    )


# -- accuracy ------------------------------------------------------------------------


def marker_errors(model, est_poses, truth_poses):
    """Per-frame, per-marker distances between estimated and true markers."""
    n = est_poses.shape[0]
    m = 2 * len(model.parts)
    err = np.empty((n, m))
    for i in range(n):
        a = model.marker_positions(est_poses[i])
        b = model.marker_positions(truth_poses[i])
        err[i] = np.sqrt(((a - b) ** 2).sum(axis=1))
    return err


def marker_names(model):
    out = []
    for p in model.parts:
        out.append(f"{p.name}.top")
        out.append(f"{p.name}.bottom")
    return out


def evaluate_run(run_dir, truth_csv, out_dir=None, figures=True):
    """Compare a track run against ground truth; write report and figures."""
    out_dir = out_dir or run_dir
    model = load_model(os.path.join(run_dir, "model.json"))
    est_frames, est_poses, _ = load_pose_csv(os.path.join(run_dir, "track.csv"))
    tr_frames, tr_poses, _ = load_pose_csv(truth_csv)
    # nearest truth frame per estimate (exact hit when rates match)
    order = np.argsort(tr_frames)
    tr_sorted = tr_frames[order]
    pos = np.searchsorted(tr_sorted, est_frames)
    pos = np.clip(pos, 0, len(tr_sorted) - 1)
    left = np.clip(pos - 1, 0, len(tr_sorted) - 1)
    use_left = (
        np.abs(tr_sorted[left] - est_frames) <= np.abs(tr_sorted[pos] - est_frames)
    ) & (pos > 0)
    nearest = np.where(use_left, left, pos)
    truth_matched = tr_poses[order[nearest]]

    err = marker_errors(model, est_poses, truth_matched)
    per_frame = err.mean(axis=1)
    per_marker = err.mean(axis=0)
    report = {
        "frames": int(err.shape[0]),
        "markers": int(err.shape[1]),
        "mean_error_mm": float(err.mean()),
        "std_error_mm": float(err.std()),
        "max_error_mm": float(err.max()),
        "per_marker_mean_mm": [float(v) for v in per_marker],
        "marker_names": marker_names(model),
        "model_height_mm": model.height(),
    }
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "per_frame_errors.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame", "mean_error_mm"])
        for f, e in zip(est_frames, per_frame):
            wr.writerow([int(f), repr(float(e))])
    if figures:
        from . import report as report_figs

        report_figs.save_error_timeline(
            est_frames, per_frame, os.path.join(out_dir, "error_timeline.png")
        )
        report_figs.save_marker_errors(
            marker_names(model), per_marker, os.path.join(out_dir, "marker_errors.png")
        )
    return report


# -- performance ---------------------------------------------------------------------


class BadInput(ValueError):
    pass


@dataclass
class PerfReport:
    t_serial: float
    t_parallel: float
    p: int
    speedup: float
    efficiency: float
    karp_flatt: float = None
    gustafson: float = None
    parallelism: float = None


def perf_metrics(t_serial, t_parallel, p, serial_fraction=None, latency=None,
                 throughput=None):
    """Speedup, efficiency, Karp-Flatt serial fraction, Gustafson speedup."""
    if t_serial <= 0.0 or t_parallel <= 0.0:
        raise BadInput("times must be positive")
    if p < 1:
        raise BadInput("p must be >= 1")
    s = t_serial / t_parallel
    e = s / p
    kf = None
    if p >= 2:
        kf = (1.0 / s - 1.0 / p) / (1.0 - 1.0 / p)
    g = None
    if serial_fraction is not None:
        if not 0.0 <= serial_fraction <= 1.0:
            raise BadInput("serial fraction must be in [0, 1]")
        g = serial_fraction + p * (1.0 - serial_fraction)
    par = None
    if latency is not None and throughput is not None:
        par = latency * throughput
    return PerfReport(
        t_serial=t_serial, t_parallel=t_parallel, p=p, speedup=s, efficiency=e,
        karp_flatt=kf, gustafson=g, parallelism=par,
    )


def bench(particles=96, iters=10, max_workers=4, out_dir=None, repeats=3):
    """Measure evaluate-batch speedup at 1..max_workers (doubling ladder).

    Writes bench.csv and speedup.png when out_dir is given. Efficiency below
    0.5 at p=4 warns rather than fails: the check is meaningful only on a
    machine with at least four cores.
    """
    model = default_model()
    cams = default_ring_rig()
    spec_pose = model.bind_pose
    fcfg = FeatureConfig()
    refs, rois = [], []
    for cam in cams:
        img, ok, _, _ = render_model(model, spec_pose, cam)
        if not ok:
            raise RuntimeError("bench scene renders behind a camera")
        ref, roi, _ = features_from_model_frame(img, fcfg)
        refs.append(ref)
        rois.append(roi)
    pool = optimize.RngPool(1234)
    sigma = optimize.TrackerConfig().resolve_sigma(model)
    z = pool.normal(particles * model.n_dof).reshape(particles, model.n_dof)
    poses = np.clip(spec_pose + sigma * z, model.limits_lo, model.limits_hi)

    ladder = []
    p = 1
    while p < max_workers:
        ladder.append(p)
        p *= 2
    ladder.append(max_workers)
    ladder = sorted(set(ladder))

    results = []
    t1 = None
    for p in ladder:
        ev = BatchEvaluator(model, cams, workers=p)
        ev.set_frame(refs, rois, anchor=spec_pose)
        ev.evaluate(poses)  # warm the kernels outside the timed region
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            for _ in range(iters):
                ev.evaluate(poses)
            best = min(best, time.perf_counter() - t0)
        ev.close()
        if p == 1:
            t1 = best
        results.append((p, best, perf_metrics(t1, best, p)))

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "bench.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["workers", "seconds", "speedup", "efficiency", "karp_flatt"])
            for p, secs, rep in results:
                wr.writerow([
                    p, f"{secs:.6f}", f"{rep.speedup:.4f}", f"{rep.efficiency:.4f}",
                    "" if rep.karp_flatt is None else f"{rep.karp_flatt:.4f}",
                ])
        from . import report as report_figs

        report_figs.save_speedup(
            [r[0] for r in results],
            [r[2].speedup for r in results],
            os.path.join(out_dir, "speedup.png"),
        )
    for p, _, rep in results:
        if p == 4 and rep.efficiency <= 0.5:
            msg = f"efficiency at 4 workers is {rep.efficiency:.2f}"
            if (os.cpu_count() or 1) >= 4:
                warnings.warn(msg)
            else:
                warnings.warn(msg + f" (machine has {os.cpu_count()} cores)")
    return results
