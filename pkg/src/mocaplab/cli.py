"""Command line entry points: synth, track, eval, bench."""

import argparse
import json
import sys

from . import pipeline
from .camera import load_rig
from .skeleton import load_model


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mocaplab",
        description="Markerless model-based 3D human pose tracking toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="render a synthetic ground-truth sequence")
    p_synth.add_argument("--spec", required=True, help="sequence spec JSON")
    p_synth.add_argument("--out", required=True, help="output sequence directory")

    p_track = sub.add_parser("track", help="track a sequence")
    p_track.add_argument("--rig", required=True, help="camera rig JSON")
    p_track.add_argument("--model", required=True, help="body model JSON")
    p_track.add_argument("--tracker", required=True, help="tracker config JSON")
    p_track.add_argument("--seq", required=True, help="sequence directory")
    p_track.add_argument("--out", required=True, help="output run directory")
    p_track.add_argument(
        "--realtime-sim",
        type=float,
        default=None,
        metavar="FPS",
        help="simulate a live feed at FPS, dropping frames that arrive late",
    )
    p_track.add_argument(
        "--full-vision",
        action="store_true",
        help="extract features from grayscale frames (background model + edges)",
    )
    p_track.add_argument(
        "--overlay", action="store_true", help="write per-camera overlay images"
    )
    p_track.add_argument("--workers", type=int, default=None)

    p_eval = sub.add_parser("eval", help="score a run against ground truth")
    p_eval.add_argument("--run", required=True, help="run directory (from track)")
    p_eval.add_argument("--truth", required=True, help="ground-truth pose CSV")
    p_eval.add_argument("--out", default=None, help="report directory (default: run dir)")

    p_bench = sub.add_parser("bench", help="measure batch-evaluation speedup")
    p_bench.add_argument("--particles", type=int, default=96)
    p_bench.add_argument("--iters", type=int, default=10)
    p_bench.add_argument("--workers", type=int, default=4, help="largest worker count")
    p_bench.add_argument("--out", default="bench_out")

    args = parser.parse_args(argv)

    if args.command == "synth":
        with open(args.spec) as fh:
            spec = json.load(fh)
        manifest = pipeline.synth_generate(spec, args.out)
        print(
            f"wrote {manifest['frames']} frames x {manifest['cameras']} cameras"
            f" to {args.out}"
        )
    elif args.command == "track":
        cams = load_rig(args.rig)
        model = load_model(args.model)
        tracker, obj_cfg, fcfg = pipeline.load_tracker_config(args.tracker)
        info = pipeline.track_sequence(
            args.seq,
            cams,
            model,
            tracker,
            args.out,
            obj_cfg=obj_cfg,
            fcfg=fcfg,
            full_vision=args.full_vision,
            realtime_fps=args.realtime_sim,
            overlay=args.overlay,
            workers=args.workers,
        )
        skipped = len(info["frames_skipped"])
        print(
            f"tracked {info['frames_processed']} frames"
            f" ({skipped} skipped) in {info['wall_s']:.1f}s -> {args.out}"
        )
    elif args.command == "eval":
        report = pipeline.evaluate_run(args.run, args.truth, out_dir=args.out)
        print(
            f"mean marker error {report['mean_error_mm']:.2f} mm"
            f" over {report['frames']} frames"
        )
    elif args.command == "bench":
        results = pipeline.bench(
            particles=args.particles,
            iters=args.iters,
            max_workers=args.workers,
            out_dir=args.out,
        )
        for p, secs, rep in results:
            print(
                f"p={p}: {secs:.3f}s speedup={rep.speedup:.2f}"
                f" efficiency={rep.efficiency:.2f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
