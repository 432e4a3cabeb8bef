"""Command-line entry point for benchmarks, image dumps, and the live server."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import BenchConfig, BenchRun, emit_csv, emit_frames, resolve_scene, run_bench
from .scheduler import RenderMode

MODES = {m.value: m for m in RenderMode}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="portalbox",
        description="Stereoscopic portal renderer: benchmarks, frame dumps, live walkthrough.",
    )
    p.add_argument("--scene", default="test:3",
                   help="scene file path, or test:N (arena with N portal pairs), "
                        "rooms (four folded rooms), transition (wall-box test room)")
    p.add_argument("--mode", default="naive", choices=sorted(MODES),
                   help="render pipeline")
    p.add_argument("--frames", type=int, default=60, metavar="M")
    p.add_argument("--res", default="256x256", metavar="WxH", help="per-eye resolution")
    p.add_argument("--trajectory", default="orbit", choices=["orbit", "fixed", "walkthrough"])
    p.add_argument("--csv", type=Path, default=None, metavar="PATH",
                   help="write the summary matrix here (per-frame CSV lands next to it)")
    p.add_argument("--dump-frames", type=Path, default=None, metavar="DIR")
    p.add_argument("--every", type=int, default=1, metavar="K",
                   help="dump one frame every K frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep-pairs", action="store_true",
                   help="run the arena at 0/2/4/6 portals and fill all summary columns")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-frustum-cull", action="store_true")
    p.add_argument("--no-portal-box", action="store_true",
                   help="render portals as bare quads (reproduces the one-eye artifact)")
    p.add_argument("--hidden-area-mask", action="store_true")
    p.add_argument("--serve", type=int, default=None, metavar="PORT",
                   help="serve the scene live over websockets instead of benchmarking")
    return p


def _parse_res(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as e:
        raise ValueError(f"--res must look like 256x256, got {text!r}") from e


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        width, height = _parse_res(args.res)
        mode = MODES[args.mode]

        if args.serve is not None:
            from .server import serve_scene

            scene = resolve_scene(args.scene)
            static = Path(__file__).resolve().parents[2] / "frontend"
            built = (static / "dist" / "main.js").is_file()
            print(f"serving {args.scene} on port {args.serve} "
                  f"(viewer page {'ready' if built else 'not built - run npm run build in frontend/'})")
            serve_scene(scene, args.serve, width=width, height=height,
                        workers=args.workers,
                        static_dir=static if static.is_dir() else None)
            return 0

        def config_for(scene_sel: str) -> BenchConfig:
            return BenchConfig(
                scene=scene_sel,
                mode=mode,
                frames=args.frames,
                width=width,
                height=height,
                trajectory=args.trajectory,
                seed=args.seed,
                frustum_cull=not args.no_frustum_cull,
                portal_box=not args.no_portal_box,
                hidden_area_mask=args.hidden_area_mask,
                workers=args.workers,
                dump_every=args.every if args.dump_frames else None,
            )

        runs: list[BenchRun] = []
        selectors = [f"test:{n}" for n in range(4)] if args.sweep_pairs else [args.scene]
        for sel in selectors:
            run = run_bench(config_for(sel))
            runs.append(run)
            s = run.summary
            print(f"{sel:10s} {mode.value:18s} portals={run.portal_count} "
                  f"fps={s['fps']:8.2f} frame_ms={s['frame_ms']:8.2f} "
                  f"passes={s['passes']:5.1f} fragments={s['fragments']:12.1f}")

        if args.csv:
            summary_path, frames_path = emit_csv(runs, args.csv)
            print(f"wrote {summary_path} and {frames_path}")
        if args.dump_frames:
            for run in runs:
                written = emit_frames(run, args.dump_frames, args.every)
                print(f"wrote {len(written)} frames to {args.dump_frames}")
        return 0
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
