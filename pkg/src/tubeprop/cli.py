"""Command-line front end.

    tubeprop synth      write a synthetic dataset (features, oracle detections, ground truth)
    tubeprop train-toy  train a head on synthetic videos, save a checkpoint, report held-out metrics
    tubeprop infer      run a checkpoint over frame features -> detections
    tubeprop link       detections -> video-long paths
    tubeprop trim       paths -> trimmed proposals
    tubeprop eval       proposals + ground truth -> report
    tubeprop pipeline   detections (or checkpoint + features) -> proposals + report

Format violations exit with status 2 and one JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .config import PipelineConfig, load_config
from .head import load_checkpoint, save_checkpoint
from .io import FormatError
from .pipeline import fuse_all, infer_videos, link_videos, run_pipeline, score_proposals, trim_proposals
from .synth import make_dataset
from .train import TrainingVideo, train_toy

log = logging.getLogger("tubeprop")


def _config(args) -> PipelineConfig:
    overrides = {"seed": args.seed}
    if getattr(args, "no_trim", False):
        overrides["trim"] = False
    if getattr(args, "force_trim", False):
        overrides["trim"] = True
    return load_config(args.config, **overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _out_file(args, default_name: str) -> Path:
    out = Path(args.out)
    if out.suffix == "" or out.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        return out / default_name
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _model(path):
    head, dims, seed, parts = load_checkpoint(path)
    return {"head": head, "dims": dims, "seed": seed, **parts}


def _report_record(report, config: PipelineConfig, warnings=()):
    rec = report.to_dict() if report is not None else None
    return {"metrics": rec, "config": config.to_dict(), "warnings": list(warnings)}


def cmd_synth(args):
    cfg = _config(args)
    out = _out_dir(args)
    length = args.length or cfg.video_length
    frac = cfg.untrimmed_fraction if args.untrimmed_fraction is None else args.untrimmed_fraction
    videos = make_dataset(args.n, cfg.seed, length=length, untrimmed_fraction=frac,
                          prefix=args.prefix, frame_size=cfg.feature_size)
    io.write_features(out / "features.npz", {v.video_id: v.features for v in videos})
    io.write_detections(out / "detections.jsonl", [v.detections for v in videos])
    io.write_ground_truth(out / "ground_truth.jsonl", [v.ground_truth for v in videos])
    log.info("wrote %d videos to %s", len(videos), out)


def _training_set(features, gts):
    return [TrainingVideo(features[vid], gts.get(vid, [])) for vid in sorted(features)]


def cmd_train_toy(args):
    cfg = _config(args)
    out = _out_dir(args)
    length = args.length or cfg.video_length
    if args.data:
        data = Path(args.data)
        train = _training_set(io.read_features(data / "features.npz"),
                              io.read_ground_truth(data / "ground_truth.jsonl"))
    else:
        train = make_dataset(args.n_train, cfg.seed, length=length,
                             untrimmed_fraction=args.untrimmed_fraction,
                             frame_size=cfg.feature_size)
    result = train_toy(cfg, train)
    m = result.model
    parts = [("readout", m["readout"])] if m["cell"] is None else [("cell", m["cell"]), ("readout", m["readout"])]
    save_checkpoint(out / "checkpoint.json", m["head"], m["dims"], cfg.seed, parts,
                    modulation=getattr(m["cell"], "modulation", None))
    rec = {"losses": result.losses}
    if args.n_test:
        held = make_dataset(args.n_test, cfg.seed + 1, length=length,
                            untrimmed_fraction=args.untrimmed_fraction, prefix="test",
                            frame_size=cfg.feature_size)
        dets = infer_videos({v.video_id: v.features for v in held}, m, cfg, args.threads)
        _, report, warns = run_pipeline(cfg, dets, {v.video_id: [v.ground_truth] for v in held},
                                        args.threads)
        rec.update(_report_record(report, cfg, warns))
    io.write_json(out / "train_report.json", rec)
    if "metrics" in rec:
        print(f"held-out recall@0.5 = {rec['metrics']['recall_at']['0.5']:.4f}")


def cmd_infer(args):
    cfg = _config(args)
    dets = infer_videos(io.read_features(args.features), _model(args.model), cfg, args.threads)
    io.write_detections(_out_file(args, "detections.jsonl"), dets.values())


def cmd_link(args):
    cfg = _config(args)
    dets = io.read_detections(args.detections)
    if args.detections2:
        dets = fuse_all(dets, io.read_detections(args.detections2))
    io.write_proposals(_out_file(args, "paths.jsonl"), link_videos(dets, cfg, args.threads))


def cmd_trim(args):
    cfg = _config(args)
    paths = io.read_proposals(args.paths)
    io.write_proposals(_out_file(args, "proposals.jsonl"), trim_proposals(paths, cfg, args.threads))


def cmd_eval(args):
    cfg = _config(args)
    report = score_proposals(io.read_proposals(args.proposals), io.read_ground_truth(args.gt), cfg)
    io.write_json(_out_file(args, "report.json"), _report_record(report, cfg))
    print(f"recall@0.5 = {report.recall_at[0.5]:.4f}  ABO = {report.abo:.4f}  MABO = {report.mabo:.4f}")


def cmd_pipeline(args):
    cfg = _config(args)
    out = _out_dir(args)
    if args.detections:
        dets = io.read_detections(args.detections)
    elif args.model and args.features:
        dets = infer_videos(io.read_features(args.features), _model(args.model), cfg, args.threads)
    else:
        raise ValueError("pipeline needs --detections, or --model with --features")
    extra = io.read_detections(args.detections2) if args.detections2 else None
    gts = io.read_ground_truth(args.gt) if args.gt else None
    proposals, report, warns = run_pipeline(cfg, dets, gts, args.threads, extra)
    io.write_proposals(out / "proposals.jsonl", proposals)
    if report is not None:
        io.write_json(out / "report.json", _report_record(report, cfg, warns))
        print(f"recall@0.5 = {report.recall_at[0.5]:.4f}  ABO = {report.abo:.4f}  MABO = {report.mabo:.4f}")
    for w in warns:
        print(f"warning: {w}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (every key optional)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", required=True, help="output file or directory")
    common.add_argument("--threads", type=int, default=1, help="max parallel videos")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tubeprop", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--length", type=int)
    s.add_argument("--untrimmed-fraction", type=float)
    s.add_argument("--prefix", default="vid")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train-toy", parents=[common], help="train a head on synthetic videos")
    s.add_argument("--data", help="directory written by `synth` (default: generate)")
    s.add_argument("--n-train", type=int, default=200)
    s.add_argument("--n-test", type=int, default=50)
    s.add_argument("--length", type=int)
    s.add_argument("--untrimmed-fraction", type=float, default=0.0)
    s.add_argument("--trim", dest="force_trim", action="store_true",
                   help="trim paths when scoring the held-out videos")
    s.add_argument("--no-trim", action="store_true")
    s.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("infer", parents=[common], help="checkpoint + features -> detections")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("link", parents=[common], help="detections -> linked paths")
    s.add_argument("--detections", required=True)
    s.add_argument("--detections2", help="second stream, fused per frame")
    s.set_defaults(func=cmd_link)

    s = sub.add_parser("trim", parents=[common], help="linked paths -> trimmed proposals")
    s.add_argument("--paths", required=True)
    s.set_defaults(func=cmd_trim)

    s = sub.add_parser("eval", parents=[common], help="proposals + ground truth -> report")
    s.add_argument("--proposals", required=True)
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("pipeline", parents=[common], help="end-to-end proposals and report")
    s.add_argument("--detections")
    s.add_argument("--detections2", help="second stream, fused per frame")
    s.add_argument("--model")
    s.add_argument("--features")
    s.add_argument("--gt")
    s.add_argument("--no-trim", action="store_true")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print(json.dumps({"error": "usage", "message": "--threads must be >= 1"}), file=sys.stderr)
        return 2
    try:
        args.func(args)
    except FormatError as e:
        print(json.dumps(e.to_record()), file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
