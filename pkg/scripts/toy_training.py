"""Train a head on synthetic clips and report held-out proposal quality.

    python scripts/toy_training.py --config configs/toy.json
    python scripts/toy_training.py --config configs/toy.json --head lstm --epochs 30 --lr 1e-3

Held-out clips come from seed + 1. ``--trim`` scores untrimmed clips with
path trimming on, which shows how far learned scores are from the oracle ones.
"""

import argparse
import time

from tubeprop.config import load_config
from tubeprop.pipeline import infer_videos, run_pipeline
from tubeprop.synth import make_dataset
from tubeprop.train import train_toy


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--config")
    ap.add_argument("--head", choices=["static", "lstm", "rnn"])
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--lr", type=float, help="initial learning rate")
    ap.add_argument("--n-train", type=int, default=200)
    ap.add_argument("--n-test", type=int, default=50)
    ap.add_argument("--trim", action="store_true")
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    cfg = load_config(args.config, head=args.head, epochs=args.epochs, learning_rate=args.lr,
                      trim=True if args.trim else None)
    frac = 0.5 if args.trim else 0.0
    train = make_dataset(args.n_train, cfg.seed, length=cfg.video_length, untrimmed_fraction=0.0,
                         frame_size=cfg.feature_size)
    t0 = time.perf_counter()
    result = train_toy(cfg, train)
    took = time.perf_counter() - t0
    held = make_dataset(args.n_test, cfg.seed + 1, length=cfg.video_length,
                        untrimmed_fraction=frac, prefix="test", frame_size=cfg.feature_size)
    dets = infer_videos({v.video_id: v.features for v in held}, result.model, cfg, args.threads)
    _, report, _ = run_pipeline(cfg, dets, {v.video_id: [v.ground_truth] for v in held},
                                args.threads)
    print(f"head={cfg.head} K={cfg.grid_k} B={cfg.boxes_per_cell} epochs={cfg.epochs} "
          f"train {took:.1f}s")
    print(f"loss first/last epoch: {result.losses[0]:.4f} / {result.losses[-1]:.4f}")
    print(f"held-out recall@0.5 {report.recall_at[0.5]:.3f}  ABO {report.abo:.3f}  "
          f"MABO {report.mabo:.3f}  (trim={'on' if cfg.trim else 'off'})")


if __name__ == "__main__":
    main()
