"""Recall with and without path trimming on synthetic untrimmed videos.

Oracle detections, so only linking and trimming are measured. Sweeps the
score noise to show where peak trimming starts to break down.

    python scripts/trim_ablation.py --n 100 --noise 0 0.02 0.05 0.1
"""

import argparse

from tubeprop.config import PipelineConfig
from tubeprop.pipeline import run_pipeline
from tubeprop.synth import generate_synthetic, make_rng, sample_spec


def videos(n, seed, length, noise):
    rng = make_rng(seed)
    return [generate_synthetic(sample_spec(rng, f"vid{i:04d}", length=length, untrimmed=True,
                                           score_noise=noise))
            for i in range(n)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--length", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1])
    ap.add_argument("--window", type=int, default=5)
    ap.add_argument("--neighborhood", type=int, default=5)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    base = PipelineConfig(smooth_window=args.window, neighborhood=args.neighborhood, seed=args.seed)
    print(f"{'noise':>6} {'R@0.5 trim':>11} {'R@0.5 none':>11} {'ABO trim':>9} {'ABO none':>9}")
    for noise in args.noise:
        vs = videos(args.n, args.seed, args.length, noise)
        dets = {v.video_id: v.detections for v in vs}
        gts = {v.video_id: [v.ground_truth] for v in vs}
        _, on, _ = run_pipeline(base, dets, gts, args.threads)
        _, off, _ = run_pipeline(PipelineConfig(**{**base.to_dict(), "trim": False}), dets, gts,
                                 args.threads)
        print(f"{noise:6.3f} {on.recall_at[0.5]:11.3f} {off.recall_at[0.5]:11.3f} "
              f"{on.abo:9.3f} {off.abo:9.3f}")


if __name__ == "__main__":
    main()
