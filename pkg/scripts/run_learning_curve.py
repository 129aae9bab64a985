"""Full SAL vs RGBL learning curve on the default synthetic set (takes several minutes)."""
import argparse
import time

from speccam.evaluation import learning_curve, roc, stability_summary
from speccam.phantom import generate_dataset
from speccam.regression.models import ModelSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=320)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--model", default="hybrid")
    args = ap.parse_args()
    t0 = time.perf_counter()
    ds = generate_dataset(args.n, seed=args.seed)
    curve = learning_curve(ds, ModelSpec(args.model), seed=args.seed)
    print("mode   frac    n      r       md    std_md")
    for mode, p in curve.rows():
        print(f"{mode:5s} {p.fraction:6.4f} {p.n:4d} {p.r:7.4f} {p.md:8.3f} {p.std_md:8.3f}")
    for mode, stats in stability_summary(curve).items():
        print(f"stability {mode}: " + ", ".join(f"{k}={v:.4f}" for k, v in stats.items()))
    last = len(curve.fractions) - 1
    for mode in ("sal", "rgbl"):
        print(f"AUROC {mode}: {roc(curve.pairs[(mode, last)]).auroc:.4f}")
    print(f"elapsed {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
