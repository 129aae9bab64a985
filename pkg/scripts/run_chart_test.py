"""Calibrate on a synthetic 24-block chart and score reconstruction of a 96-block chart."""
import argparse

from speccam.experiments import chart_transfer_test


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 42])
    ap.add_argument("--noise", type=float, default=1.5)
    args = ap.parse_args()
    for seed in args.seeds:
        res = chart_transfer_test(seed=seed, noise_sigma=args.noise)
        print(f"seed {seed}: mean RMSE {res.mean_rmse:.4f}, worst block {res.rmse.max():.4f} "
              f"{'PASS' if res.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
