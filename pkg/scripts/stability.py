"""Message-passing convergence rates for BP and reweighted sum-product over a coupling sweep."""
import argparse
from pathlib import Path

from surrogate_mrf.harness.config import load_config
from surrogate_mrf.harness.experiments import run_stability_rows

DEFAULT = Path(__file__).resolve().parent.parent / "configs" / "stability_grid4.cfg"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(DEFAULT))
    parser.add_argument("--seed", type=int)
    args = parser.parse_args()

    for r in run_stability_rows(load_config(args.config, seed=args.seed)):
        print(f"{r.method:>4} gamma={r.coupling:.2f} alpha={r.alpha:.2f} "
              f"converged {r.converged}/{r.instances} "
              f"mean iterations {r.mean_iterations:.1f}")


if __name__ == "__main__":
    main()
