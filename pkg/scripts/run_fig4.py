"""Run the fig4 preset and print where the tables went."""

import argparse

from rhombic_transport.experiment import preset, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fig4")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    result = run(preset("fig4", out=args.out, seed=args.seed))
    for path in result.files:
        print(path)


if __name__ == "__main__":
    main()
