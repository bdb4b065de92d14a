"""Scatter the two leading eigenvalues of each selected question, one SVG per colour channel.

    python scripts/eigen_scatter.py --config study/configs/2D-STM_svm.yaml --out plots

Reads the spectra cache, so run ``eigtopo features`` with the same
configuration first.
"""
import argparse
import os

from eigtopo.cli import selected_records
from eigtopo.config import load_config
from eigtopo.svgplot import scatter_chart


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="plots")
    args = ap.parse_args(argv)
    cfg = load_config(args.config)
    records = selected_records(cfg)
    os.makedirs(args.out, exist_ok=True)
    for c in "RGB":
        groups = {"Correct": [], "Incorrect": []}
        for r in records:
            lam = r.spectra[c].eigenvalues
            groups[r.answer.value].append((float(lam[0]), float(lam[1]) if len(lam) > 1 else 0.0))
        svg = scatter_chart(groups, title=f"{cfg.label}, channel {c}", xlabel="lambda 1", ylabel="lambda 2")
        path = os.path.join(args.out, f"{cfg.label}_{c}_eigen_scatter.svg")
        with open(path, "w") as fh:
            fh.write(svg)
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
