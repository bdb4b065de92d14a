"""Run the whole protocol on synthetic data for the four recall conditions.

For each of 2D-STM, 2D-LTM, 3D-STM and 3D-LTM this writes a configuration,
synthesises a cohort with that condition's answer-time model, fills the
spectra cache and writes the SVM and KNN accuracy tables. It then compares
2D against 3D (repeated runs, Welch test, k sweep) within each memory
condition and writes the answer-time summary.

    python scripts/run_synthetic_study.py --out study --subjects 66 --jobs 4

Defaults follow the full-size protocol (66 subjects, 100x100 topomaps at
every sample) and take hours on one core; ``--quick`` shrinks it to minutes.
"""
import argparse
import os

import yaml

from eigtopo import cli

CONDITIONS = ("2D-STM", "2D-LTM", "3D-STM", "3D-LTM")


def condition_config(out, cond, args, kind):
    label = f"{cond}_{kind}"
    return {
        "label": label,
        "data": {"dir": os.path.join(out, "data", cond)},
        "synth": {"n_subjects": args.subjects, "n_questions": 20, "class_separation": args.separation,
                  "time_model": cond, "rng_seed": args.seed + CONDITIONS.index(cond)},
        "topomap": {"G": args.G, "stride": args.stride},
        "features": {"k": args.k},
        "selection": {"n_per_class": args.per_class},
        "classifier": {"kind": "knn", "K": [1, 3, 5, 7, 9]} if kind == "knn" else {"kind": "svm"},
        "evaluation": {"folds": 10, "seed": args.seed, "k_sweep_max": args.k_sweep},
        "output": {"dir": out},
    }


def write(path, doc):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
    return path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="study")
    ap.add_argument("--subjects", type=int, default=66)
    ap.add_argument("--G", type=int, default=100)
    ap.add_argument("--stride", type=int, default=1)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--k-sweep", type=int, default=99)
    ap.add_argument("--separation", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--quick", action="store_true",
                    help="10 subjects, G=40, stride 8, k sweep to 20 (explicit flags still win)")
    args = ap.parse_args(argv)
    if args.quick:
        quick = {"subjects": 10, "G": 40, "stride": 8, "k_sweep": 20}
        for key, val in quick.items():
            if getattr(args, key) == ap.get_default(key):
                setattr(args, key, val)

    out = os.path.abspath(args.out)
    cfgs = {}
    for cond in CONDITIONS:
        for kind in ("svm", "knn"):
            cfgs[cond, kind] = write(os.path.join(out, "configs", f"{cond}_{kind}.yaml"),
                                     condition_config(out, cond, args, kind))
        j = ["--jobs", str(args.jobs)]
        cli.main(["synth", "--config", cfgs[cond, "svm"]] + j)
        cli.main(["features", "--config", cfgs[cond, "svm"]] + j)
        for kind in ("svm", "knn"):
            if cli.main(["evaluate", "--config", cfgs[cond, kind]] + j):
                return 1

    for mem in ("STM", "LTM"):
        dest = os.path.join(out, f"compare_{mem}")
        cli.main(["compare", "--config", cfgs[f"2D-{mem}", "svm"], "--config-b", cfgs[f"3D-{mem}", "svm"],
                  "--out", dest, "--jobs", str(args.jobs)])
        cli.main(["times", "--config", cfgs[f"2D-{mem}", "svm"], "--config-b", cfgs[f"3D-{mem}", "svm"],
                  "--out", dest])
    print(f"study written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
