"""Command-line front end: ``eigtopo {synth,features,evaluate,compare,times}``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
Failures print one line ``error=<code> <message>`` to stderr. Reports hold no
paths, timestamps or timings, so reruns with the same configuration (and any
``--jobs``) are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import io
import json
import os
import re
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cache
from .classify import GridSearchSpec
from .config import dump_config, load_config
from .errors import ConfigError, DataError, EigtopoError
from .evaluate import (ClassifierConfig, QuestionRecord, SelectionPolicy, compare_systems, evaluate, k_sweep,
                       repeated_runs, select_questions, table_csv)
from .pipeline import FeatureSettings, subject_records
from .preprocess import BandpassSpec
from .signal_model import (Answer, SynthesisConfig, load_events, load_montage, load_recording, synthesize_dataset,
                           write_events, write_recording)
from .svgplot import line_chart

REC_SUFFIX = ".eeg"
EV_SUFFIX = ".events.json"


# ------------------------------------------------------------------ helpers


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _slug(label):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label) or "system"


def _grid(cfg):
    c = cfg.classifier
    pw = lambda e: tuple(float(2.0 ** x) for x in range(e[0], e[1] + 1, e[2]))  # noqa: E731
    return GridSearchSpec(pw(c.C_exponents), pw(c.gamma_exponents), c.inner_folds, c.tol)


def classifier_configs(cfg):
    c = cfg.classifier
    if c.kind == "knn":
        return [ClassifierConfig("knn", K) for K in c.K_values()]
    return [ClassifierConfig("svm", grid=_grid(cfg))]


def _single_classifier(cfg):
    clfs = classifier_configs(cfg)
    if len(clfs) != 1:
        raise ConfigError(f"{cfg.label}: comparison needs a single classifier (one K value)")
    return clfs[0]


def _subject_files(data_dir):
    recs = sorted(glob.glob(os.path.join(data_dir, "*" + REC_SUFFIX)))
    if not recs:
        raise DataError(f"no recordings ({REC_SUFFIX}) in {data_dir}; run 'synth' or point data.dir at a dataset")
    pairs = []
    for r in recs:
        ev = r[: -len(REC_SUFFIX)] + EV_SUFFIX
        if not os.path.exists(ev):
            raise DataError(f"recording {os.path.basename(r)} has no event file {os.path.basename(ev)}")
        pairs.append((r, ev))
    return pairs


def _fingerprint(pairs):
    h = hashlib.sha256()
    for path_pair in pairs:
        for p in path_pair:
            h.update(os.path.basename(p).encode())
            with open(p, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
    return h.hexdigest()


def _event_pool(logs, rate_of):
    """Lightweight records (no spectra) for selection by answer time."""
    pool = []
    for ev in logs:
        for e in ev.entries:
            if not ev.is_excluded(e):
                pool.append(QuestionRecord(ev.subject_id, e.question_id, e.answer, e.n_samples / rate_of(ev)))
    return pool


def _cache_path(cfg, pairs):
    return os.path.join(cache.cache_dir(cfg.output.dir, cfg.feature_key(_fingerprint(pairs))), cache.FILENAME)


def _selection(cfg, logs):
    return select_questions(_event_pool(logs, lambda ev: ev.sample_rate_hz), SelectionPolicy(cfg.selection.n_per_class))


def selected_records(cfg):
    """The selected questions' cached records, in selection order."""
    pairs = _subject_files(cfg.data_dir)
    logs = [load_events(ev) for _, ev in pairs]
    chosen = _selection(cfg, logs)
    path = _cache_path(cfg, pairs)
    cached, _ = cache.read_cache(path)
    if not cached:
        raise DataError(f"feature cache for '{cfg.label}' is empty; run 'eigtopo features' with this config first")
    missing = [q for q in chosen if (q.subject_id, q.question_id) not in cached]
    if missing:
        raise DataError(f"feature cache for '{cfg.label}' lacks {len(missing)} selected questions; "
                        "rerun 'eigtopo features'")
    return [cached[(q.subject_id, q.question_id)] for q in chosen]


# ------------------------------------------------------------------ commands


def cmd_synth(cfg, jobs=1):
    s = cfg.synth
    scfg = SynthesisConfig(n_subjects=s.n_subjects, n_questions=s.n_questions, sample_rate_hz=s.sample_rate_hz,
                           class_separation=s.class_separation, time_model=s.resolved_time_model(),
                           rng_seed=s.rng_seed, correct_fraction=s.correct_fraction)
    recs, logs = synthesize_dataset(scfg)
    out = cfg.data_dir
    os.makedirs(out, exist_ok=True)
    for rec, ev in zip(recs, logs):
        write_recording(os.path.join(out, rec.subject_id + REC_SUFFIX), rec)
        write_events(os.path.join(out, rec.subject_id + EV_SUFFIX), ev)
    _write(os.path.join(out, "synth.yaml"), dump_config(cfg.synth))
    print(f"synth subjects={len(recs)} questions={sum(len(e.entries) for e in logs)}")
    return recs, logs


def cmd_features(cfg, jobs=1):
    montage = load_montage()
    pairs = _subject_files(cfg.data_dir)
    logs = [load_events(ev) for _, ev in pairs]
    chosen = _selection(cfg, logs)
    path = _cache_path(cfg, pairs)
    cached, bad = cache.read_cache(path)
    wanted = {}
    for q in chosen:
        if (q.subject_id, q.question_id) not in cached:
            wanted.setdefault(q.subject_id, set()).add(q.question_id)
    todo = [(p, ev) for p, ev in zip(pairs, logs) if ev.subject_id in wanted]
    p, f = cfg.preprocess, cfg.features
    bp = BandpassSpec(p.low_cut_hz, p.high_cut_hz, p.order, p.zero_phase)
    fs = FeatureSettings(cfg.topomap.G, cfg.topomap.stride, f.dense_max, f.n_eig, f.solver_seed)

    def work(item):
        (rec_path, _), ev = item
        rec = load_recording(rec_path, montage)
        if rec.subject_id != ev.subject_id:
            raise DataError(f"{os.path.basename(rec_path)}: subject id differs from its event file")
        return subject_records(rec, ev, montage, bp, fs, p.blink_threshold_uv, p.blink_pad_s,
                               only=wanted[ev.subject_id])

    # subjects fan out over threads, each loaded inside its worker to bound memory
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(work, todo))
    else:
        parts = [work(t) for t in todo]
    new = [q for part in parts for q in part]
    merged = dict(cached)
    merged.update({(q.subject_id, q.question_id): q for q in new})
    if new or bad or not os.path.exists(path):
        cache.write_cache(path, list(merged.values()))
    _write(os.path.join(os.path.dirname(path), "config.yaml"), dump_config(cfg))
    print(f"features key={os.path.basename(os.path.dirname(path))} computed={len(new)} reused={len(chosen) - len(new)}")
    return path


def cmd_evaluate(cfg, jobs=1):
    records = selected_records(cfg)
    e = cfg.evaluation
    reports = [evaluate(records, clf, cfg.features.k, e.seed, e.folds, cfg.label, jobs, e.runs, e.split)
               for clf in classifier_configs(cfg)]
    out = os.path.join(cfg.output.dir, "reports", _slug(cfg.label))
    doc = {"label": cfg.label, "config_hash": cfg.content_hash(), "reports": [r.to_dict() for r in reports]}
    _write(os.path.join(out, "report.json"), json.dumps(doc, indent=1, sort_keys=True) + "\n")
    folds = []
    for r in reports:
        text = r.folds_csv()
        if r.classifier["kind"] == "knn":
            lines = text.splitlines()
            text = "\n".join([f"K,{lines[0]}"] + [f"{r.classifier['K']},{ln}" for ln in lines[1:]]) + "\n"
            if folds:
                text = text.split("\n", 1)[1]
        folds.append(text)
    _write(os.path.join(out, "folds.csv"), "".join(folds))
    _write(os.path.join(out, "table.csv"), table_csv(reports))
    print(table_csv(reports), end="")
    return reports


def _sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "R", "G", "B"])
    for row in rows:
        w.writerow([row[0]] + [repr(v) for v in row[1:]])
    return buf.getvalue()


def cmd_compare(cfg_a, cfg_b, jobs=1, out_dir=None):
    out = os.path.join(out_dir or cfg_a.output.dir, "compare")
    names = [_slug(cfg_a.label), _slug(cfg_b.label)]
    if names[0] == names[1]:
        names = [names[0] + "_a", names[1] + "_b"]
    systems = []
    for cfg, name in zip((cfg_a, cfg_b), names):
        clf = _single_classifier(cfg)
        records = selected_records(cfg)
        e = cfg.evaluation
        acc = repeated_runs(records, clf, cfg.features.k, e.compare_runs, e.folds, e.seed, e.compare_fusion, jobs)
        rows = k_sweep(records, clf, e.k_sweep_max, e.seed, e.folds, jobs)
        _write(os.path.join(out, f"ksweep_{name}.csv"), _sweep_csv(rows))
        ks = [r[0] for r in rows]
        chart = line_chart(ks, {c: [r[i + 1] for r in rows] for i, c in enumerate("RGB")},
                           title=f"{cfg.label}: accuracy vs number of eigenvalues", xlabel="k",
                           ylabel="mean CV accuracy", y_range=(0.0, 1.0))
        _write(os.path.join(out, f"ksweep_{name}.svg"), chart)
        systems.append({"label": cfg.label, "config_hash": cfg.content_hash(), "classifier": clf.describe(),
                        "k": cfg.features.k, "fusion": e.compare_fusion, "runs": e.compare_runs,
                        "folds": e.folds, "seed": e.seed, "accuracies": acc})
    tt = compare_systems(systems[0]["accuracies"], systems[1]["accuracies"])
    doc = {"a": systems[0], "b": systems[1], "t_test": tt.to_dict(), "test": "Welch two-sided"}
    _write(os.path.join(out, "comparison.json"), json.dumps(doc, indent=1, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", names[0], names[1]])
    for i, (a, b) in enumerate(zip(systems[0]["accuracies"], systems[1]["accuracies"])):
        w.writerow([i, repr(a), repr(b)])
    _write(os.path.join(out, "accuracies.csv"), buf.getvalue())
    print(f"compare t={tt.t:.4f} df={tt.df:.2f} p={tt.p:.4f}")
    return doc


def cmd_times(cfgs, out_dir=None):
    """Mean±std answer time per condition and answer class (sample std)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "answer", "n", "mean_s", "std_s", "mean_pm_std"])
    notes = []
    for cfg in cfgs:
        logs = [load_events(ev) for _, ev in _subject_files(cfg.data_dir)]
        for ans in Answer:
            t = np.array([e.n_samples / ev.sample_rate_hz for ev in logs for e in ev.entries if e.answer == ans])
            if len(t) == 0:
                notes.append(f"{cfg.label}: no {ans.value} answers; row omitted")
                continue
            sd = float(np.std(t, ddof=1)) if len(t) > 1 else 0.0
            w.writerow([cfg.label, ans.value, len(t), repr(float(t.mean())), repr(sd), f"{t.mean():.1f}±{sd:.1f}"])
    out = os.path.join(out_dir or cfgs[0].output.dir, "times")
    _write(os.path.join(out, "times.csv"), buf.getvalue())
    _write(os.path.join(out, "notes.txt"), "".join(n + "\n" for n in notes))
    print(buf.getvalue(), end="")
    return buf.getvalue(), notes


# ------------------------------------------------------------------ entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="eigtopo", description="EEG topomap eigenvalue-feature pipeline")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("synth", "write a synthetic dataset"), ("features", "fill the spectra cache"),
                        ("evaluate", "cross-validated accuracy tables"),
                        ("compare", "repeated runs, t-test and k sweep for two systems"),
                        ("times", "answer-time summary")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML configuration file")
        if name in ("compare", "times"):
            p.add_argument("--config-b", help="second system's configuration")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--seed", type=int, help="overrides synth.rng_seed and evaluation.seed")
    return ap


def _load(path, args, relocate=True):
    ov = {}
    if relocate and args.out is not None:
        ov["output"] = {"dir": args.out}
    if args.seed is not None:
        ov["synth"] = {"rng_seed": args.seed}
        ov["evaluation"] = {"seed": args.seed}
    return load_config(path, ov)


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    # compare/times read each system from its own output.dir; --out only places their results
    own = args.command in ("compare", "times")
    cfg = _load(args.config, args, relocate=not own)
    if args.command == "synth":
        cmd_synth(cfg, args.jobs)
    elif args.command == "features":
        cmd_features(cfg, args.jobs)
    elif args.command == "evaluate":
        cmd_evaluate(cfg, args.jobs)
    elif args.command == "compare":
        if not args.config_b:
            raise ConfigError("compare needs --config-b")
        cmd_compare(cfg, _load(args.config_b, args, False), args.jobs, args.out)
    else:
        cfgs = [cfg] + ([_load(args.config_b, args, False)] if args.config_b else [])
        cmd_times(cfgs, args.out)
    return 0


def main(argv=None):
    warnings.simplefilter("default")
    try:
        return run(argv)
    except EigtopoError as exc:
        code, status, msg = exc.code, exc.exit_code, str(exc)
    except OSError as exc:
        code, status, msg = "io_error", DataError.exit_code, str(exc)
    except ValueError as exc:
        code, status, msg = "config_error", ConfigError.exit_code, str(exc)
    msg = " ".join(msg.split())
    print(f"error={code} {msg}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
