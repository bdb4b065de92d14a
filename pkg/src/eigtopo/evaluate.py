"""Question selection, stratified cross-validation, channel fusion and repeated runs."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import GridSearchSpec, fit_scaler, grid_search, knn_fit, knn_predict, svm_predict, svm_train
from .eigenfeat import MAX_K, top_k
from .errors import DataError
from .folds import stratified_folds
from .signal_model import Answer
from .stats import independent_t_test

FEATURE_SETS = ("R", "G", "B", "RGB")
CONFIGS = ("MajorityVote", "R", "G", "B", "RGB")
CORRECT, INCORRECT = 1, -1


@dataclass(frozen=True)
class QuestionRecord:
    subject_id: str
    question_id: str
    answer: Answer
    elapsed_s: float
    spectra: dict = field(default_factory=dict, compare=False)  # colour -> GramSpectrum

    @property
    def label(self):
        return CORRECT if self.answer == Answer.CORRECT else INCORRECT


@dataclass(frozen=True)
class SelectionPolicy:
    """Fastest Correct answers and slowest Incorrect answers, ``n_per_class`` each."""

    n_per_class: int = 100


def select_questions(pool, policy=SelectionPolicy()):
    n = policy.n_per_class
    correct = [r for r in pool if r.answer == Answer.CORRECT]
    wrong = [r for r in pool if r.answer == Answer.INCORRECT]
    for name, group in (("Correct", correct), ("Incorrect", wrong)):
        if len(group) < n:
            raise DataError(f"selection needs {n} {name} questions, pool has {len(group)}")
    correct.sort(key=lambda r: (r.elapsed_s, r.subject_id, r.question_id))
    wrong.sort(key=lambda r: (-r.elapsed_s, r.subject_id, r.question_id))
    return correct[:n] + wrong[:n]


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    rng_seed: int

    @property
    def n_folds(self):
        return len(self.folds)


def make_folds(labels, seed, n_folds=10):
    return FoldPlan(tuple(stratified_folds(labels, n_folds, seed)), int(seed))


def make_holdout(labels, seed):
    """Single stratified 50:50 train/test split, as a one-fold plan."""
    return FoldPlan((stratified_folds(labels, 2, seed)[0],), int(seed))


def rgb_concat(fr, fg, fb):
    """Per-sample concatenation in R, G, B order."""
    return np.hstack([np.atleast_2d(fr), np.atleast_2d(fg), np.atleast_2d(fb)])


def majority_vote(pred_r, pred_g, pred_b):
    s = np.asarray(pred_r) + np.asarray(pred_g) + np.asarray(pred_b)
    return np.where(s > 0, CORRECT, INCORRECT)


def feature_sets(records, k, k_limit=MAX_K):
    """{"R", "G", "B", "RGB"} -> (n_questions x dim) matrices of top-k eigenvalues."""
    out = {c: np.array([top_k(r.spectra[c], k, k_limit) for r in records]) for c in "RGB"}
    out["RGB"] = rgb_concat(out["R"], out["G"], out["B"])
    return out


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "svm"  # "svm" or "knn"
    K: int = 5
    grid: GridSearchSpec = GridSearchSpec()

    def describe(self):
        if self.kind == "knn":
            return {"kind": "knn", "K": self.K}
        return {"kind": "svm", "C_grid": list(self.grid.C_grid), "gamma_grid": list(self.grid.gamma_grid),
                "inner_folds": self.grid.inner_folds, "tol": self.grid.tol}


def _sub_seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def fit_predict(X_train, y_train, X_test, clf, seed=0):
    """Scale on the training split, tune if SVM, predict the test split.

    Returns ``(predictions, params)`` where params is the chosen (C, gamma) or None.
    """
    if clf.kind == "knn":
        sc = fit_scaler(X_train)
        return knn_predict(knn_fit(sc.apply(X_train), y_train, clf.K), sc.apply(X_test)), None
    if clf.kind != "svm":
        raise ValueError(f"unknown classifier {clf.kind!r}")
    C, gamma = grid_search(X_train, y_train, clf.grid, seed=seed)
    sc = fit_scaler(X_train)
    model = svm_train(sc.apply(X_train), y_train, C, gamma, tol=clf.grid.tol)
    return svm_predict(model, sc.apply(X_test)), (C, gamma)


@dataclass
class CvResult:
    accuracies: dict  # config -> list of per-fold accuracies
    params: dict  # feature set -> list of per-fold (C, gamma) or None


def run_cv(features, labels, clf, plan, jobs=1, sets=FEATURE_SETS):
    """Per-fold accuracy of each feature set plus the R/G/B majority vote.

    Everything fitted inside a fold (scaler, grid search, model) sees only
    that fold's training indices.
    """
    y = np.asarray(labels)
    n = len(y)
    tasks = [(f, s) for f in range(plan.n_folds) for s in sets]

    def work(task):
        f, s = task
        test = plan.folds[f]
        train = np.setdiff1d(np.arange(n), test)
        X = features[s]
        return fit_predict(X[train], y[train], X[test], clf, seed=_sub_seed(plan.rng_seed, f))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    preds = {t: r[0] for t, r in zip(tasks, results)}
    acc = {s: [] for s in sets}
    params = {s: [] for s in sets}
    if set("RGB") <= set(sets):
        acc["MajorityVote"] = []
    for f in range(plan.n_folds):
        yt = y[plan.folds[f]]
        for s in sets:
            acc[s].append(float(np.mean(preds[(f, s)] == yt)))
            p = results[tasks.index((f, s))][1]
            params[s].append(list(p) if p is not None else None)
        if "MajorityVote" in acc:
            mv = majority_vote(preds[(f, "R")], preds[(f, "G")], preds[(f, "B")])
            acc["MajorityVote"].append(float(np.mean(mv == yt)))
    return CvResult(acc, params)


@dataclass
class EvaluationReport:
    system: str
    classifier: dict
    k: int
    seed: int
    n_questions: int
    fold_accuracies: dict  # configuration -> accuracies, run-major (runs x n_folds values)
    n_folds: int = 10
    selected_params: dict = field(default_factory=dict)
    std_convention: str = "sample (n-1)"

    def summary(self):
        return {c: {"mean": float(np.mean(v)), "std": float(np.std(v, ddof=1)) if len(v) > 1 else 0.0}
                for c, v in self.fold_accuracies.items()}

    def to_dict(self):
        return {
            "system": self.system,
            "classifier": self.classifier,
            "k": self.k,
            "seed": self.seed,
            "n_questions": self.n_questions,
            "n_folds": self.n_folds,
            "n_runs": len(next(iter(self.fold_accuracies.values()))) // self.n_folds,
            "std_convention": self.std_convention,
            "fold_accuracies": self.fold_accuracies,
            "summary": self.summary(),
            "selected_params": self.selected_params,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def folds_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [c for c in CONFIGS if c in self.fold_accuracies]
        w.writerow(["run", "fold"] + cols)
        for i in range(len(self.fold_accuracies[cols[0]])):
            w.writerow([i // self.n_folds, i % self.n_folds] + [repr(self.fold_accuracies[c][i]) for c in cols])
        return buf.getvalue()


def format_pct(mean, std):
    return f"{100 * mean:.1f}±{100 * std:.1f}"


def evaluate(records, clf, k, seed, n_folds=10, system="", jobs=1, runs=1, split="cv"):
    """CV report; run r uses seed + r and fold accuracies are concatenated run-major.

    ``split="holdout"`` replaces the folds by one stratified 50:50 split per run.
    """
    if split not in ("cv", "holdout"):
        raise ValueError(f"unknown split {split!r}")
    labels = np.array([r.label for r in records])
    feats = feature_sets(records, k)
    acc, params = {}, {}
    for r in range(runs):
        plan = make_folds(labels, seed + r, n_folds) if split == "cv" else make_holdout(labels, seed + r)
        res = run_cv(feats, labels, clf, plan, jobs)
        for c, v in res.accuracies.items():
            acc.setdefault(c, []).extend(v)
        for s, v in res.params.items():
            params.setdefault(s, []).extend(v)
    params = {s: v for s, v in params.items() if any(p is not None for p in v)}
    n = n_folds if split == "cv" else 1
    return EvaluationReport(system, clf.describe(), k, int(seed), len(records), acc, n, params)


def table_csv(reports):
    """Mean±std percentages. SVM: one row, columns Majority Vote, R, G, B, RGB.
    KNN: one row per K, columns K, R, G, B, RGB."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if reports[0].classifier["kind"] == "knn":
        w.writerow(["K", "R", "G", "B", "RGB"])
        for rep in reports:
            s = rep.summary()
            w.writerow([rep.classifier["K"]] + [format_pct(s[c]["mean"], s[c]["std"]) for c in FEATURE_SETS])
    else:
        w.writerow(["Majority Vote", "R", "G", "B", "RGB"])
        for rep in reports:
            s = rep.summary()
            w.writerow([format_pct(s[c]["mean"], s[c]["std"]) for c in CONFIGS])
    return buf.getvalue()


def repeated_runs(records, clf, k, n_runs=3, n_folds=10, base_seed=0, fusion="RGB", jobs=1):
    """Concatenated per-fold accuracies of ``n_runs`` CV runs; run r uses seed base_seed + r."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    labels = np.array([r.label for r in records])
    feats = feature_sets(records, k)
    sets = FEATURE_SETS if fusion == "MajorityVote" else (fusion,)
    out = []
    for r in range(n_runs):
        res = run_cv(feats, labels, clf, make_folds(labels, base_seed + r, n_folds), jobs, sets)
        out.extend(res.accuracies[fusion])
    return out


def k_sweep(records, clf, k_max=100, seed=0, n_folds=10, jobs=1):
    """Mean CV accuracy for k = 1..k_max, per colour channel. Rows: (k, R, G, B)."""
    labels = np.array([r.label for r in records])
    plan = make_folds(labels, seed, n_folds)
    short = min(min(s.n for s in r.spectra.values()) for r in records)
    if short - 1 < k_max:
        raise DataError(f"k sweep to {k_max} needs >= {k_max + 1} topomaps per question; "
                        f"shortest question has {short} (lower the stride)")
    rows = []
    for k in range(1, k_max + 1):
        feats = feature_sets(records, k, k_limit=k_max + 1)
        res = run_cv(feats, labels, clf, plan, jobs, sets=("R", "G", "B"))
        rows.append((k,) + tuple(float(np.mean(res.accuracies[c])) for c in "RGB"))
    return rows


def compare_systems(acc_a, acc_b):
    return independent_t_test(acc_a, acc_b)
