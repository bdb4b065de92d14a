"""Pipeline configuration: one YAML file of sections, each a dataclass.

Precedence, lowest first: dataclass defaults, the YAML file, command-line
flags (``--out``, ``--seed``, ``--jobs``). Unknown sections or keys are
rejected. ``--seed`` overrides both ``synth.rng_seed`` and
``evaluation.seed``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .signal_model import ANSWER_TIMES


@dataclass
class DataSection:
    dir: str = ""  # recordings + event files; empty means <output.dir>/data


@dataclass
class SynthSection:
    n_subjects: int = 66
    n_questions: int = 20
    sample_rate_hz: float = 250.0
    class_separation: float = 1.0
    time_model: object = "2D-STM"  # preset name or {Correct: [mean, std], Incorrect: [mean, std]}
    correct_fraction: float = 0.5
    rng_seed: int = 0

    def resolved_time_model(self):
        tm = self.time_model
        if isinstance(tm, str):
            if tm not in ANSWER_TIMES:
                raise ConfigError(f"unknown time_model preset {tm!r}; choose from {sorted(ANSWER_TIMES)}")
            return {a.value: list(v) for a, v in ANSWER_TIMES[tm].items()}
        if not isinstance(tm, dict) or set(tm) != {"Correct", "Incorrect"}:
            raise ConfigError("synth.time_model needs a preset name or Correct/Incorrect [mean, std] pairs")
        return {k: [float(x) for x in v] for k, v in tm.items()}


@dataclass
class PreprocessSection:
    low_cut_hz: float = 1.0
    high_cut_hz: float = 48.0
    order: int = 4
    zero_phase: bool = True
    blink_threshold_uv: float = 75.0
    blink_pad_s: float = 0.2


@dataclass
class TopomapSection:
    G: int = 100
    stride: int = 1


@dataclass
class FeaturesSection:
    k: int = 3
    n_eig: int = 100  # leading eigenvalues kept in the cache; any k <= n_eig is free
    dense_max: int = 2000
    solver_seed: int = 0


@dataclass
class SelectionSection:
    n_per_class: int = 100


@dataclass
class ClassifierSection:
    kind: str = "svm"
    K: object = 5  # int, or a list of ints for a KNN table
    C_exponents: list = field(default_factory=lambda: [-5, 15, 2])  # start, stop (inclusive), step
    gamma_exponents: list = field(default_factory=lambda: [-15, 3, 2])
    inner_folds: int = 5
    tol: float = 1e-3

    def K_values(self):
        ks = self.K if isinstance(self.K, list) else [self.K]
        return [int(k) for k in ks]


@dataclass
class EvaluationSection:
    folds: int = 10
    split: str = "cv"  # "cv" (stratified folds) or "holdout" (one stratified 50:50 split per run)
    runs: int = 1
    seed: int = 0
    compare_runs: int = 3
    compare_fusion: str = "RGB"  # MajorityVote, R, G, B or RGB
    k_sweep_max: int = 100


@dataclass
class OutputSection:
    dir: str = "out"


SECTIONS = {
    "data": DataSection,
    "synth": SynthSection,
    "preprocess": PreprocessSection,
    "topomap": TopomapSection,
    "features": FeaturesSection,
    "selection": SelectionSection,
    "classifier": ClassifierSection,
    "evaluation": EvaluationSection,
    "output": OutputSection,
}


@dataclass
class PipelineConfig:
    label: str = "system"
    data: DataSection = field(default_factory=DataSection)
    synth: SynthSection = field(default_factory=SynthSection)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    topomap: TopomapSection = field(default_factory=TopomapSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    selection: SelectionSection = field(default_factory=SelectionSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self):
        return dataclasses.asdict(self)

    @property
    def data_dir(self):
        return self.data.dir or os.path.join(self.output.dir, "data")

    def feature_key(self, data_fingerprint=""):
        """Content hash of everything that determines the cached spectra (not k)."""
        d = self.to_dict()
        feats = dict(d["features"])
        feats.pop("k")
        payload = {"preprocess": d["preprocess"], "topomap": d["topomap"], "features": feats,
                   "data": data_fingerprint}
        return _digest(payload)

    def content_hash(self):
        """Hash of the settings that affect results; output and data locations are left out."""
        d = self.to_dict()
        d.pop("output")
        d.pop("data")
        return _digest(d)


def _digest(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _build_section(name, cls, raw):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    kw = {}
    for key, val in raw.items():
        default = known[key].default
        if default is dataclasses.MISSING:
            default = known[key].default_factory()
        kw[key] = val if known[key].type == "object" else _coerce(f"{name}.{key}", default, val)
    return cls(**kw)


def _coerce(where, default, val):
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{where} must be true or false")
        return val
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where} must be an integer")
        return val
    if isinstance(default, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(val)
    if isinstance(default, list) and not isinstance(val, list):
        raise ConfigError(f"{where} must be a list")
    if isinstance(default, str) and not isinstance(val, str):
        raise ConfigError(f"{where} must be a string")
    return val


def config_from_dict(raw):
    raw = dict(raw or {})
    unknown = sorted(set(raw) - set(SECTIONS) - {"label"})
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    label = raw.get("label", "system")
    if not isinstance(label, str) or not label:
        raise ConfigError("label must be a non-empty string")
    cfg = PipelineConfig(label=label, **{n: _build_section(n, c, raw.get(n)) for n, c in SECTIONS.items()})
    validate(cfg)
    return cfg


def load_config(path=None, overrides=None):
    """Defaults < YAML file < ``overrides`` (a dict of section -> {key: value})."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {str(exc).splitlines()[0]}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping of sections")
    for section, kv in (overrides or {}).items():
        merged = dict(raw.get(section) or {})
        merged.update(kv)
        raw[section] = merged
    return config_from_dict(raw)


def validate(cfg):
    s, t, f, c, e = cfg.synth, cfg.topomap, cfg.features, cfg.classifier, cfg.evaluation
    cfg.synth.resolved_time_model()
    checks = [
        (s.n_subjects >= 1 and s.n_questions >= 1, "synth.n_subjects and synth.n_questions must be >= 1"),
        (s.class_separation >= 0, "synth.class_separation must be >= 0"),
        (t.G >= 16, "topomap.G must be >= 16"),
        (t.stride >= 1, "topomap.stride must be >= 1"),
        (1 <= f.n_eig <= 100, "features.n_eig must lie in [1, 100]"),
        (1 <= f.k < 100 and f.k <= f.n_eig, "features.k must satisfy 1 <= k < 100 and k <= n_eig"),
        (f.dense_max >= 1, "features.dense_max must be >= 1"),
        (cfg.selection.n_per_class >= 1, "selection.n_per_class must be >= 1"),
        (c.kind in ("svm", "knn"), "classifier.kind must be 'svm' or 'knn'"),
        (all(k >= 1 for k in _ints(c.K)), "classifier.K must be positive integer(s)"),
        (len(c.C_exponents) == 3 and len(c.gamma_exponents) == 3, "grid exponents are [start, stop, step]"),
        (c.inner_folds >= 2, "classifier.inner_folds must be >= 2"),
        (e.folds >= 2, "evaluation.folds must be >= 2"),
        (e.split in ("cv", "holdout"), "evaluation.split must be 'cv' or 'holdout'"),
        (e.compare_fusion in ("MajorityVote", "R", "G", "B", "RGB"), "evaluation.compare_fusion is not a configuration"),
        (e.runs >= 1 and e.compare_runs >= 1, "evaluation.runs and evaluation.compare_runs must be >= 1"),
        (1 <= e.k_sweep_max <= f.n_eig, "evaluation.k_sweep_max must lie in [1, features.n_eig]"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    if any(x[2] <= 0 for x in (c.C_exponents, c.gamma_exponents)):
        raise ConfigError("grid exponent step must be positive")


def _ints(v):
    vals = v if isinstance(v, list) else [v]
    if not vals or any(isinstance(x, bool) or not isinstance(x, int) for x in vals):
        raise ConfigError("classifier.K must be an integer or a list of integers")
    return vals


def dump_config(cfg):
    """YAML text of a PipelineConfig or of one section."""
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=True)
