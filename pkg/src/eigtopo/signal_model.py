"""EEG data model, on-disk formats and the synthetic dataset generator.

Recording container (version 1), all little-endian::

    offset  size  field
    0       4     magic b"EEGB"
    4       2     version (uint16) = 1
    6       2     reserved (uint16) = 0
    8       4     channel count (uint32)
    12      8     sample count (uint64)
    20      8     sample rate in Hz (float64)
    28      4     metadata length L (uint32)
    32      L     UTF-8 JSON: {"subject_id", "montage_ref", "eog_channels"}
    32+L    ...   float32 samples in microvolts, channel-major

Event sidecar (JSON)::

    {"format": "eigtopo-events", "version": 1, "subject_id": ...,
     "sample_rate_hz": 250.0,
     "events": [{"question_id", "start_sample", "end_sample", "answer"}, ...],
     "excluded_epochs": [[start, end], ...]}

``end_sample`` is exclusive. ``answer`` is "Correct" or "Incorrect".
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft
from scipy import signal

from .errors import ChannelMismatchError, ConfigError, EventError, HeaderError, NonFiniteError

MAGIC = b"EEGB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIQdI")

MAX_ANSWER_S = 30.0
MIN_ANSWER_S = 0.5
DEFAULT_MONTAGE = "geodesic128_v1"


class Answer(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"


# Answer-time (mean_s, std_s) per condition and class, Tables 1 and 2.
ANSWER_TIMES = {
    "2D-STM": {Answer.CORRECT: (8.8, 4.6), Answer.INCORRECT: (11.6, 5.6)},
    "2D-LTM": {Answer.CORRECT: (10.8, 4.7), Answer.INCORRECT: (12.6, 6.1)},
    "3D-STM": {Answer.CORRECT: (8.5, 4.2), Answer.INCORRECT: (10.9, 5.9)},
    "3D-LTM": {Answer.CORRECT: (9.6, 4.2), Answer.INCORRECT: (12.2, 6.5)},
}


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Montage:
    labels: tuple
    positions: np.ndarray
    ref: str = DEFAULT_MONTAGE

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] != len(self.labels):
            raise ConfigError("montage positions must be (n_channels, 3) matching labels")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("montage labels must be unique")
        norms = np.linalg.norm(pos, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-9)
        if bad.size:
            raise ConfigError(f"electrode {self.labels[bad[0]]} is not on the unit sphere")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "positions", _readonly(pos))

    @property
    def count(self):
        return len(self.labels)

    def subset(self, indices):
        idx = list(indices)
        return Montage(tuple(self.labels[i] for i in idx), self.positions[idx], self.ref)


def load_montage(path=None):
    """Read a ``label,x,y,z`` CSV; ``None`` loads the shipped 128-channel net."""
    if path is None:
        text = resources.files("eigtopo").joinpath(f"data/{DEFAULT_MONTAGE}.csv").read_text()
        ref = DEFAULT_MONTAGE
    else:
        path = Path(path)
        text = path.read_text()
        ref = path.stem
    rows = [ln.split(",") for ln in text.strip().splitlines()]
    if [c.strip() for c in rows[0]] != ["label", "x", "y", "z"]:
        raise ConfigError("montage CSV header must be label,x,y,z")
    labels = tuple(r[0].strip() for r in rows[1:])
    pos = np.array([[float(v) for v in r[1:4]] for r in rows[1:]])
    return Montage(labels, pos, ref)


def default_eog_channels(montage):
    """Most anterior electrode below the equator on each side of the midline."""
    pos = montage.positions
    low = pos[:, 2] < 0
    chosen = []
    for side in (pos[:, 0] < 0, pos[:, 0] > 0):
        cand = np.flatnonzero(low & side)
        if cand.size == 0:
            cand = np.flatnonzero(side)
        chosen.append(int(cand[np.argmax(pos[cand, 1])]))
    return tuple(sorted(chosen))


@dataclass(frozen=True)
class Recording:
    subject_id: str
    sample_rate_hz: float
    data: np.ndarray
    montage_ref: str = DEFAULT_MONTAGE
    eog_channels: tuple = ()

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ChannelMismatchError("recording data must be channels x samples")
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        _check_finite(data)
        eog = tuple(int(c) for c in self.eog_channels)
        if any(c < 0 or c >= data.shape[0] for c in eog):
            raise ChannelMismatchError("EOG channel index out of range")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "eog_channels", eog)

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def eeg_channels(self):
        eog = set(self.eog_channels)
        return tuple(c for c in range(self.n_channels) if c not in eog)

    def with_data(self, data):
        return Recording(self.subject_id, self.sample_rate_hz, data, self.montage_ref, self.eog_channels)


def _check_finite(data):
    bad = ~np.isfinite(data)
    if bad.any():
        ch, t = np.argwhere(bad)[0]
        raise NonFiniteError(f"non-finite sample at channel {ch}, sample {t}")


@dataclass(frozen=True)
class Event:
    question_id: str
    start_sample: int
    end_sample: int
    answer: Answer

    @property
    def n_samples(self):
        return self.end_sample - self.start_sample


@dataclass(frozen=True)
class EventLog:
    subject_id: str
    sample_rate_hz: float
    entries: tuple
    excluded_epochs: tuple = ()

    def __post_init__(self):
        entries = tuple(
            Event(str(e.question_id), int(e.start_sample), int(e.end_sample), Answer(e.answer))
            for e in self.entries
        )
        cap = int(round(MAX_ANSWER_S * self.sample_rate_hz))
        seen = set()
        prev_end = None
        for e in entries:
            if not 0 <= e.start_sample < e.end_sample:
                raise EventError(f"question {e.question_id}: need 0 <= start < end")
            if e.n_samples > cap:
                raise EventError(f"question {e.question_id}: segment longer than {MAX_ANSWER_S:g} s")
            if prev_end is not None and e.start_sample < prev_end:
                raise EventError(f"question {e.question_id}: events overlap or are unsorted")
            if e.question_id in seen:
                raise EventError(f"duplicate question id {e.question_id}")
            seen.add(e.question_id)
            prev_end = e.end_sample
        excl = tuple((int(a), int(b)) for a, b in self.excluded_epochs)
        if any(a >= b for a, b in excl):
            raise EventError("excluded epoch with start >= end")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "excluded_epochs", excl)

    def get(self, question_id):
        for e in self.entries:
            if e.question_id == question_id:
                return e
        raise EventError(f"unknown question id {question_id!r}")

    def is_excluded(self, event):
        return any(a < event.end_sample and event.start_sample < b for a, b in self.excluded_epochs)


def write_recording(path, rec):
    meta = json.dumps(
        {"subject_id": rec.subject_id, "montage_ref": rec.montage_ref, "eog_channels": list(rec.eog_channels)},
        sort_keys=True,
    ).encode()
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, rec.n_channels, rec.n_samples, float(rec.sample_rate_hz), len(meta))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(meta)
        fh.write(np.ascontiguousarray(rec.data, dtype="<f4").tobytes())


def load_recording(path, montage):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise HeaderError(f"{path}: truncated header")
    magic, version, _, n_ch, n_s, rate, meta_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HeaderError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise HeaderError(f"{path}: unsupported version {version}")
    try:
        meta = json.loads(raw[_HEADER.size:_HEADER.size + meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"{path}: unreadable metadata block") from exc
    if n_ch != montage.count:
        raise ChannelMismatchError(f"{path}: file has {n_ch} channels, montage has {montage.count}")
    offset = _HEADER.size + meta_len
    if len(raw) - offset != 4 * n_ch * n_s:
        raise HeaderError(f"{path}: payload size does not match header")
    data = np.frombuffer(raw, dtype="<f4", offset=offset).reshape(n_ch, n_s).astype(np.float32)
    _check_finite(data)
    return Recording(
        subject_id=meta.get("subject_id", Path(path).stem),
        sample_rate_hz=rate,
        data=data,
        montage_ref=meta.get("montage_ref", montage.ref),
        eog_channels=tuple(meta.get("eog_channels", ())),
    )


def write_events(path, ev):
    doc = {
        "format": "eigtopo-events",
        "version": FORMAT_VERSION,
        "subject_id": ev.subject_id,
        "sample_rate_hz": ev.sample_rate_hz,
        "events": [
            {"question_id": e.question_id, "start_sample": e.start_sample,
             "end_sample": e.end_sample, "answer": e.answer.value}
            for e in ev.entries
        ],
        "excluded_epochs": [list(x) for x in ev.excluded_epochs],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_events(path):
    try:
        doc = json.loads(Path(path).read_text())
        entries = [Event(d["question_id"], d["start_sample"], d["end_sample"], Answer(d["answer"]))
                   for d in doc["events"]]
        return EventLog(doc["subject_id"], float(doc["sample_rate_hz"]), tuple(entries),
                        tuple(tuple(x) for x in doc.get("excluded_epochs", [])))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, EventError):
            raise
        raise EventError(f"{path}: malformed event file ({exc})") from exc


def slice_question(rec, ev, question_id):
    """Channels x time block for one question, columns [start, end)."""
    e = ev.get(question_id)
    if e.end_sample > rec.n_samples:
        raise EventError(f"question {question_id}: ends at {e.end_sample}, recording has {rec.n_samples} samples")
    return rec.data[:, e.start_sample:e.end_sample]


# ---------------------------------------------------------------- synthesis


@dataclass(frozen=True)
class SynthesisConfig:
    """Knobs of the artificial cohort.

    ``class_separation`` moves the Correct-class source powers from the shared
    baseline (0) towards a single dominant spatial pattern (1 and above,
    saturating). ``time_model`` maps answer -> (mean_s, std_s); a zero std
    gives constant durations.
    """

    n_subjects: int = 66
    n_questions: int = 20
    sample_rate_hz: float = 250.0
    class_separation: float = 1.0
    time_model: dict = field(default_factory=lambda: dict(ANSWER_TIMES["2D-STM"]))
    rng_seed: int = 0
    correct_fraction: float = 0.5
    n_patterns: int = 6
    source_uv: float = 15.0
    background_uv: float = 4.0
    blink_rate_hz: float = 0.2
    blink_uv: float = 150.0
    gap_s: float = 1.5

    def __post_init__(self):
        tm = {Answer(k): (float(v[0]), float(v[1])) for k, v in dict(self.time_model).items()}
        object.__setattr__(self, "time_model", tm)
        if self.n_subjects < 1 or self.n_questions < 1:
            raise ConfigError("n_subjects and n_questions must be >= 1")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if not self.class_separation >= 0:
            raise ConfigError("class_separation must be >= 0")
        if not 0.0 <= self.correct_fraction <= 1.0:
            raise ConfigError("correct_fraction must lie in [0, 1]")
        if set(tm) != set(Answer):
            raise ConfigError("time_model needs entries for Correct and Incorrect")
        for mean, std in tm.values():
            if not (MIN_ANSWER_S < mean <= MAX_ANSWER_S) or std < 0:
                raise ConfigError("time_model means must lie in (0.5, 30] s with std >= 0")
        if self.n_patterns < 2:
            raise ConfigError("n_patterns must be >= 2")


def draw_answer_times(mean_s, std_s, size, rng):
    """Gamma-distributed answer times with the given moments, clipped to (0.5, 30] s."""
    if std_s == 0:
        t = np.full(size, float(mean_s))
    else:
        shape = (mean_s / std_s) ** 2
        t = rng.gamma(shape, std_s ** 2 / mean_s, size=size)
    return np.clip(t, np.nextafter(MIN_ANSWER_S, np.inf), MAX_ANSWER_S)


def _duration_samples(t, rate):
    lo = int(math.floor(MIN_ANSWER_S * rate)) + 1
    return np.clip(np.round(t * rate).astype(np.int64), lo, int(round(MAX_ANSWER_S * rate)))


def _great_circle(a, b):
    return np.arccos(np.clip(a @ b.T, -1.0, 1.0))


def spatial_patterns(montage, n_patterns, rng):
    """Unit-norm dipolar blobs over the scalp, one per latent source."""
    pos = montage.positions
    upper = np.flatnonzero(pos[:, 2] > 0.2)
    pats = []
    for _ in range(n_patterns):
        a, b = rng.choice(upper, size=2, replace=False)
        da = _great_circle(pos, pos[[a]])[:, 0]
        db = _great_circle(pos, pos[[b]])[:, 0]
        p = np.exp(-(da / 0.45) ** 2) - 0.8 * np.exp(-(db / 0.45) ** 2)
        pats.append(p / np.linalg.norm(p))
    return np.array(pats).T  # channels x patterns


def class_source_powers(n_patterns, separation):
    """Per-source variances for both classes. Equal at separation 0, total power fixed."""
    base = np.ones(n_patterns)
    focused = np.full(n_patterns, 0.1)
    focused[0] = n_patterns - 0.1 * (n_patterns - 1)
    t = min(float(separation), 1.0)
    return {Answer.CORRECT: (1 - t) * base + t * focused, Answer.INCORRECT: base.copy()}


def _ar2_sources(n_sources, n_samples, rate, freqs, rng):
    out = np.empty((n_sources, n_samples))
    burn = int(rate)
    for j, f in enumerate(freqs):
        r = 0.96
        a = [1.0, -2 * r * np.cos(2 * np.pi * f / rate), r * r]
        x = signal.lfilter([1.0], a, rng.standard_normal(n_samples + burn))[burn:]
        out[j] = x / x.std()
    return out


def _pink_noise(n_channels, n_samples, rng):
    n_fft = sp_fft.next_fast_len(n_samples, real=True)
    spec = sp_fft.rfft(rng.standard_normal((n_channels, n_fft)), axis=1)
    f = np.arange(spec.shape[1], dtype=float)
    f[0] = 1.0
    x = sp_fft.irfft(spec / np.sqrt(f), n=n_fft, axis=1)[:, :n_samples]
    return x / x.std(axis=1, keepdims=True)


def _blink_train(n_samples, rate, blink_rate, rng):
    n_blinks = rng.poisson(blink_rate * n_samples / rate)
    centers = rng.uniform(0, n_samples, size=n_blinks)
    t = np.arange(n_samples)
    width = 0.1 * rate
    out = np.zeros(n_samples)
    for c in centers:
        lo, hi = int(max(c - 5 * width, 0)), int(min(c + 5 * width, n_samples))
        out[lo:hi] += np.exp(-0.5 * ((t[lo:hi] - c) / width) ** 2)
    return out


def _synthesize_subject(idx, cfg, montage, patterns, freqs, eog, seed):
    rng = np.random.default_rng(seed)
    rate = cfg.sample_rate_hz
    n_correct = int(round(cfg.correct_fraction * cfg.n_questions))
    is_correct = np.arange(cfg.n_questions) < n_correct
    is_correct = is_correct[rng.permutation(cfg.n_questions)]
    answers = [Answer.CORRECT if c else Answer.INCORRECT for c in is_correct]
    durations = np.empty(cfg.n_questions, dtype=np.int64)
    for ans, mask in ((Answer.CORRECT, is_correct), (Answer.INCORRECT, ~is_correct)):
        mean, std = cfg.time_model[ans]
        durations[mask] = _duration_samples(draw_answer_times(mean, std, int(mask.sum()), rng), rate)

    gap = int(round(cfg.gap_s * rate))
    starts = gap + np.concatenate([[0], np.cumsum(durations + gap)[:-1]])
    total = int(starts[-1] + durations[-1] + gap)
    powers = class_source_powers(patterns.shape[1], cfg.class_separation)

    gains = np.ones((patterns.shape[1], total))  # rest periods run at baseline power
    for ans, s, d in zip(answers, starts, durations):
        gains[:, s:s + d] = np.sqrt(powers[ans])[:, None]
    sources = _ar2_sources(patterns.shape[1], total, rate, freqs, rng) * gains
    brain = cfg.source_uv * (patterns @ sources) + cfg.background_uv * _pink_noise(montage.count, total, rng)

    eye = cfg.blink_uv * _blink_train(total, rate, cfg.blink_rate_hz, rng)
    eye_pos = montage.positions[list(eog)].mean(axis=0, keepdims=True)
    eye_pos /= np.linalg.norm(eye_pos)
    spread = 0.8 * np.exp(-_great_circle(montage.positions, eye_pos)[:, 0] / 0.5)
    spread[list(eog)] = 1.0
    data = brain + spread[:, None] * eye[None, :]

    sid = f"S{idx + 1:03d}"
    rec = Recording(sid, rate, data.astype(np.float32), montage.ref, eog)
    entries = tuple(
        Event(f"Q{q + 1:02d}", int(s), int(s + d), ans)
        for q, (ans, s, d) in enumerate(zip(answers, starts, durations))
    )
    return rec, EventLog(sid, rate, entries)


def synthesize_dataset(cfg, montage=None):
    """Deterministic artificial cohort: one (Recording, EventLog) pair per subject."""
    montage = montage or load_montage()
    root = np.random.SeedSequence(cfg.rng_seed)
    shared_seed, *subject_seeds = root.spawn(cfg.n_subjects + 1)
    shared = np.random.default_rng(shared_seed)
    patterns = spatial_patterns(montage, cfg.n_patterns, shared)
    freqs = shared.uniform(6.0, 14.0, size=cfg.n_patterns)
    eog = default_eog_channels(montage)
    recs, logs = [], []
    for i, seed in enumerate(subject_seeds):
        rec, ev = _synthesize_subject(i, cfg, montage, patterns, freqs, eog, seed)
        recs.append(rec)
        logs.append(ev)
    return recs, logs
