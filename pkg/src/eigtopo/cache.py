"""Spectra cache: one tab-separated record per (subject, question, colour channel).

File layout (``spectra.tsv``)::

    # eigtopo-spectra v1
    subject  question  channel  answer  elapsed_s  n_frames  side  complete  n_eig  eigenvalues  crc32

``eigenvalues`` is a comma-separated list of ``repr`` floats (lossless), in
descending order. ``crc32`` is the zlib CRC-32, as 8 hex digits, of the
preceding ten fields joined by tabs. Records are sorted by
(subject, question, channel) so identical content gives identical bytes.
The directory name is the configuration content hash, so a changed
configuration never reads stale records.
"""
from __future__ import annotations

import os
import warnings
import zlib

import numpy as np

from .eigenfeat import GramSpectrum
from .errors import DataError
from .evaluate import QuestionRecord
from .signal_model import Answer

HEADER = "# eigtopo-spectra v1"
COLUMNS = ("subject", "question", "channel", "answer", "elapsed_s", "n_frames", "side", "complete", "n_eig",
           "eigenvalues", "crc32")
FILENAME = "spectra.tsv"


def cache_dir(out_dir, key):
    return os.path.join(out_dir, "features", key)


def _line(fields):
    body = "\t".join(fields)
    return f"{body}\t{zlib.crc32(body.encode()):08x}"


def encode_record(q):
    lines = []
    for color in "RGB":
        s = q.spectra[color]
        lam = ",".join(repr(float(v)) for v in s.eigenvalues)
        lines.append(_line([q.subject_id, q.question_id, color, q.answer.value, repr(float(q.elapsed_s)),
                            str(s.n), s.side_used, "1" if s.complete else "0", str(len(s.eigenvalues)), lam]))
    return lines


def _parse(line):
    parts = line.split("\t")
    if len(parts) != len(COLUMNS):
        raise ValueError("wrong field count")
    body = "\t".join(parts[:-1])
    if f"{zlib.crc32(body.encode()):08x}" != parts[-1]:
        raise ValueError("checksum mismatch")
    subj, qid, color, ans, elapsed, n, side, complete, n_eig, lam = parts[:-1]
    vals = np.array([float(v) for v in lam.split(",")]) if lam else np.empty(0)
    if color not in "RGB" or len(color) != 1 or len(vals) != int(n_eig) or side not in ("gram_n", "covariance_d"):
        raise ValueError("inconsistent record")
    vals.setflags(write=False)
    return (subj, qid), color, Answer(ans), float(elapsed), GramSpectrum(vals, side, int(n), complete == "1")


def read_cache(path):
    """(records by (subject, question), keys of corrupt records). Missing file -> empty."""
    if not os.path.exists(path):
        return {}, set()
    partial = {}
    bad = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                key, color, ans, elapsed, spec = _parse(line)
            except (ValueError, KeyError) as exc:
                fields = line.split("\t")
                key = tuple(fields[:2]) if len(fields) >= 2 else None
                warnings.warn(f"{os.path.basename(path)} line {lineno}: corrupt cache record ({exc}); recomputing")
                if key is not None:
                    bad.add(key)
                continue
            entry = partial.setdefault(key, {"answer": ans, "elapsed": elapsed, "spectra": {}})
            entry["spectra"][color] = spec
    records = {}
    for key, e in partial.items():
        if key in bad or set(e["spectra"]) != set("RGB"):
            bad.add(key)
            continue
        records[key] = QuestionRecord(key[0], key[1], e["answer"], e["elapsed"], e["spectra"])
    return records, bad


def write_cache(path, records):
    """Atomically write all records in canonical order."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    ordered = sorted(records, key=lambda q: (q.subject_id, q.question_id))
    tmp = path + ".tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(HEADER + "\n")
        fh.write("#" + "\t".join(COLUMNS) + "\n")
        for q in ordered:
            for line in encode_record(q):
                fh.write(line + "\n")
    os.replace(tmp, path)


def load_records(path):
    """Cached records in canonical order; a missing or empty cache is a DataError."""
    records, _ = read_cache(path)
    if not records:
        raise DataError(f"feature cache {path} is empty or missing; run the 'features' command first")
    return [records[k] for k in sorted(records)]
