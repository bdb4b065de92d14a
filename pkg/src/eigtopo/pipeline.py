"""Per-question stage chain: preprocess -> topomaps -> per-channel Gram spectra."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .eigenfeat import DENSE_MAX, MAX_K, GramSpectrum, channel_spectra
from .evaluate import QuestionRecord
from .preprocess import BandpassSpec, preprocess
from .signal_model import slice_question
from .topomap import ScalpInterpolator, project_montage, render_stack


@dataclass(frozen=True)
class FeatureSettings:
    G: int = 40
    stride: int = 1
    dense_max: int = DENSE_MAX
    n_eig: int = MAX_K  # leading eigenvalues retained per channel
    solver_seed: int = 0


def subject_records(rec, ev, montage, bp=BandpassSpec(), fs=FeatureSettings(), threshold_uv=75.0, pad_s=0.2,
                    only=None):
    """QuestionRecords of one subject. Questions overlapping an excluded epoch are skipped.

    ``only`` restricts the work to a set of question ids.
    """
    exclude = None
    if ev.excluded_epochs:
        exclude = np.zeros(rec.n_samples, dtype=bool)
        for a, b in ev.excluded_epochs:
            exclude[a:b] = True
    clean = preprocess(rec, bp, threshold_uv, pad_s, exclude=exclude)
    eeg = list(clean.eeg_channels)
    pm = project_montage(montage.subset(eeg))
    interp = ScalpInterpolator(pm, fs.G)
    out = []
    for e in ev.entries:
        if ev.is_excluded(e) or (only is not None and e.question_id not in only):
            continue
        seg = slice_question(clean, ev, e.question_id)[eeg]
        stack = render_stack(seg, pm, fs.G, fs.stride, e.question_id, interp)
        spectra = channel_spectra(stack, fs.dense_max, fs.n_eig, fs.solver_seed)
        spectra = {c: _truncate(s, fs.n_eig) for c, s in spectra.items()}
        out.append(QuestionRecord(rec.subject_id, e.question_id, e.answer,
                                  e.n_samples / rec.sample_rate_hz, spectra))
    return out


def _truncate(spec, n_eig):
    if len(spec.eigenvalues) <= n_eig:
        return spec
    lam = np.array(spec.eigenvalues[:n_eig])
    lam.setflags(write=False)
    return GramSpectrum(lam, spec.side_used, spec.n, False)


def dataset_records(recordings, logs, montage, bp=BandpassSpec(), fs=FeatureSettings(), jobs=1, **kw):
    """All subjects' records, in input order regardless of ``jobs``."""
    pairs = list(zip(recordings, logs))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda p: subject_records(p[0], p[1], montage, bp, fs, **kw), pairs))
    else:
        parts = [subject_records(r, e, montage, bp, fs, **kw) for r, e in pairs]
    return [q for part in parts for q in part]
