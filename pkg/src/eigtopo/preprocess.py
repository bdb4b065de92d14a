"""Band-pass filtering and regression-based ocular artifact removal."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ChannelMismatchError, ConfigError, DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandpassSpec:
    low_cut_hz: float = 1.0
    high_cut_hz: float = 48.0
    order: int = 4
    zero_phase: bool = True

    def check(self, sample_rate_hz):
        nyq = sample_rate_hz / 2.0
        if not 0 < self.low_cut_hz < self.high_cut_hz < nyq:
            raise ConfigError(
                f"band-pass needs 0 < low ({self.low_cut_hz}) < high ({self.high_cut_hz}) < Nyquist ({nyq})"
            )
        if self.order < 1:
            raise ConfigError("filter order must be >= 1")


def design_bandpass(spec, sample_rate_hz):
    """Butterworth band-pass as second-order sections."""
    spec.check(sample_rate_hz)
    return signal.butter(spec.order, [spec.low_cut_hz, spec.high_cut_hz], btype="bandpass",
                         fs=sample_rate_hz, output="sos")


def magnitude_response(spec, sample_rate_hz, freqs_hz):
    """Gain of the applied filter at ``freqs_hz`` (squared when zero-phase)."""
    sos = design_bandpass(spec, sample_rate_hz)
    _, h = signal.sosfreqz(sos, worN=np.atleast_1d(freqs_hz), fs=sample_rate_hz)
    g = np.abs(h)
    return g ** 2 if spec.zero_phase else g


def filter_array(x, spec, sample_rate_hz):
    """Filter along the last axis."""
    sos = design_bandpass(spec, sample_rate_hz)
    x = np.asarray(x, dtype=np.float64)
    if not spec.zero_phase:
        return signal.sosfilt(sos, x, axis=-1)
    # odd reflection over three filter lengths at each edge
    padlen = min(3 * (2 * len(sos) + 1), x.shape[-1] - 1)
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="odd", padlen=padlen)


def bandpass(rec, spec=BandpassSpec()):
    return rec.with_data(filter_array(rec.data, spec, rec.sample_rate_hz))


@dataclass(frozen=True)
class OcularModel:
    """Per-channel propagation of the EOG reference into each EEG channel."""

    propagation: np.ndarray
    eog_channels: tuple

    def __post_init__(self):
        b = np.asarray(self.propagation, dtype=np.float64)
        if not np.all(np.isfinite(b)):
            raise DataError("ocular propagation coefficients must be finite")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "propagation", b)


def eog_reference(data, eog_channels):
    return np.asarray(data, dtype=np.float64)[list(eog_channels)].mean(axis=0)


def blink_mask(eog, sample_rate_hz, threshold_uv=75.0, pad_s=0.2):
    """Samples within ``pad_s`` of any |EOG| excursion above ``threshold_uv``."""
    hot = np.abs(eog - np.median(eog)) > threshold_uv
    if not hot.any():
        return hot
    pad = int(round(pad_s * sample_rate_hz))
    kernel = np.ones(2 * pad + 1)
    return np.convolve(hot.astype(float), kernel, mode="same") > 0


def fit_ocular_model(rec, threshold_uv=75.0, pad_s=0.2, blink_epochs=True, exclude=None):
    """Least-squares propagation b_c = cov(EEG_c, EOG) / var(EOG).

    With ``blink_epochs`` the covariances use only blink-flagged samples,
    falling back to the whole record when no blink crosses the threshold.
    ``exclude`` is an optional boolean mask of samples to leave out.
    """
    if not rec.eog_channels:
        raise DataError("recording has no EOG channels")
    data = np.asarray(rec.data, dtype=np.float64)
    eog = eog_reference(data, rec.eog_channels)
    use = np.ones(rec.n_samples, dtype=bool)
    if exclude is not None:
        use &= ~np.asarray(exclude, dtype=bool)
    if blink_epochs:
        blinks = blink_mask(eog, rec.sample_rate_hz, threshold_uv, pad_s) & use
        if blinks.sum() > 1:
            use = blinks
        else:
            log.info("%s: no blink epochs above %.0f uV, regressing on the whole record",
                     rec.subject_id, threshold_uv)
    e = eog[use] - eog[use].mean()
    var = e @ e
    if not var > 0:
        raise DataError(f"{rec.subject_id}: EOG reference has zero variance")
    x = data[:, use]
    x = x - x.mean(axis=1, keepdims=True)
    b = (x @ e) / var
    flat = ~(x.any(axis=1))
    for c in np.flatnonzero(flat):
        if c not in rec.eog_channels:
            log.warning("%s: channel %d has zero variance, left uncorrected", rec.subject_id, c)
    b[flat] = 0.0
    b[list(rec.eog_channels)] = 0.0
    return OcularModel(b, tuple(rec.eog_channels))


def remove_ocular(rec, model):
    if model.propagation.shape[0] != rec.n_channels:
        raise ChannelMismatchError("ocular model and recording disagree on channel count")
    data = np.asarray(rec.data, dtype=np.float64)
    eog = eog_reference(data, model.eog_channels)
    return rec.with_data(data - model.propagation[:, None] * eog[None, :])


def preprocess(rec, spec=BandpassSpec(), threshold_uv=75.0, pad_s=0.2, exclude=None):
    """Band-pass then ocular correction, the cleaning order used before rendering."""
    filtered = bandpass(rec, spec)
    if not rec.eog_channels:
        return filtered
    return remove_ocular(filtered, fit_ocular_model(filtered, threshold_uv, pad_s, exclude=exclude))
