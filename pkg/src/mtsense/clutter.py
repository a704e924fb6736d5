"""Zero-Doppler clutter suppression and the beam-scan search spectrum.

Stationary scatterers produce echoes that are constant along the symbol axis,
so a high-pass IIR filter applied along p removes them while a moving target's
Doppler tone passes through with near unit gain. The per-beam average residual
power P(b) then peaks at beams containing moving targets.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .beams import BeamPlan, g_tilde
from .echo import EchoTensor

DEFAULT_ORDER = 2
DEFAULT_CUTOFF = 0.04


@dataclass(frozen=True)
class IirFilter:
    """Designed high-pass filter. den_coeffs[0] is normalized to 1."""

    order: int
    cutoff: float
    num_coeffs: np.ndarray
    den_coeffs: np.ndarray

    def freq_response(self, freqs) -> np.ndarray:
        """Complex H at the given frequencies (cycles/sample)."""
        w = 2.0 * np.pi * np.atleast_1d(np.asarray(freqs, dtype=float))
        _, h = signal.freqz(self.num_coeffs, self.den_coeffs, worN=w)
        return h

    def noise_gain(self, n_grid: int = 4096) -> float:
        """Mean of |H|^2 over the length-n_grid DFT frequency grid."""
        grid = np.arange(n_grid) / n_grid
        return float(np.mean(np.abs(self.freq_response(grid)) ** 2))

    def to_json(self) -> str:
        return json.dumps(
            {
                "order": self.order,
                "cutoff": self.cutoff,
                "num_coeffs": list(self.num_coeffs),
                "den_coeffs": list(self.den_coeffs),
            },
            indent=2,
        )


def design_butterworth_highpass(order: int = DEFAULT_ORDER,
                                cutoff: float = DEFAULT_CUTOFF) -> IirFilter:
    """Butterworth high-pass via the prewarped bilinear transform.

    ``cutoff`` is the -3 dB frequency in cycles per sample, 0 < cutoff < 0.5.
    """
    if not 1 <= order <= 8:
        raise ValueError("order must be in 1..8")
    if not 0.0 < cutoff < 0.5:
        raise ValueError("cutoff must lie strictly inside (0, 0.5) cycles/sample")
    num, den = signal.butter(order, cutoff, btype="highpass", fs=1.0)
    return IirFilter(order=order, cutoff=cutoff,
                     num_coeffs=np.asarray(num), den_coeffs=np.asarray(den))


def default_warmup(filt: IirFilter) -> int:
    return 3 * filt.order


def normalize_by_gain(y: EchoTensor, plan: BeamPlan, cfg=None) -> EchoTensor:
    """Divide the raw echo by the scan's boresight gain g_tilde."""
    if y.stage != "raw":
        raise ValueError(f"expected a raw tensor, got stage {y.stage!r}")
    cfg = y.cfg if cfg is None else cfg
    g = g_tilde(plan, y.scan_index, cfg)
    return EchoTensor(data=y.data / g, scan_index=y.scan_index, cfg=cfg,
                      stage="normalized")


def filter_symbols(y_tilde: EchoTensor, filt: IirFilter,
                   warmup: int | None = None) -> EchoTensor:
    """Run the high-pass recursion along the symbol axis of each (m_r, l) series.

    The filter state is seeded with the steady-state step response scaled by
    the first symbol, so any component that is constant along p is annihilated
    from the very first output sample. A moving target's tone still needs a few
    symbols to settle; the first ``warmup`` outputs (default 3x filter order)
    are flagged in ``transient_mask`` and the estimators skip them.
    """
    if warmup is None:
        warmup = default_warmup(filt)
    n_sym = y_tilde.data.shape[2]
    if n_sym <= warmup:
        raise ValueError(f"warmup {warmup} must be shorter than the frame ({n_sym})")

    num, den = filt.num_coeffs, filt.den_coeffs
    zi_unit = signal.lfilter_zi(num, den).astype(complex)
    zi = zi_unit[None, None, :] * y_tilde.data[:, :, :1]
    filtered, _ = signal.lfilter(num, den, y_tilde.data, axis=2, zi=zi)

    mask = np.zeros(n_sym, dtype=bool)
    mask[:warmup] = True
    return EchoTensor(data=filtered, scan_index=y_tilde.scan_index, cfg=y_tilde.cfg,
                      stage="filtered", transient_mask=mask)


def retained_symbols(y_check: EchoTensor) -> np.ndarray:
    """Symbol indices that survived the transient exclusion."""
    if y_check.transient_mask is None:
        return np.arange(y_check.data.shape[2])
    return np.flatnonzero(~y_check.transient_mask)


def scan_spectrum(checked: list[EchoTensor], include_transient: bool = True) -> np.ndarray:
    """Per-beam average residual power P(b) = sum_l sum_p ||y[:, l, p]||^2 / (L * n_p).

    With the step-matched filter initialization the stationary-clutter
    transient is already zero, so by default all P symbols contribute (the
    early symbols buy real SNR for the search). Pass include_transient=False
    to average only the retained window; the divisor adapts to the count.
    """
    out = np.empty(len(checked))
    for i, tensor in enumerate(checked):
        data = tensor.data
        if not include_transient and tensor.transient_mask is not None:
            data = data[:, :, ~tensor.transient_mask]
        n_sub, n_p = data.shape[1], data.shape[2]
        out[i] = float(np.sum(np.abs(data) ** 2)) / (n_sub * n_p)
    return out


def find_peaks(spectrum: np.ndarray, rel_threshold: float = 3.0) -> list[int]:
    """Scan indices that are strict local maxima of P and exceed rel_threshold * median.

    Returns a (possibly empty) sorted list. Edge bins count as local maxima
    when they beat their single neighbor.
    """
    if rel_threshold <= 1.0:
        raise ValueError("rel_threshold must exceed 1")
    spectrum = np.asarray(spectrum, dtype=float)
    floor = rel_threshold * float(np.median(spectrum))
    peaks = []
    n = len(spectrum)
    for b in range(n):
        left = spectrum[b - 1] if b > 0 else -math.inf
        right = spectrum[b + 1] if b < n - 1 else -math.inf
        if spectrum[b] > left and spectrum[b] > right and spectrum[b] > floor:
            peaks.append(b)
    return peaks


def top_local_maxima(spectrum: np.ndarray, k: int) -> list[int]:
    """The k largest strict local maxima, no threshold. Used by the search stage."""
    spectrum = np.asarray(spectrum, dtype=float)
    n = len(spectrum)
    cands = []
    for b in range(n):
        left = spectrum[b - 1] if b > 0 else -math.inf
        right = spectrum[b + 1] if b < n - 1 else -math.inf
        if spectrum[b] > left and spectrum[b] > right:
            cands.append(b)
    cands.sort(key=lambda b: spectrum[b], reverse=True)
    return sorted(cands[:k])
