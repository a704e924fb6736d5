"""Doppler-domain highpass filtering checked against closed-form bilinear math."""
import json
import math

import numpy as np
import pytest

from mtsense import clutter as cl
from mtsense import echo as ec
from mtsense.scene import Scene, Scatterer, SystemConfig


# ---------------------------------------------------------------------------
# oracle: first-order Butterworth highpass through the bilinear transform by
# hand. Prewarped analog cutoff W = 2 tan(pi fc) (fs = 1, T = 1), analog
# prototype H(s) = s / (s + W), substitute s = 2 (1 - z^-1) / (1 + z^-1):
#   num = [2/(2+W), -2/(2+W)],  den = [1, (W-2)/(W+2)]

def order1_highpass(fc):
    w = 2.0 * math.tan(math.pi * fc)
    num = np.array([2.0 / (2.0 + w), -2.0 / (2.0 + w)])
    den = np.array([1.0, (w - 2.0) / (w + 2.0)])
    return num, den


def freq_response(num, den, f):
    z = np.exp(2j * np.pi * np.asarray(f, dtype=float))
    numv = sum(c * z ** (-k) for k, c in enumerate(num))
    denv = sum(c * z ** (-k) for k, c in enumerate(den))
    return numv / denv


def test_order1_matches_closed_form():
    for fc in (0.02, 0.04, 0.1):
        filt = cl.design_butterworth_highpass(order=1, cutoff=fc)
        num_ref, den_ref = order1_highpass(fc)
        assert np.allclose(filt.num_coeffs, num_ref, atol=1e-12)
        assert np.allclose(filt.den_coeffs, den_ref, atol=1e-12)


def test_order2_magnitude_identity():
    # |H|^2 of an order-n Butterworth highpass at digital frequency f is
    # (Wd/Wc)^(2n) / (1 + (Wd/Wc)^(2n)) with W = 2 tan(pi f) after prewarping.
    filt = cl.design_butterworth_highpass(order=2, cutoff=0.04)
    wc = 2.0 * math.tan(math.pi * 0.04)
    for f in (0.01, 0.04, 0.1, 0.25, 0.4):
        wd = 2.0 * math.tan(math.pi * f)
        want = (wd / wc) ** 4 / (1.0 + (wd / wc) ** 4)
        got = abs(freq_response(filt.num_coeffs, filt.den_coeffs, f)) ** 2
        assert got == pytest.approx(want, rel=1e-10)


def test_dc_gain_and_passband():
    filt = cl.design_butterworth_highpass(2, 0.04)
    assert abs(freq_response(filt.num_coeffs, filt.den_coeffs, 0.0)) < 1e-12
    assert abs(freq_response(filt.num_coeffs, filt.den_coeffs, 0.5)) == \
        pytest.approx(1.0, abs=1e-6)
    assert abs(freq_response(filt.num_coeffs, filt.den_coeffs, 0.04)) == \
        pytest.approx(1 / math.sqrt(2), rel=1e-9)


def test_freq_response_method_agrees():
    filt = cl.design_butterworth_highpass(2, 0.04)
    freqs = np.array([0.01, 0.07, 0.3])
    want = freq_response(filt.num_coeffs, filt.den_coeffs, freqs)
    assert np.allclose(filt.freq_response(freqs), want, atol=1e-12)


def test_default_warmup_rule():
    assert cl.default_warmup(cl.design_butterworth_highpass(2, 0.04)) == 6
    assert cl.default_warmup(cl.design_butterworth_highpass(3, 0.05)) == 9


def test_design_validation():
    with pytest.raises(ValueError):
        cl.design_butterworth_highpass(0, 0.04)
    with pytest.raises(ValueError):
        cl.design_butterworth_highpass(2, 0.0)
    with pytest.raises(ValueError):
        cl.design_butterworth_highpass(2, 0.5)


def test_filter_json_round_trip():
    filt = cl.design_butterworth_highpass(2, 0.04)
    d = json.loads(filt.to_json())
    assert d["order"] == 2 and d["cutoff"] == 0.04
    assert np.allclose(d["num_coeffs"], filt.num_coeffs)
    assert np.allclose(d["den_coeffs"], filt.den_coeffs)


def test_noise_gain_matches_grid_average():
    filt = cl.design_butterworth_highpass(2, 0.04)
    grid = np.arange(4096) / 4096
    want = float(np.mean(np.abs(freq_response(filt.num_coeffs,
                                              filt.den_coeffs, grid)) ** 2))
    assert filt.noise_gain() == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------------------
# behaviour on echo tensors

def _static_scene():
    return Scene((), (Scatterer(theta=0.2, range=3.0, alpha=1.0 + 0.5j),
                      Scatterer(theta=-0.4, range=5.0, alpha=0.3 - 0.8j)))


def test_stationary_input_annihilated(small_plan):
    # constant-along-p input must vanish from the very first output sample:
    # the initial condition is matched to a step of the first sample's height.
    cfg = SystemConfig(m_tx=4, m_rx=3, n_sub=4, n_sym=30, noise_var=0.0)
    y = ec.synthesize_echo(_static_scene(), small_plan, 2, cfg, noise_var=0.0)
    tilde = cl.normalize_by_gain(y, small_plan)
    out = cl.filter_symbols(tilde, cl.design_butterworth_highpass(2, 0.04))
    scale = float(np.max(np.abs(tilde.data)))
    assert float(np.max(np.abs(out.data))) < 1e-10 * scale
    assert out.stage == "filtered"
    assert out.transient_mask is not None
    assert int(out.transient_mask.sum()) == 6
    assert bool(out.transient_mask[:6].all())


def test_tone_reaches_steady_state():
    # long frame: past the transient the output of a pure Doppler tone is the
    # tone scaled by the filter's frequency response at that frequency.
    cfg = SystemConfig(m_tx=4, m_rx=2, n_sub=2, n_sym=200, noise_var=0.0)
    psi_d = 0.23
    p = np.arange(cfg.n_sym)
    tone = np.exp(2j * np.pi * psi_d * p)
    data = np.tile(tone, (cfg.m_rx, cfg.n_sub, 1)).astype(complex)
    tensor = ec.EchoTensor(data=data, scan_index=0, cfg=cfg, stage="normalized")
    filt = cl.design_butterworth_highpass(2, 0.04)
    out = cl.filter_symbols(tensor, filt)
    h = freq_response(filt.num_coeffs, filt.den_coeffs, psi_d)
    want = h * tone[150:]
    assert np.allclose(out.data[0, 0, 150:], want, atol=1e-9)


def test_filter_symbols_rejects_short_frames(small_plan):
    cfg = SystemConfig(m_tx=4, m_rx=3, n_sub=4, n_sym=5, noise_var=0.0)
    y = ec.synthesize_echo(_static_scene(), small_plan, 0, cfg, noise_var=0.0)
    filt = cl.design_butterworth_highpass(2, 0.04)  # default warmup 6 > n_sym 5
    with pytest.raises(ValueError):
        cl.filter_symbols(cl.normalize_by_gain(y, small_plan), filt)


def test_normalize_by_gain_stage_guard(small_cfg, small_plan):
    y = ec.synthesize_echo(_static_scene(), small_plan, 0, small_cfg,
                           noise_var=0.0)
    tilde = cl.normalize_by_gain(y, small_plan)
    assert tilde.stage == "normalized"
    g = 2.0  # sqrt(m_tx) for m_tx = 4
    assert np.allclose(tilde.data * g, y.data, atol=1e-12)
    with pytest.raises(ValueError):
        cl.normalize_by_gain(tilde, small_plan)


def test_retained_symbols(small_cfg):
    data = np.ones((small_cfg.m_rx, small_cfg.n_sub, small_cfg.n_sym),
                   dtype=complex)
    plain = ec.EchoTensor(data=data, scan_index=0, cfg=small_cfg,
                          stage="normalized")
    assert np.array_equal(cl.retained_symbols(plain),
                          np.arange(small_cfg.n_sym))
    mask = np.zeros(small_cfg.n_sym, dtype=bool)
    mask[:2] = True
    masked = ec.EchoTensor(data=data, scan_index=0, cfg=small_cfg,
                           stage="filtered", transient_mask=mask)
    assert np.array_equal(cl.retained_symbols(masked),
                          np.arange(2, small_cfg.n_sym))


# ---------------------------------------------------------------------------
# spectrum and peak picking

def test_scan_spectrum_hand_values(small_cfg):
    rows = []
    for b in range(3):
        data = np.full((small_cfg.m_rx, small_cfg.n_sub, small_cfg.n_sym),
                       float(b + 1), dtype=complex)
        rows.append(ec.EchoTensor(data=data, scan_index=b, cfg=small_cfg,
                                  stage="normalized"))
    spec = cl.scan_spectrum(rows)
    # mean power per (subcarrier, symbol) cell summed over antennas:
    # m_rx * (b+1)^2
    want = small_cfg.m_rx * np.array([1.0, 4.0, 9.0])
    assert np.allclose(spec, want, atol=1e-12)


def test_scan_spectrum_can_exclude_transient(small_cfg):
    data = np.ones((small_cfg.m_rx, small_cfg.n_sub, small_cfg.n_sym),
                   dtype=complex)
    data[:, :, :2] = 10.0
    mask = np.zeros(small_cfg.n_sym, dtype=bool)
    mask[:2] = True
    t = ec.EchoTensor(data=data, scan_index=0, cfg=small_cfg, stage="filtered",
                      transient_mask=mask)
    full = cl.scan_spectrum([t], include_transient=True)
    tail = cl.scan_spectrum([t], include_transient=False)
    assert full[0] > tail[0]
    assert tail[0] == pytest.approx(small_cfg.m_rx, abs=1e-12)


def test_find_peaks():
    flat = np.ones(11)
    assert cl.find_peaks(flat, 3.0) == []
    spec = np.ones(11)
    spec[4] = 30.0
    spec[8] = 9.0
    got = cl.find_peaks(spec, 3.0)
    assert got == [4, 8]
    # threshold is relative to the median
    assert cl.find_peaks(spec, 12.0) == [4]
    # an edge bin counts when it beats its single neighbor
    edge = np.ones(5)
    edge[0] = 50.0
    assert cl.find_peaks(edge, 3.0) == [0]
    with pytest.raises(ValueError):
        cl.find_peaks(spec, 1.0)


def test_top_local_maxima():
    spec = np.array([0.0, 5.0, 0.0, 9.0, 0.0, 2.0, 0.0])
    assert cl.top_local_maxima(spec, 2) == [1, 3]
    assert cl.top_local_maxima(spec, 1) == [3]
    assert cl.top_local_maxima(spec, 5) == [1, 3, 5]
