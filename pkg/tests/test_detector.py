"""GLRT detector: projector algebra, degenerate inputs, calibration, ROC."""
import math

import numpy as np
import pytest

from mtsense import clutter as cl
from mtsense import detector as dt
from mtsense import echo as ec
from mtsense.beams import beam_for_angle, default_plan, g_tilde, steering_rx
from mtsense.scene import (Scatterer, Scene, SystemConfig, Target,
                           range_frequency, spatial_frequency)


def _target_in_beam(plan, b, **kw):
    theta = float(plan.directions[b]) + 0.8 * plan.coverage_halfwidth
    defaults = dict(theta=theta, range=3.2, speed=2.5, alpha=0.9 - 0.2j)
    defaults.update(kw)
    return Target(**defaults)


# ---------------------------------------------------------------------------
# grid sampling

def test_single_point_grid_sits_at_centers(cfg, plan):
    grid = dt.sample_grid(10, plan, cfg, n_range=1, n_angle=1, r_max=7.0)
    assert grid.size == 1 and grid.scan_index == 10
    pr, ps = grid.points[0]
    assert pr == pytest.approx(0.5 * range_frequency(7.0, cfg), abs=1e-15)
    assert ps == pytest.approx(
        spatial_frequency(float(plan.directions[10]), cfg), abs=1e-15)


def test_grid_spans_range_axis(cfg, plan):
    grid = dt.sample_grid(10, plan, cfg, n_range=8, n_angle=1, r_max=7.0)
    prs = sorted({pr for pr, _ in grid.points})
    assert prs[0] == 0.0
    assert prs[-1] == pytest.approx(range_frequency(7.0, cfg), abs=1e-15)
    assert len(prs) == 8
    # uniform in range frequency means uniform in range: any scatterer inside
    # r_max lies within half a grid step of some point
    step = prs[1] - prs[0]
    for r in (0.3, 2.6, 4.281, 6.9):
        pr = range_frequency(r, cfg)
        assert min(abs(pr - q) for q in prs) <= step / 2 + 1e-15


def test_grid_angle_axis_spans_coverage(cfg, plan):
    grid = dt.sample_grid(10, plan, cfg, n_range=2, n_angle=3)
    pss = sorted({ps for _, ps in grid.points})
    lo, hi = plan.coverage_interval(10)
    assert pss[0] == pytest.approx(spatial_frequency(lo, cfg), abs=1e-15)
    assert pss[-1] == pytest.approx(spatial_frequency(hi, cfg), abs=1e-15)
    assert grid.size == 6


def test_grid_dof_guard(small_cfg, small_plan):
    # n_sub * n_sym = 20 for the small config
    with pytest.raises(ValueError):
        dt.sample_grid(0, small_plan, small_cfg, n_range=20, n_angle=1)
    with pytest.raises(ValueError):
        dt.sample_grid(0, small_plan, small_cfg, n_range=0, n_angle=1)
    with pytest.raises(ValueError):
        dt.sample_grid(0, small_plan, small_cfg, n_range=4, n_angle=0)


# ---------------------------------------------------------------------------
# clutter basis and projector

def test_clutter_basis_hand_loop(cfg, plan):
    grid = dt.sample_grid(10, plan, cfg, n_range=3, n_angle=2)
    l = 5
    a = dt.clutter_basis(grid, 10, l, 0, plan, cfg)
    g = g_tilde(plan, 10, cfg)
    for n, (pr, ps) in enumerate(grid.points):
        want = g * np.exp(-2j * np.pi * l * pr) * steering_rx(ps, cfg.m_rx)
        assert np.allclose(a[:, n], want, atol=1e-12)
    # no Doppler: identical for any symbol index
    assert np.array_equal(a, dt.clutter_basis(grid, 10, l, 7, plan, cfg))


def test_perp_projector_algebra(rng):
    a = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    p = dt.perp_projector(a)
    assert np.allclose(p, p.conj().T, atol=1e-12)
    assert np.allclose(p @ p, p, atol=1e-10)
    assert np.max(np.abs(p @ a)) < 1e-10
    eigs = np.linalg.eigvalsh(p)
    assert np.all((np.abs(eigs) < 1e-9) | (np.abs(eigs - 1.0) < 1e-9))
    assert int(np.round(eigs.sum())) == 5  # 8 - rank 3


def test_perp_projector_edge_cases(rng):
    empty = np.zeros((4, 0), dtype=complex)
    assert np.array_equal(dt.perp_projector(empty), np.eye(4, dtype=complex))
    square = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.max(np.abs(dt.perp_projector(square))) < 1e-10
    # rank-deficient stack: duplicated column must not change the projector
    a = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    dup = np.concatenate([a, a[:, :1]], axis=1)
    assert np.allclose(dt.perp_projector(a), dt.perp_projector(dup), atol=1e-10)


# ---------------------------------------------------------------------------
# statistic on constructed echoes

def _on_grid_scatterer(plan, b, cfg):
    # n_range=8, r_max=7 puts grid ranges at 0, 1, ..., 7 m; use 2 m at the
    # exact beam center so the scatterer response lies in the clutter span
    return Scatterer(theta=float(plan.directions[b]), range=2.0,
                     alpha=1.1 + 0.3j)


def test_pure_on_grid_clutter_scores_zero(cfg, plan):
    b = 25
    scene = Scene((), (_on_grid_scatterer(plan, b, cfg),))
    y = ec.synthesize_echo(scene, plan, b, cfg, noise_var=0.0)
    grid = dt.sample_grid(b, plan, cfg)
    target = _target_in_beam(plan, b)
    out = dt.glr_statistic(y, dt.candidate_from_target(target, cfg), grid,
                           plan, cfg)
    assert out.statistic == 0.0
    assert not out.undetectable


def test_target_plus_clutter_noiseless_scores_one(cfg, plan):
    b = 25
    target = _target_in_beam(plan, b)
    scene = Scene((target,), (_on_grid_scatterer(plan, b, cfg),))
    y = ec.synthesize_echo(scene, plan, b, cfg, noise_var=0.0)
    grid = dt.sample_grid(b, plan, cfg)
    out = dt.glr_statistic(y, dt.candidate_from_target(target, cfg), grid,
                           plan, cfg)
    assert out.statistic == pytest.approx(1.0, abs=1e-9)
    assert out.sigma2_hat_h1 == pytest.approx(0.0, abs=1e-12)


def test_all_zero_echo_scores_zero(cfg, plan):
    b = 25
    y = ec.synthesize_echo(Scene((), ()), plan, b, cfg, noise_var=0.0)
    grid = dt.sample_grid(b, plan, cfg)
    target = _target_in_beam(plan, b)
    out = dt.glr_statistic(y, dt.candidate_from_target(target, cfg), grid,
                           plan, cfg)
    assert out.statistic == 0.0


def test_candidate_on_grid_angle_is_undetectable(cfg, plan):
    b = 25
    scene = Scene((), (_on_grid_scatterer(plan, b, cfg),))
    y = ec.synthesize_echo(scene, plan, b, cfg, seed=3)
    grid = dt.sample_grid(b, plan, cfg)
    # candidate at the beam-center spatial frequency: the steering vector is
    # inside the clutter span for every subcarrier
    psi_s = spatial_frequency(float(plan.directions[b]), cfg)
    out = dt.glr_statistic(y, (0.1, 0.2, psi_s), grid, plan, cfg)
    assert out.undetectable
    assert out.statistic == 0.0


def test_alpha_hat_exact_for_pure_target(cfg, plan):
    # the amplitude estimate is referenced to the boresight gain, so for a
    # clean target it recovers alpha * g(theta) / g_tilde; at the exact beam
    # center that ratio is 1 and alpha comes back unchanged
    from mtsense.beams import tx_gain
    b = 25
    off = _target_in_beam(plan, b, alpha=0.37 - 0.81j)
    y = ec.synthesize_echo(Scene((off,), ()), plan, b, cfg, noise_var=0.0)
    grid = dt.sample_grid(b, plan, cfg)
    out = dt.glr_statistic(y, dt.candidate_from_target(off, cfg), grid,
                           plan, cfg)
    want = off.alpha * tx_gain(off.theta, plan, b, cfg) / g_tilde(plan, b, cfg)
    assert out.alpha_hat == pytest.approx(want, abs=1e-10)
    assert out.statistic == pytest.approx(1.0, abs=1e-9)

    centered = Target(theta=float(plan.directions[b]) + 1e-6, range=3.2,
                      speed=2.5, alpha=0.37 - 0.81j)
    y2 = ec.synthesize_echo(Scene((centered,), ()), plan, b, cfg, noise_var=0.0)
    out2 = dt.glr_statistic(y2, dt.candidate_from_target(centered, cfg), grid,
                            plan, cfg)
    assert out2.alpha_hat == pytest.approx(centered.alpha, abs=1e-3)


def test_statistic_scale_invariant(cfg, plan):
    b = 25
    target = _target_in_beam(plan, b)
    scene = Scene((target,), (_on_grid_scatterer(plan, b, cfg),))
    y = ec.synthesize_echo(scene, plan, b, cfg, seed=5)
    grid = dt.sample_grid(b, plan, cfg)
    cand = dt.candidate_from_target(target, cfg)
    t1 = dt.glr_statistic(y, cand, grid, plan, cfg).statistic
    scaled = ec.EchoTensor(data=737.3 * y.data, scan_index=b, cfg=cfg)
    t2 = dt.glr_statistic(scaled, cand, grid, plan, cfg).statistic
    assert t2 == pytest.approx(t1, rel=1e-10)


def test_statistic_bounded_and_ordered(cfg, plan):
    b = 25
    target = _target_in_beam(plan, b)
    scene = Scene((target,), (_on_grid_scatterer(plan, b, cfg),))
    grid = dt.sample_grid(b, plan, cfg)
    cand = dt.candidate_from_target(target, cfg)
    for seed in range(8):
        y = ec.synthesize_echo(scene, plan, b, cfg, seed=seed)
        out = dt.glr_statistic(y, cand, grid, plan, cfg)
        assert 0.0 <= out.statistic <= 1.0 + 1e-12
        assert out.sigma2_hat_h1 <= out.sigma2_hat_h0 + 1e-15
        assert out.statistic == pytest.approx(
            1.0 - out.sigma2_hat_h1 / out.sigma2_hat_h0, abs=1e-12)


def test_statistic_rejects_filtered_stage(cfg, plan):
    b = 25
    y = ec.synthesize_echo(Scene((), ()), plan, b, cfg, seed=1)
    filtered = cl.filter_symbols(cl.normalize_by_gain(y, plan),
                                 cl.design_butterworth_highpass(2, 0.04))
    grid = dt.sample_grid(b, plan, cfg)
    with pytest.raises(ValueError):
        dt.glr_statistic(filtered, (0.1, 0.1, 0.1), grid, plan, cfg)
    with pytest.raises(ValueError):
        dt.glr_statistic(y, (np.nan, 0.1, 0.1), grid, plan, cfg)


def test_detect_thresholding():
    out = dt.GlrOutcome(statistic=0.4, sigma2_hat_h0=1.0, sigma2_hat_h1=0.6,
                        alpha_hat=0j)
    assert dt.detect(out, 0.3)
    assert not dt.detect(out, 0.4)  # strict inequality
    assert dt.detect(out, 0.0)
    with pytest.raises(ValueError):
        dt.detect(out, -0.1)
    with pytest.raises(ValueError):
        dt.detect(out, float("nan"))


# ---------------------------------------------------------------------------
# calibration and ROC (small configs keep these quick)

def _small_setup():
    cfg = SystemConfig(m_tx=4, m_rx=3, n_sub=4, n_sym=5, noise_var=0.5)
    plan = default_plan(cfg, n_beams=7, span_deg=50.0)
    target = Target(theta=0.15, range=3.2, speed=2.5, alpha=0.9 - 0.2j)
    b = beam_for_angle(plan, target.theta)
    clut = Scene((), (Scatterer(theta=0.1, range=2.0, alpha=0.4 + 0.1j),))
    return cfg, plan, target, b, clut


def test_calibrate_gamma_deterministic_and_monotone():
    cfg, plan, target, b, clut = _small_setup()
    grid = dt.sample_grid(b, plan, cfg, n_range=3, n_angle=1)
    cand = dt.candidate_from_target(target, cfg)
    g1 = dt.calibrate_gamma(clut, plan, b, cand, grid, cfg, p_fa=0.1,
                            n_trials=80, seed=21)
    g2 = dt.calibrate_gamma(clut, plan, b, cand, grid, cfg, p_fa=0.1,
                            n_trials=80, seed=21)
    assert g1 == g2
    strict = dt.calibrate_gamma(clut, plan, b, cand, grid, cfg, p_fa=0.01,
                                n_trials=80, seed=21)
    assert strict >= g1
    assert 0.0 <= g1 <= 1.0
    with pytest.raises(ValueError):
        dt.calibrate_gamma(clut, plan, b, cand, grid, cfg, p_fa=0.0,
                           n_trials=10, seed=21)


def test_roc_curve_shape_and_endpoints():
    cfg, plan, target, b, clut = _small_setup()
    scene_h1 = Scene((target,), clut.scatterers)
    curves = dt.roc_curve(clut, scene_h1, cfg, plan, [0.0, 10.0], n_trials=60,
                          seed=31, n_range=3, n_angle=1)
    assert set(curves) == {0.0, 10.0}
    for curve in curves.values():
        assert curve[0][0] == -math.inf and curve[0][1:] == (1.0, 1.0)
        assert curve[-1][0] == math.inf and curve[-1][1:] == (0.0, 0.0)
        gammas = [c[0] for c in curve]
        pfas = [c[1] for c in curve]
        pds = [c[2] for c in curve]
        assert gammas == sorted(gammas)
        assert all(a >= b2 for a, b2 in zip(pfas, pfas[1:]))
        assert all(a >= b2 for a, b2 in zip(pds, pds[1:]))


def test_roc_identical_scenes_track_diagonal():
    cfg, plan, target, b, clut = _small_setup()
    scene = Scene((target,), clut.scatterers)
    curve = dt.roc_curve(scene, scene, cfg, plan, [0.0], n_trials=200, seed=11,
                         n_range=3, n_angle=1)[0.0]
    dev = max(abs(pd - pfa) for _, pfa, pd in curve)
    assert dev < 0.2


def test_roc_needs_target_or_explicit_candidate():
    cfg, plan, target, b, clut = _small_setup()
    with pytest.raises(ValueError):
        dt.roc_curve(clut, clut, cfg, plan, [0.0], n_trials=5, seed=1)
    scene_h1 = Scene((target,), ())
    with pytest.raises(ValueError):
        dt.roc_curve(clut, scene_h1, cfg, plan, [0.0], n_trials=5, seed=1,
                     candidate=(0.1, 0.1, 0.1))  # no beam given
