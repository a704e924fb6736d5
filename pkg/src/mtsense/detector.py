"""GLRT confirmation of moving-target candidates against a clutter subspace.

A candidate (from the search + estimation stages) is tested on the RAW echo of
its scan. The clutter is modeled as living in the span of responses sampled on
a range/angle grid inside the beam; projecting it out leaves a residual whose
energy along the candidate's steering vector is compared with its total
energy. The statistic

    t = sum_{l,p} |a^H Pperp y|^2 / (a^H Pperp a) / (M_r L P sigma0_hat^2)

equals 1 - sigma1_hat^2 / sigma0_hat^2 and lives in [0, 1]. It is invariant to
scaling of y, so thresholds calibrate cleanly by Monte Carlo under H0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .beams import BeamPlan, beam_for_angle, g_tilde, steering_rx
from .echo import EchoTensor, synthesize_echo
from .scene import Scene, SystemConfig, frequencies_target, range_frequency, spatial_frequency

DEFAULT_N_RANGE = 8
DEFAULT_N_ANGLE = 1
DEFAULT_R_MAX = 7.0


@dataclass(frozen=True)
class DetectionGrid:
    """Sampled (psi_r, psi_s) clutter grid for one scan."""

    points: tuple[tuple[float, float], ...]
    scan_index: int

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class GlrOutcome:
    statistic: float
    sigma2_hat_h0: float
    sigma2_hat_h1: float
    alpha_hat: complex
    undetectable: bool = False
    gamma: float | None = None
    decision: bool | None = None


def sample_grid(b: int, plan: BeamPlan, cfg: SystemConfig,
                n_range: int = DEFAULT_N_RANGE, n_angle: int = DEFAULT_N_ANGLE,
                r_max: float = DEFAULT_R_MAX) -> DetectionGrid:
    """Uniform tensor grid: n_range range frequencies over [0, psi_r(r_max)]
    crossed with n_angle spatial frequencies inside the beam's coverage image.

    n_angle = 1 uses the beam center. The grid must leave residual degrees of
    freedom (N_G < L * P), otherwise the projector could swallow the data.
    """
    if n_range < 1 or n_angle < 1:
        raise ValueError("grid sizes must be >= 1")
    if n_range * n_angle * cfg.m_rx >= cfg.m_rx * cfg.n_sub * cfg.n_sym:
        raise ValueError("grid too large: no residual degrees of freedom left")
    psi_r_top = range_frequency(r_max, cfg)
    if n_range == 1:
        psi_r_grid = np.array([0.5 * psi_r_top])
    else:
        psi_r_grid = np.linspace(0.0, psi_r_top, n_range)
    lo, hi = plan.coverage_interval(b)
    if n_angle == 1:
        psi_s_grid = [spatial_frequency(float(plan.directions[b]), cfg)]
    else:
        psi_s_grid = np.linspace(spatial_frequency(lo, cfg),
                                 spatial_frequency(hi, cfg), n_angle)
    points = tuple((float(pr), float(ps)) for pr, ps in product(psi_r_grid, psi_s_grid))
    return DetectionGrid(points=points, scan_index=b)


def clutter_basis(grid: DetectionGrid, b: int, l: int, p: int, plan: BeamPlan,
                  cfg: SystemConfig) -> np.ndarray:
    """M_r x N_G basis of hypothetical clutter responses at subcarrier l.

    Columns are g_tilde * exp(-j 2 pi l psi_r) * a_rx(psi_s); the symbol index
    p never enters because clutter has no Doppler.
    """
    g = g_tilde(plan, b, cfg)
    cols = [
        g * np.exp(-2j * math.pi * l * pr) * steering_rx(ps, cfg.m_rx)
        for pr, ps in grid.points
    ]
    return np.stack(cols, axis=1)


def perp_projector(a_tilde: np.ndarray) -> np.ndarray:
    """Orthogonal-complement projector I - A (A^H A)^+ A^H (Hermitian, idempotent)."""
    m = a_tilde.shape[0]
    eye = np.eye(m, dtype=complex)
    if a_tilde.size == 0:
        return eye
    proj = a_tilde @ np.linalg.pinv(a_tilde)
    return eye - 0.5 * (proj + proj.conj().T)


UNDETECTABLE_REL = 1e-12
ZERO_RESIDUAL_REL = 1e-20  # sigma0_hat^2 below this fraction of the mean input
                           # power is projection roundoff, not signal


def glr_statistic(y: EchoTensor, candidate: tuple[float, float, float],
                  grid: DetectionGrid, plan: BeamPlan, cfg: SystemConfig) -> GlrOutcome:
    """Evaluate the GLRT statistic for candidate frequencies (psi_d, psi_r, psi_s).

    Operates on the raw (unfiltered, unnormalized) scan tensor. One projector
    is computed per subcarrier and reused across all symbols. If the candidate
    steering vector is indistinguishable from the clutter subspace the outcome
    is flagged undetectable (t = 0) instead of dividing by ~zero.
    """
    if y.stage != "raw":
        raise ValueError(f"the detector works on raw echoes, got stage {y.stage!r}")
    psi_d, psi_r, psi_s = candidate
    if not all(np.isfinite([psi_d, psi_r, psi_s])):
        raise ValueError("candidate frequencies must be finite")
    b = y.scan_index
    m_rx, n_sub, n_sym = y.data.shape
    n_tot = m_rx * n_sub * n_sym

    g = g_tilde(plan, b, cfg)
    a_sp = steering_rx(psi_s, cfg.m_rx)
    dopp_phase = np.exp(2j * math.pi * psi_d * np.arange(n_sym))

    energy_h0 = 0.0
    num_total = 0.0
    alpha_acc = 0.0 + 0.0j
    undetectable = False
    g2 = abs(g) ** 2

    for l in range(n_sub):
        p_perp = perp_projector(clutter_basis(grid, b, l, 0, plan, cfg))
        pa = p_perp @ a_sp
        denom = float(np.real(a_sp.conj() @ pa))  # a^H Pperp a / |g|^2
        py = p_perp @ y.data[:, l, :]             # (M_r, P)
        energy_h0 += float(np.sum(np.abs(py) ** 2))
        if denom < UNDETECTABLE_REL * m_rx:
            undetectable = True
            continue
        inner = a_sp.conj() @ py                  # (P,)
        num_total += float(np.sum(np.abs(inner) ** 2)) / denom
        rng_phase = np.exp(-2j * math.pi * psi_r * l)
        alpha_acc += np.sum(np.conj(g * rng_phase * dopp_phase) * inner) / (g2 * denom)

    sigma2_h0 = energy_h0 / n_tot
    if undetectable:
        return GlrOutcome(statistic=0.0, sigma2_hat_h0=sigma2_h0,
                          sigma2_hat_h1=sigma2_h0, alpha_hat=0j, undetectable=True)
    # Fully explained data: the residual is projection roundoff, and so is the
    # numerator (mathematically num <= N sigma0^2); dividing the two would be
    # noise over noise. t = 0 unless the numerator somehow stayed macroscopic.
    input_floor = ZERO_RESIDUAL_REL * float(np.mean(np.abs(y.data) ** 2))
    if sigma2_h0 <= input_floor:
        t = 0.0 if num_total <= input_floor * n_tot else math.inf
        return GlrOutcome(statistic=t, sigma2_hat_h0=sigma2_h0,
                          sigma2_hat_h1=sigma2_h0, alpha_hat=0j, undetectable=False)

    sigma2_h1 = max(sigma2_h0 - num_total / n_tot, 0.0)
    t = num_total / (n_tot * sigma2_h0)
    alpha_hat = complex(alpha_acc / (n_sub * n_sym))
    return GlrOutcome(statistic=t, sigma2_hat_h0=sigma2_h0, sigma2_hat_h1=sigma2_h1,
                      alpha_hat=alpha_hat, undetectable=False)


def detect(outcome: GlrOutcome, gamma: float) -> bool:
    """Threshold test t > gamma."""
    if not gamma >= 0.0:
        raise ValueError("gamma must be a nonnegative number")
    return outcome.statistic > gamma


def candidate_from_target(target, cfg: SystemConfig) -> tuple[float, float, float]:
    psi_r, psi_d, psi_s = frequencies_target(target, cfg)
    return (psi_d, psi_r, psi_s)


def calibrate_gamma(scene_h0: Scene, plan: BeamPlan, b: int,
                    candidate: tuple[float, float, float], grid: DetectionGrid,
                    cfg: SystemConfig, p_fa: float, n_trials: int = 500,
                    seed=0, sigma2: float | None = None) -> float:
    """Empirical (1 - p_fa) quantile of the statistic under H0 Monte Carlo."""
    if not 0.0 < p_fa < 1.0:
        raise ValueError("p_fa must lie in (0, 1)")
    sigma2 = cfg.noise_var if sigma2 is None else sigma2
    ts = np.empty(n_trials)
    for i in range(n_trials):
        y = synthesize_echo(scene_h0, plan, b, cfg, seed=(seed, i), noise_var=sigma2)
        ts[i] = glr_statistic(y, candidate, grid, plan, cfg).statistic
    return float(np.quantile(ts, 1.0 - p_fa))


def roc_curve(scene_h0: Scene, scene_h1: Scene, cfg: SystemConfig, plan: BeamPlan,
              snr_list_db, n_trials: int = 500, n_thresholds: int = 101, seed=0,
              b: int | None = None, candidate: tuple[float, float, float] | None = None,
              n_range: int = DEFAULT_N_RANGE, n_angle: int = DEFAULT_N_ANGLE,
              r_max: float = DEFAULT_R_MAX) -> dict[float, list[tuple[float, float, float]]]:
    """Monte-Carlo ROC per SNR for one candidate geometry.

    The default candidate is the first target of scene_h1 at its covering
    beam, tested at its true frequencies. Thresholds sweep the pooled
    statistic range (quantile grid plus open endpoints), so each curve starts
    at (1, 1) and ends at (0, 0) and is monotone by construction. Returns
    {snr_db: [(gamma, p_fa, p_d), ...]}.
    """
    if not scene_h1.targets:
        raise ValueError("scene_h1 needs at least one target")
    if candidate is None:
        target = scene_h1.targets[0]
        candidate = candidate_from_target(target, cfg)
        if b is None:
            b = beam_for_angle(plan, target.theta)
    if b is None:
        raise ValueError("pass b together with an explicit candidate")
    grid = sample_grid(b, plan, cfg, n_range=n_range, n_angle=n_angle, r_max=r_max)

    curves: dict[float, list[tuple[float, float, float]]] = {}
    for k, snr_db in enumerate(snr_list_db):
        sigma2 = 10.0 ** (-snr_db / 10.0)
        t0 = np.empty(n_trials)
        t1 = np.empty(n_trials)
        for i in range(n_trials):
            y0 = synthesize_echo(scene_h0, plan, b, cfg, seed=(seed, k, 0, i),
                                 noise_var=sigma2)
            y1 = synthesize_echo(scene_h1, plan, b, cfg, seed=(seed, k, 1, i),
                                 noise_var=sigma2)
            t0[i] = glr_statistic(y0, candidate, grid, plan, cfg).statistic
            t1[i] = glr_statistic(y1, candidate, grid, plan, cfg).statistic
        pooled = np.concatenate([t0, t1])
        qs = np.quantile(pooled, np.linspace(0.0, 1.0, n_thresholds))
        gammas = np.concatenate([[-math.inf], np.unique(qs), [math.inf]])
        curve = [
            (float(gm), float(np.mean(t0 > gm)), float(np.mean(t1 > gm)))
            for gm in gammas
        ]
        curves[float(snr_db)] = curve
    return curves
