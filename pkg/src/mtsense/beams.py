"""Scan plan: beam directions, coverage regions and conjugate probing weights.

One scan steers a transmit beam at direction theta_b and collects the echo
tensor for that dwell. The probing weights are held constant across
subcarriers and symbols, so the boresight transmit gain g_tilde is a single
complex scalar per scan and normalizing by it is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import SystemConfig, spatial_frequency


def steering_tx(psi_s: float, m_tx: int) -> np.ndarray:
    """Transmit spatial steering vector, entry m = exp(+j 2 pi m psi_s)."""
    return np.exp(2j * np.pi * psi_s * np.arange(m_tx))


def steering_rx(psi_s: float, m_rx: int) -> np.ndarray:
    """Receive spatial steering vector, same phase progression as transmit."""
    return np.exp(2j * np.pi * psi_s * np.arange(m_rx))


@dataclass(frozen=True)
class BeamPlan:
    """Immutable scan plan.

    directions          (B,) beam angles, radians, sorted ascending
    coverage_halfwidth  angular half width of each beam's assigned region (rad)
    weights             (B, M_t) unit-norm probing vector per scan
    """

    directions: np.ndarray
    coverage_halfwidth: float
    weights: np.ndarray

    @property
    def n_beams(self) -> int:
        return len(self.directions)

    def coverage_interval(self, b: int) -> tuple[float, float]:
        c = self.directions[b]
        return (c - self.coverage_halfwidth, c + self.coverage_halfwidth)


def beamformer_weight(theta_tilde: float, cfg: SystemConfig) -> np.ndarray:
    """Conjugate steering weight pointing the mainlobe at theta_tilde. Unit norm."""
    if abs(theta_tilde) >= math.pi / 2:
        raise ValueError("beam direction must satisfy |theta| < pi/2")
    psi = spatial_frequency(theta_tilde, cfg)
    return np.conj(steering_tx(psi, cfg.m_tx)) / math.sqrt(cfg.m_tx)


def make_scan_plan(cfg: SystemConfig, sector: tuple[float, float], n_beams: int) -> BeamPlan:
    """Uniform beam grid over the closed angular sector (radians).

    For n_beams > 1 the spacing is (hi-lo)/(n_beams-1) and the coverage half
    width is half that spacing, so consecutive coverage regions tile the
    sector without gaps. A single beam covers the whole sector.
    """
    lo, hi = sector
    if lo > hi:
        raise ValueError("sector must satisfy lo <= hi")
    if n_beams < 1:
        raise ValueError("need at least one beam")
    if n_beams == 1:
        directions = np.array([lo if lo == hi else 0.5 * (lo + hi)])
        halfwidth = 0.5 * (hi - lo)
    else:
        directions = np.linspace(lo, hi, n_beams)
        halfwidth = 0.5 * (hi - lo) / (n_beams - 1)
    weights = np.stack([beamformer_weight(th, cfg) for th in directions])
    return BeamPlan(directions=directions, coverage_halfwidth=halfwidth, weights=weights)


def default_plan(cfg: SystemConfig, n_beams: int = 61, span_deg: float = 60.0) -> BeamPlan:
    s = math.radians(span_deg)
    return make_scan_plan(cfg, (-s, s), n_beams)


def tx_gain(theta: float, plan: BeamPlan, b: int, cfg: SystemConfig) -> complex:
    """Transmit array gain a_tx(psi_s(theta))^T x_b toward an arbitrary angle."""
    psi = spatial_frequency(theta, cfg)
    return complex(steering_tx(psi, cfg.m_tx) @ plan.weights[b])


def g_tilde(plan: BeamPlan, b: int, cfg: SystemConfig, l: int = 0, p: int = 0,
            floor: float = 1e-9) -> complex:
    """Boresight gain of scan b (constant over l and p for constant weights).

    Raises if the magnitude falls below ``floor`` times sqrt(M_t), which would
    make gain normalization ill conditioned.
    """
    g = tx_gain(float(plan.directions[b]), plan, b, cfg)
    if abs(g) < floor * math.sqrt(cfg.m_tx):
        raise ValueError(f"boresight gain {abs(g):.3e} below the safety floor")
    return g


def beam_for_angle(plan: BeamPlan, theta: float) -> int:
    """Index of the beam whose coverage contains theta; boundary ties pick the lower b."""
    hw = plan.coverage_halfwidth
    dirs = plan.directions
    for b in range(len(dirs)):
        if dirs[b] - hw <= theta <= dirs[b] + hw:
            return b
    raise ValueError(f"angle {theta:.4f} rad outside the scanned sector")


def beams_covering(plan: BeamPlan, theta: float) -> list[int]:
    """All scan indices whose closed coverage interval contains theta."""
    hw = plan.coverage_halfwidth
    return [
        b for b, c in enumerate(plan.directions)
        if c - hw <= theta <= c + hw
    ]


def angle_in_coverage(plan: BeamPlan, b: int, theta: float) -> bool:
    lo, hi = plan.coverage_interval(b)
    return lo <= theta <= hi


def plan_summary_rows(plan: BeamPlan) -> list[tuple[int, float, float]]:
    """(b, theta_deg, halfwidth_deg) rows for CSV export."""
    hw = math.degrees(plan.coverage_halfwidth)
    return [(b, math.degrees(th), hw) for b, th in enumerate(plan.directions)]
