"""System constants, ground-truth scene elements and randomized scene generation.

Everything downstream works in normalized frequencies (cycles per sample):

    psi_r = 2 * r * delta_f / c      range frequency, from the round-trip delay
    psi_d = 2 * v * T / lambda       Doppler frequency, T = OFDM symbol + guard
    psi_s = d * sin(theta) / lambda  spatial frequency of a uniform linear array

Angles are radians everywhere inside the library; degrees appear only at the
CLI boundary and in serialized files.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

C0 = 299_792_458.0  # speed of light, m/s


@dataclass(frozen=True)
class SystemConfig:
    """Radar/array constants shared by every module.

    m_tx, m_rx   transmit / receive antenna counts
    n_sub        number of OFDM subcarriers used for sensing (L)
    n_sym        number of OFDM symbols in one scan (P)
    f_c          carrier frequency, Hz
    delta_f      subcarrier spacing, Hz
    t_guard      guard interval appended to each symbol, s
    d_spacing    array element spacing in meters; None means half wavelength
    noise_var    per-element complex noise variance sigma^2 (linear power)
    """

    m_tx: int = 64
    m_rx: int = 16
    n_sub: int = 16
    n_sym: int = 20
    f_c: float = 60e9
    delta_f: float = 10e6
    t_guard: float = 2e-4
    d_spacing: float | None = None
    noise_var: float = 1.0

    def __post_init__(self):
        if min(self.m_tx, self.m_rx, self.n_sub, self.n_sym) < 2:
            raise ValueError("antenna, subcarrier and symbol counts must all be >= 2")
        if self.f_c <= 0 or self.delta_f <= 0 or self.t_guard < 0:
            raise ValueError("f_c and delta_f must be positive, t_guard nonnegative")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")

    @property
    def wavelength(self) -> float:
        return C0 / self.f_c

    @property
    def t_sym(self) -> float:
        return 1.0 / self.delta_f

    @property
    def t_total(self) -> float:
        """Full symbol interval including the guard."""
        return self.t_sym + self.t_guard

    @property
    def spacing(self) -> float:
        return self.wavelength / 2.0 if self.d_spacing is None else self.d_spacing


@dataclass(frozen=True)
class Target:
    """Moving point target: angle (rad), range (m), radial speed (m/s), reflection alpha."""

    theta: float
    range: float
    speed: float
    alpha: complex

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("target range must be positive")
        if abs(self.theta) >= math.pi / 2:
            raise ValueError("target angle must satisfy |theta| < pi/2")


@dataclass(frozen=True)
class Scatterer:
    """Stationary point scatterer: angle (rad), range (m), reflection alpha."""

    theta: float
    range: float
    alpha: complex

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("scatterer range must be positive")
        if abs(self.theta) >= math.pi / 2:
            raise ValueError("scatterer angle must satisfy |theta| < pi/2")


@dataclass(frozen=True)
class Scene:
    targets: tuple[Target, ...] = ()
    scatterers: tuple[Scatterer, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    def without_targets(self) -> "Scene":
        return Scene(targets=(), scatterers=self.scatterers)

    def min_target_separation(self) -> float:
        """Smallest pairwise angular distance between targets (rad); inf if < 2 targets."""
        thetas = [t.theta for t in self.targets]
        if len(thetas) < 2:
            return math.inf
        return min(abs(a - b) for i, a in enumerate(thetas) for b in thetas[:i])


# ---------------------------------------------------------------------------
# normalized frequencies and their inverses

def spatial_frequency(theta: float, cfg: SystemConfig) -> float:
    return cfg.spacing * math.sin(theta) / cfg.wavelength


def range_frequency(rng_m: float, cfg: SystemConfig) -> float:
    return 2.0 * rng_m * cfg.delta_f / C0


def doppler_frequency(speed: float, cfg: SystemConfig) -> float:
    return 2.0 * speed * cfg.t_total / cfg.wavelength


def theta_from_psi_s(psi_s: float, cfg: SystemConfig) -> float:
    ratio = psi_s * cfg.wavelength / cfg.spacing
    if abs(ratio) > 1.0:
        raise ValueError(f"spatial frequency {psi_s} outside the arcsin domain")
    return math.asin(ratio)


def range_from_psi_r(psi_r: float, cfg: SystemConfig) -> float:
    """Map a range frequency to meters; negative principal values wrap by one cycle."""
    return C0 * (psi_r % 1.0) / (2.0 * cfg.delta_f)


def speed_from_psi_d(psi_d: float, cfg: SystemConfig) -> float:
    return cfg.wavelength * psi_d / (2.0 * cfg.t_total)


def frequencies_target(t: Target, cfg: SystemConfig) -> tuple[float, float, float]:
    """(psi_r, psi_d, psi_s) for a moving target. No wrapping is applied."""
    return (
        range_frequency(t.range, cfg),
        doppler_frequency(t.speed, cfg),
        spatial_frequency(t.theta, cfg),
    )


def frequencies_scatterer(s: Scatterer, cfg: SystemConfig) -> tuple[float, float]:
    """(psi_r, psi_s) for a stationary scatterer."""
    return range_frequency(s.range, cfg), spatial_frequency(s.theta, cfg)


# ---------------------------------------------------------------------------
# random generation

def complex_normal(rng: np.random.Generator, var: float, size=None) -> np.ndarray:
    """CN(0, var): independent real/imag parts, each N(0, var/2)."""
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


ANGLE_SUPPORT_DEG = (-60.0, 60.0)
RANGE_SUPPORT_M = (1.0, 7.0)
SPEED_SUPPORT_MPS = (1.0, 4.0)
SCATTERER_ALPHA_VAR = 0.5

_SEP_RETRIES = 1000


def generate_scene(
    cfg: SystemConfig,
    n_targets: int,
    n_scatterers: int,
    seed,
    min_separation: float = math.radians(4.0),
) -> Scene:
    """Draw a random scene.

    Target angles are redrawn until pairwise separated by more than
    ``min_separation`` (default twice the 2 degree scan step, so at most one
    target falls within a single beam). Raises RuntimeError if separation
    cannot be met within a bounded retry count.
    """
    if n_targets < 0 or n_scatterers < 0:
        raise ValueError("element counts must be nonnegative")
    rng = np.random.default_rng(seed)
    lo, hi = (math.radians(a) for a in ANGLE_SUPPORT_DEG)

    thetas: list[float] = []
    attempts = 0
    while len(thetas) < n_targets:
        cand = rng.uniform(lo, hi)
        if all(abs(cand - t) > min_separation for t in thetas):
            thetas.append(cand)
        else:
            attempts += 1
            if attempts > _SEP_RETRIES * max(n_targets, 1):
                raise RuntimeError(
                    f"could not place {n_targets} targets separated by "
                    f"{min_separation:.4f} rad after {attempts} retries"
                )

    targets = tuple(
        Target(
            theta=thetas[i],
            range=rng.uniform(*RANGE_SUPPORT_M),
            speed=rng.uniform(*SPEED_SUPPORT_MPS),
            alpha=complex(complex_normal(rng, 1.0)),
        )
        for i in range(n_targets)
    )
    scatterers = tuple(
        Scatterer(
            theta=rng.uniform(lo, hi),
            range=rng.uniform(*RANGE_SUPPORT_M),
            alpha=complex(complex_normal(rng, SCATTERER_ALPHA_VAR)),
        )
        for _ in range(n_scatterers)
    )
    return Scene(targets=targets, scatterers=scatterers)


# Built-in two-target benchmark used by the experiments and the test suite.
REFERENCE_TARGETS = (
    # (theta_deg, range_m, speed_mps)
    (-48.295, 4.281, 3.911),
    (15.883, 2.670, 1.473),
)


def reference_scene(cfg: SystemConfig, n_scatterers: int = 400, seed=7) -> Scene:
    """The fixed two-target benchmark scene plus ``n_scatterers`` random scatterers.

    Target reflection coefficients get unit modulus with a seeded random
    phase, so the nominal unit target power is realized exactly and the
    benchmark does not hinge on a lucky amplitude draw. Scatterers follow the
    usual CN(0, 0.5) law.
    """
    rng = np.random.default_rng(seed)
    targets = tuple(
        Target(
            theta=math.radians(th),
            range=r,
            speed=v,
            alpha=complex(np.exp(2j * math.pi * rng.uniform())),
        )
        for th, r, v in REFERENCE_TARGETS
    )
    lo, hi = (math.radians(a) for a in ANGLE_SUPPORT_DEG)
    scatterers = tuple(
        Scatterer(
            theta=rng.uniform(lo, hi),
            range=rng.uniform(*RANGE_SUPPORT_M),
            alpha=complex(complex_normal(rng, SCATTERER_ALPHA_VAR)),
        )
        for _ in range(n_scatterers)
    )
    return Scene(targets=targets, scatterers=scatterers)


# ---------------------------------------------------------------------------
# JSON round trip

def scene_to_json(scene: Scene) -> str:
    doc = {
        "targets": [
            {
                "theta_deg": math.degrees(t.theta),
                "range_m": t.range,
                "speed_mps": t.speed,
                "alpha_re": t.alpha.real,
                "alpha_im": t.alpha.imag,
            }
            for t in scene.targets
        ],
        "scatterers": [
            {
                "theta_deg": math.degrees(s.theta),
                "range_m": s.range,
                "alpha_re": s.alpha.real,
                "alpha_im": s.alpha.imag,
            }
            for s in scene.scatterers
        ],
    }
    return json.dumps(doc, indent=2)


def scene_from_json(text: str) -> Scene:
    doc = json.loads(text)
    targets = tuple(
        Target(
            theta=math.radians(d["theta_deg"]),
            range=d["range_m"],
            speed=d["speed_mps"],
            alpha=complex(d["alpha_re"], d["alpha_im"]),
        )
        for d in doc.get("targets", [])
    )
    scatterers = tuple(
        Scatterer(
            theta=math.radians(d["theta_deg"]),
            range=d["range_m"],
            alpha=complex(d["alpha_re"], d["alpha_im"]),
        )
        for d in doc.get("scatterers", [])
    )
    return Scene(targets=targets, scatterers=scatterers)
