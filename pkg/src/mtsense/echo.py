"""Echo synthesis for one scan: moving targets, stationary clutter and noise.

The received tensor for scan b is indexed (m_r, l, p):

    y[m, l, p] = sum_t alpha_t e^{j2pi p psi_d} e^{-j2pi l psi_r} g_b(theta_t) a_rx[m](psi_s)
               + sum_s alpha_s              e^{-j2pi l psi_r} g_b(theta_s) a_rx[m](psi_s)
               + n[m, l, p],   n ~ CN(0, sigma^2)

Every scene element contributes to every scan; the transmit pattern g_b does
the attenuation of out-of-beam elements. Scatterers carry no Doppler factor,
which is exactly what the clutter filter exploits.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .beams import BeamPlan, steering_rx, steering_tx, tx_gain
from .scene import (
    Scene,
    SystemConfig,
    complex_normal,
    frequencies_scatterer,
    frequencies_target,
)

__all__ = [
    "EchoTensor",
    "steering_range",
    "steering_doppler",
    "steering_rx",
    "steering_tx",
    "synthesize_echo",
    "write_tensor",
    "read_tensor",
]


def steering_range(psi_r: float, n_sub: int) -> np.ndarray:
    """Range steering vector, entry l = exp(-j 2 pi l psi_r). Note the minus sign."""
    return np.exp(-2j * np.pi * psi_r * np.arange(n_sub))


def steering_doppler(psi_d: float, n_sym: int) -> np.ndarray:
    """Doppler steering vector, entry p = exp(+j 2 pi p psi_d)."""
    return np.exp(2j * np.pi * psi_d * np.arange(n_sym))


@dataclass
class EchoTensor:
    """One scan's data cube plus bookkeeping.

    data            (M_r, L, P) complex
    scan_index      b
    cfg             the SystemConfig it was synthesized under
    stage           "raw", "normalized" or "filtered"
    transient_mask  (P,) bool, True where the filter output is still settling;
                    None before filtering
    """

    data: np.ndarray
    scan_index: int
    cfg: SystemConfig
    stage: str = "raw"
    transient_mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        expected = (self.cfg.m_rx, self.cfg.n_sub, self.cfg.n_sym)
        if self.data.shape != expected:
            raise ValueError(f"echo tensor shape {self.data.shape} != {expected}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("echo tensor contains non-finite entries")


def _seed_tuple(seed) -> tuple:
    """Flatten a possibly nested seed spec into a flat tuple of ints."""
    if isinstance(seed, (tuple, list)):
        out: list = []
        for part in seed:
            out.extend(_seed_tuple(part))
        return tuple(out)
    return (seed,)


def synthesize_echo(scene: Scene, plan: BeamPlan, b: int, cfg: SystemConfig, seed=0,
                    noise_var: float | None = None) -> EchoTensor:
    """Synthesize the raw echo tensor for scan b.

    The noise stream is seeded per scan from (seed, b), so different scans get
    independent noise and a rerun with the same seed is bit-identical.
    ``noise_var`` overrides cfg.noise_var when given.
    """
    m_rx, n_sub, n_sym = cfg.m_rx, cfg.n_sub, cfg.n_sym
    sigma2 = cfg.noise_var if noise_var is None else noise_var
    y = np.zeros((m_rx, n_sub, n_sym), dtype=complex)

    for t in scene.targets:
        psi_r, psi_d, psi_s = frequencies_target(t, cfg)
        g = tx_gain(t.theta, plan, b, cfg)
        y += (t.alpha * g) * np.einsum(
            "m,l,p->mlp",
            steering_rx(psi_s, m_rx),
            steering_range(psi_r, n_sub),
            steering_doppler(psi_d, n_sym),
        )
    for s in scene.scatterers:
        psi_r, psi_s = frequencies_scatterer(s, cfg)
        g = tx_gain(s.theta, plan, b, cfg)
        y += (s.alpha * g) * np.einsum(
            "m,l->ml",
            steering_rx(psi_s, m_rx),
            steering_range(psi_r, n_sub),
        )[:, :, None]

    if sigma2 > 0:
        rng = np.random.default_rng((*_seed_tuple(seed), b))
        y += complex_normal(rng, sigma2, y.shape)

    return EchoTensor(data=y, scan_index=b, cfg=cfg, stage="raw")


# ---------------------------------------------------------------------------
# flat binary serialization
#
# header: M_r, L, P, b as uint32 little-endian, then L*P*M_r samples as
# interleaved float64 (re, im) pairs in (p-major, l, m_r) memory order.

_HEADER = struct.Struct("<4I")


def write_tensor(tensor: EchoTensor, path) -> None:
    m_rx, n_sub, n_sym = tensor.data.shape
    arr = np.ascontiguousarray(tensor.data.transpose(2, 1, 0))
    flat = np.empty(arr.size * 2, dtype="<f8")
    flat[0::2] = arr.real.ravel()
    flat[1::2] = arr.imag.ravel()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(m_rx, n_sub, n_sym, tensor.scan_index))
        fh.write(flat.tobytes())


def read_tensor(path, cfg: SystemConfig) -> EchoTensor:
    with open(path, "rb") as fh:
        m_rx, n_sub, n_sym, b = _HEADER.unpack(fh.read(_HEADER.size))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if flat.size != 2 * m_rx * n_sub * n_sym:
        raise ValueError(f"payload size {flat.size} does not match header of {path}")
    data = (flat[0::2] + 1j * flat[1::2]).reshape(n_sym, n_sub, m_rx).transpose(2, 1, 0)
    return EchoTensor(data=data.copy(), scan_index=int(b), cfg=cfg, stage="raw")
