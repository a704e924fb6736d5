"""Root-MUSIC frequency estimation and the three tensor rearrangements.

After clutter filtering, the candidate scan's tensor is (to first order) a
rank-1 outer product of a spatial, a range and a Doppler steering vector. Each
axis is estimated independently: slice the tensor into snapshot columns along
that axis, take the sample covariance, and root the MUSIC null polynomial of
its noise subspace. One source per scan is assumed throughout, so the noise
subspace always has dimension M-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .echo import EchoTensor
from .clutter import retained_symbols
from .scene import (
    SystemConfig,
    range_from_psi_r,
    speed_from_psi_d,
    theta_from_psi_s,
)


@dataclass(frozen=True)
class SnapshotMatrix:
    """M x I complex snapshot stack for one axis.

    axis_tag  one of "spatial", "range", "doppler"
    sign      +1 where the steering phase progresses as e^{+j2pi psi k}
              (spatial, doppler), -1 for the range axis (e^{-j2pi psi l})
    """

    data: np.ndarray
    axis_tag: str
    sign: int

    def __post_init__(self):
        m, i = self.data.shape
        if m < 2 or i < 2:
            raise ValueError(f"snapshot matrix needs M >= 2 and I >= 2, got {m}x{i}")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: float
    range_hat: float
    speed_hat: float
    psi_s_hat: float
    psi_r_hat: float
    psi_d_hat: float
    scan_index: int


def noise_subspace(f: SnapshotMatrix) -> np.ndarray:
    """Eigenvectors of the sample covariance for the M-1 smallest eigenvalues."""
    m, i = f.data.shape
    r_hat = (f.data @ f.data.conj().T) / i
    if not np.all(np.isfinite(r_hat)):
        raise ValueError("sample covariance has non-finite entries")
    _, vecs = np.linalg.eigh(r_hat)  # ascending eigenvalues
    return vecs[:, : m - 1]


def _reciprocal_symmetrize(roots: np.ndarray) -> np.ndarray:
    """Restore the exact reciprocal pairing of the null polynomial's roots.

    The coefficient sequence below is conjugate-symmetric (the projector is
    Hermitian to the bit), so the exact root multiset is closed under
    z -> 1/conj(z); circle zeros have even order because the polynomial is
    nonnegative there. np.roots loses that structure for (near-)double roots
    on the unit circle, splitting them by ~sqrt(eps) in arbitrary directions.
    Rebuild each matched pair (u, v ~ 1/conj(u)) around its mean so the pair
    is reciprocal exactly; the displacement stays within the roots' own
    companion-matrix error. Pairs that do not match within a loose tolerance
    (never the case for a conjugate-symmetric input) are left untouched.
    """
    n = len(roots)
    if n % 2:
        return roots
    order = np.argsort(-np.abs(np.abs(roots) - 1.0))  # most off-circle first
    used = np.zeros(n, dtype=bool)
    out = []
    for i in order:
        if used[i]:
            continue
        used[i] = True
        u = roots[i]
        if u == 0 or not np.isfinite(u):
            out.append(u)
            continue
        target = 1.0 / np.conj(u)
        free = np.flatnonzero(~used)
        if free.size == 0:
            out.append(u)
            continue
        j = free[np.argmin(np.abs(roots[free] - target))]
        v = roots[j]
        if abs(v - target) > 1e-3 * (1.0 + abs(target)):
            out.append(u)
            continue
        used[j] = True
        r = math.sqrt(abs(u) / abs(v))
        phi = np.angle(u) + 0.5 * np.angle(v / u)
        zeta = r * np.exp(1j * phi)
        out.extend((zeta, 1.0 / np.conj(zeta)))
    return np.array(out)


def music_roots(f: SnapshotMatrix) -> np.ndarray:
    """Roots of the MUSIC null polynomial sum_k trace_k(Vn Vn^H) z^(M-1+k).

    The coefficient for offset k is the sum of the k-th diagonal of the noise
    subspace projector, k = M-1 down to -(M-1). Rooting goes through the
    companion matrix (np.roots) followed by the reciprocal-pair restoration.
    """
    vn = noise_subspace(f)
    proj = vn @ vn.conj().T
    m = proj.shape[0]
    coeffs = np.array([np.trace(proj, offset=k) for k in range(m - 1, -m, -1)])
    return _reciprocal_symmetrize(np.roots(coeffs))


def root_music_frequency(f: SnapshotMatrix) -> float:
    """Normalized frequency in (-0.5, 0.5] from the root nearest the unit circle.

    Among roots strictly inside the circle the one with the largest modulus is
    selected (ties broken toward the larger real part); its phase divided by
    2 pi is the frequency estimate, negated for the range axis to undo that
    axis's opposite phase convention.
    """
    roots = music_roots(f)
    inside = roots[np.abs(roots) < 1.0]
    if inside.size == 0:
        raise RuntimeError("no polynomial root strictly inside the unit circle")
    mags = np.abs(inside)
    best = mags.max()
    tied = inside[mags > best - 1e-12]
    z = tied[np.argmax(tied.real)]
    psi = f.sign * float(np.angle(z)) / (2.0 * math.pi)
    if psi <= -0.5:
        psi += 1.0
    return psi


# ---------------------------------------------------------------------------
# snapshot builders
#
# The tensor is (M_r, L, P). Only symbols outside the filter transient are
# stacked. Column orders below follow the fixed conventions (documented per
# builder) so rearrangements are reproducible bit for bit.

def build_spatial_snapshots(y_check: EchoTensor) -> SnapshotMatrix:
    """M_r x (L * P_eff); column order: subcarrier fast, symbol slow."""
    keep = retained_symbols(y_check)
    cube = y_check.data[:, :, keep]            # (M_r, L, P_eff)
    m_rx = cube.shape[0]
    data = cube.transpose(0, 2, 1).reshape(m_rx, -1)
    return SnapshotMatrix(data=data, axis_tag="spatial", sign=+1)


def build_range_snapshots(y_check: EchoTensor) -> SnapshotMatrix:
    """L x (M_r * P_eff); column order: antenna fast, symbol slow."""
    keep = retained_symbols(y_check)
    cube = y_check.data[:, :, keep]
    n_sub = cube.shape[1]
    data = cube.transpose(1, 2, 0).reshape(n_sub, -1)
    return SnapshotMatrix(data=data, axis_tag="range", sign=-1)


def build_doppler_snapshots(y_check: EchoTensor) -> SnapshotMatrix:
    """P_eff x (M_r * L); column order: antenna fast, subcarrier slow."""
    keep = retained_symbols(y_check)
    cube = y_check.data[:, :, keep]
    p_eff = cube.shape[2]
    data = cube.transpose(2, 1, 0).reshape(p_eff, -1)
    return SnapshotMatrix(data=data, axis_tag="doppler", sign=+1)


def estimate_candidate(y_check: EchoTensor, b: int, cfg: SystemConfig) -> EstimationResult:
    """Angle, range and speed of the single target assumed present in scan b.

    Negative range-frequency estimates wrap by one cycle before the meter
    conversion (range is nonnegative); angle and speed keep their sign.
    """
    psi_s = root_music_frequency(build_spatial_snapshots(y_check))
    psi_r = root_music_frequency(build_range_snapshots(y_check))
    psi_d = root_music_frequency(build_doppler_snapshots(y_check))
    return EstimationResult(
        theta_hat=theta_from_psi_s(psi_s, cfg),
        range_hat=range_from_psi_r(psi_r, cfg),
        speed_hat=speed_from_psi_d(psi_d, cfg),
        psi_s_hat=psi_s,
        psi_r_hat=psi_r,
        psi_d_hat=psi_d,
        scan_index=b,
    )
