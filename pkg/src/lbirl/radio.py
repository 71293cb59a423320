"""Log-distance signal model with a parabolic sector antenna pattern.

Signal strength in dB:

    S(d, phi) = S0 - 10*eta*log10(max(d, d_min)/d0) - min(12*(phi/phi_3dB)^2, A_back)

Spectral efficiency is log2(1 + SNR), capped, and normalized so that a
boresight UE at the reference distance gets efficiency 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RadioConfig:
    ref_signal_db: float = 36.0     # boresight signal at the reference distance
    ref_distance_m: float = 200.0
    path_loss_exponent: float = 3.5
    min_distance_m: float = 10.0
    beamwidth_deg: float = 85.0     # 3 dB beamwidth of the sector antenna
    back_lobe_db: float = 20.0      # maximum antenna attenuation
    noise_floor: float = 1.0        # linear; SNR = 10^(S/10) / noise_floor
    max_raw_efficiency: float | None = None  # cap on log2(1+SNR); None = cap at the reference point

    @property
    def reference_raw_efficiency(self) -> float:
        snr0 = 10.0 ** (self.ref_signal_db / 10.0) / self.noise_floor
        return math.log2(1.0 + snr0)

    @property
    def efficiency_cap(self) -> float:
        if self.max_raw_efficiency is not None:
            return self.max_raw_efficiency
        return self.reference_raw_efficiency

    def kernel_constants(self) -> tuple[float, ...]:
        """Flat constants consumed by the jitted simulator kernels."""
        return (
            self.ref_signal_db,
            self.ref_distance_m,
            self.path_loss_exponent,
            self.min_distance_m,
            math.radians(self.beamwidth_deg),
            self.back_lobe_db,
            self.noise_floor,
            self.efficiency_cap,
            self.reference_raw_efficiency,
        )


def wrap_angle(a):
    """Wrap radians into [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def antenna_gain_db(offset_rad, cfg: RadioConfig):
    """Parabolic pattern, floored at -back_lobe_db. Maximal (0 dB) on boresight."""
    phi3 = math.radians(cfg.beamwidth_deg)
    off = np.abs(wrap_angle(offset_rad))
    return -np.minimum(12.0 * (off / phi3) ** 2, cfg.back_lobe_db)


def signal_strength_db(distance_m, offset_rad, cfg: RadioConfig):
    d = np.maximum(np.asarray(distance_m, dtype=float), cfg.min_distance_m)
    pl = cfg.ref_signal_db - 10.0 * cfg.path_loss_exponent * np.log10(d / cfg.ref_distance_m)
    return pl + antenna_gain_db(offset_rad, cfg)


def spectral_efficiency(signal_db, cfg: RadioConfig):
    """Normalized efficiency in (0, cap/ref]; equals 1 at the reference point."""
    snr = 10.0 ** (np.asarray(signal_db, dtype=float) / 10.0) / cfg.noise_floor
    raw = np.log2(1.0 + snr)
    return np.minimum(raw, cfg.efficiency_cap) / cfg.reference_raw_efficiency


def signal_quality(ue, cell, cfg: RadioConfig) -> float:
    """Signal in dB between a UE (or raw position) and a cell."""
    pos = getattr(ue, "position", ue)
    dx = float(pos[0]) - cell.site_xy[0]
    dy = float(pos[1]) - cell.site_xy[1]
    dist = math.hypot(dx, dy)
    offset = math.atan2(dy, dx) - math.radians(cell.sector_azimuth_deg)
    return float(signal_strength_db(dist, offset, cfg))
