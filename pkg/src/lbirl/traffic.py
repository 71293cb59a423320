"""Traffic scenarios: per-UE request processes and the daily load profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def default_diurnal_profile(peak_ratio: float = 4.0, peak_hour: int = 20,
                            trough_hour: int = 4, plateau: int = 4) -> tuple[float, ...]:
    """24 hourly multipliers with mean 1.

    The profile holds flat plateaus of `plateau` hours around the peak and
    trough (so the top/bottom plateau means differ by exactly `peak_ratio`)
    and half-cosine ramps in between.
    """
    if peak_ratio <= 0:
        raise ValueError("peak_ratio must be positive")
    shape = np.full(24, -1.0)
    t_hours = [(trough_hour - 2 + i) % 24 for i in range(plateau)]
    p_hours = [(peak_hour - 2 + i) % 24 for i in range(plateau)]
    if set(t_hours) & set(p_hours):
        raise ValueError("peak and trough plateaus overlap")
    for h in t_hours:
        shape[h] = 0.0
    for h in p_hours:
        shape[h] = 1.0

    def fill_ramp(start, rising):
        h = (start + 1) % 24
        gap = []
        while shape[h] < 0.0:
            gap.append(h)
            h = (h + 1) % 24
        n = len(gap)
        for i, g in enumerate(gap, start=1):
            c = (1.0 - math.cos(math.pi * i / (n + 1))) / 2.0
            shape[g] = c if rising else 1.0 - c

    fill_ramp(t_hours[-1], rising=True)
    fill_ramp(p_hours[-1], rising=False)

    mean_shape = shape.mean()
    trough = 1.0 / (1.0 + (peak_ratio - 1.0) * mean_shape)
    profile = trough + (peak_ratio - 1.0) * trough * shape
    profile = profile / profile.mean()  # exact mean 1, ratio preserved
    return tuple(float(v) for v in profile)


@dataclass(frozen=True)
class TrafficScenario:
    """One load pattern: UE population plus request size/interval distributions.

    Packet sizes are log-normal with arithmetic mean `packet_mean_bits` and
    log-space sigma `packet_sigma`; request think times are exponential with
    mean `request_interval_s`. Sizes are scaled by the hour's diurnal
    multiplier. Two further demand layers make traffic realizations differ
    persistently between episodes: each UE draws a demand multiplier
    (log-normal, mean 1, sigma `user_rate_sigma`) that divides its think
    time, and each episode places Gaussian demand hotspots that scale
    request sizes by position for the whole run.
    """

    id: int
    ue_count: int
    packet_mean_bits: float
    packet_sigma: float
    request_interval_s: float
    diurnal_profile: tuple[float, ...] = field(default_factory=default_diurnal_profile)
    speed_min_ms: float = 0.25
    speed_max_ms: float = 2.0
    user_rate_sigma: float = 0.8   # log-sigma of per-UE demand multipliers
    hotspot_count: int = 2         # per-episode demand bumps, fixed for the run
    hotspot_amplitude: float = 2.0 # maximum extra demand at a bump center
    hotspot_width_m: float = 250.0

    def __post_init__(self):
        if len(self.diurnal_profile) != 24:
            raise ValueError("diurnal_profile must have 24 hourly multipliers")
        if any(m < 0 for m in self.diurnal_profile):
            raise ValueError("diurnal multipliers must be non-negative")
        if abs(sum(self.diurnal_profile) / 24.0 - 1.0) > 1e-9:
            raise ValueError("diurnal_profile must average to 1 over a day")
        if self.packet_mean_bits <= 0 or self.packet_sigma <= 0 or self.request_interval_s <= 0:
            raise ValueError("packet and interval parameters must be positive")
        if not (0 < self.speed_min_ms <= self.speed_max_ms):
            raise ValueError("invalid UE speed range")
        if self.user_rate_sigma < 0:
            raise ValueError("user_rate_sigma must be non-negative")
        if self.hotspot_count < 0 or self.hotspot_amplitude < 0 or self.hotspot_width_m <= 0:
            raise ValueError("invalid hotspot parameters")

    @property
    def packet_log_mu(self) -> float:
        # underlying normal mean so the log-normal mean equals packet_mean_bits
        return math.log(self.packet_mean_bits) - 0.5 * self.packet_sigma ** 2


# Desk-scale presets. They differ in UE count and in request size/interval
# texture while keeping the mean offered load per UE comparable.
_PRESETS = {
    1: dict(ue_count=260, packet_mean_bits=32e6, packet_sigma=0.6, request_interval_s=40.0),
    2: dict(ue_count=200, packet_mean_bits=48e6, packet_sigma=0.8, request_interval_s=48.0),
    3: dict(ue_count=320, packet_mean_bits=20e6, packet_sigma=0.5, request_interval_s=32.0),
    4: dict(ue_count=240, packet_mean_bits=64e6, packet_sigma=1.0, request_interval_s=80.0),
}


def scenario_preset(scenario_id: int, **overrides) -> TrafficScenario:
    if scenario_id not in _PRESETS:
        raise ValueError(f"unknown scenario id {scenario_id} (presets: {sorted(_PRESETS)})")
    kw = dict(_PRESETS[scenario_id])
    kw.update(overrides)
    return TrafficScenario(id=scenario_id, **kw)


def scenario_from_dict(d: dict) -> TrafficScenario:
    kw = dict(d)
    sid = kw.pop("id")
    profile = kw.pop("diurnal_profile", None)
    if profile is not None:
        kw["diurnal_profile"] = tuple(float(v) for v in profile)
    if sid in _PRESETS:
        return scenario_preset(sid, **kw)
    return TrafficScenario(id=sid, **kw)
