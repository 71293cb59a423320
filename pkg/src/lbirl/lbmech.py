"""Idle-mode reselection (IULB) and throughput-triggered handover (MLB).

IULB moves only idle UEs: when a cell's resource use breaches the load
trigger, each idle UE camped there re-draws its cell within the sector with
probability proportional to the per-cell weights (it may land on its own
cell and stay). MLB moves only active UEs, immediately, toward same-site
cells that admit them.

Integer action offsets map linearly onto the MLB thresholds: one unit moves
the source trigger by `mlb_offset_unit` of the base trigger, the admission
margin by the same amount, and the signal-delta gate by one dB step.
Positive offsets always tighten (fewer handovers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .topology import Topology


@dataclass
class IulbParams:
    """Reselection weights for one sector's cells, integers in [0, 10]."""
    sector: int
    weights: np.ndarray
    load_trigger: float = 0.5

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0):
            raise ValueError("IULB weights must be non-negative")
        if not (0.0 < self.load_trigger <= 1.0):
            raise ValueError("load_trigger must lie in (0, 1]")


@dataclass
class MlbParams:
    """Per-cell handover thresholds for one sector, integers in [-6, 6]."""
    sector: int
    source_trigger_offset: np.ndarray
    target_admit_offset: np.ndarray
    ho_quality_offset: np.ndarray
    base_trigger_mbps: float = 2.2
    offset_unit: float = 0.05
    quality_base_db: float = -3.0
    quality_unit_db: float = 1.0
    score_quality_weight: float = 0.1

    def __post_init__(self):
        for name in ("source_trigger_offset", "target_admit_offset", "ho_quality_offset"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n = len(self.source_trigger_offset)
        if len(self.target_admit_offset) != n or len(self.ho_quality_offset) != n:
            raise ValueError("MLB offsets must have one entry per cell of the sector")

    def cell_thresholds(self):
        """Physical thresholds: (trigger bits/s, admit margin bits/s, quality dB)."""
        base = self.base_trigger_mbps * 1e6
        thr = base * (1.0 - self.offset_unit * self.source_trigger_offset)
        admit = base * self.offset_unit * self.target_admit_offset
        qual = self.quality_base_db + self.quality_unit_db * self.ho_quality_offset
        return thr, admit, qual


@dataclass
class LbParams:
    """Network-wide parameter set: one weight row and offset triple per sector."""
    iulb_weights: np.ndarray       # (n_sectors, cells_per_sector)
    mlb_source: np.ndarray         # (n_sectors, cells_per_sector)
    mlb_admit: np.ndarray
    mlb_quality: np.ndarray
    iulb_load_trigger: float = 0.5
    mlb_base_trigger_mbps: float = 2.2
    mlb_offset_unit: float = 0.05
    mlb_quality_base_db: float = -3.0
    mlb_quality_unit_db: float = 1.0
    mlb_score_quality_weight: float = 0.1
    _cache: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def neutral(cls, topology: Topology, sim_params=None) -> "LbParams":
        """Uniform weights of 5 and zero offsets everywhere."""
        s, nc = topology.n_sectors, topology.config.cells_per_sector
        kw = {}
        if sim_params is not None:
            kw = dict(
                iulb_load_trigger=sim_params.iulb_load_trigger,
                mlb_base_trigger_mbps=sim_params.mlb_base_trigger_mbps,
                mlb_offset_unit=sim_params.mlb_offset_unit,
                mlb_quality_base_db=sim_params.mlb_quality_base_db,
                mlb_quality_unit_db=sim_params.mlb_quality_unit_db,
                mlb_score_quality_weight=sim_params.mlb_score_quality_weight,
            )
        return cls(
            iulb_weights=np.full((s, nc), 5.0),
            mlb_source=np.zeros((s, nc)),
            mlb_admit=np.zeros((s, nc)),
            mlb_quality=np.zeros((s, nc)),
            **kw,
        )

    def replace_sector(self, sector: int, iulb_weights, mlb_source, mlb_admit,
                       mlb_quality) -> "LbParams":
        new = LbParams(
            iulb_weights=self.iulb_weights.copy(),
            mlb_source=self.mlb_source.copy(),
            mlb_admit=self.mlb_admit.copy(),
            mlb_quality=self.mlb_quality.copy(),
            iulb_load_trigger=self.iulb_load_trigger,
            mlb_base_trigger_mbps=self.mlb_base_trigger_mbps,
            mlb_offset_unit=self.mlb_offset_unit,
            mlb_quality_base_db=self.mlb_quality_base_db,
            mlb_quality_unit_db=self.mlb_quality_unit_db,
            mlb_score_quality_weight=self.mlb_score_quality_weight,
        )
        new.iulb_weights[sector] = iulb_weights
        new.mlb_source[sector] = mlb_source
        new.mlb_admit[sector] = mlb_admit
        new.mlb_quality[sector] = mlb_quality
        return new

    def kernel_arrays(self, topology: Topology, sim_params=None):
        """Dense arrays for the tick kernel; cached until parameters change."""
        if self._cache is not None:
            return self._cache
        w = np.asarray(self.iulb_weights, dtype=np.float64)
        wsum = w.sum(axis=1)
        cumw = np.cumsum(w, axis=1)
        safe = np.where(wsum > 0, wsum, 1.0)[:, None]
        cumw = cumw / safe
        base = self.mlb_base_trigger_mbps * 1e6
        thr = base * (1.0 - self.mlb_offset_unit * self.mlb_source.ravel())
        admit = base * self.mlb_offset_unit * self.mlb_admit.ravel()
        qual = self.mlb_quality_base_db + self.mlb_quality_unit_db * self.mlb_quality.ravel()
        n_sectors = w.shape[0]
        mask = np.ones(n_sectors, dtype=np.bool_)
        self._cache = (
            cumw, wsum, float(self.iulb_load_trigger), mask,
            thr, admit, qual, float(self.mlb_score_quality_weight * 1e6), mask,
        )
        return self._cache


def apply_iulb(state, params: IulbParams, rng: np.random.Generator):
    """Run one reselection pass for the cells of params.sector.

    No-op for cells at or below the load trigger and for all-zero weights.
    """
    topo = state.topology
    nc = topo.config.cells_per_sector
    if len(params.weights) != nc:
        raise ValueError(f"expected {nc} weights, got {len(params.weights)}")
    n_sectors = topo.n_sectors
    cumw = np.zeros((n_sectors, nc))
    wsum = np.zeros(n_sectors)
    s = params.sector
    total = params.weights.sum()
    wsum[s] = total
    cumw[s] = np.cumsum(params.weights) / (total if total > 0 else 1.0)
    mask = np.zeros(n_sectors, dtype=np.bool_)
    mask[s] = True
    draws = rng.random(state.ue_count)
    _kernels._iulb_step(state.active, state.serving, state.prb_last,
                        topo.cell_sector, topo.sector_cells, cumw, wsum,
                        float(params.load_trigger), mask, draws, state.resel_count)
    return state


def apply_mlb(state, params: MlbParams):
    """Run one handover pass for the cells of params.sector. Deterministic."""
    topo = state.topology
    nc = topo.config.cells_per_sector
    if len(params.source_trigger_offset) != nc:
        raise ValueError(f"expected {nc} offsets per component, got "
                         f"{len(params.source_trigger_offset)}")
    thr_s, admit_s, qual_s = params.cell_thresholds()
    n_cells = topo.n_cells
    thr = np.zeros(n_cells)
    admit = np.zeros(n_cells)
    qual = np.zeros(n_cells)
    ids = topo.sector_cells[params.sector]
    thr[ids] = thr_s
    admit[ids] = admit_s
    qual[ids] = qual_s
    mask = np.zeros(topo.n_sectors, dtype=np.bool_)
    mask[params.sector] = True
    radio = state.radio.kernel_constants()
    _kernels._mlb_step(state.pos_x, state.pos_y, state.active, state.serving,
                       state.win_bits, state.win_act_sec,
                       topo.cell_sector, topo.cell_site, topo.cell_azimuth_rad,
                       np.ascontiguousarray(topo.site_xy[:, 0]),
                       np.ascontiguousarray(topo.site_xy[:, 1]),
                       topo.same_site_cells, topo.cell_capacity_mbps * 1e6,
                       thr, admit, qual,
                       float(params.score_quality_weight * 1e6), mask,
                       state.ho_count, *radio)
    return state


def unloaded_throughput_percentile(topology, scenario, seed: int, hours: int = 24,
                                   pct: float = 20.0, radio=None, sim_params=None) -> float:
    """Percentile of hourly per-cell throughput with balancing disabled, in Mbps.

    Used to calibrate the MLB base trigger for a traffic mix.
    """
    from .simnet import init_scenario, advance, cell_stats, reset_window, SimParams
    from .radio import RadioConfig

    sim_params = sim_params or SimParams()
    state = init_scenario(topology, scenario, seed, radio or RadioConfig(), sim_params)
    off = LbParams.neutral(topology, sim_params)
    off.iulb_load_trigger = 1.1  # never triggers
    off.mlb_base_trigger_mbps = 0.0
    samples = []
    for _ in range(hours):
        advance(state, off, sim_params.control_ticks)
        stats = cell_stats(state)
        samples.extend(st.ip_throughput for st in stats if st.active_ues > 0)
        reset_window(state)
    if not samples:
        return 0.0
    return float(np.percentile(np.asarray(samples), pct))
