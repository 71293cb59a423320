"""Hexagonal multi-carrier RAN layout.

A site (eNB) hosts three directional sectors; each sector stacks one cell
per carrier frequency. The default layout is a ring of six sites around a
central one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Carrier capacities in Mbps, lowest band first. Heterogeneous on purpose:
# balancing only matters when carriers are unequal.
DEFAULT_CARRIER_CAPACITY_MBPS = (6.0, 12.0, 20.0, 28.0)


@dataclass(frozen=True)
class TopologyConfig:
    enb_count: int = 7
    sectors_per_enb: int = 3
    cells_per_sector: int = 4
    inter_site_distance_m: float = 500.0
    coverage_radius_factor: float = 1.2  # coverage disc radius / inter-site distance
    carrier_capacity_mbps: tuple[float, ...] = DEFAULT_CARRIER_CAPACITY_MBPS
    prb_per_cell: int = 50

    @property
    def coverage_radius_m(self) -> float:
        return self.coverage_radius_factor * self.inter_site_distance_m


@dataclass(frozen=True)
class Cell:
    id: int
    enb: int
    sector: int  # global sector index
    sector_azimuth_deg: float
    carrier: int
    capacity_mbps: float
    prb_count: int
    site_xy: tuple[float, float]


@dataclass
class Topology:
    """Immutable layout plus flat arrays used by the simulator kernels."""

    config: TopologyConfig
    cells: list[Cell]
    site_xy: np.ndarray          # (n_sites, 2) meters
    sector_site: np.ndarray      # (n_sectors,) site index
    sector_azimuth_rad: np.ndarray
    cell_sector: np.ndarray      # (n_cells,)
    cell_carrier: np.ndarray
    cell_capacity_mbps: np.ndarray
    sector_cells: np.ndarray     # (n_sectors, cells_per_sector) cell ids by carrier
    same_site_cells: np.ndarray  # (n_cells, sectors_per_enb*cells_per_sector - 1)
    cell_site: np.ndarray = field(init=False)
    cell_azimuth_rad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.cell_site = self.sector_site[self.cell_sector]
        self.cell_azimuth_rad = self.sector_azimuth_rad[self.cell_sector]

    @property
    def n_sites(self) -> int:
        return self.site_xy.shape[0]

    @property
    def n_sectors(self) -> int:
        return self.sector_site.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cell_sector.shape[0]

    @property
    def coverage_radius_m(self) -> float:
        return self.config.coverage_radius_m


def _site_positions(cfg: TopologyConfig) -> np.ndarray:
    if cfg.enb_count == 1:
        return np.zeros((1, 2))
    # central site plus six ring sites at the hexagon vertices
    pts = [(0.0, 0.0)]
    for k in range(6):
        ang = k * math.pi / 3.0
        pts.append((cfg.inter_site_distance_m * math.cos(ang),
                    cfg.inter_site_distance_m * math.sin(ang)))
    return np.array(pts)


def build_topology(config: TopologyConfig | None = None) -> Topology:
    """Construct the network layout. Deterministic; rejects invalid counts."""
    cfg = config or TopologyConfig()
    if cfg.enb_count not in (1, 7):
        raise ValueError(f"enb_count must be 1 or 7, got {cfg.enb_count}")
    if cfg.sectors_per_enb <= 0 or cfg.cells_per_sector <= 0:
        raise ValueError("sector and cell counts must be positive")
    if cfg.inter_site_distance_m <= 0:
        raise ValueError("inter_site_distance_m must be positive")
    if len(cfg.carrier_capacity_mbps) != cfg.cells_per_sector:
        raise ValueError("carrier_capacity_mbps must list one capacity per carrier")
    if any(c <= 0 for c in cfg.carrier_capacity_mbps):
        raise ValueError("cell capacities must be positive")

    site_xy = _site_positions(cfg)
    n_sites = site_xy.shape[0]
    n_sectors = n_sites * cfg.sectors_per_enb
    n_cells = n_sectors * cfg.cells_per_sector
    az_step = 360.0 / cfg.sectors_per_enb

    cells: list[Cell] = []
    sector_site = np.empty(n_sectors, dtype=np.int64)
    sector_az = np.empty(n_sectors, dtype=np.float64)
    cell_sector = np.empty(n_cells, dtype=np.int64)
    cell_carrier = np.empty(n_cells, dtype=np.int64)
    cell_cap = np.empty(n_cells, dtype=np.float64)
    sector_cells = np.empty((n_sectors, cfg.cells_per_sector), dtype=np.int64)

    cid = 0
    for enb in range(n_sites):
        for k in range(cfg.sectors_per_enb):
            s = enb * cfg.sectors_per_enb + k
            sector_site[s] = enb
            az_deg = k * az_step
            sector_az[s] = math.radians(az_deg)
            for carrier in range(cfg.cells_per_sector):
                cells.append(Cell(
                    id=cid,
                    enb=enb,
                    sector=s,
                    sector_azimuth_deg=az_deg,
                    carrier=carrier,
                    capacity_mbps=cfg.carrier_capacity_mbps[carrier],
                    prb_count=cfg.prb_per_cell,
                    site_xy=(float(site_xy[enb, 0]), float(site_xy[enb, 1])),
                ))
                cell_sector[cid] = s
                cell_carrier[cid] = carrier
                cell_cap[cid] = cfg.carrier_capacity_mbps[carrier]
                sector_cells[s, carrier] = cid
                cid += 1

    # handover candidates: every other cell on the same site
    per_site = cfg.sectors_per_enb * cfg.cells_per_sector
    same_site = np.empty((n_cells, per_site - 1), dtype=np.int64)
    for c in range(n_cells):
        site = sector_site[cell_sector[c]]
        base = site * per_site
        k = 0
        for other in range(base, base + per_site):
            if other != c:
                same_site[c, k] = other
                k += 1

    return Topology(
        config=cfg,
        cells=cells,
        site_xy=site_xy,
        sector_site=sector_site,
        sector_azimuth_rad=sector_az,
        cell_sector=cell_sector,
        cell_carrier=cell_carrier,
        cell_capacity_mbps=cell_cap,
        sector_cells=sector_cells,
        same_site_cells=same_site,
    )
