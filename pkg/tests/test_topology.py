import numpy as np
import pytest

from lbirl.topology import Topology, TopologyConfig, build_topology


def test_default_counts():
    topo = build_topology()
    assert topo.n_cells == 84
    assert topo.n_sectors == 21
    assert topo.n_sites == 7
    assert len(topo.cells) == 84
    assert len({c.id for c in topo.cells}) == 84


def test_single_site_degenerate():
    topo = build_topology(TopologyConfig(enb_count=1))
    assert topo.n_cells == 12
    assert np.allclose(topo.site_xy, 0.0)


def test_hexagon_ring_geometry():
    isd = 500.0
    topo = build_topology(TopologyConfig(inter_site_distance_m=isd))
    sites = topo.site_xy
    assert np.allclose(sites[0], [0.0, 0.0])
    ring = sites[1:]
    # each ring site sits one inter-site distance from the center and from
    # both ring neighbors (hexagon side equals its circumradius)
    for k in range(6):
        assert np.hypot(*ring[k]) == pytest.approx(isd)
        nxt = ring[(k + 1) % 6]
        assert np.hypot(ring[k][0] - nxt[0], ring[k][1] - nxt[1]) == pytest.approx(isd)


def test_sector_azimuths_and_carriers():
    topo = build_topology()
    az = {c.sector_azimuth_deg for c in topo.cells}
    assert az == {0.0, 120.0, 240.0}
    for s in range(topo.n_sectors):
        cells = [topo.cells[i] for i in topo.sector_cells[s]]
        assert sorted(c.carrier for c in cells) == [0, 1, 2, 3]
        assert len({c.sector_azimuth_deg for c in cells}) == 1


def test_same_site_candidates():
    topo = build_topology()
    for c in (0, 17, 83):
        cands = topo.same_site_cells[c]
        assert len(cands) == 11
        assert c not in cands
        site = topo.cell_site[c]
        assert all(topo.cell_site[j] == site for j in cands)


def test_determinism():
    a = build_topology()
    b = build_topology()
    assert np.array_equal(a.site_xy, b.site_xy)
    assert np.array_equal(a.sector_cells, b.sector_cells)
    assert a.cells == b.cells


@pytest.mark.parametrize("kw", [
    dict(enb_count=0),
    dict(enb_count=3),
    dict(sectors_per_enb=0),
    dict(cells_per_sector=-1),
    dict(inter_site_distance_m=0.0),
    dict(carrier_capacity_mbps=(1.0, 2.0)),
    dict(carrier_capacity_mbps=(1.0, 2.0, 3.0, -4.0)),
])
def test_invalid_configs_rejected(kw):
    with pytest.raises(ValueError):
        build_topology(TopologyConfig(**kw))
