import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbirl import _kernels
from lbirl.radio import (RadioConfig, antenna_gain_db, signal_quality,
                         signal_strength_db, spectral_efficiency)
from lbirl.topology import build_topology


@pytest.fixture(scope="module")
def radio():
    return RadioConfig()


def test_boresight_reference_anchor(radio):
    s = signal_strength_db(radio.ref_distance_m, 0.0, radio)
    assert s == pytest.approx(radio.ref_signal_db)
    assert spectral_efficiency(s, radio) == pytest.approx(1.0)


def test_distance_doubling_drop(radio):
    # path-loss exponent 3.5: doubling the distance costs 10*3.5*log10(2) dB
    d = 2 * radio.ref_distance_m
    s0 = signal_strength_db(radio.ref_distance_m, 0.0, radio)
    s1 = signal_strength_db(d, 0.0, radio)
    assert s0 - s1 == pytest.approx(10 * 3.5 * math.log10(2), abs=1e-9)
    assert s0 - s1 == pytest.approx(10.54, abs=0.01)


def test_back_lobe_attenuation(radio):
    front = signal_strength_db(300.0, 0.0, radio)
    back = signal_strength_db(300.0, math.pi, radio)
    assert front - back == pytest.approx(radio.back_lobe_db)


def test_minimum_distance_clamp(radio):
    assert signal_strength_db(0.0, 0.0, radio) == signal_strength_db(
        radio.min_distance_m, 0.0, radio)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=11.0, max_value=5000.0),
       st.floats(min_value=1.0, max_value=500.0),
       st.floats(min_value=-math.pi, max_value=math.pi))
def test_signal_strictly_decreases_with_distance(d, extra, angle):
    radio = RadioConfig()
    near = signal_strength_db(d, angle, radio)
    far = signal_strength_db(d + extra, angle, radio)
    assert far < near


def test_gain_maximal_on_boresight(radio):
    offs = np.linspace(-math.pi, math.pi, 101)
    g = antenna_gain_db(offs, radio)
    assert g.max() == pytest.approx(0.0)
    assert float(antenna_gain_db(0.0, radio)) == 0.0
    assert g.min() == pytest.approx(-radio.back_lobe_db)


def test_signal_quality_on_cell_objects(radio):
    topo = build_topology()
    cell = topo.cells[0]  # central site, azimuth 0
    class P:
        position = (radio.ref_distance_m, 0.0)
    assert signal_quality(P(), cell, radio) == pytest.approx(radio.ref_signal_db)


def test_kernel_matches_reference_formulas(radio):
    # the jitted scalar helpers must agree with the public vectorized model
    rng = np.random.default_rng(0)
    consts = radio.kernel_constants()
    for _ in range(200):
        d = float(rng.uniform(1.0, 2000.0))
        off = float(rng.uniform(-4 * math.pi, 4 * math.pi))
        want = float(signal_strength_db(d, off, radio))
        got = (_kernels._path_term_db(d * d, *consts[:4])
               + _kernels._gain_db(off, consts[4], consts[5]))
        assert got == pytest.approx(want, abs=1e-9)
        eff_want = float(spectral_efficiency(want, radio))
        eff_got = _kernels._efficiency(want, consts[6], consts[7], consts[8])
        assert eff_got == pytest.approx(eff_want, abs=1e-12)
