import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from xydiscord.ed import EdConfig, correlators_ed, ground_state, sector_ground_states
from xydiscord.errors import SectorMismatch, ValidationError
from xydiscord.fermion_core import (
    ModelParams,
    broken_correlators,
    correlators,
    finite_factorizing_field,
    fidelity,
    g_function,
    g_values,
    ground_sector,
    mode_data,
    spontaneous_magnetization,
)
from xydiscord.pipeline import q_symmetric

HF = math.sqrt(0.51)


def test_mode_data_examples():
    assert mode_data(ModelParams(1.0, 0.0), math.pi / 2).lam == pytest.approx(1.0, abs=1e-15)
    for g, h in [(0.3, 0.2), (0.7, 1.7), (1.0, 1.0)]:
        assert mode_data(ModelParams(g, h), 0.0).lam == pytest.approx(abs(h - 1), abs=1e-15)
    m = mode_data(ModelParams(0.7, 0.7141428), math.pi / 3)
    assert m.lam == pytest.approx(math.sqrt((0.7141428 - 0.5) ** 2 + 0.49 * 0.75), abs=1e-15)
    assert m.lam > 0


def test_mode_angle_is_continuous():
    k = np.linspace(0, math.pi, 2001)
    for h in (0.3, HF, 0.99, 1.5):
        th = mode_data(ModelParams(0.7, h), k).theta
        # steep near k = 0 when h -> 1, but never wrapping
        assert np.max(np.abs(np.diff(th))) < 0.5
        assert abs(th[-1]) < 1e-12


def test_params_validation():
    for bad in (dict(gamma=0.0, h=1), dict(gamma=1.2, h=1), dict(gamma=0.5, h=1, T=-1),
                dict(gamma=0.5, h=1, L=7), dict(gamma=0.5, h=1, L=2)):
        with pytest.raises(ValidationError):
            ModelParams(**bad)


def test_infinite_temperature_kills_g():
    vals = g_values(ModelParams(0.7, 0.6, 1e12), np.arange(-4, 5))
    assert np.max(np.abs(vals)) < 1e-10


def test_ising_point_closed_form():
    # integrand reduces to -cos(k(n+1)), whose average over [0, pi] is -delta_{n,-1}
    vals = g_values(ModelParams(1.0, 0.0), np.arange(-5, 6))
    expected = np.where(np.arange(-5, 6) == -1, -1.0, 0.0)
    np.testing.assert_allclose(vals, expected, atol=1e-12)


def test_g0_against_ed_l16():
    st_ = ground_state(EdConfig(16, 0.7, 0.5))
    ed_gz = correlators_ed(st_, 1).g_z
    assert g_function(ModelParams(0.7, 0.5, 0.0, 16), 0) == pytest.approx(ed_gz, abs=1e-9)
    assert g_function(ModelParams(0.7, 0.5), 0) == pytest.approx(ed_gz, abs=1e-6)


def test_ordered_ising_correlators():
    cs = correlators(ModelParams(1.0, 0.0), 5)
    np.testing.assert_allclose(cs.g_xx, 1.0, atol=1e-12)


def test_polarized_correlators():
    cs = correlators(ModelParams(0.7, 1e6), 4)
    assert cs.g_z == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(cs.g_xx)) < 1e-6 and np.max(np.abs(cs.g_yy)) < 1e-6


def test_discord_curves_cross_at_hf():
    q = q_symmetric(ModelParams(0.7, HF), [1, 2, 3, 4, 5])
    assert np.ptp(q) < 1e-4
    q_off = q_symmetric(ModelParams(0.7, 0.5), [1, 2, 3, 4, 5])
    assert np.ptp(q_off) > 1e-3


def test_symmetric_set_flags():
    cs = correlators(ModelParams(0.7, 0.4, 0.2), 3)
    assert cs.symmetric and cs.provenance == "bulk-quadrature"
    assert cs.g_x == 0 and not np.any(cs.g_xz) and not np.any(cs.g_zx)
    with pytest.raises(ValidationError):
        correlators(ModelParams(0.7, 0.4), 65)
    with pytest.raises(ValidationError):
        correlators(ModelParams(0.7, 0.4, 0.0, 8), 5)


def test_ground_sector_matches_ed():
    p = ModelParams(0.7, 0.9, 0.0, 8)
    rep = ground_sector(p)
    assert rep.gap > 0 and not rep.degenerate
    ed = sector_ground_states(EdConfig(8, 0.7, 0.9))
    assert rep.E_even == pytest.approx(ed[1][0], abs=1e-10)
    assert rep.E_odd == pytest.approx(ed[-1][0], abs=1e-10)


def test_crossing_at_finite_factorizing_field():
    hL = finite_factorizing_field(0.7, 8)
    assert ground_sector(ModelParams(0.7, hL, 0.0, 8)).gap < 1e-10
    # on rings the last crossing sits exactly on the bulk factorizing field
    assert hL == pytest.approx(HF, abs=1e-10)


def test_paramagnet_sector_stable():
    occ = {ground_sector(ModelParams(1.0, h, 0.0, 8)).occupied for h in (2 - 1e-3, 2.0, 2 + 1e-3)}
    assert occ == {1}


def test_fidelity_identity():
    for p in (ModelParams(0.7, 0.3, 0.0, 20), ModelParams(0.7, 1.0, 0.0, 50), ModelParams(1.0, 1.5, 0.0, 8)):
        assert fidelity(p, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_fidelity_matches_ed_overlap():
    L, h, dh = 12, 1.0, 1e-2
    a = ground_state(EdConfig(L, 0.7, h))
    b = ground_state(EdConfig(L, 0.7, h + dh))
    assert a.parity == b.parity
    assert fidelity(ModelParams(0.7, h, 0.0, L), dh) == pytest.approx(abs(a.psi @ b.psi), abs=1e-10)


def test_fidelity_sector_mismatch():
    # a crossing below h_f: rings of 8 sites switch sector between these fields
    hs = np.linspace(0.3, HF - 1e-3, 200)
    occ = [ground_sector(ModelParams(0.7, h, 0.0, 8)).occupied for h in hs]
    j = next(i for i in range(len(occ) - 1) if occ[i] != occ[i + 1])
    with pytest.raises(SectorMismatch):
        fidelity(ModelParams(0.7, hs[j], 0.0, 8), hs[j + 1] - hs[j])


def test_fidelity_dip_deepens_at_hc():
    drops = [1 - fidelity(ModelParams(0.7, 1.0, 0.0, L), 1e-3) for L in (50, 100, 200, 400)]
    assert all(b > a for a, b in zip(drops, drops[1:]))


def test_broken_bulk_matches_closed_form():
    for h in (0.2, 0.5, HF, 0.9):
        cs = broken_correlators(ModelParams(0.7, h), 2)
        assert cs.g_x == pytest.approx(spontaneous_magnetization(0.7, h), abs=1e-8)


def test_broken_bulk_matches_ed():
    cs = broken_correlators(ModelParams(0.7, 0.5), 3)
    ed = correlators_ed(ground_state(EdConfig(16, 0.7, 0.5, hx="adaptive")), 3)
    np.testing.assert_allclose(cs.as_array(), ed.as_array(), atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    gamma=st.floats(0.05, 1.0),
    h=st.floats(0.0, 3.0),
    T=st.sampled_from([0.0, 0.05, 0.5, 2.0]),
    n=st.integers(-12, 12),
)
def test_g_bounded(gamma, h, T, n):
    assume(abs(h - 1.0) > 1e-3 or T > 0)
    assert abs(g_function(ModelParams(gamma, h, T), n)) <= 1 + 1e-9


@settings(max_examples=30, deadline=None)
@given(gamma=st.floats(0.1, 1.0), h=st.floats(0.0, 2.5), T=st.sampled_from([0.0, 0.3]),
       L=st.sampled_from([None, 10, 24]))
def test_gzz_identity(gamma, h, T, L):
    # Wick factorization holds for Gaussian states: the bulk at any T and a
    # single parity sector at T = 0. The exact finite-L thermal state mixes
    # four Gaussian components and is checked against ED instead.
    assume(L is None or T == 0)
    assume(L is not None or abs(h - 1.0) > 1e-3 or T > 0)
    cs = correlators(ModelParams(gamma, h, T, L), 5)
    for r in range(1, 6):
        assert abs(cs.g_zz[r - 1] - (cs.g_z**2 - cs.G_at(r) * cs.G_at(-r))) < 1e-12
    assert np.max(np.abs(cs.as_array())) <= 1 + 1e-9


@pytest.mark.parametrize("gamma, h, T", [(0.7, 0.5, 0.0), (0.3, 1.4, 0.0), (1.0, 0.2, 0.1), (0.7, 0.95, 0.0)])
def test_large_ring_converges_to_bulk(gamma, h, T):
    ring = correlators(ModelParams(gamma, h, T, 2048), 6).as_array()
    bulk = correlators(ModelParams(gamma, h, T), 6).as_array()
    np.testing.assert_allclose(ring, bulk, atol=1e-6)


@pytest.mark.parametrize("L", [8, 10, 12])
@pytest.mark.parametrize("h", [0.3, 0.9, 1.5])
def test_ed_equivalence_zero_temperature(L, h):
    ed = correlators_ed(ground_state(EdConfig(L, 0.7, h)), L // 2).as_array()
    ff = correlators(ModelParams(0.7, h, 0.0, L), L // 2).as_array()
    np.testing.assert_allclose(ed, ff, atol=1e-9)


@pytest.mark.parametrize("T", [0.5, 1.0])
def test_ed_equivalence_thermal(T):
    from xydiscord.ed import thermal_state

    ed = correlators_ed(thermal_state(EdConfig(8, 0.7, 0.9), T), 4).as_array()
    ff = correlators(ModelParams(0.7, 0.9, T, 8), 4).as_array()
    np.testing.assert_allclose(ed, ff, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(h=st.floats(0.05, 2.0), dh=st.floats(1e-4, 2e-2), L=st.sampled_from([8, 16, 40]))
def test_fidelity_composition(h, dh, L):
    """Composition of two field steps inside one sector.

    Every Bogoliubov angle decreases with h, so cos(a + b) <= cos(a) cos(b)
    mode by mode gives F(2dh) <= F(dh) F'(dh); the Fubini-Study angle obeys
    the triangle inequality.
    """
    p = ModelParams(0.7, h, 0.0, L)
    try:
        f2 = fidelity(p, 2 * dh)
        f1 = fidelity(p, dh)
        f1b = fidelity(p.with_h(h + dh), dh)
    except SectorMismatch:
        return
    assert 0.0 <= f2 <= 1.0
    assert f2 <= f1 * f1b + 1e-12
    assert math.acos(min(f2, 1.0)) <= math.acos(min(f1, 1.0)) + math.acos(min(f1b, 1.0)) + 1e-9
