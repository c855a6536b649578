import math

import numpy as np
import pytest

from xydiscord.density import make_density
from xydiscord.ed import (
    EdConfig,
    XYChain,
    correlators_ed,
    ground_state,
    lanczos_lowest,
    pair_sites,
    parity_mask,
    reduced_density,
    thermal_state,
)
from xydiscord.errors import DimensionTooLarge, ValidationError
from xydiscord.fermion_core import ModelParams, correlators
from xydiscord.infotheory import discord

HF = math.sqrt(0.51)


def _brute_hamiltonian(L, gamma, h, hx=0.0, periodic=True):
    """Dense H from explicit Kronecker products (independent of XYChain)."""
    sx = np.array([[0, 1], [1, 0]], float)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0])

    def op(o, j):
        mats = [np.eye(2)] * L
        mats[j] = o
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    H = np.zeros((2**L, 2**L), complex)
    bonds = [(j, j + 1) for j in range(L - 1)] + ([(L - 1, 0)] if periodic else [])
    for i, j in bonds:
        H -= 0.5 * (1 + gamma) * op(sx, i) @ op(sx, j) + 0.5 * (1 - gamma) * op(sy, i) @ op(sy, j)
    for j in range(L):
        H -= h * op(sz, j) + hx * op(sx, j)
    return H.real


@pytest.mark.parametrize("boundary", ["periodic", "open"])
@pytest.mark.parametrize("hx", [0.0, 0.3])
def test_matrix_free_hamiltonian_matches_kronecker(boundary, hx):
    chain = XYChain(6, 0.7, 0.45, hx, boundary)
    np.testing.assert_allclose(chain.dense(), _brute_hamiltonian(6, 0.7, 0.45, hx, boundary == "periodic"), atol=1e-13)


def test_two_site_open_ising():
    st = ground_state(EdConfig(2, 1.0, 0.0, boundary="open"))
    assert st.energy == pytest.approx(-1.0, abs=1e-12)
    assert st.sector_energies["even"] == pytest.approx(st.sector_energies["odd"], abs=1e-12)
    assert st.degenerate and st.parity == 1


def test_polarized_limit():
    st = ground_state(EdConfig(8, 0.7, 1e3))
    assert abs(st.psi[0]) > 1 - 1e-4


def test_factorized_state_at_hf():
    st = ground_state(EdConfig(14, 0.7, HF, hx="adaptive"))
    rho1 = reduced_density(st, [0])
    w, v = np.linalg.eigh(rho1)
    phi = v[:, -1]
    prod = phi
    for _ in range(13):
        prod = np.kron(prod, phi)
    assert abs(prod @ st.psi) > 1 - 1e-6


def test_symmetric_state_has_no_odd_correlators():
    cs = correlators_ed(ground_state(EdConfig(10, 0.7, 0.5)), 3)
    assert abs(cs.g_x) < 1e-12
    assert np.max(np.abs(cs.g_xz)) < 1e-12
    assert cs.extra["y_odd_max"] < 1e-12


def test_ed_matches_free_fermions_l12():
    ed = correlators_ed(ground_state(EdConfig(12, 0.7, 0.5)), 6).as_array()
    ff = correlators(ModelParams(0.7, 0.5, 0.0, 12), 6).as_array()
    np.testing.assert_allclose(ed, ff, atol=1e-9)


def test_factorized_correlators():
    cs = correlators_ed(ground_state(EdConfig(14, 0.7, HF, hx="adaptive")), 7)
    np.testing.assert_allclose(cs.g_xx, cs.g_x**2, atol=1e-6)
    np.testing.assert_allclose(cs.g_xz, cs.g_x * cs.g_z, atol=1e-6)
    assert cs.extra["y_odd_max"] < 1e-10


def test_reduced_density_examples():
    st = ground_state(EdConfig(8, 0.7, 1e3))
    # second-order admixture (gamma / 4h)^2 ~ 1e-7 at h = 1e3
    np.testing.assert_allclose(reduced_density(st, [3]), np.diag([1.0, 0.0]), atol=1e-6)
    th = thermal_state(EdConfig(6, 0.7, 0.5), 1e12)
    np.testing.assert_allclose(reduced_density(th, [1, 2]), np.eye(4) / 4, atol=1e-10)


def test_reduced_density_matches_correlator_construction():
    from xydiscord.density import rho_pair

    st = ground_state(EdConfig(12, 0.7, 0.5))
    direct = reduced_density(st, [5, 6])
    built = rho_pair(correlators_ed(st, 1), 1).matrix
    np.testing.assert_allclose(direct, built, atol=1e-10)


def test_reduced_density_is_valid():
    st = ground_state(EdConfig(10, 0.7, 0.8, boundary="open", hx="adaptive"))
    for sites in ([4], [3, 5], [0, 9]):
        rho = reduced_density(st, sites)
        assert np.allclose(rho, rho.T.conj(), atol=1e-12)
        assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(rho)[0] > -1e-12


def test_thermal_limits():
    cfg = EdConfig(6, 0.7, 2.0)
    np.testing.assert_allclose(thermal_state(cfg, 1e12).rho, np.eye(64) / 64, atol=1e-12)
    st = ground_state(cfg)
    proj = np.outer(st.psi, st.psi)
    np.testing.assert_allclose(thermal_state(cfg, 0.01).rho, proj, atol=1e-8)


def test_thermal_size_limit():
    with pytest.raises(DimensionTooLarge):
        thermal_state(EdConfig(12, 0.7, 0.5), 0.5)


def test_config_validation():
    with pytest.raises(ValidationError):
        EdConfig(22, 0.7, 0.5)
    with pytest.raises(ValidationError):
        EdConfig(8, 0.7, 0.5, hx=-1.0)
    with pytest.raises(ValidationError):
        EdConfig(8, 0.7, 0.5, hx="large")


def test_eigenpair_quality():
    cfg = EdConfig(14, 0.7, 0.9)
    st = ground_state(cfg)
    chain = XYChain(14, 0.7, 0.9)
    assert np.linalg.norm(st.psi) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(chain.apply(st.psi) - st.energy * st.psi) < 1e-10


def test_deterministic_and_warm_start():
    cfg = EdConfig(12, 0.7, 0.8, hx="adaptive")
    a = ground_state(cfg)
    b = ground_state(cfg)
    np.testing.assert_array_equal(a.psi, b.psi)
    near = ground_state(EdConfig(12, 0.7, 0.79, hx="adaptive"))
    c = ground_state(cfg, guess=near)
    assert abs(a.psi @ c.psi) == pytest.approx(1.0, abs=1e-10)


def test_lanczos_on_diagonal_operator():
    d = np.linspace(-3.0, 5.0, 400)
    e, v, res = lanczos_lowest(lambda x: d * x, np.ones(400), tol=1e-12)
    assert e == pytest.approx(-3.0, abs=1e-12)
    assert abs(v[0]) == pytest.approx(1.0, abs=1e-10)


def test_variational_bound_at_hf():
    L = 12
    st = ground_state(EdConfig(L, 0.7, HF))
    chain = XYChain(L, 0.7, HF)
    # factorized ansatz: spins tilted by cos^2(t) = (1 - g)/(1 + g) in the x-z plane
    t = math.acos(math.sqrt((1 - 0.7) / (1 + 0.7)))
    phi = np.array([math.cos(t / 2), math.sin(t / 2)])
    prod = phi
    for _ in range(L - 1):
        prod = np.kron(prod, phi)
    rayleigh = prod @ chain.apply(prod)
    assert st.energy <= rayleigh + 1e-12
    assert rayleigh == pytest.approx(st.energy, abs=1e-10)


@pytest.mark.parametrize("h", [0.3, 0.9, 1.4])
def test_parity_is_sharp(h):
    st = ground_state(EdConfig(10, 0.7, h))
    sign = np.where(parity_mask(10, 1), 1.0, -1.0)
    assert abs(st.psi @ (sign * st.psi)) == pytest.approx(1.0, abs=1e-10)


def test_small_field_extrapolates_to_cat_state():
    # the tunnelling splitting (~5e-7 here) must stay below hx * L * g_x
    L, h = 16, 0.5
    cfg = EdConfig(L, 0.7, h, hx="adaptive")
    target = discord(make_density(reduced_density(ground_state(cfg), pair_sites(cfg, 1)))).discord
    fields = np.array([1e-3, 1e-4, 1e-5])
    q = []
    for hx in fields:
        c = EdConfig(L, 0.7, h, hx=float(hx))
        q.append(discord(make_density(reduced_density(ground_state(c), pair_sites(c, 1)))).discord)
    slope, intercept = np.polyfit(fields, q, 1)
    assert intercept == pytest.approx(target, abs=1e-5)


def test_pair_sites():
    assert pair_sites(EdConfig(10, 0.7, 0.5), 3) == (0, 3)
    assert pair_sites(EdConfig(10, 0.7, 0.5, boundary="open"), 2) == (4, 6)
