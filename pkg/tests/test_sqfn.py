import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqfn_lab.grid import GridFunction, field_from_spec, lq_norm_weighted, make_grid, sample
from sqfn_lab.kernels import KernelClassParams, a_beta_field, build_dictionary, default_lattice
from sqfn_lab.sqfn import (
    ConeQuadratureSpec,
    GStarParams,
    QuadratureError,
    aperture_ladder_batch,
    far_field_constant,
    g_beta,
    g_beta_batch,
    g_star,
    g_star_batch,
    s_beta,
    s_beta_aperture_ladder,
    s_beta_batch,
    s_psi,
    total_lattice_mass,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 8.0, 256)


@pytest.fixture(scope="module")
def quad(grid):
    return ConeQuadratureSpec.default(grid)


@pytest.fixture(scope="module")
def dictionary():
    return build_dictionary(KernelClassParams(1.0), 8, 0)


@pytest.fixture(scope="module")
def indicator(grid):
    return sample(field_from_spec("annulus", inner=1.0, outer=2.0), grid)


@pytest.fixture(scope="module")
def bump(grid):
    return sample(field_from_spec("bump", center=(0.7,), radius=1.0), grid)


def test_zero_function(grid, dictionary, quad):
    z = sample(field_from_spec("zero"), grid)
    assert not np.any(s_beta(z, dictionary, 1.0, quad).values)
    assert not np.any(g_beta(z, dictionary, quad).values)
    assert not np.any(g_star(z, dictionary, 4.0, quad).values)
    assert not np.any(s_psi(z, dictionary.members[0], 1.0, quad).values)


def test_aperture_monotone(bump, dictionary, quad):
    s1 = s_beta(bump, dictionary, 1.0, quad).values
    s2 = s_beta(bump, dictionary, 2.0, quad).values
    assert np.all(s2 >= s1)


def test_argument_errors(bump, dictionary, quad):
    with pytest.raises(QuadratureError):
        s_beta(bump, dictionary, 0.0, quad)
    with pytest.raises(QuadratureError):
        GStarParams(1.0)
    with pytest.raises(QuadratureError):
        g_star(bump, dictionary, 0.5, quad)
    af = a_beta_field(bump, dictionary, quad.lattice)
    with pytest.raises(QuadratureError):
        aperture_ladder_batch(af, 10)


def test_gstar_theorem_flag():
    assert GStarParams(4.0).theorem_admissible(2.0)
    assert not GStarParams(3.0).theorem_admissible(1.0)
    assert not GStarParams(3.5).theorem_admissible(4.0)


def _oracle_s_psi(psi, x_eval, t_lo, t_hi, L=8.0, m=2048, per_octave=32):
    """Independent brute force: dense y, trapezoid in log t, np.convolve."""
    g = make_grid(1, L, m)
    h = g.h
    f = ((np.abs(g.axis) > 1.0) & (np.abs(g.axis) <= 2.0)).astype(float)
    logs = np.linspace(math.log(t_lo), math.log(t_hi), int(per_octave * math.log2(t_hi / t_lo)) + 1)
    dl = logs[1] - logs[0]
    acc = np.zeros(len(x_eval))
    for i, lt in enumerate(logs):
        t = math.exp(lt)
        k = int(math.ceil(t / h))
        off = np.arange(-k, k + 1) * h
        ker = psi(off[:, None] / t) / t
        a = np.abs(np.convolve(f, ker, mode="same")) * h
        inner = np.array([np.sum(a[np.abs(g.axis - x) < t] ** 2) * h / t for x in x_eval])
        wt = 0.5 if i in (0, len(logs) - 1) else 1.0
        acc += wt * inner * dl
    return np.sqrt(acc)


def test_s_psi_against_brute_force_oracle(grid, indicator, dictionary, quad):
    psi = dictionary.members[1]
    s = s_psi(indicator, psi, 1.0, quad).values
    lat = quad.lattice
    half = lat.dlog / 2
    lo, hi = lat.ts[0] * math.exp(-half), lat.ts[-1] * math.exp(half)
    idx = np.flatnonzero(((np.abs(grid.axis) < 0.6) | ((np.abs(grid.axis) > 2.5) & (np.abs(grid.axis) < 4.0))))
    idx = idx[:: max(1, idx.size // 16)]
    ref = _oracle_s_psi(psi, grid.axis[idx], lo, hi)
    np.testing.assert_allclose(s[idx], ref, rtol=0.05)


def test_g_homogeneous(bump, dictionary, quad):
    g1 = g_beta(bump, dictionary, quad).values
    g3 = g_beta(bump * -3.0, dictionary, quad).values
    np.testing.assert_allclose(g3, 3 * g1, rtol=1e-12)


def test_comparability_bump(bump, dictionary, quad):
    s = s_beta(bump, dictionary, 1.0, quad).values
    g = g_beta(bump, dictionary, quad).values
    sig = (s > 0.01 * s.max()) & (bump.grid.radii + 1.7 <= quad.lattice.ts[-1])
    r = s[sig] / g[sig]
    assert np.all(np.isfinite(r))
    c = max(r.max(), 1 / r.min())
    assert 1 <= c < 10


def test_gstar_lambda_monotone_and_lower_bound(bump, dictionary, quad):
    af = a_beta_field(bump, dictionary, quad.lattice)
    g4, g8 = g_star_batch(af, 4.0), g_star_batch(af, 8.0)
    assert np.all(g8 <= g4)
    s = s_beta_batch(af, 1.0)
    assert np.all(g4 >= 2 ** (-4 / 2) * s)


def test_s_psi_dominated(indicator, dictionary, quad):
    sb = s_beta(indicator, dictionary, 1.0, quad).values
    for psi in dictionary:
        assert np.all(s_psi(indicator, psi, 1.0, quad).values <= sb)


def test_far_field(grid, indicator, dictionary, quad):
    l1 = lq_norm_weighted(indicator, 1)
    assert far_field_constant(1) == pytest.approx(4.0)
    sb = s_beta(indicator, dictionary, 1.0, quad).values
    far = grid.radii >= 4.0
    assert np.all(sb[far] <= (1 + 1e-6) * far_field_constant(1) * l1 / grid.radii[far])
    for psi in dictionary:
        sp = s_psi(indicator, psi, 1.0, quad).values
        assert np.all(sp[far] <= 4 * l1 / grid.radii[far])


def test_far_field_constant_2d():
    assert far_field_constant(2) == pytest.approx(math.sqrt(math.pi / 4) * 16)


def test_ladder(bump, dictionary, quad):
    one = s_beta_aperture_ladder(bump, dictionary, 0, quad)
    assert len(one) == 1
    np.testing.assert_array_equal(one[0].values, s_beta(bump, dictionary, 1.0, quad).values)
    ladder = s_beta_aperture_ladder(bump, dictionary, 3, quad)
    for a, b in zip(ladder, ladder[1:]):
        assert np.all(b.values >= a.values)


def test_ladder_slope_weighted(bump, dictionary, quad):
    from sqfn_lab.weights import minimal_ap_index, power

    w = power(0.5)
    q2 = minimal_ap_index(w)
    ladder = s_beta_aperture_ladder(bump, dictionary, 3, quad)
    norms = [lq_norm_weighted(s, 2, w) for s in ladder]
    slope = np.polyfit(np.arange(4), np.log2(np.array(norms) / norms[0]), 1)[0]
    assert slope <= 1 * q2 / 2 + 0.1


def test_zero_aperture_consistency(bump, dictionary, quad):
    af = a_beta_field(bump, dictionary, quad.lattice)
    lat = quad.lattice
    direct = np.zeros(bump.grid.size)
    for k in range(lat.count):
        direct = direct + af.values[0, :, k] ** 2 * lat.dlog
    np.testing.assert_array_equal(g_beta_batch(af)[0], np.sqrt(direct))
    with pytest.raises(QuadratureError):
        g_beta_batch(a_beta_field(bump, dictionary, default_lattice(bump.grid, stride=2)))


def test_decomposition_bound(indicator, dictionary, quad):
    lam, n, jmax = 4.0, 1, 4
    af = a_beta_field(indicator, dictionary, quad.lattice)
    gs2 = g_star_batch(af, lam)[0] ** 2
    ladder = aperture_ladder_batch(af, jmax)
    rhs = ladder[0][0] ** 2
    for j in range(1, jmax + 1):
        rhs = rhs + 2.0 ** (-(j - 1) * lam * n) * ladder[j][0] ** 2
    rhs = rhs + 2.0 ** (-jmax * lam * n) * total_lattice_mass(af)[0]
    assert np.all(gs2 <= rhs * (1 + 1e-10))


def test_metadata(indicator, dictionary, quad):
    out = g_star(indicator, dictionary, 4.0, quad)
    assert out.metadata["truncated_fraction"] < 0.01
    assert out.metadata["exterior_tail_max"] >= 0
    assert out.metadata["input"] == indicator.id


def test_stride_two_runs(bump, dictionary):
    q2 = ConeQuadratureSpec.default(bump.grid, stride=2)
    s = s_beta(bump, dictionary, 1.0, q2).values
    s1 = s_beta(bump, dictionary, 1.0, ConeQuadratureSpec.default(bump.grid)).values
    assert np.max(np.abs(s - s1)) < 0.2 * s1.max()


vals = st.lists(st.floats(-3, 3, allow_nan=False), min_size=32, max_size=32)


@given(u=vals, v=vals, c=st.floats(-5, 5, allow_nan=False))
def test_sublinear_homogeneous(u, v, c):
    g = make_grid(1, 8.0, 32)
    d = build_dictionary(KernelClassParams(1.0), 4, 0)
    f, h = GridFunction(g, np.array(u)), GridFunction(g, np.array(v))
    af = a_beta_field([f, h, f + h, f * c], d, default_lattice(g))
    for out in (s_beta_batch(af, 1.0), g_beta_batch(af), g_star_batch(af, 4.0)):
        assert np.all(out[2] <= (out[0] + out[1]) * (1 + 1e-12) + 1e-12)
        np.testing.assert_allclose(out[3], abs(c) * out[0], rtol=1e-12, atol=1e-12)


def test_2d_square_functions():
    g = make_grid(2, 4.0, 16)
    d = build_dictionary(KernelClassParams(1.0), 8, 0, dim=2)
    f = sample(field_from_spec("ball", radius=1.0), g)
    q = ConeQuadratureSpec.default(g)
    s = s_beta(f, d, 1.0, q).values
    gs = g_star(f, d, 4.0, q).values
    assert s.max() > 0
    assert np.all(gs >= 2.0 ** (-4.0 * 2 / 2) * s)
