import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqfn_lab.grid import (
    Annulus,
    Ball,
    GridError,
    GridFunction,
    WholeDomain,
    distribution_set_measure,
    field_from_spec,
    lq_norm_weighted,
    make_grid,
    read_csv,
    sample,
    support_radius,
    write_csv,
)
from sqfn_lab.weights import power


def test_make_grid_1d():
    g = make_grid(1, 8.0, 16)
    assert g.h == 1.0
    assert g.size == 16
    assert g.axis[0] == -7.5


def test_make_grid_2d():
    g = make_grid(2, 4.0, 32)
    assert g.h == 0.25
    assert g.size == 1024
    assert g.points.shape == (1024, 2)


@pytest.mark.parametrize("args", [(1, 8.0, 15), (1, 0.0, 16), (1, -1.0, 16), (3, 1.0, 16), (1, 1.0, 6)])
def test_make_grid_rejects(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_no_node_at_origin():
    for m in (8, 16, 256):
        assert make_grid(1, 8.0, m).radii.min() > 0
        assert make_grid(2, 8.0, m).radii.min() > 0


def test_sample_zero():
    f = sample(field_from_spec("zero"), make_grid(1, 8.0, 64))
    assert not np.any(f.values)


def test_indicator_l1():
    g = make_grid(1, 8.0, 512)
    f = sample(field_from_spec("annulus", inner=1.0, outer=2.0), g)
    assert abs(lq_norm_weighted(f, 1) - 2.0) <= g.h


def test_gaussian_l2_against_fine_oracle():
    coarse = sample(field_from_spec("gaussian", scale=1.0), make_grid(1, 8.0, 512))
    fine = sample(field_from_spec("gaussian", scale=1.0), make_grid(1, 8.0, 65536))
    oracle = lq_norm_weighted(fine, 2) ** 2
    assert abs(oracle - math.sqrt(math.pi / 2)) < 1e-9
    assert abs(lq_norm_weighted(coarse, 2) ** 2 - oracle) < 1e-3


def test_sample_non_finite_names_node():
    g = make_grid(1, 8.0, 16)
    with pytest.raises(GridError, match="node 3"), np.errstate(divide="ignore"):
        sample(lambda x: 1.0 / (x[:, 0] - g.axis[3]), g)


def test_gridfunction_rejects_nan_and_length():
    g = make_grid(1, 8.0, 16)
    with pytest.raises(GridError, match="node 2"):
        GridFunction(g, np.array([0, 0, np.nan] + [0] * 13))
    with pytest.raises(GridError):
        GridFunction(g, np.zeros(15))


def test_values_read_only():
    f = sample(field_from_spec("constant", c=1.0), make_grid(1, 8.0, 16))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_lq_examples():
    g = make_grid(1, 8.0, 512)
    zero = sample(field_from_spec("zero"), g)
    assert lq_norm_weighted(zero, 2) == 0
    ind = sample(field_from_spec("annulus", inner=1.0, outer=2.0), g)
    assert lq_norm_weighted(ind, 2) == pytest.approx(math.sqrt(2), abs=g.h)
    exact = (4 / 3) * (2**1.5 - 1)
    assert lq_norm_weighted(ind, 1, power(0.5)) == pytest.approx(exact, rel=5e-3)
    with pytest.raises(ValueError):
        lq_norm_weighted(ind, 0)


def test_distribution_examples():
    g = make_grid(1, 8.0, 512)
    assert distribution_set_measure(sample(field_from_spec("zero"), g), 1.0, WholeDomain()) == 0
    f = sample(field_from_spec("annulus", inner=1.0, outer=2.0, amp=3.0), g)
    assert distribution_set_measure(f, 2.0, Annulus(1.0, 2.0)) == pytest.approx(2.0, abs=g.h)
    assert distribution_set_measure(f, 4.0, Annulus(1.0, 2.0)) == 0
    with pytest.raises(ValueError):
        distribution_set_measure(f, 0.0)


def test_support_radius_examples():
    g = make_grid(1, 8.0, 512)
    assert support_radius(sample(field_from_spec("zero"), g)) == 0
    ind = sample(field_from_spec("annulus", inner=1.0, outer=2.0), g)
    assert support_radius(ind) == pytest.approx(2.0, abs=g.h)
    gauss = sample(field_from_spec("gaussian", scale=1.0), g)
    assert support_radius(gauss, 1e-12) == pytest.approx(math.sqrt(12 * math.log(10)), abs=g.h)


def test_csv_roundtrip(tmp_path):
    g = make_grid(2, 4.0, 16)
    f = sample(field_from_spec("bump", center=(0.5, -0.25), radius=1.5), g)
    write_csv(f, tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "2,4.0,16"
    back = read_csv(tmp_path / "f.csv")
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_refinement_error_ratio():
    # smooth bump: errors against a fine oracle shrink by at least 4/3 per doubling
    spec = field_from_spec("bump", radius=2.0)
    oracle = lq_norm_weighted(sample(spec, make_grid(1, 8.0, 1 << 16)), 2)
    errs = [abs(lq_norm_weighted(sample(spec, make_grid(1, 8.0, m)), 2) - oracle) for m in (64, 128, 256)]
    assert errs[1] / errs[0] <= 0.75
    assert errs[2] / errs[1] <= 0.75


def test_resample_keeps_formula():
    spec = field_from_spec("bump", radius=1.0)
    f = sample(spec, make_grid(1, 8.0, 64))
    g = f.resample(make_grid(1, 8.0, 128))
    assert g.grid.m == 128 and g.id == f.id


# keep |c| away from the subnormal range, where |c f|^q underflows
amps = st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6))


@given(c=amps, q=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_norm_homogeneity(c, q):
    g = make_grid(1, 8.0, 64)
    f = sample(field_from_spec("bump", radius=3.0), g)
    lhs = lq_norm_weighted(f * c, q)
    assert lhs == pytest.approx(abs(c) * lq_norm_weighted(f, q), rel=1e-13, abs=1e-300)


@given(vals=st.lists(st.floats(-10, 10, allow_nan=False), min_size=32, max_size=32), s=st.floats(0, 1))
def test_norm_monotone(vals, s):
    g = make_grid(1, 8.0, 32)
    f = GridFunction(g, np.array(vals))
    smaller = GridFunction(g, s * np.array(vals))
    for q in (1.0, 2.0, 3.5):
        assert lq_norm_weighted(smaller, q) <= lq_norm_weighted(f, q) * (1 + 1e-14)


@given(
    vals=st.lists(st.floats(0, 10, allow_nan=False), min_size=32, max_size=32),
    l1=st.floats(0.01, 10),
    l2=st.floats(0.01, 10),
)
def test_distribution_nonincreasing_and_additive(vals, l1, l2):
    g = make_grid(1, 8.0, 32)
    f = GridFunction(g, np.array(vals))
    lo, hi = sorted((l1, l2))
    assert distribution_set_measure(f, hi) <= distribution_set_measure(f, lo)
    parts = distribution_set_measure(f, lo, Ball((0.0,), 2.0)) + distribution_set_measure(f, lo, Annulus(2.0, 100.0))
    assert parts == pytest.approx(distribution_set_measure(f, lo), rel=1e-12, abs=1e-12)
