import math

import numpy as np
import pytest
from admissibility_table import TABLE

from sqfn_lab.corpus import CorpusSpec, sample_corpus
from sqfn_lab.grid import field_from_spec, lq_norm_weighted, make_grid, sample
from sqfn_lab.herz import HerzParams
from sqfn_lab.kernels import KernelClassParams, build_dictionary
from sqfn_lab.sqfn import ConeQuadratureSpec, s_psi
from sqfn_lab.verify import (
    CASES,
    CLAUSE_LAMBDA,
    InadmissibleError,
    OperatorSpec,
    Setup,
    VerifyError,
    admissibility_check,
    aperture_scaling_study,
    comparability_study,
    member_label,
    pointwise_envelope,
    refinement_study,
    scaling_cap,
    theorem_ratio_sweep,
    weak_type_sweep,
)
from sqfn_lab.weights import constant, power

SMALL = Setup(m=64, dict_size=4)


def test_table_size():
    assert len(TABLE) >= 30


@pytest.mark.parametrize("row", TABLE, ids=lambda r: f"{r[1]}-a{r[2]:.4g}-p{r[3]}-q{r[4]}-{r[7]}-{r[8]}-l{r[9]}")
def test_admissibility_truth_table(row):
    n, op, alpha, p, q, w1, w2, q1, q2, lam, expected = row
    hp = HerzParams(alpha, p, q, w1=w1, w2=w2, q1=q1, q2=q2)
    v = admissibility_check(hp, n, op, lam)
    assert v.case == expected, v.explanation
    assert v.case in CASES
    # every flag is recomputable from the tuple
    assert v.q2_le_q == (q2 <= q)
    assert v.w_equal == (w1 == w2)
    assert v.q_equal == (q1 == q2)
    assert v.p_le_1 == (p <= 1)
    assert v.lower_ok == (-n * q1 / q < alpha * q1)
    assert v.admissible == (expected != "inadmissible")


def test_lambda_clause_named():
    v = admissibility_check(HerzParams(0.25, 1.0, 2.0), 1, "G*", 2.5)
    assert CLAUSE_LAMBDA in v.explanation
    assert v.lambda_ok is False
    assert admissibility_check(HerzParams(0.25, 1.0, 2.0), 1, "S").lambda_ok is None


def test_unknown_operator():
    with pytest.raises(VerifyError):
        admissibility_check(HerzParams(0.25, 1.0, 2.0), 1, "T")
    with pytest.raises(VerifyError):
        OperatorSpec("G*")
    with pytest.raises(VerifyError):
        OperatorSpec("T")


def test_verdict_pure():
    hp = HerzParams(0.25, 1.0, 2.0)
    assert admissibility_check(hp, 1) == admissibility_check(hp, 1)


def test_sweep_small_pass():
    r = theorem_ratio_sweep(OperatorSpec("S"), HerzParams(0.25, 1.0, 2.0), SMALL, CorpusSpec(8))
    assert r.verdict.case == "Thm1.1(i)"
    assert r.resolutions == [64, 128]
    assert len(r.members) == 8 and not r.skipped
    assert all(m["ratio"] >= 0 for m in r.members)
    assert r.max_ratio == pytest.approx(max(m["ratio"] for m in r.members))
    assert r.label == ("PASS" if r.refinement_change < 0.25 and r.corpus_change < 0.25 else "FAIL")
    d = r.to_dict()
    assert d["verdict"]["admissible"] is True


def test_inadmissible_refused_and_explored():
    hp = HerzParams(0.75, 1.0, 2.0)
    with pytest.raises(InadmissibleError) as e:
        theorem_ratio_sweep(OperatorSpec("S"), hp, SMALL, CorpusSpec(4))
    assert "α·q1 < n(1 − q2/q)" in str(e.value)
    r = theorem_ratio_sweep(OperatorSpec("S"), hp, SMALL, CorpusSpec(4), explore=True, refine=False)
    assert r.label == "out-of-hypothesis" and not r.passed


def test_weak_sweep_needs_endpoint():
    with pytest.raises(InadmissibleError):
        weak_type_sweep(OperatorSpec("S"), HerzParams(0.25, 1.0, 2.0), SMALL, CorpusSpec(4))
    r = weak_type_sweep(OperatorSpec("S"), HerzParams(0.55, 1.0, 2.0), SMALL, CorpusSpec(4), explore=True)
    assert r.label == "out-of-hypothesis"


def test_strong_sweep_at_endpoint_is_out_of_hypothesis():
    hp = HerzParams(0.5, 1.0, 2.0)
    with pytest.raises(InadmissibleError, match="only the weak-type bound"):
        theorem_ratio_sweep(OperatorSpec("S"), hp, SMALL, CorpusSpec(4))
    r = theorem_ratio_sweep(OperatorSpec("S"), hp, SMALL, CorpusSpec(4), explore=True, refine=False)
    assert r.label == "out-of-hypothesis"


def test_weak_sweep_chebyshev():
    r = weak_type_sweep(OperatorSpec("S"), HerzParams(0.5, 1.0, 2.0), SMALL, CorpusSpec(8))
    assert r.chebyshev_ok is True
    for m in r.members:
        assert m["ratio"] <= m["strong_ratio"]


def test_membership_refused():
    hp = HerzParams(-0.1, 1.0, 2.0, w1=power(1.5), w2=power(1.5), q1=2, q2=2)
    with pytest.raises(VerifyError):
        theorem_ratio_sweep(OperatorSpec("S"), hp, SMALL, CorpusSpec(4))


def test_zero_member_skipped():
    # on a domain of half-width 1 the first member (the annulus 1 < |x| <= 2) samples to zero
    setup = Setup(halfwidth=1.0, m=64, dict_size=4)
    r = theorem_ratio_sweep(OperatorSpec("S"), HerzParams(0.25, 1.0, 2.0), setup, CorpusSpec(4), refine=False)
    assert member_label(0) in r.skipped
    assert all(m["id"] != member_label(0) for m in r.members)


def test_scaling_examples():
    g = make_grid(1, 8.0, 128)
    d = build_dictionary(KernelClassParams(1.0), 4, 0)
    f = sample(field_from_spec("bump", center=(0.5,), radius=0.75), g)
    r0 = aperture_scaling_study(f, d, 0, constant(), 2.0, 1.0)
    assert math.isnan(r0.slope) and r0.passed is None and len(r0.norms) == 1
    r = aperture_scaling_study(f, d, 3, constant(), 2.0, 1.0)
    assert r.cap == 0.5 and r.passed and r.slope <= 0.6
    assert all(b >= a for a, b in zip(r.norms, r.norms[1:]))
    r = aperture_scaling_study(f, d, 3, power(0.5), 1.5, 2.0)
    assert r.cap == pytest.approx(4 / 3) and r.slope <= 4 / 3 + 0.1
    with pytest.raises(VerifyError):
        aperture_scaling_study(f, d, 9, constant(), 2.0, 1.0)
    with pytest.raises(VerifyError):
        aperture_scaling_study(f, d, 1, power(1.5), 2.0, 2.0)


def test_scaling_cap():
    assert scaling_cap(1, 2.0, 1.0) == 0.5
    assert scaling_cap(1, 3.0, 2.0) == 1.0
    assert scaling_cap(2, 1.5, 1.5) == 2.0


def test_comparability_scaled_member_identical():
    g = make_grid(1, 8.0, 128)
    d = build_dictionary(KernelClassParams(1.0), 8, 0)
    f = sample(field_from_spec("bump", center=(0.5,), radius=0.75), g)
    a = comparability_study([f], d, sizes=(4, 8))
    b = comparability_study([f * 4.0], d, sizes=(4, 8))
    np.testing.assert_allclose(a.envelopes, b.envelopes, rtol=1e-12)
    assert all(math.isfinite(e) for e in a.envelopes)
    assert a.stable


def test_comparability_zero_skipped_and_errors():
    g = make_grid(1, 8.0, 64)
    d = build_dictionary(KernelClassParams(1.0), 4, 0)
    z = sample(field_from_spec("zero"), g)
    f = sample(field_from_spec("bump", radius=1.0), g)
    r = comparability_study([z, f], d, sizes=(4,))
    assert r.skipped == [member_label(0)]
    with pytest.raises(VerifyError):
        comparability_study([], d)
    with pytest.raises(VerifyError):
        comparability_study([f], d, sizes=(4, 32))


def test_pointwise_envelope():
    s = np.array([1.0, 2.0, 0.001, 4.0])
    g = np.array([2.0, 2.0, 1.0, 1.0])
    e, cnt = pointwise_envelope(s, g, np.ones(4, bool))
    assert (e, cnt) == (4.0, 3)
    e, cnt = pointwise_envelope(s, g, np.zeros(4, bool))
    assert math.isnan(e) and cnt == 0


def test_refinement_smooth_bump():
    f = field_from_spec("bump", radius=1.0)
    r = refinement_study(lambda m: lq_norm_weighted(sample(f, make_grid(1, 4.0, m)), 2), 32, 3)
    assert r.ms == [32, 64, 128]
    assert r.deltas[0] >= 1.5 * r.deltas[1]
    assert not r.non_cauchy


def test_refinement_constant():
    f = field_from_spec("constant", c=2.0)
    r = refinement_study(lambda m: lq_norm_weighted(sample(f, make_grid(1, 4.0, m)), 2), 16, 3)
    assert r.deltas == [0.0, 0.0]


def test_refinement_s_psi_indicator():
    d = build_dictionary(KernelClassParams(1.0), 4, 0)
    f = field_from_spec("annulus", inner=1.0, outer=2.0)

    def compute(m):
        g = make_grid(1, 8.0, m)
        return lq_norm_weighted(s_psi(sample(f, g), d.members[0], 1.0, ConeQuadratureSpec.default(g)), 2)

    r = refinement_study(compute, 256, 2)
    assert r.deltas[0] < 0.10


def test_refinement_errors():
    with pytest.raises(VerifyError):
        refinement_study(float, 16, 1)
    with pytest.raises(VerifyError):
        refinement_study(float, 1 << 15, 3)


def test_non_cauchy_flag():
    vals = {8: 1.0, 16: 1.1, 32: 1.5}
    assert refinement_study(vals.__getitem__, 8, 3).non_cauchy


def test_corpus_nonzero_on_sweep_grid():
    for f in sample_corpus(CorpusSpec(20), SMALL.grid()):
        assert np.any(f.values)
