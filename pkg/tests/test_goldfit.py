"""Nonnegative least-squares scaling fits and their grading."""

import numpy as np
import pytest

from pimgold import (DegenerateDesign, GoldFit, InsufficientData, classify,
                     fit, fit_points, fit_report, range_check)
from pimgold.goldfit import _design_matrix, _nnls, ideal_a_range
from pimgold.models import (BINARY_HOPPING, CCB_COMEFA, SPAR2_BINARY,
                            SPAR2_LINEAR)

P_SET = (2, 4, 8, 16, 32, 64)


def synth_points(a, b, c, n_bits=32, p_values=P_SET):
    return [(p, a * n_bits * np.log2(p) + b * p + c) for p in p_values]


# -- exact recoveries on formula-generated data -------------------------------

def test_fit_recovers_linear_chain():
    g = fit(fit_points(SPAR2_LINEAR, P_SET), n_bits=32)
    assert (g.a, g.b, g.c) == pytest.approx((0.0, 96.0, 0.0), abs=1e-9)
    assert g.residual_rms == pytest.approx(0.0, abs=1e-7)


def test_fit_recovers_binary_chain():
    g = fit(fit_points(SPAR2_BINARY, P_SET), n_bits=32)
    assert (g.a, g.b, g.c) == pytest.approx((2.0, 32.0, 0.0), abs=1e-9)


def test_fit_recovers_wide_adder():
    g = fit(fit_points(CCB_COMEFA, P_SET), n_bits=32)
    assert (g.a, g.b, g.c) == pytest.approx((1 / 32, 0.0, 274.0), abs=1e-9)


def test_fit_recovers_wide_adder_reported_constant():
    g = fit(fit_points(CCB_COMEFA, P_SET, ccb_mode="constant"), n_bits=32)
    assert (g.a, g.b, g.c) == pytest.approx((1 / 32, 0.0, 204.0), abs=1e-9)


def test_fit_hopping_formula_points():
    # (W+4) per level plus the 2^lv - 1 fill, which the linear term absorbs
    g = fit(fit_points(BINARY_HOPPING, P_SET), n_bits=32)
    assert (g.a, g.b, g.c) == pytest.approx((1.125, 1.0, 143.0), abs=1e-9)


def test_fit_clamps_negative_intercept():
    # binary chain with movement charged per interior boundary, N * (P - 1):
    # the exact decomposition needs c = -32, so the constrained fit pins
    # c at zero and splits the difference across the other two terms
    points = [(p, 2 * 32 * int(np.ceil(np.log2(p))) + 32 * (p - 1))
              for p in P_SET]
    g = fit(points, n_bits=32)
    assert g.c == 0.0
    assert g.a == pytest.approx(1.601303, abs=1e-4)
    assert g.b == pytest.approx(32.761689, abs=1e-4)
    assert g.residual_rms > 0


def test_fit_matches_reference_nnls():
    scipy = pytest.importorskip("scipy")
    from scipy.optimize import nnls as scipy_nnls
    rng = np.random.default_rng(0)
    p_arr = np.array(P_SET, dtype=float)
    for _ in range(50):
        y = rng.uniform(-50, 4000, size=len(P_SET))
        basis = _design_matrix(p_arr, 32)
        ours = _nnls(basis, y)
        ref, _ = scipy_nnls(basis, y)
        assert ours == pytest.approx(ref, abs=1e-6)


def test_fit_random_triples_recovered():
    rng = np.random.default_rng(2024)
    p_values = (2, 4, 8, 16, 32, 64, 128)
    for _ in range(100):
        a, b, c = rng.uniform(0.01, 5.0, size=3) * (1.0, 10.0, 100.0)
        g = fit(synth_points(a, b, c, p_values=p_values), n_bits=32)
        for got, want in ((g.a, a), (g.b, b), (g.c, c)):
            assert abs(got - want) <= 1e-6 * max(1.0, abs(want))


def test_fit_scale_covariance():
    base = synth_points(1.125, 1.0, 143.0)
    g1 = fit(base, n_bits=32)
    g9 = fit([(p, 9 * y) for p, y in base], n_bits=32)
    assert (g9.a, g9.b, g9.c) == pytest.approx(
        (9 * g1.a, 9 * g1.b, 9 * g1.c), abs=1e-8)


def test_fit_constant_data_lands_in_intercept():
    g = fit([(p, 500.0) for p in P_SET], n_bits=32)
    assert (g.a, g.b, g.c) == pytest.approx((0.0, 0.0, 500.0), abs=1e-9)


# -- input validation ---------------------------------------------------------

def test_fit_needs_enough_points():
    pts = synth_points(1, 1, 1)
    with pytest.raises(InsufficientData):
        fit(pts[:3], n_bits=32)
    with pytest.raises(InsufficientData):
        fit([pts[0]] * 4, n_bits=32)          # duplicate P
    with pytest.raises(InsufficientData):
        fit([(1, 5.0)] + pts[:3], n_bits=32)  # P = 1 has no log signal
    with pytest.raises(InsufficientData):
        fit(pts, n_bits=0)


def test_degenerate_basis_rejected():
    # P spanning one octave pair repeatedly cannot separate log2 from linear;
    # rank collapses when the basis columns are linearly dependent
    from pimgold.goldfit import _check_basis
    mat = _design_matrix(np.array([2.0, 4.0, 8.0, 16.0]), 32)
    mat[:, 1] = mat[:, 0] * 2.0
    with pytest.raises(DegenerateDesign):
        _check_basis(mat)
    with pytest.raises(DegenerateDesign, match="condition"):
        bad = _design_matrix(np.array([2.0, 4.0, 8.0, 16.0]), 32)
        bad[:, 1] = bad[:, 0]
        bad[0, 1] += 1e-10     # full rank, condition number past the limit
        _check_basis(bad)


# -- grading ------------------------------------------------------------------

def test_ideal_ranges():
    assert ideal_a_range(32) == (1 / 32, 2.0)
    ideal = GoldFit(a=1.125, b=1.0, c=143.0, residual_rms=0.0, n_bits=32)
    assert range_check(ideal) == {"a": "ideal", "b": "ideal", "c": "ideal"}
    hot = GoldFit(a=3.0, b=32.0, c=0.0, residual_rms=0.0, n_bits=32)
    assert range_check(hot) == {"a": "out-of-range", "b": "out-of-range",
                                "c": "ideal"}


@pytest.mark.parametrize("a,b,addition,movement", [
    (1 / 32, 0.0, "Standard", "Fast"),     # boundary: 1/N itself is Standard
    (0.01, 0.05, "Fast", "Fast"),
    (1.125, 1.0, "Standard", "Standard"),
    (2.0, 0.1, "Standard", "Fast"),
    (2.01, 1.01, "Very Slow", "Very Slow"),
    (0.0, 32.762, "Fast", "Very Slow"),
])
def test_classify(a, b, addition, movement):
    labels = classify(GoldFit(a=a, b=b, c=0.0, residual_rms=0.0, n_bits=32))
    assert labels.addition == addition
    assert labels.movement == movement


def test_fit_report_shape():
    g = fit(fit_points(SPAR2_BINARY, P_SET), n_bits=32)
    report = fit_report("spar2-binary", g)
    assert report == {
        "design": "spar2-binary", "N": 32,
        "a": 2.0, "b": 32.0, "c": 0.0, "residual_rms": 0.0,
        "addition_label": "Standard", "movement_label": "Very Slow",
    }
