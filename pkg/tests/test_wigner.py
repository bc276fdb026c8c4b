import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsphere import wigner as W
from fracsphere.errors import ArgumentError, RangeError
from fracsphere.specfun import ylm_table
from fracsphere.sphgeom import build_quadrature


def _valid(l1, l2, l3, m1, m2, m3):
    return W._triangle(l1, l2, l3) and m1 + m2 + m3 == 0 and abs(m1) <= l1 and abs(m2) <= l2 and abs(m3) <= l3


def test_examples():
    assert W.wigner_3j((1, 1, 0, 0, 0, 0)) == pytest.approx(-1 / math.sqrt(3), abs=1e-15)
    assert W.wigner_3j((1, 1, 2, 0, 0, 0)) == pytest.approx(math.sqrt(2 / 15), abs=1e-15)
    assert W.wigner_3j((2, 2, 2, 0, 0, 0)) == pytest.approx(-math.sqrt(2 / 35), abs=1e-15)
    assert W.wigner_3j((1, 0, 1, 0, 0, 0)) == pytest.approx(-1 / math.sqrt(3), abs=1e-15)
    assert W.wigner_3j((1, 1, 1, 0, 0, 0)) == 0.0
    assert W.clebsch_gordan((1, 1, 2, 1, 0, 1)) == pytest.approx(math.sqrt(1 / 2), abs=1e-15)
    assert W.clebsch_gordan((1, 1, 2, 1, -1, 0)) == pytest.approx(math.sqrt(1 / 6), abs=1e-15)
    assert W.clebsch_gordan((2, 1, 2, 1, 0, 1)) == pytest.approx(1 / math.sqrt(6), abs=1e-15)


def test_selection_rules():
    assert W.wigner_3j((1, 1, 3, 0, 0, 0)) == 0.0
    assert W.wigner_3j((1, 1, 2, 1, 1, 0)) == 0.0
    assert W.wigner_3j((2, 2, 1, 0, 0, 0)) == 0.0


def test_index_validation():
    with pytest.raises(ArgumentError):
        W.Wigner3jIndex(1, 1, 1, 2, 0, 0)
    with pytest.raises(RangeError):
        W.wigner_3j((101, 1, 100, 0, 0, 0))


def test_against_sympy_small():
    sp = pytest.importorskip("sympy.physics.wigner")
    worst = 0.0
    for l1, l2, l3 in product(range(5), repeat=3):
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                m3 = -m1 - m2
                if abs(m3) > l3:
                    continue
                ref = float(sp.wigner_3j(l1, l2, l3, m1, m2, m3))
                worst = max(worst, abs(W.wigner_3j((l1, l2, l3, m1, m2, m3)) - ref))
    assert worst < 1e-14


@pytest.mark.parametrize("idx", [(100, 100, 100, 0, 0, 0), (60, 40, 90, 7, -3, -4),
                                 (100, 99, 1, 5, -5, 0), (80, 80, 100, 30, -20, -10)])
def test_large_degrees_against_sympy(idx):
    sp = pytest.importorskip("sympy.physics.wigner")
    ref = float(sp.wigner_3j(*idx))
    assert abs(W.wigner_3j(idx) - ref) <= 1e-12 * max(abs(ref), 1e-300)


def test_exact_vs_float_l10():
    worst = 0.0
    for l1 in range(11):
        for l2 in range(l1 + 1):
            for l3 in range(abs(l1 - l2), min(10, l1 + l2) + 1):
                for m1 in range(-l1, l1 + 1):
                    for m2 in range(-l2, l2 + 1):
                        m3 = -m1 - m2
                        if abs(m3) > l3:
                            continue
                        b = W.wigner_3j_exact_float((l1, l2, l3, m1, m2, m3))
                        a = W.wigner_3j((l1, l2, l3, m1, m2, m3))
                        if b:
                            worst = max(worst, abs(a - b) / abs(b))
                        else:
                            assert a == 0.0
    assert worst < 1e-12


def test_exact_rational_form():
    s, q = W.wigner_3j_exact((1, 1, 2, 0, 0, 0))
    assert s == 1 and q == Fraction(2, 15)


degs = st.integers(0, 8)


@settings(max_examples=300, deadline=None)
@given(degs, degs, degs, st.integers(-8, 8), st.integers(-8, 8))
def test_parity_and_permutations(l1, l2, l3, m1, m2):
    m3 = -m1 - m2
    if not _valid(l1, l2, l3, m1, m2, m3):
        return
    v = W.wigner_3j((l1, l2, l3, m1, m2, m3))
    s = (-1) ** (l1 + l2 + l3)
    assert W.wigner_3j((l1, l2, l3, -m1, -m2, -m3)) == pytest.approx(s * v, abs=1e-14)
    assert W.wigner_3j((l2, l3, l1, m2, m3, m1)) == pytest.approx(v, abs=1e-14)
    assert W.wigner_3j((l3, l1, l2, m3, m1, m2)) == pytest.approx(v, abs=1e-14)
    assert W.wigner_3j((l2, l1, l3, m2, m1, m3)) == pytest.approx(s * v, abs=1e-14)


def test_orth_examples():
    assert W.orthogonality_sum("orth2", gamma=0, kappa=0, l=2) == pytest.approx(math.sqrt(5), abs=1e-12)
    assert abs(W.orthogonality_sum("orth2", gamma=1, kappa=0, l=2)) < 1e-12
    assert W.orthogonality_sum("orth4", l1=1, l2=1, l3=2) == pytest.approx(1.0, abs=1e-12)


def test_orth2_odd_degree_sign():
    for l in (1, 3, 5):
        assert W.orthogonality_sum("orth2", gamma=0, kappa=0, l=l) == pytest.approx(math.sqrt(2 * l + 1), abs=1e-12)
        for g in range(1, 2 * l + 1):
            assert abs(W.orthogonality_sum("orth2", gamma=g, kappa=0, l=l)) < 1e-12


def test_orth1_orth3():
    for l1, l2 in ((1, 1), (2, 1), (3, 2), (4, 4)):
        for l in range(abs(l1 - l2), l1 + l2 + 1):
            for lp in range(abs(l1 - l2), l1 + l2 + 1):
                v = W.orthogonality_sum("orth1", l1=l1, l2=l2, l=l, lp=lp, m=0, mp=0)
                assert v == pytest.approx((l == lp) / (2 * l + 1), abs=1e-12)
    for l1, l2 in product(range(5), repeat=2):
        for m1, m2, M1, M2 in product(range(-1, 2), repeat=4):
            if max(abs(m1), abs(M1)) > l1 or max(abs(m2), abs(M2)) > l2:
                continue
            v = W.orthogonality_sum("orth3", l1=l1, l2=l2, m1=m1, m2=m2, M1=M1, M2=M2)
            assert v == pytest.approx(float((m1, m2) == (M1, M2)), abs=1e-12)


def test_orth4_all_triangles():
    for l1, l2, l3 in product(range(7), repeat=3):
        if W._triangle(l1, l2, l3):
            assert W.orthogonality_sum("orth4", l1=l1, l2=l2, l3=l3) == pytest.approx(1.0, abs=1e-12)


def test_unknown_orthogonality_kind():
    with pytest.raises(ValueError):
        W.orthogonality_sum("orth9")


def test_gaunt_vs_quadrature():
    g = build_quadrature(9, 17)
    Y = ylm_table(5, g.theta, g.phi)
    worst = 0.0
    for l1, l2, l3 in product(range(6), repeat=3):
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                m3 = -m1 - m2
                if abs(m3) > l3:
                    continue
                q = g.integrate(Y[:, l1 * l1 + l1 + m1] * Y[:, l2 * l2 + l2 + m2] * Y[:, l3 * l3 + l3 + m3])
                worst = max(worst, abs(complex(q) - W.gaunt_integral(l1, m1, l2, m2, l3, m3)))
    assert worst < 1e-9


def test_gaunt_with_constant_harmonic():
    # int Y_00 Y_lm Y_l,-m = (-1)^m / sqrt(4 pi)
    for l, m in ((1, 1), (2, -1), (3, 2)):
        assert W.gaunt_integral(0, 0, l, m, l, -m) == pytest.approx((-1) ** m / math.sqrt(4 * math.pi))
