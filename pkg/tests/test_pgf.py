import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bpre.errors import ContractError, TruncationError
from bpre.laws import FiniteLaw, LinearFractionalLaw
from bpre.pgf import (
    MAX_DEGREE,
    TruncatedPGF,
    apply_law_rows,
    compose,
    mul_rows,
    pow_rows,
    recip_rows,
)


def test_mul_rows_matches_convolution():
    rng = np.random.default_rng(0)
    a = rng.random((4, 7))
    b = rng.random((4, 7))
    out = mul_rows(a, b)
    for i in range(4):
        ref = np.convolve(a[i], b[i])[:7]
        assert np.allclose(out[i], ref, atol=1e-14)


def test_recip_rows_inverts():
    rng = np.random.default_rng(1)
    w = rng.random((3, 9)) + 0.1
    r = recip_rows(w)
    unit = mul_rows(w, r)
    expect = np.zeros((3, 9))
    expect[:, 0] = 1.0
    scale = np.abs(r).max()
    assert np.allclose(unit, expect, atol=1e-13 * scale)


def test_pow_rows_matches_repeated_convolution():
    rng = np.random.default_rng(2)
    c = rng.random((2, 6)) / 6.0
    p = pow_rows(c, 3)
    for i in range(2):
        ref = np.convolve(np.convolve(c[i], c[i]), c[i])[:6]
        assert np.allclose(p[i], ref, atol=1e-14)


def test_apply_law_rows_lf_matches_direct_composition():
    law = LinearFractionalLaw(m=1.7, b=3.1)
    inner = FiniteLaw((0.3, 0.3, 0.4)).coefficients(10)[None, :]
    out = apply_law_rows(law, inner.copy())[0]
    # compare with numeric coefficients of law.pgf(inner(s)) via polynomial fit
    xs = np.linspace(-0.25, 0.25, 11)
    vals = [law.pgf(np.polyval(inner[0][::-1], x)) for x in xs]
    ref = np.polyfit(xs, vals, 10)[::-1]
    assert np.allclose(out[:6], ref[:6], atol=1e-8)


def test_compose_identity_outer():
    g = TruncatedPGF.from_law(FiniteLaw((0.25, 0.0, 0.75)), degree=6)
    out = compose(TruncatedPGF.identity(), g)
    assert np.allclose(out.coeffs[: g.degree + 1], g.coeffs, atol=1e-15)


def test_compose_self_composition_value():
    f = TruncatedPGF.from_law(FiniteLaw((0.25, 0.0, 0.75)), degree=8)
    out = compose(f, f)
    assert out.coeffs[0] == pytest.approx(0.296875, abs=1e-15)
    assert out(1.0) == pytest.approx(1.0, abs=1e-12)


def test_compose_with_constant_one():
    f = TruncatedPGF.from_law(FiniteLaw((0.25, 0.25, 0.5)), degree=5)
    out = compose(f, TruncatedPGF.constant(1.0))
    assert out.coeffs[0] == pytest.approx(float(f.coeffs.sum()), abs=1e-12)
    assert np.all(out.coeffs[1:] == 0.0)


def test_super_probability_series_rejected():
    # mass above 1 is caught at construction, before compose can see it
    with pytest.raises(ContractError):
        TruncatedPGF(np.array([0.9, 0.2]))


def test_degree_cap():
    with pytest.raises(TruncationError):
        TruncatedPGF.from_law(FiniteLaw((0.5, 0.5)), degree=MAX_DEGREE + 1)


@st.composite
def small_pgfs(draw):
    size = draw(st.integers(2, 5))
    raw = [draw(st.floats(0.0, 1.0)) for _ in range(size)]
    total = sum(raw) or 1.0
    return TruncatedPGF(np.array([v / total for v in raw]))


@given(small_pgfs(), small_pgfs(), small_pgfs())
def test_compose_associativity_within_tail(f, g, h):
    degree = 12
    left = compose(compose(f, g, degree), h, degree)
    right = compose(f, compose(g, h, degree), degree)
    slack = 2.0 * (left.tail_mass + right.tail_mass) + 1e-10
    assert np.max(np.abs(left.coeffs - right.coeffs)) <= slack


def test_truncated_pgf_validation():
    with pytest.raises(ContractError):
        TruncatedPGF(np.array([0.7, 0.7]))
    with pytest.raises(ContractError):
        TruncatedPGF(np.array([-0.2, 0.5]))
    series = TruncatedPGF(np.array([0.25, 0.25]))
    assert series.tail_mass == pytest.approx(0.5)
    assert series(1.0) == pytest.approx(0.5)
    assert series.derivative(1.0) == pytest.approx(0.25)


def test_power_of_series():
    g = TruncatedPGF(np.array([0.5, 0.0, 0.5]))
    sq = g.power(2)
    assert np.allclose(sq.coeffs, [0.25, 0.0, 0.5], atol=1e-15)  # s^4 truncated away
    assert sq.tail_mass == pytest.approx(0.25)
