import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bpre.environment import EnvironmentModel, Regime, rate_function_at_zero
from bpre.errors import ContractError
from bpre.exact import EnvSequence, fekete_bounds, quenched_pmf, quenched_survival
from bpre.laws import FiniteLaw, LinearFractionalLaw
from bpre.lf import (
    LFQuenchedState,
    agresti_survival_bounds,
    lf_composed_law,
    lf_derivative,
    lf_fgen,
    lf_quenched_pmf,
    lf_rho,
)
from bpre.models import strongly_model, weakly_model

from helpers import random_lf_law


def lf_env(rng, n):
    return EnvSequence(tuple(random_lf_law(rng) for _ in range(n)))


def test_fgen_normalization_and_single_law():
    law = LinearFractionalLaw(m=2.0, b=8.0)
    state = LFQuenchedState.from_law(law)
    assert lf_fgen(state, 1.0) == pytest.approx(1.0, abs=1e-15)
    # s_exp = 1/2, eta_sum = 1: extinction probability 1 - 1/(1/2 + 1) = 1/3
    assert lf_fgen(state, 0.0) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert state.s_exp == pytest.approx(0.5) and state.eta_sum == pytest.approx(1.0)


def test_fgen_matches_pgf_engine():
    rng = np.random.default_rng(21)
    for _ in range(25):
        env = lf_env(rng, int(rng.integers(1, 7)))
        state = LFQuenchedState.from_env(env)
        assert lf_fgen(state, 0.0) == pytest.approx(
            env.extinction_ladder()[0], abs=1e-10
        )


def test_derivative_at_one_is_quenched_mean():
    rng = np.random.default_rng(2)
    env = lf_env(rng, 5)
    state = LFQuenchedState.from_env(env)
    assert lf_derivative(state, 1.0) == pytest.approx(math.exp(env.walk[-1]), rel=1e-12)


def test_derivative_at_zero_is_survival_squared_identity():
    # P(Z_n = 1 | env) = exp(-S_n) P(Z_n > 0 | env)^2 for LF environments
    rng = np.random.default_rng(3)
    for _ in range(10):
        env = lf_env(rng, int(rng.integers(1, 6)))
        state = LFQuenchedState.from_env(env)
        surv = 1.0 - lf_fgen(state, 0.0)
        assert lf_derivative(state, 0.0) == pytest.approx(
            state.s_exp * surv * surv, rel=1e-12
        )
        assert lf_derivative(state, 0.0) == pytest.approx(
            quenched_pmf(env, 1, 1), abs=1e-10
        )


def test_derivative_finite_difference():
    rng = np.random.default_rng(4)
    env = lf_env(rng, 4)
    state = LFQuenchedState.from_env(env)
    h = 1e-5
    for s in (0.1, 0.5, 0.9):
        fd = (lf_fgen(state, s + h) - lf_fgen(state, s - h)) / (2 * h)
        assert abs(lf_derivative(state, s) - fd) <= 1e-6


def test_quenched_pmf_properties():
    rng = np.random.default_rng(5)
    env = lf_env(rng, 6)
    state = LFQuenchedState.from_env(env)
    assert lf_quenched_pmf(state, 1, 0) == pytest.approx(lf_fgen(state, 0.0), abs=1e-14)
    # geometric in j >= 1
    ratio = lf_composed_law(state).ratio
    for j in range(1, 7):
        assert lf_quenched_pmf(state, 1, j + 1) / lf_quenched_pmf(state, 1, j) == pytest.approx(
            ratio, rel=1e-10
        )
    # P(Z_n = 2) <= P(Z_n = 1)
    assert lf_quenched_pmf(state, 1, 2) <= lf_quenched_pmf(state, 1, 1)
    # agreement with the generic engine, including z0 > 1
    for z0 in (1, 2, 3):
        for j in range(0, 5):
            assert lf_quenched_pmf(state, z0, j) == pytest.approx(
                quenched_pmf(env, z0, j), abs=1e-10
            )


@given(st.integers(0, 2**32 - 1))
def test_semigroup_property(seed):
    rng = np.random.default_rng(seed)
    n_a, n_b = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    laws_a = tuple(random_lf_law(rng) for _ in range(n_a))
    laws_b = tuple(random_lf_law(rng) for _ in range(n_b))
    combined = LFQuenchedState.from_env(EnvSequence(laws_a + laws_b))
    folded = LFQuenchedState.from_env(EnvSequence(laws_a)).combine(
        LFQuenchedState.from_env(EnvSequence(laws_b))
    )
    assert folded.s_exp == pytest.approx(combined.s_exp, rel=1e-12)
    assert folded.eta_sum == pytest.approx(combined.eta_sum, rel=1e-12)


def test_lf_rho_strongly_weakly_and_boundary():
    strongly = EnvironmentModel(
        (
            LinearFractionalLaw(m=math.e, b=2 * math.e**2),
            LinearFractionalLaw(m=math.exp(-1.0), b=2 * math.exp(-2.0)),
        ),
        (0.9, 0.1),
    )
    res = lf_rho(strongly)
    assert res.regime is Regime.STRONGLY
    expect = -math.log(0.9 * math.exp(-1.0) + 0.1 * math.e)
    assert res.rho == pytest.approx(expect, rel=1e-12)

    weakly = weakly_model()
    res = lf_rho(weakly)
    assert res.regime is Regime.WEAKLY
    assert res.rho == pytest.approx(-math.log(2.0 * math.sqrt(2.0) / 3.0), abs=1e-9)
    assert res.rho == pytest.approx(rate_function_at_zero(weakly).value, abs=1e-12)

    p_star = math.e / (math.e + math.exp(-1.0))
    boundary = EnvironmentModel(
        (
            LinearFractionalLaw(m=math.e, b=2 * math.e**2),
            LinearFractionalLaw(m=math.exp(-1.0), b=2 * math.exp(-2.0)),
        ),
        (p_star, 1.0 - p_star),
    )
    res = lf_rho(boundary)
    assert res.regime is Regime.INTERMEDIATE
    # at the boundary both branch formulas coincide
    assert res.rho == pytest.approx(rate_function_at_zero(boundary).value, abs=1e-10)


def test_lf_rho_requires_lf_states():
    mixed = EnvironmentModel(
        (FiniteLaw((0.25, 0.0, 0.75)), LinearFractionalLaw(m=2.0, b=8.0)), (0.5, 0.5)
    )
    with pytest.raises(ContractError, match="requires LF"):
        lf_rho(mixed)


def test_lf_rho_below_fekete_bounds():
    for model in (weakly_model(), strongly_model()):
        rho = lf_rho(model).rho
        table = fekete_bounds(model, n_max=10)
        assert all(rho <= r.a_n_over_n + 1e-9 for r in table.rows)


def test_agresti_bounds_lf_exact():
    rng = np.random.default_rng(8)
    for _ in range(15):
        env = lf_env(rng, int(rng.integers(1, 6)))
        bounds = agresti_survival_bounds(env)
        surv = quenched_survival(env, 1)
        assert bounds.lf_exact == pytest.approx(surv, abs=1e-10)
        assert bounds.lower <= surv + 1e-12
        assert surv <= bounds.upper + 1e-12
        assert bounds.lower <= bounds.upper + 1e-12


def test_agresti_bounds_general_env():
    rng = np.random.default_rng(9)
    from helpers import random_finite_law

    for _ in range(15):
        laws = tuple(random_finite_law(rng, 3) for _ in range(int(rng.integers(1, 6))))
        env = EnvSequence(laws)
        bounds = agresti_survival_bounds(env)
        surv = quenched_survival(env, 1)
        assert bounds.lf_exact is None
        assert bounds.lower <= surv + 1e-12 <= bounds.upper + 1e-11 + surv


def test_agresti_deterministic_line():
    env = EnvSequence((FiniteLaw((0.0, 1.0)),) * 5)
    bounds = agresti_survival_bounds(env)
    assert bounds.lower == pytest.approx(1.0, abs=1e-15)
    assert bounds.upper == pytest.approx(1.0, abs=1e-15)


def test_derivative_times_one_minus_s_squared_bound():
    # f'(s) (1-s)^2 <= exp(-S_n) (1 - f(0))^2 on [0, 1)
    rng = np.random.default_rng(10)
    for _ in range(10):
        env = lf_env(rng, int(rng.integers(1, 6)))
        state = LFQuenchedState.from_env(env)
        bound = state.s_exp * (1.0 - lf_fgen(state, 0.0)) ** 2
        for s in (0.0, 0.3, 0.9):
            assert lf_derivative(state, s) * (1.0 - s) ** 2 <= bound + 1e-14
