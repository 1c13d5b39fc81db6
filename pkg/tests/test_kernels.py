import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisymh.core import RejectedInputError, RngStream, gaussian_target, gaussian_walk, geometric_target, integer_walk
from noisymh.kernels import (
    Kernel,
    weighted_acceptance,
    marginal_acceptance,
    marginal_log_acceptance,
    marginal_rejection,
    marginal_step,
    noisy_step,
    pseudo_marginal_step,
    step_acceptance_draws,
    noisy_acceptance,
    noisy_rejection,
)
from noisymh.weights import BinomialAverage, HomogeneousLogNormal, TwoPointHomogeneous, UnitWeights

EPS7 = 2 - math.sqrt(3)
DRIFTING = Kernel("noisy", geometric_target(), integer_walk(0.75), TwoPointHomogeneous(6 * EPS7, EPS7))
# four-atom brute force in plain floats
ALPHA_UP = 0.3387820117418509
P_UP = 0.25408650880638817
RHO = 0.49591349119361183


def test_marginal_log_acceptance_values():
    t, q = geometric_target(), integer_walk(0.3)
    assert marginal_log_acceptance(t, q, 5, 6) == pytest.approx(math.log(min(1, 0.5 * 0.7 / 0.3)))
    assert marginal_log_acceptance(t, q, 1, 0) == -math.inf
    g = gaussian_target(1)
    assert marginal_log_acceptance(g, gaussian_walk(1.0), np.array([1.0]), np.array([-1.0])) == 0.0


def test_marginal_log_acceptance_off_support_current():
    with pytest.raises(RejectedInputError):
        marginal_log_acceptance(geometric_target(), integer_walk(0.5), 0, 1)


def test_weighted_acceptance_substitutions():
    t, q = geometric_target(), integer_walk(0.5)
    # marginal ratio for 3 -> 4 is 0.5
    assert weighted_acceptance(3, 2.0, 4, 2.0, t, q) == pytest.approx(0.5)
    assert weighted_acceptance(3, 1.0, 4, 2.0, t, q) == pytest.approx(1.0)
    assert weighted_acceptance(4, 2.0, 3, 1.0, t, q) == pytest.approx(1.0)
    assert weighted_acceptance(3, 2.0, 2, 1.0, t, q) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        weighted_acceptance(3, 0.0, 4, 1.0, t, q)
    with pytest.raises(ValueError):
        weighted_acceptance(3, 1.0, 4, -1.0, t, q)


def test_weighted_acceptance_large_carried_weight():
    t, q = geometric_target(), integer_walk(0.75)
    b = 6 * EPS7
    ratio = marginal_acceptance(t, q, 5, 4)
    assert weighted_acceptance(5, b, 4, EPS7, t, q) == pytest.approx(min(1, 6.0 * EPS7 / b))
    assert ratio == 1.0


def test_noisy_acceptance_drifting_exact():
    assert noisy_acceptance(DRIFTING, 7, 8).value == pytest.approx(ALPHA_UP, abs=1e-12)
    assert noisy_acceptance(DRIFTING, 7, 6).value == pytest.approx(1.0, abs=1e-12)
    assert noisy_rejection(DRIFTING, 7).value == pytest.approx(RHO, abs=1e-12)


def test_noisy_acceptance_unit_is_marginal():
    kernel = Kernel("noisy", geometric_target(), integer_walk(0.4), UnitWeights())
    for m in (1, 2, 9):
        for y in (m - 1, m + 1):
            assert noisy_acceptance(kernel, m, y).value == pytest.approx(marginal_acceptance(kernel.target, kernel.proposal, m, y))
        assert noisy_rejection(kernel, m).value == pytest.approx(marginal_rejection(kernel.target, kernel.proposal, m))


def test_noisy_acceptance_binomial_exact_vs_mc(gen):
    kernel = Kernel("noisy", geometric_target(), integer_walk(0.5), BinomialAverage("identity", "cyclic"), 3)
    for m in (5, 6, 7):
        exact = noisy_acceptance(kernel, m, m + 1, mode="exact").value
        mc = noisy_acceptance(kernel, m, m + 1, mode="mc", draws=10**5, gen=gen)
        assert abs(exact - mc.value) < 3 * mc.stderr + 1e-12


def test_noisy_down_moves_always_accepted():
    moves = step_acceptance_draws(DRIFTING, 9, 10**5, RngStream(4))
    down = moves[moves != 0]
    assert np.all(np.isin(down, [-1, 1]))
    # every proposed down move is accepted, so rejections only come from up proposals
    n_down = np.sum(moves == -1)
    assert n_down / 10**5 == pytest.approx(0.25, abs=0.005)
    assert np.sum(moves == 1) / 10**5 == pytest.approx(P_UP, abs=0.005)


def test_noisy_step_matches_marginal_with_unit_weights():
    kernel = Kernel("noisy", gaussian_target(1), gaussian_walk(4.0), UnitWeights())
    x = np.array([0.2])
    for seed in range(20):
        a = noisy_step(kernel, x, RngStream(seed))
        b = marginal_step(kernel, x, RngStream(seed))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_noisy_step_off_support():
    kernel = Kernel("noisy", geometric_target(), integer_walk(0.01), TwoPointHomogeneous(2.0, 0.5))
    for seed in range(30):
        nxt, acc, (w, u, abar) = noisy_step(kernel, 1, RngStream(seed))
        if w is None:
            assert nxt == 1 and not acc and abar == 0.0


def test_pseudo_marginal_rejection_keeps_weight():
    kernel = Kernel("pseudo_marginal", geometric_target(), integer_walk(0.5), TwoPointHomogeneous(2.0, 0.5))
    for seed in range(50):
        (nxt, w), acc = pseudo_marginal_step(kernel, 10, 1.5, RngStream(seed))
        if not acc:
            assert nxt == 10 and w == 1.5
        else:
            assert w in (0.5, 2.0)


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel("exact", geometric_target(), integer_walk(0.5))
    with pytest.raises(ValueError):
        Kernel("noisy", geometric_target(), integer_walk(0.5), N=0)


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.05, 0.95), b=st.floats(1.1, 20), eps=st.floats(0.01, 0.95), N=st.integers(1, 6),
       m=st.integers(1, 200))
def test_acceptance_ratio_bound(theta, b, eps, N, m):
    kernel = Kernel("noisy", geometric_target(), integer_walk(theta), TwoPointHomogeneous(b, eps), N)
    v, p = kernel.weights.atoms(m, N)
    inv = float(np.sum(p / v))
    for y in (m - 1, m + 1):
        a = marginal_acceptance(kernel.target, kernel.proposal, m, y) if y >= 1 else 0.0
        assert noisy_acceptance(kernel, m, y).value <= a * inv + 1e-12


def test_pseudo_marginal_exact_with_lognormal():
    kernel = Kernel("pseudo_marginal", gaussian_target(1), gaussian_walk(4.0), HomogeneousLogNormal(5.0), 10)
    from noisymh.core import run_chain
    from noisymh.diagnostics import empirical_tv

    tr = run_chain(kernel, 0.0, 10**5, RngStream(12))
    assert empirical_tv(tr, kernel.target) < 0.04
