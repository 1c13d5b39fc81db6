import math

import pytest

from noisymh.presets import DISCRETE_PRESETS, PANEL_ALIASES, discrete_preset, enumerable_presets, lognormal_example


@pytest.mark.parametrize("name", sorted(DISCRETE_PRESETS))
def test_weights_have_unit_mean(name):
    w = DISCRETE_PRESETS[name].weights
    for m in (1, 2, 3, 7, 50):
        for N in (1, 3):
            vals, probs = w.atoms(m, N)
            assert float((vals * probs).sum()) == pytest.approx(1.0, abs=1e-12)


def test_constructed_preset_satisfies_both_identities():
    p = discrete_preset("prop2-constructed")
    b, eps = p.weights.b(1), p.weights.eps(1)
    assert b == pytest.approx(2 * eps * p.theta / (1 - p.theta))
    assert (1 - eps) / (b - eps) == pytest.approx(eps)


def test_aliases_and_unknown():
    for alias, name in PANEL_ALIASES.items():
        assert discrete_preset(alias) is DISCRETE_PRESETS[name]
    with pytest.raises(KeyError):
        discrete_preset("nope")
    assert len(enumerable_presets()) == len(DISCRETE_PRESETS)


def test_lognormal_example():
    kernel = lognormal_example(10)
    assert kernel.N == 10 and kernel.kind == "noisy"
    assert kernel.weights.to_json()["params"]["sigma2"] == 5.0
    assert math.isclose(float(kernel.proposal.variance), 4.0)
