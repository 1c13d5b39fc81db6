import pytest

from noisymh.lemmas import LEMMA_NAMES, LemmaReport, check_lemmas, check_preset
from noisymh.presets import DiscretePreset, discrete_preset
from noisymh.weights import BinomialAverage, Seq


def test_small_grid_has_no_violations():
    rep = check_lemmas(grid=range(1, 31), N_values=(1, 3))
    assert rep.passed
    assert all(rep.checks[name] > 0 for name in LEMMA_NAMES)


def test_detects_an_injected_violation():
    # a negative slack makes the tight equality cases (unit weights) register as violations
    rep = check_preset(discrete_preset("marginal"), LemmaReport(), grid=range(1, 10), slack=-1e-3)
    assert not rep.passed
    assert rep.violations[0]["preset"] == "marginal"


@pytest.mark.parametrize("theta", [0.2, 0.5, 0.8])
def test_custom_two_point_preset(theta):
    preset = DiscretePreset("custom", theta, BinomialAverage(Seq("const", 5.0), Seq("reciprocal")))
    rep = check_preset(preset, LemmaReport(), grid=range(1, 40), N_values=(1, 2))
    assert rep.passed, rep.violations[:2]
