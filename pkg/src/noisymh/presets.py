"""Named parameter sets for the integer-state and continuous examples."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Proposal, Target, gaussian_target, gaussian_walk, geometric_target, integer_walk
from .discrete_walk import BirthDeathChain, noisy_birth_death
from .kernels import Kernel
from .weights import BinomialAverage, HomogeneousLogNormal, Seq, UnitWeights, WeightModel


@dataclass(frozen=True)
class DiscretePreset:
    """Geometric target pi(m) = 2^-m, integer walk, enumerable weights."""

    name: str
    theta: float
    weights: WeightModel
    N: int = 1
    description: str = ""

    @property
    def target(self) -> Target:
        return geometric_target(0.5)

    @property
    def proposal(self) -> Proposal:
        return integer_walk(self.theta)

    def kernel(self, kind: str = "noisy", N: int | None = None) -> Kernel:
        return Kernel(kind, self.target, self.proposal, self.weights, N or self.N)

    def birth_death(self, N: int | None = None, kind: str = "noisy") -> BirthDeathChain:
        w = UnitWeights() if kind == "marginal" else self.weights
        return noisy_birth_death(self.target, self.theta, w, N or self.N, label=self.name)

    def to_json(self) -> dict:
        return {"name": self.name, "theta": self.theta, "N": self.N, "weights": self.weights.to_json()}


def _two_point(b, eps) -> BinomialAverage:
    return BinomialAverage(Seq.from_json(b), Seq.from_json(eps))


def _drifting_homogeneous() -> DiscretePreset:
    eps, theta = 2 - math.sqrt(3), 0.75
    return DiscretePreset("prop2", theta, _two_point(2 * eps * theta / (1 - theta), eps),
                          description="homogeneous two-point weights, theta=0.75, eps=2-sqrt(3)")


def _constructed_homogeneous(eps: float = 0.2) -> DiscretePreset:
    # s = eps and b chosen so that both mean-one and b = 2 eps theta / (1 - theta) hold
    theta = (1 - eps + eps**2) / (1 - eps + 3 * eps**2)
    return DiscretePreset("prop2-constructed", theta, _two_point(eps + (1 - eps) / eps, eps),
                          description=f"homogeneous two-point weights with s=eps={eps}")


def _cyclic(theta: float, name: str) -> DiscretePreset:
    b = 3 + ((1 - theta) / theta) ** 3
    return DiscretePreset(name, theta, _two_point(b, "cyclic"),
                          description=f"eps_m = m^-(3 - m mod 3), b={b:g}, theta={theta}")


DISCRETE_PRESETS = {
    "marginal": DiscretePreset("marginal", 0.5, UnitWeights(), description="unit weights"),
    "prop2": _drifting_homogeneous(),
    "prop2-constructed": _constructed_homogeneous(),
    "prop3": _cyclic(0.5, "prop3"),
    "prop3-theta0.25": _cyclic(0.25, "prop3-theta0.25"),
    "prop6": DiscretePreset("prop6", 0.5, _two_point("identity", "reciprocal"),
                            description="b_m = m, eps_m = 1/m"),
    "prop7": DiscretePreset("prop7", 0.5, _two_point("identity", "cyclic"),
                            description="b_m = m, eps_m = m^-(3 - m mod 3)"),
}

# run presets reuse the discrete ones
PANEL_ALIASES = {"fig7-left": "prop2", "fig7-center": "prop3", "fig7-right": "prop3-theta0.25"}


def discrete_preset(name: str) -> DiscretePreset:
    name = PANEL_ALIASES.get(name, name)
    try:
        return DISCRETE_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(DISCRETE_PRESETS)}") from None


def lognormal_example(N: int, kind: str = "noisy", sigma2: float = 5.0, step_variance: float = 4.0) -> Kernel:
    """Standard normal target, log-normal weights, Gaussian walk with variance 4."""
    return Kernel(kind, gaussian_target(1), gaussian_walk(step_variance), HomogeneousLogNormal(sigma2), N)


def enumerable_presets() -> list[DiscretePreset]:
    return list(DISCRETE_PRESETS.values())
