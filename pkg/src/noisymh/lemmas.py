"""Exact checks of the weight-ratio, rejection and acceptance inequalities.

For enumerable weights on the integer walk every quantity is a finite sum,
so the four inequalities

    P[W_z / W_x <= 1 - d]        <= 2 sup_x P[|W_x - 1| >= d/2]
    rho~(x) - rho(x)             <= d + 2 sup_x P[|W_x - 1| >= d/2]
    alpha~(x, y)                 <= alpha(x, y) E[1/W_x]
    alpha~(x, y) - alpha(x, y)   <= e + 2 sup_x P[|W_x - 1| >= e/(2(1+e))]

can be evaluated exactly on a state grid. The supremum is taken over the
grid itself, which can only make the right-hand sides smaller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .presets import DiscretePreset, enumerable_presets
from .weights import THRESHOLD_SLACK

LEMMA_NAMES = ("weight_ratio_tail", "rejection_gap", "acceptance_ratio", "acceptance_gap")
DEFAULT_GRID = range(1, 201)
DEFAULT_LEVELS = (0.1, 0.5, 1.0)
DEFAULT_N = (1, 2, 5)


@dataclass
class LemmaReport:
    checks: dict = field(default_factory=lambda: {k: 0 for k in LEMMA_NAMES})
    violations: list = field(default_factory=list)
    worst_margin: dict = field(default_factory=lambda: {k: -np.inf for k in LEMMA_NAMES})

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, lemma: str, lhs: np.ndarray, rhs, context: dict, slack: float):
        lhs = np.asarray(lhs, dtype=float)
        margin = lhs - rhs
        self.checks[lemma] += margin.size
        self.worst_margin[lemma] = max(self.worst_margin[lemma], float(np.max(margin)))
        bad = np.argwhere(margin > slack)
        for idx in bad[:5]:
            self.violations.append({**context, "lemma": lemma, "index": idx.tolist(),
                                    "lhs": float(lhs[tuple(idx)]), "rhs": float(np.broadcast_to(rhs, lhs.shape)[tuple(idx)])})

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": self.checks,
                "worst_margin": self.worst_margin, "violations": self.violations[:20]}


def _padded_atoms(preset: DiscretePreset, states: np.ndarray, N: int):
    rows = [preset.weights.atoms(int(m), N) for m in states]
    width = max(len(v) for v, _ in rows)
    vals = np.ones((len(states), width))
    probs = np.zeros((len(states), width))
    for i, (v, p) in enumerate(rows):
        vals[i, : len(v)] = v
        probs[i, : len(p)] = p
    return vals, probs


def check_preset(preset: DiscretePreset, report: LemmaReport, grid=DEFAULT_GRID,
                 levels=DEFAULT_LEVELS, N_values=DEFAULT_N, slack: float = THRESHOLD_SLACK) -> LemmaReport:
    grid = np.asarray(list(grid), dtype=np.int64)
    # neighbours of the grid enter the acceptance probabilities and the supremum
    states = np.arange(max(1, grid.min() - 1), grid.max() + 2)
    in_grid = np.isin(states, grid)
    M = int(states.max()) + 1
    for N in N_values:
        vals, probs = _padded_atoms(preset, states, N)

        def sup_tail(d):
            hit = np.abs(vals - 1.0) >= d - slack
            return float(np.max(np.sum(probs * hit, axis=1)))

        ctx = {"preset": preset.name, "N": N}
        noisy_p, noisy_q = preset.birth_death(N).table(M)
        marg_p, marg_q = preset.birth_death(N, kind="marginal").table(M)
        idx = grid - 1
        th = preset.theta
        noisy_up, noisy_down = noisy_p[idx] / th, noisy_q[idx] / (1 - th)
        marginal_up, marginal_down = marg_p[idx] / th, marg_q[idx] / (1 - th)
        noisy_rejection = 1 - noisy_p[idx] - noisy_q[idx]
        rho = 1 - marg_p[idx] - marg_q[idx]
        keep = probs > 0
        inv_moment = np.sum(np.where(keep, probs / np.where(keep, vals, 1.0), 0.0), axis=1)[in_grid]

        report.record("acceptance_ratio", noisy_up, marginal_up * inv_moment, ctx, slack)
        down = grid >= 2
        report.record("acceptance_ratio", noisy_down[down], (marginal_down * inv_moment)[down], ctx, slack)

        gv, gp = vals[in_grid], probs[in_grid]
        ratio = gv[:, None, :, None] / gv[None, :, None, :]
        joint = gp[:, None, :, None] * gp[None, :, None, :]
        for d in levels:
            lhs = np.sum(joint * (ratio <= 1 - d + slack), axis=(2, 3))
            report.record("weight_ratio_tail", lhs, 2 * sup_tail(d / 2), {**ctx, "level": d}, slack)
            report.record("rejection_gap", noisy_rejection - rho, d + 2 * sup_tail(d / 2), {**ctx, "level": d}, slack)
            bound = d + 2 * sup_tail(d / (2 * (1 + d)))
            report.record("acceptance_gap", noisy_up - marginal_up, bound, {**ctx, "level": d}, slack)
            report.record("acceptance_gap", (noisy_down - marginal_down)[down], bound, {**ctx, "level": d}, slack)
    return report


def check_lemmas(presets=None, grid=DEFAULT_GRID, levels=DEFAULT_LEVELS, N_values=DEFAULT_N,
                 slack: float = THRESHOLD_SLACK) -> LemmaReport:
    report = LemmaReport()
    for preset in presets or enumerable_presets():
        check_preset(preset, report, grid, levels, N_values, slack)
    return report
