"""Config-driven experiment runs: chains, diagnostics, CSV/JSON outputs and a manifest."""

from __future__ import annotations

import copy
import csv
import json
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import RngStream, Target, gaussian_target, gaussian_walk, geometric_target, integer_walk, laplace_target, run_chain
from .diagnostics import Binning, acf, empirical_tv, mean_acceptance
from .discrete_walk import classify, noisy_birth_death
from .hmm_smc import LgssmParams, ParamMap, kalman_loglik, pmmh_kernels, simulate_lgssm, write_series_csv
from .kernels import KINDS, Kernel
from .weights import weight_model_from_json


class ConfigError(ValueError):
    """A config key is missing or invalid; the message names the key."""


RUN_PRESETS = {
    "fig1": {
        "experiment": "chains",
        "target": {"name": "normal", "dim": 1},
        "proposal": {"kind": "gaussian_walk", "variance": 4.0},
        "weights": {"family": "lognormal", "params": {"sigma2": 5.0}},
        "kernels": ["noisy"],
        "N": [10, 100, 1000],
        "iterations": 100_000,
        "burnin": 0,
        "seeds": [7],
        "x0": 0.0,
        "thin": 1,
        "diagnostics": ["acceptance", "tv", "histogram"],
        "bins": 50,
        "range": [-4.0, 4.0],
    },
    "pmmh": {
        "experiment": "pmmh",
        "true_params": {"x0": 0.0, "a": 0.9, "sx2": 1.0, "sy2": 1.0},
        "free": ["x0", "a", "sx2", "sy2"],
        "T": 50,
        "data_seed": 1,
        "N": [100],
        "kernels": ["marginal", "pseudo_marginal", "noisy"],
        "iterations": 20_000,
        "burnin": 0,
        "seeds": [1, 2, 3],
        "step_variance": 0.03,
        "thin": 1,
        "max_lag": 100,
        "acf_component": "a",
        "diagnostics": ["acceptance", "acf"],
    },
}


def _panel_config(theta: float, weights: dict) -> dict:
    return {
        "experiment": "chains",
        "target": {"name": "geometric", "ratio": 0.5},
        "proposal": {"kind": "integer_walk", "theta": theta},
        "weights": weights,
        "kernels": ["marginal", "pseudo_marginal", "noisy"],
        "N": [1],
        "iterations": 10_000,
        "burnin": 0,
        "seeds": [7],
        "x0": 10,
        "thin": 1,
        "diagnostics": ["acceptance", "classify"],
    }


_eps = 2 - math.sqrt(3)
RUN_PRESETS["fig7-left"] = _panel_config(0.75, {"family": "binomial_average",
                                        "params": {"b": 2 * _eps * 0.75 / 0.25, "eps": _eps}})
for _name, _theta in (("fig7-center", 0.5), ("fig7-right", 0.25)):
    RUN_PRESETS[_name] = _panel_config(_theta, {"family": "binomial_average",
                                        "params": {"b": 3 + ((1 - _theta) / _theta) ** 3, "eps": "cyclic"}})


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def resolve_config(cfg: dict | None = None, preset: str | None = None) -> dict:
    """Merge a preset with overrides; a manifest's ``config`` block is accepted as-is."""
    if cfg and "config" in cfg and "version" in cfg:
        cfg = cfg["config"]
    cfg = dict(cfg or {})
    preset = preset or cfg.pop("preset", None)
    if preset is not None:
        if preset not in RUN_PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(RUN_PRESETS)}")
        base = copy.deepcopy(RUN_PRESETS[preset])
        base.update(cfg)
        cfg = base
        cfg["preset"] = preset
    exp = cfg.setdefault("experiment", "chains")
    if exp not in ("chains", "pmmh"):
        raise ConfigError(f"config key 'experiment' must be 'chains' or 'pmmh', got {exp!r}")
    for k in _require(cfg, "kernels"):
        if k not in KINDS:
            raise ConfigError(f"config key 'kernels' has unknown kind {k!r}")
    if int(_require(cfg, "iterations")) < 0:
        raise ConfigError("config key 'iterations' must be >= 0")
    cfg.setdefault("burnin", 0)
    cfg.setdefault("thin", 1)
    cfg.setdefault("seeds", [7])
    cfg.setdefault("diagnostics", ["acceptance"])
    _require(cfg, "N")
    if exp == "chains":
        _require(cfg, "target")
        _require(cfg, "proposal")
        cfg.setdefault("weights", {"family": "unit", "params": {}})
        _require(cfg, "x0")
    return cfg


def build_target(obj: dict) -> Target:
    name = _require(obj, "name")
    if name == "normal":
        return gaussian_target(int(obj.get("dim", 1)), float(obj.get("mean", 0.0)), float(obj.get("variance", 1.0)))
    if name == "geometric":
        return geometric_target(float(obj.get("ratio", 0.5)))
    if name == "laplace":
        return laplace_target(int(obj.get("dim", 1)), float(obj.get("scale", 1.0)))
    raise ConfigError(f"config key 'target.name' has unknown value {name!r}")


def build_proposal(obj: dict):
    kind = _require(obj, "kind")
    if kind == "integer_walk":
        return integer_walk(float(_require(obj, "theta")))
    if kind == "gaussian_walk":
        return gaussian_walk(obj.get("variance", 1.0))
    raise ConfigError(f"config key 'proposal.kind' has unknown value {kind!r}")


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


@dataclass
class Job:
    kernel: str
    N: int
    seed: int


@dataclass
class JobResult:
    job: Job
    states: np.ndarray
    accepted: np.ndarray
    weights: np.ndarray | None
    summary: dict = field(default_factory=dict)
    acf: np.ndarray | None = None
    histogram: tuple | None = None


def _chain_kernel(cfg: dict, kind: str, N: int) -> Kernel:
    return Kernel(kind, build_target(cfg["target"]), build_proposal(cfg["proposal"]),
                      weight_model_from_json(cfg["weights"]), N)


def _pmmh_setup(cfg: dict):
    truth = LgssmParams(**cfg.get("true_params", {}))
    _, y = simulate_lgssm(truth, int(cfg.get("T", 50)), RngStream(int(cfg.get("data_seed", 1))).generator("data"))
    pmap = ParamMap(tuple(cfg.get("free", ("x0", "a", "sx2", "sy2"))), truth)
    return truth, y, pmap


def _run_job(cfg: dict, job: Job) -> JobResult:
    if cfg["experiment"] == "pmmh":
        truth, y, pmap = _pmmh_setup(cfg)
        sv = cfg.get("step_variance", 0.01)
        ks = pmmh_kernels(y, job.N, pmap, step_variance=tuple(sv) if isinstance(sv, list) else sv,
                          estimator=cfg.get("estimator", "pf"))
        kernel = getattr(ks, job.kernel)
        x0 = pmap.to_vector(truth)
    else:
        kernel = _chain_kernel(cfg, job.kernel, job.N)
        x0 = cfg["x0"]
    trace = run_chain(kernel, x0, int(cfg["iterations"]), RngStream(job.seed, job.N))
    burn = int(cfg["burnin"])
    states = np.asarray(trace.states)
    post = states[burn:]
    comp = 0
    if cfg["experiment"] == "pmmh":
        comp = list(pmap.free).index(cfg.get("acf_component", pmap.free[0]))
    series = post[:, comp] if post.ndim == 2 else post
    res = JobResult(job, states, np.asarray(trace.accepted), trace.carried_weight)
    diags = cfg["diagnostics"]
    s = {"kernel": job.kernel, "N": job.N, "seed": job.seed, "iterations": int(cfg["iterations"]), "burnin": burn}
    if "acceptance" in diags and len(trace.accepted):
        s["acceptance"] = mean_acceptance(trace.accepted[burn:] if burn < len(trace.accepted) else trace.accepted)
    s["mean"] = float(np.mean(series))
    s["variance"] = float(np.var(series))
    if "acf" in diags:
        lag = int(cfg.get("max_lag", 100))
        res.acf = acf(series, lag).values
        s["acf_lag_max"] = float(res.acf[-1])
    if "tv" in diags or "histogram" in diags:
        target = kernel.target
        if target.discrete:
            s["tv"] = empirical_tv(post, target)
        else:
            binning = Binning(int(cfg.get("bins", 50)), *cfg.get("range", [-4.0, 4.0]))
            s["tv"] = empirical_tv(post, target, binning=binning)
            counts, edges = np.histogram(series, bins=binning.edges)
            res.histogram = (edges, counts / (len(series) * np.diff(edges)))
    res.summary = s
    return res


def run_experiment(cfg: dict, out_dir, workers: int = 1, gnuplot: bool = False) -> dict:
    """Run every (kernel, N, seed) job and write CSV/JSON outputs plus manifest.json."""
    cfg = resolve_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [Job(k, int(N), int(seed)) for N in cfg["N"] for k in cfg["kernels"] for seed in cfg["seeds"]]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, [cfg] * len(jobs), jobs))
    else:
        results = [_run_job(cfg, j) for j in jobs]

    thin = max(1, int(cfg["thin"]))
    for r in results:
        tag = f"{r.job.kernel}_N{r.job.N}_seed{r.job.seed}"
        st = r.states[::thin]
        acc = np.concatenate([[0], r.accepted])[::thin]
        cols = [st[:, i] for i in range(st.shape[1])] if st.ndim == 2 else [st]
        header = ["iteration"] + ([f"x{i}" for i in range(len(cols))] if len(cols) > 1 else ["x"]) + ["accepted"]
        extra = []
        if r.weights is not None:
            header.append("weight")
            extra = [np.asarray(r.weights)[::thin]]
        rows = zip(range(0, len(r.states), thin), *cols, acc, *extra)
        _write_csv(out / f"trace_{tag}.csv", header, rows)
        if r.acf is not None:
            _write_csv(out / f"acf_{tag}.csv", ["lag", "acf"], enumerate(r.acf))
        if r.histogram is not None:
            edges, dens = r.histogram
            _write_csv(out / f"histogram_{tag}.csv", ["left", "right", "density"], zip(edges[:-1], edges[1:], dens))

    keys = ["kernel", "N", "seed", "iterations", "burnin", "acceptance", "mean", "variance", "tv", "acf_lag_max"]
    present = [k for k in keys if any(k in r.summary for r in results)]
    _write_csv(out / "summary.csv", present, ([r.summary.get(k, "") for k in present] for r in results))

    report = {"summary": [r.summary for r in results]}
    if "classify" in cfg["diagnostics"] and cfg["experiment"] == "chains":
        target = build_target(cfg["target"])
        prop = build_proposal(cfg["proposal"])
        w = weight_model_from_json(cfg["weights"])
        report["classification"] = {
            str(N): classify(noisy_birth_death(target, prop.theta, w, int(N))).to_json() for N in cfg["N"]}
        with open(out / "classification.json", "w") as fh:
            json.dump(report["classification"], fh, indent=2, sort_keys=True)
    if cfg["experiment"] == "pmmh":
        truth, y, pmap = _pmmh_setup(cfg)
        write_series_csv(out / "observations.csv", y)
        with open(out / "observations.json", "w") as fh:
            json.dump({"true_params": truth.to_dict(), "kalman_loglik": kalman_loglik(truth, y)}, fh, indent=2)
    if gnuplot:
        _write_gnuplot(out, results, cfg)

    manifest = {"version": __version__, "git": git_describe(), "config": cfg,
                "outputs": sorted(p.name for p in out.iterdir() if p.name != "manifest.json")}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return report


def _write_gnuplot(out: Path, results, cfg) -> None:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set terminal pngcairo size 900,600"]
    for r in results:
        tag = f"{r.job.kernel}_N{r.job.N}_seed{r.job.seed}"
        lines += [f"set output 'trace_{tag}.png'", f"plot 'trace_{tag}.csv' using 1:2 with lines"]
        if r.histogram is not None:
            lines += [f"set output 'histogram_{tag}.png'",
                      f"plot 'histogram_{tag}.csv' using (($1+$2)/2):3 with boxes, exp(-x*x/2)/sqrt(2*pi)"]
        if r.acf is not None:
            lines += [f"set output 'acf_{tag}.png'", f"plot 'acf_{tag}.csv' using 1:2 with impulses"]
    (out / "plots.gp").write_text("\n".join(lines) + "\n")
