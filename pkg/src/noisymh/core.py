"""State spaces, targets, proposals, random streams and the chain runner.

Every kernel in :mod:`noisymh.kernels` draws its randomness from a
:class:`ChainRng`, which holds three independent sub-streams: one for
proposal innovations, one for acceptance uniforms and one for weights.
Each step consumes exactly one proposal innovation and one acceptance
uniform regardless of the kernel kind, so marginal, pseudo-marginal and
noisy chains driven by the same :class:`RngStream` share their proposal
and acceptance randomness. With unit weights they coincide exactly.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SUPPORT_KINDS = ("positive_integers", "integers", "real_vector")

# sub-stream tags of a ChainRng
_PROPOSAL, _ACCEPT, _WEIGHTS, _SPLIT = 1, 2, 3, 0x5EED


class RejectedInputError(ValueError):
    """An input state lies outside the support of the target."""


class UnsupportedOperationError(NotImplementedError):
    """The requested operation is not available for this model."""


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream_id) pair naming one reproducible random stream.

    Generators are Philox (counter-based) bit generators keyed through
    :class:`numpy.random.SeedSequence`, so distinct stream ids give
    statistically independent streams and identical pairs reproduce
    identical draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def seed_sequence(self, *tags) -> np.random.SeedSequence:
        """Tags are integers or short strings (hashed with CRC32) naming a sub-stream."""
        keys = tuple(zlib.crc32(t.encode()) if isinstance(t, str) else int(t) for t in tags)
        return np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *keys))

    def generator(self, *tags) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence(*tags)))

    def bundle(self) -> "ChainRng":
        return ChainRng(self)

    def split(self, k: int) -> list["RngStream"]:
        return split_stream(self, k)


def split_stream(rng: RngStream, k: int) -> list[RngStream]:
    """Derive ``k`` child streams, deterministically, with distinct ids."""
    if k < 1:
        raise ValueError("k must be >= 1")
    taken = {rng.stream_id}
    children = []
    for i in range(k):
        salt = 0
        while True:
            word = rng.seed_sequence(_SPLIT, i, salt).generate_state(1, np.uint64)[0]
            sid = int(word)
            if sid not in taken:
                break
            salt += 1
        taken.add(sid)
        children.append(RngStream(rng.seed, sid))
    return children


class _Buffered:
    """Block-buffered scalar draws from one generator."""

    __slots__ = ("gen", "block", "_u", "_ui", "_z", "_zi")

    def __init__(self, gen: np.random.Generator, block: int = 8192):
        self.gen = gen
        self.block = block
        self._u: list = []
        self._ui = 0
        self._z: list = []
        self._zi = 0

    def uniform(self) -> float:
        if self._ui >= len(self._u):
            self._u = self.gen.random(self.block).tolist()
            self._ui = 0
        v = self._u[self._ui]
        self._ui += 1
        return v

    def normals(self, d: int) -> list:
        if self._zi + d > len(self._z):
            rest = self._z[self._zi:]
            self._z = rest + self.gen.standard_normal(max(self.block, d)).tolist()
            self._zi = 0
        out = self._z[self._zi:self._zi + d]
        self._zi += d
        return out


class ChainRng:
    """Per-chain bundle of the proposal, acceptance and weight sub-streams.

    ``weights`` is a plain :class:`numpy.random.Generator`; weight models
    draw from it directly.
    """

    def __init__(self, stream: RngStream):
        self.stream = stream
        self.proposal = _Buffered(stream.generator(_PROPOSAL))
        self.accept = _Buffered(stream.generator(_ACCEPT))
        self.weights = stream.generator(_WEIGHTS)


def as_chain_rng(rng) -> ChainRng:
    if isinstance(rng, ChainRng):
        return rng
    if isinstance(rng, RngStream):
        return rng.bundle()
    raise TypeError(f"expected RngStream or ChainRng, got {type(rng).__name__}")


# ---------------------------------------------------------------------------
# targets and proposals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    """Log-density of the target on a discrete or real-vector space.

    ``log_density`` may be unnormalised; it is only evaluated on the
    support, off-support points get ``-inf`` from :meth:`log_pi`.
    ``pmf`` (discrete, vectorised, normalised) and ``cdf`` (1-d continuous)
    are optional shortcuts used by the diagnostics.
    """

    log_density: Callable
    support: str
    dim: int = 1
    name: str = ""
    pmf: Callable | None = field(default=None, compare=False)
    cdf: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.support not in SUPPORT_KINDS:
            raise ValueError(f"unknown support kind {self.support!r}")

    @property
    def discrete(self) -> bool:
        return self.support != "real_vector"

    def in_support(self, x) -> bool:
        if self.support == "positive_integers":
            return x >= 1
        return True

    def log_pi(self, x) -> float:
        if not self.in_support(x):
            return -math.inf
        return float(self.log_density(x))


def geometric_target(ratio: float = 0.5) -> Target:
    """pi(m) = (1 - r) r^(m-1) on the positive integers; r = 1/2 gives 2^-m."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    log_r = math.log(ratio)
    log_norm = math.log1p(-ratio) - log_r

    def log_density(m):
        return m * log_r + log_norm

    def pmf(m):
        m = np.asarray(m)
        return np.where(m >= 1, np.exp(m * log_r + log_norm), 0.0)

    return Target(log_density, "positive_integers", name=f"geometric({ratio:g})", pmf=pmf)


def log_concave_target(h: Callable[[int], float], name: str = "log-concave") -> Target:
    """pi(m) proportional to exp(-h(m)) on the positive integers, h convex."""
    return Target(lambda m: -h(m), "positive_integers", name=name)


def gaussian_target(dim: int = 1, mean: float = 0.0, variance: float = 1.0) -> Target:
    """Isotropic normal target on R^dim."""
    from scipy.stats import norm

    sd = math.sqrt(variance)
    const = -0.5 * dim * math.log(2 * math.pi * variance)

    if dim == 1:
        def log_density(x):
            z = float(x[0]) - mean
            return const - 0.5 * z * z / variance
    else:
        def log_density(x):
            z = np.asarray(x, dtype=float) - mean
            return const - 0.5 * float(np.dot(z, z)) / variance

    cdf = (lambda t: norm.cdf(t, loc=mean, scale=sd)) if dim == 1 else None
    return Target(log_density, "real_vector", dim=dim, name=f"normal({mean:g},{variance:g})^{dim}", cdf=cdf)


def laplace_target(dim: int = 1, scale: float = 1.0) -> Target:
    """Log-Lipschitz target pi(x) proportional to exp(-||x|| / scale)."""

    def log_density(x):
        return -float(np.linalg.norm(np.asarray(x, dtype=float))) / scale

    return Target(log_density, "real_vector", dim=dim, name=f"laplace({scale:g})^{dim}")


@dataclass(frozen=True)
class Proposal:
    """Random-walk proposal: ``integer_walk`` (up w.p. theta) or ``gaussian_walk``.

    ``variance`` is the per-coordinate step variance of the Gaussian walk,
    either a scalar or one value per coordinate.
    """

    kind: str
    theta: float = 0.5
    variance: float | tuple = 1.0

    def __post_init__(self):
        if self.kind == "integer_walk":
            if not 0 < self.theta < 1:
                raise ValueError("theta must lie in (0, 1)")
        elif self.kind == "gaussian_walk":
            v = np.atleast_1d(np.asarray(self.variance, dtype=float))
            if np.any(v <= 0):
                raise ValueError("step variances must be positive")
            if isinstance(self.variance, (list, np.ndarray)):
                object.__setattr__(self, "variance", tuple(float(a) for a in v))
        else:
            raise ValueError(f"unknown proposal kind {self.kind!r}")
        scale = np.sqrt(np.atleast_1d(np.asarray(self.variance, dtype=float)))
        object.__setattr__(self, "_scale", scale)
        object.__setattr__(self, "_log_up", math.log((1 - self.theta) / self.theta))

    @property
    def symmetric(self) -> bool:
        return self.kind == "gaussian_walk" or self.theta == 0.5

    def propose(self, x, rng: ChainRng):
        if self.kind == "integer_walk":
            return x + 1 if rng.proposal.uniform() < self.theta else x - 1
        d = len(x)
        return x + self._scale * np.array(rng.proposal.normals(d))

    def log_ratio(self, x, y) -> float:
        """log q(y, x) - log q(x, y)."""
        if self.kind == "gaussian_walk":
            return 0.0
        if y == x + 1:
            return self._log_up
        if y == x - 1:
            return -self._log_up
        raise ValueError(f"integer walk cannot move from {x} to {y}")

    def neighbors(self, x) -> list[tuple[int, float]]:
        if self.kind != "integer_walk":
            raise UnsupportedOperationError("only the integer walk has a finite neighbour set")
        return [(x + 1, self.theta), (x - 1, 1.0 - self.theta)]


def integer_walk(theta: float = 0.5) -> Proposal:
    return Proposal("integer_walk", theta=theta)


def gaussian_walk(variance: float | Sequence[float] = 1.0) -> Proposal:
    if isinstance(variance, (list, np.ndarray)):
        variance = tuple(float(v) for v in variance)
    return Proposal("gaussian_walk", variance=variance)


def as_state(target: Target, x):
    """Coerce ``x`` to the state representation used for ``target``."""
    if target.discrete:
        if isinstance(x, (np.ndarray, list, tuple)):
            raise TypeError("discrete targets take integer states")
        if x != int(x):
            raise TypeError(f"discrete targets take integer states, got {x!r}")
        return int(x)
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if arr.shape != (target.dim,):
        raise ValueError(f"state of shape {arr.shape} does not match dimension {target.dim}")
    return arr


# ---------------------------------------------------------------------------
# chain traces and the generic runner
# ---------------------------------------------------------------------------


@dataclass
class ChainTrace:
    """Seeded realisation of a chain.

    ``states`` has ``iterations + 1`` rows (integer vector for discrete
    targets, ``(n + 1, d)`` array otherwise). ``carried_weight`` is present
    only for pseudo-marginal runs.
    """

    states: np.ndarray
    accepted: np.ndarray
    carried_weight: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def iterations(self) -> int:
        return len(self.accepted)

    def component(self, i: int = 0) -> np.ndarray:
        if self.states.ndim == 1:
            return self.states
        return self.states[:, i]


def run_chain(kernel, x0, iterations: int, rng) -> ChainTrace:
    """Run ``iterations`` steps of ``kernel`` from ``x0``.

    ``kernel`` is any object with ``initial_state(x0, rng)`` returning a
    ``(x, log_pi_x, log_w)`` tuple and ``advance(state, rng)`` returning
    ``(state, accepted)`` (see :class:`noisymh.kernels.Kernel`). Burn-in
    is the caller's business; nothing is discarded.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    crng = as_chain_rng(rng)
    state = kernel.initial_state(x0, crng)
    carry = kernel.kind == "pseudo_marginal"
    states = [state[0]]
    log_w = [state[2]] if carry else None
    accepted = [False] * iterations
    advance = kernel.advance
    for i in range(iterations):
        state, acc = advance(state, crng)
        states.append(state[0])
        accepted[i] = acc
        if carry:
            log_w.append(state[2])
    if kernel.target.discrete:
        arr = np.array(states, dtype=np.int64)
    else:
        arr = np.array(states, dtype=float).reshape(len(states), -1)
    meta = {
        "kernel": kernel.kind,
        "N": getattr(kernel, "N", None),
        "seed": crng.stream.seed,
        "stream_id": crng.stream.stream_id,
        "iterations": iterations,
    }
    return ChainTrace(
        states=arr,
        accepted=np.array(accepted, dtype=bool),
        carried_weight=np.exp(np.array(log_w)) if carry else None,
        meta=meta,
    )
