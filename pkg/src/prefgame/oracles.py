"""Preference oracles: exact win rates or seeded pairwise comparison samples.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(stream,))``. Only ``Generator.random`` is
used, so sample sequences depend on PCG64 and the float conversion alone.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DimensionError, DomainError

RNG_NAME = "PCG64 (numpy SeedSequence(seed, spawn_key=(stream,)))"


class PreferenceSample(NamedTuple):
    winner: int
    loser: int


@dataclass(frozen=True)
class OracleMode:
    """``exact`` uses true win rates; ``sampled`` draws ``pairs_per_iteration`` comparisons."""

    kind: str = "exact"
    pairs_per_iteration: int = 0

    def __post_init__(self):
        if self.kind not in ("exact", "sampled"):
            raise ConfigError(f"unknown oracle mode {self.kind!r}")
        if self.kind == "sampled" and self.pairs_per_iteration < 1:
            raise ConfigError("sampled oracle needs pairs_per_iteration >= 1")

    @property
    def exact(self):
        return self.kind == "exact"

    @classmethod
    def sampled(cls, pairs):
        return cls("sampled", int(pairs))

    def to_dict(self):
        if self.exact:
            return {"mode": "exact"}
        return {"mode": "sampled", "pairs_per_iteration": self.pairs_per_iteration}

    @classmethod
    def from_dict(cls, d):
        if d.get("mode") == "sampled":
            return cls.sampled(d["pairs_per_iteration"])
        return cls("exact")


class RngState:
    """Owned, mutable random stream identified by ``(seed, stream)``."""

    def __init__(self, seed, stream=0):
        if not (0 <= seed < 2**64 and 0 <= stream < 2**64):
            raise DomainError("seed and stream must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, size):
        return self._gen.random(size)


class PreferenceBatch(NamedTuple):
    """Parallel arrays of winners and losers; row ``i`` is one comparison."""

    winners: np.ndarray
    losers: np.ndarray

    def __len__(self):
        return len(self.winners)

    def samples(self):
        return [PreferenceSample(int(w), int(l)) for w, l in zip(self.winners, self.losers)]

    def pair_weights(self, n):
        """Empirical weight matrix W[i, j] = fraction of samples with winner i, loser j."""
        counts = np.bincount(self.winners * n + self.losers, minlength=n * n)
        return counts.reshape(n, n) / len(self)


def _inverse_cdf(mu, u):
    cdf = np.cumsum(mu)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    # guard the u * cdf[-1] == cdf[-1] edge and skip trailing zero-mass entries
    last = np.flatnonzero(np.asarray(mu) > 0)[-1]
    return np.minimum(idx, last)


def sample_pairs(mu, model, rng, count):
    """Draw ``count`` i.i.d. pairs from ``mu`` and label each with the preference oracle.

    For each pair (y1, y2), y1 wins with probability P[y1, y2]. Self-pairs are kept.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (model.n,):
        raise DimensionError(f"policy length {mu.shape} does not match model size {model.n}")
    u = rng.uniform((count, 3))
    y1 = _inverse_cdf(mu, u[:, 0])
    y2 = _inverse_cdf(mu, u[:, 1])
    first_wins = u[:, 2] < model.matrix[y1, y2]
    winners = np.where(first_wins, y1, y2)
    losers = np.where(first_wins, y2, y1)
    return PreferenceBatch(winners, losers)


def sample_pair(mu, model, rng):
    b = sample_pairs(mu, model, rng, 1)
    return PreferenceSample(int(b.winners[0]), int(b.losers[0]))


def estimate_win_gradient(mu, samples):
    """Empirical P(y beats mu): wins of y over appearances of y, 1/2 if y never appears.

    A self-pair counts as two appearances and one win. The estimator is biased
    for small samples and consistent as the sample count grows.
    """
    n = len(mu)
    if isinstance(samples, PreferenceBatch):
        winners, losers = samples.winners, samples.losers
    else:
        samples = list(samples)
        winners = np.array([s.winner for s in samples], dtype=np.int64)
        losers = np.array([s.loser for s in samples], dtype=np.int64)
    if len(winners) == 0:
        raise DomainError("cannot estimate win rates from an empty sample")
    wins = np.bincount(winners, minlength=n).astype(np.float64)
    seen = wins + np.bincount(losers, minlength=n)
    out = np.full(n, 0.5)
    np.divide(wins, seen, out=out, where=seen > 0)
    return out
