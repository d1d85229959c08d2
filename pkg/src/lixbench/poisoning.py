"""Greedy data poisoning of the CDF regression.

Selects up to lambda keys, one per round, each maximizing the OLS mean squared
error of the augmented rank-shifted keyset. All statistics are kept as exact
Python integers, so argmax decisions (and their smallest-key tie-breaks) are
free of floating-point ordering artifacts at any key magnitude.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .keyset import RankedKeySet

STRATEGIES = ("gap-endpoints", "gap-endpoints-plus-midpoint", "dense")

DENSE_UNIVERSE_LIMIT = 2**20


class CollisionError(ValueError):
    """A poison key collided with an existing key."""


@dataclass(frozen=True)
class PoisonConfig:
    """Attack budget and candidate search strategy.

    Either `alpha` (fraction of n) or `lam` (absolute budget) must be set;
    an explicit `lam` wins. `seed` is reserved: the attack is deterministic.
    """

    alpha: float | None = None
    lam: int | None = None
    strategy: str = "gap-endpoints-plus-midpoint"
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, "
                             f"expected one of {STRATEGIES}")
        if self.lam is None and self.alpha is None:
            raise ValueError("one of alpha or lam is required")
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")

    def budget(self, n: int) -> int:
        """ceil(alpha * n), guarded against float dust in the product."""
        if self.lam is not None:
            return self.lam
        return math.ceil(round(self.alpha * n, 9))


@dataclass(frozen=True)
class PoisonResult:
    """Poison keys in insertion order with the per-step MSE trace."""

    poison_keys: tuple[int, ...]
    loss_trace: tuple[float, ...]
    final_loss: float
    clean_loss: float
    truncated: bool = False


class AugmentedStats:
    """Exact running sums for O(1) evaluation of one-key insertions.

    Tracks count N, sum(k), sum(k^2), sum(k*r) over the current keyset plus
    suffix key sums indexed by rank, enough to evaluate the OLS MSE of any
    augmented set without refitting. Rank sums stay closed-form because ranks
    are always the contiguous range 1..N.
    """

    def __init__(self, keys):
        self.keys = [int(k) for k in keys]
        if self.keys != sorted(set(self.keys)):
            raise ValueError("keys must be strictly ascending")
        self.sum_k = sum(self.keys)
        self.sum_k2 = sum(k * k for k in self.keys)
        self.sum_kr = sum(k * r for r, k in enumerate(self.keys, start=1))
        self._rebuild_suffix()

    def _rebuild_suffix(self) -> None:
        # suffix[j-1] = sum of keys with rank >= j
        n = len(self.keys)
        suffix = [0] * (n + 1)
        for i in range(n - 1, -1, -1):
            suffix[i] = suffix[i + 1] + self.keys[i]
        self.suffix = suffix

    @property
    def count(self) -> int:
        return len(self.keys)

    def suffix_key_sum(self, rank: int) -> int:
        """Sum of keys whose rank is >= rank (1-based)."""
        return self.suffix[rank - 1]

    def insertion_rank(self, key: int) -> int:
        """Rank the key would take, shifting every rank >= it up by one."""
        i = bisect.bisect_left(self.keys, key)
        if i < len(self.keys) and self.keys[i] == key:
            raise ValueError(f"candidate {key} already present in the keyset")
        return i + 1

    @staticmethod
    def _rank_sums(n: int) -> tuple[int, int]:
        return n * (n + 1) // 2, n * (n + 1) * (2 * n + 1) // 6

    def _ols_numerators(self, count, sum_k, sum_k2, sum_kr) -> tuple[int, int]:
        sum_r, sum_r2 = self._rank_sums(count)
        num_xx = count * sum_k2 - sum_k * sum_k
        num_xy = count * sum_kr - sum_k * sum_r
        num_yy = count * sum_r2 - sum_r * sum_r
        return num_yy * num_xx - num_xy * num_xy, num_xx

    def _score(self, key: int) -> tuple[int, int]:
        """(numerator, num_xx) of the augmented MSE, both exact integers.

        MSE = numerator / (num_xx * (N+1)^3); numerator >= 0 by Cauchy-Schwarz.
        """
        j = self.insertion_rank(key)
        m = self.count + 1
        return self._ols_numerators(
            m,
            self.sum_k + key,
            self.sum_k2 + key * key,
            self.sum_kr + self.suffix_key_sum(j) + key * j,
        )

    def mse(self) -> float:
        """OLS MSE of the current keyset."""
        numer, num_xx = self._ols_numerators(
            self.count, self.sum_k, self.sum_k2, self.sum_kr)
        if num_xx == 0:
            return 0.0
        return numer / (num_xx * self.count**3)

    def augmented_mse(self, key: int) -> float:
        """OLS MSE after inserting `key` at its sorted position and re-ranking."""
        numer, num_xx = self._score(key)
        if num_xx == 0:
            return 0.0
        return numer / (num_xx * (self.count + 1) ** 3)

    def insert(self, key: int) -> None:
        j = self.insertion_rank(key)
        self.sum_kr += self.suffix_key_sum(j) + key * j
        self.sum_k += key
        self.sum_k2 += key * key
        bisect.insort(self.keys, key)
        self._rebuild_suffix()


def augmented_mse(stats: AugmentedStats, key: int) -> float:
    return stats.augmented_mse(key)


def _gap_candidates(keys: list[int], universe_max: int, midpoints: bool) -> list[int]:
    out: set[int] = set()

    def add_gap(lo: int, hi: int) -> None:
        # lo/hi are occupied (or virtual) bounds; the open interval between
        # them is empty.
        if hi - lo < 2:
            return
        out.add(lo + 1)
        out.add(hi - 1)
        if midpoints:
            out.add((lo + hi) // 2)

    add_gap(-1, keys[0])
    for a, b in zip(keys, keys[1:]):
        add_gap(a, b)
    add_gap(keys[-1], universe_max)
    return sorted(out)


def _dense_candidates(keys: list[int], universe_max: int) -> list[int]:
    if universe_max > DENSE_UNIVERSE_LIMIT:
        raise ValueError(
            f"dense candidates refused for universe_max {universe_max} > "
            f"{DENSE_UNIVERSE_LIMIT}")
    present = np.zeros(universe_max, dtype=bool)
    present[np.asarray(keys, dtype=np.int64)] = True
    return [int(v) for v in np.flatnonzero(~present)]


def _candidates(keys: list[int], universe_max: int, strategy: str) -> list[int]:
    if strategy == "dense":
        return _dense_candidates(keys, universe_max)
    return _gap_candidates(keys, universe_max, strategy == "gap-endpoints-plus-midpoint")


def candidate_keys(keyset: RankedKeySet, strategy: str) -> list[int]:
    """Absent keys to consider for insertion, ascending and duplicate-free."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    return _candidates([int(k) for k in keyset.keys], keyset.universe_max, strategy)


def greedy_poison(keyset: RankedKeySet, config: PoisonConfig) -> PoisonResult:
    """Insert up to budget keys, each the exact argmax of the augmented MSE.

    Inserted keys join the keyset for later rounds, so every insertion shifts
    the ranks (and candidate gaps) seen by the next one. Equal-loss candidates
    resolve to the smallest key.
    """
    config.validate()
    budget = config.budget(keyset.n)
    stats = AugmentedStats(keyset.keys)
    clean_loss = stats.mse()

    chosen: list[int] = []
    trace: list[float] = []
    truncated = False
    for _ in range(budget):
        candidates = _candidates(stats.keys, keyset.universe_max, config.strategy)
        if not candidates:
            truncated = True
            break
        best_key = None
        best_numer = best_xx = 0
        for c in candidates:
            numer, num_xx = stats._score(c)
            # strict > keeps the smallest key among exact ties (ascending scan)
            if best_key is None or numer * best_xx > best_numer * num_xx:
                best_key, best_numer, best_xx = c, numer, num_xx
        stats.insert(best_key)
        chosen.append(best_key)
        trace.append(stats.mse())

    final_loss = trace[-1] if trace else clean_loss
    return PoisonResult(tuple(chosen), tuple(trace), final_loss, clean_loss, truncated)


def poison_dataset(keyset: RankedKeySet, result: PoisonResult) -> RankedKeySet:
    """Sorted union of the legitimate keys and the poison keys."""
    if not result.poison_keys:
        return keyset
    merged = np.concatenate([
        keyset.keys, np.asarray(result.poison_keys, dtype=np.int64)])
    merged.sort()
    dup = np.flatnonzero(merged[1:] == merged[:-1])
    if dup.size:
        raise CollisionError(f"poison key {int(merged[dup[0]])} collides with the keyset")
    return RankedKeySet(merged, keyset.universe_max)
