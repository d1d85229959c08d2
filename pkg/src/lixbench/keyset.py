"""Sorted integer keysets and their empirical CDF (key -> 1-based rank)."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_UNIVERSE_MAX = 2**30

DISTRIBUTIONS = ("uniform", "lognormal", "clustered")


class KeysetFormatError(ValueError):
    """Raised for malformed keyset files (duplicates, bad lines, bad values)."""


class KeyNotFoundError(KeyError):
    """Raised when a queried key is not a member of the keyset."""

    def __init__(self, key: int, probes: int = 0):
        super().__init__(key)
        self.key = key
        self.probes = probes

    def __str__(self) -> str:
        return f"key {self.key} not found"


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a synthetic keyset: n distinct keys drawn from [0, universe_max)."""

    n: int
    distribution: str = "uniform"
    seed: int = 0
    universe_max: int = DEFAULT_UNIVERSE_MAX

    def validate(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}, "
                             f"expected one of {DISTRIBUTIONS}")
        if self.n <= 0:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.universe_max <= 0:
            raise ValueError(f"universe_max must be positive, got {self.universe_max}")
        if self.n > self.universe_max:
            raise ValueError(
                f"cannot draw {self.n} distinct keys from a universe of size "
                f"{self.universe_max}")


class RankedKeySet:
    """Strictly ascending non-negative integer keys with 1-based ranks.

    Immutable after construction; the backing array is read-only and safe to
    share across concurrent readers.
    """

    def __init__(self, keys, universe_max: int = DEFAULT_UNIVERSE_MAX):
        arr = np.asarray(keys, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("keyset must be a nonempty 1-d sequence of keys")
        if arr[0] < 0:
            raise ValueError(f"keys must be non-negative, got {arr[0]}")
        if np.any(arr[1:] <= arr[:-1]):
            bad = int(np.argmax(arr[1:] <= arr[:-1]))
            raise ValueError(
                f"keys must be strictly ascending; violation at position {bad + 1} "
                f"({arr[bad]} then {arr[bad + 1]})")
        if arr[-1] >= universe_max:
            raise ValueError(
                f"key {arr[-1]} outside universe [0, {universe_max})")
        arr = arr.copy()
        arr.flags.writeable = False
        self.keys = arr
        self.universe_max = int(universe_max)

    @property
    def n(self) -> int:
        return len(self.keys)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: int) -> bool:
        i = bisect.bisect_left(self.keys, key)
        return i < len(self.keys) and self.keys[i] == key

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankedKeySet):
            return NotImplemented
        return (self.universe_max == other.universe_max
                and np.array_equal(self.keys, other.keys))

    def rank_of(self, key: int) -> int:
        """1-based position of `key`; raises KeyNotFoundError if absent."""
        if not 0 <= key < self.universe_max:
            raise ValueError(f"key {key} outside universe [0, {self.universe_max})")
        i = bisect.bisect_left(self.keys, key)
        if i == len(self.keys) or self.keys[i] != key:
            raise KeyNotFoundError(key)
        return i + 1

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(key, rank) training pairs for CDF regression, as float arrays."""
        x = self.keys.astype(np.float64)
        y = np.arange(1, len(self.keys) + 1, dtype=np.float64)
        return x, y


def rank_of(keyset: RankedKeySet, key: int) -> int:
    return keyset.rank_of(key)


def _draw_distinct(spec: DatasetSpec, draw_batch) -> np.ndarray:
    """Collect spec.n distinct in-universe keys from successive draw batches.

    Dedup order follows the raw random stream, so output is a pure function
    of (seed, spec).
    """
    seen: set[int] = set()
    stalled = 0
    while len(seen) < spec.n:
        before = len(seen)
        for v in draw_batch():
            v = int(v)
            if 0 <= v < spec.universe_max and v not in seen:
                seen.add(v)
                if len(seen) == spec.n:
                    break
        stalled = stalled + 1 if len(seen) == before else 0
        if stalled >= 1000:
            raise ValueError(
                f"generator stalled at {len(seen)}/{spec.n} distinct keys; "
                f"distribution {spec.distribution!r} cannot fill the request")
    return np.sort(np.fromiter(seen, dtype=np.int64, count=spec.n))


def generate(spec: DatasetSpec) -> RankedKeySet:
    """Deterministically generate a keyset per `spec`."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    m = spec.universe_max
    batch = max(2 * spec.n, 1024)

    if spec.distribution == "uniform":
        # Dense universes would make rejection sampling crawl; permute instead.
        if m <= 2**22 and spec.n > m // 2:
            keys = np.sort(rng.permutation(m)[:spec.n].astype(np.int64))
            return RankedKeySet(keys, m)
        draw = lambda: rng.integers(0, m, size=batch)
    elif spec.distribution == "lognormal":
        # Bulk of the mass sits well inside the universe; the thin upper tail
        # is rejected in _draw_distinct.
        sigma = 2.0
        mu = np.log(m) - 3.0 * sigma
        draw = lambda: np.floor(rng.lognormal(mu, sigma, size=batch)).astype(np.int64)

        if m <= 64:  # lognormal mass collapses onto tiny universes; fall back
            draw = lambda: rng.integers(0, m, size=batch)
    else:  # clustered
        n_clusters = min(10, spec.n)
        half_width = max(4 * spec.n // n_clusters, 64)
        centers = rng.integers(0, m, size=n_clusters)

        def draw():
            picks = centers[rng.integers(0, n_clusters, size=batch)]
            offsets = rng.integers(-half_width, half_width + 1, size=batch)
            return picks + offsets

        if m <= 4 * half_width:  # clusters already cover the whole universe
            draw = lambda: rng.integers(0, m, size=batch)

    return RankedKeySet(_draw_distinct(spec, draw), m)


def load_keyset(path, universe_max: int | None = None) -> RankedKeySet:
    """Load newline-delimited unsigned decimal keys; sorts, rejects duplicates."""
    keys = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                value = int(line)
            except ValueError:
                raise KeysetFormatError(
                    f"{path}:{lineno}: not an unsigned integer: {line!r}") from None
            if value < 0:
                raise KeysetFormatError(f"{path}:{lineno}: negative key {value}")
            keys.append(value)
    if not keys:
        raise KeysetFormatError(f"{path}: empty keyset file")
    keys.sort()
    for a, b in zip(keys, keys[1:]):
        if a == b:
            raise KeysetFormatError(f"{path}: duplicate key {a}")
    if universe_max is None:
        universe_max = max(DEFAULT_UNIVERSE_MAX, keys[-1] + 1)
    return RankedKeySet(np.asarray(keys, dtype=np.int64), universe_max)


def save_keyset(keyset: RankedKeySet, path) -> None:
    """Write keys in ascending order, one unsigned decimal per line."""
    Path(path).write_text(
        "\n".join(str(int(k)) for k in keyset.keys) + "\n", encoding="utf-8")
