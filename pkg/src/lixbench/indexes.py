"""Lookup structures over a ranked keyset, each with a countable probe cost.

Three families: a single-model regression index (one fitter, max-error search
window), a piecewise-linear index with a per-segment error bound, and a
gapped-array index whose empty slots absorb model error. Probes count key
comparisons and slot inspections after the model prediction, a deterministic,
hardware-independent cost proxy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .keyset import KeyNotFoundError, RankedKeySet
from .regressors import FITTERS, DegenerateFitError, LinearModel, fit_slr

INDEX_NAMES = ("slr", "lad", "theilsen", "2p", "logte", "dlogte", "alex", "pgm")

DEFAULT_EPSILON = 16
DEFAULT_DENSITY = 0.7

_GROW_RETRIES = 16


@dataclass(frozen=True)
class LookupOutcome:
    rank: int
    probes: int


@dataclass(frozen=True)
class Segment:
    first_key: int
    model: LinearModel
    start_rank: int


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _window_search(keys, key: int, lo: int, hi: int) -> tuple[int | None, int]:
    """Counted binary search over keys[lo..hi]; returns (index, probes)."""
    probes = 0
    while lo <= hi:
        mid = (lo + hi) // 2
        probes += 1
        v = keys[mid]
        if v == key:
            return mid, probes
        if v < key:
            lo = mid + 1
        else:
            hi = mid - 1
    return None, probes


class RegressionIndex:
    """Single linear model plus a binary search over its max-error window."""

    def __init__(self, keyset: RankedKeySet, fitter_name: str):
        name = fitter_name.lower()
        if name not in FITTERS:
            raise ValueError(f"unknown fitter {fitter_name!r}, "
                             f"expected one of {tuple(FITTERS)}")
        x, y = keyset.pairs()
        self.model = FITTERS[name](x, y)
        self.keys = keyset.keys
        self.fitter_name = name
        self.max_abs_error = int(math.ceil(float(
            np.max(np.abs(self.model.a * x + self.model.b - y)))))

    def lookup(self, key: int) -> LookupOutcome:
        n = len(self.keys)
        center = min(max(_round_half_up(self.model.predict(key)), 1), n)
        lo = max(1, center - self.max_abs_error)
        hi = min(n, center + self.max_abs_error)
        idx, probes = _window_search(self.keys, key, lo - 1, hi - 1)
        if idx is None:
            raise KeyNotFoundError(key, probes)
        return LookupOutcome(idx + 1, probes)


class PgmIndex:
    """Piecewise-linear index: greedy maximal segments with error bound epsilon.

    Built by a single shrinking-cone scan: a segment keeps absorbing keys while
    some slope through its first point predicts every absorbed rank within
    epsilon; the emitted model takes the final cone's center slope.
    """

    def __init__(self, keyset: RankedKeySet, epsilon: int = DEFAULT_EPSILON):
        if epsilon < 1:
            raise ValueError(f"epsilon must be >= 1, got {epsilon}")
        self.epsilon = int(epsilon)
        self.keys = keyset.keys
        self.segments = self._build_segments(keyset, self.epsilon)
        self._first_keys = [s.first_key for s in self.segments]

    @staticmethod
    def _build_segments(keyset: RankedKeySet, eps: int) -> list[Segment]:
        keys = keyset.keys
        segments = []
        k0, r0 = float(keys[0]), 1.0
        lo, hi = -math.inf, math.inf

        def close() -> Segment:
            a = 0.0 if lo == -math.inf else (lo + hi) / 2.0
            return Segment(int(k0), LinearModel(a, r0 - a * k0), int(r0))

        for i in range(1, len(keys)):
            k, r = float(keys[i]), float(i + 1)
            dk = k - k0
            upper = (r + eps - r0) / dk
            lower = (r - eps - r0) / dk
            if lower > hi or upper < lo:
                segments.append(close())
                k0, r0 = k, r
                lo, hi = -math.inf, math.inf
            else:
                lo = max(lo, lower)
                hi = min(hi, upper)
        segments.append(close())
        return segments

    def lookup(self, key: int) -> LookupOutcome:
        probes = 0
        # rightmost segment whose first key is <= key
        lo, hi = 0, len(self.segments) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            probes += 1
            if self._first_keys[mid] <= key:
                lo = mid
            else:
                hi = mid - 1
        n = len(self.keys)
        center = min(max(_round_half_up(self.segments[lo].model.predict(key)), 1), n)
        wlo = max(1, center - self.epsilon)
        whi = min(n, center + self.epsilon)
        idx, wprobes = _window_search(self.keys, key, wlo - 1, whi - 1)
        probes += wprobes
        if idx is None:
            raise KeyNotFoundError(key, probes)
        return LookupOutcome(idx + 1, probes)


class GappedArrayIndex:
    """Model-addressed slot array with gaps (single bulk-loaded leaf).

    Keys are placed in ascending order at max(predicted slot, next free slot);
    the spare capacity lets a skewed model push keys right without losing the
    sorted-occupancy invariant. Lookups start at the predicted slot, which by
    construction never overshoots the key's true slot.
    """

    def __init__(self, keyset: RankedKeySet, density: float = DEFAULT_DENSITY):
        if not 0.5 < density <= 1.0:
            raise ValueError(f"density must be in (0.5, 1], got {density}")
        self.keys = keyset.keys
        self.density = float(density)
        n = len(self.keys)

        num_slots = math.ceil(n / density)
        for _ in range(_GROW_RETRIES + 1):
            model = self._fit_slot_model(keyset, num_slots)
            placed = self._place(model, num_slots)
            if placed is not None:
                break
            num_slots = max(num_slots + 1, math.ceil(num_slots * 1.1))
        else:
            raise RuntimeError(
                f"gapped-array placement failed after {_GROW_RETRIES} growth retries")

        self.model = model
        self.num_slots = num_slots
        self.slot_key = np.full(num_slots, -1, dtype=np.int64)
        self.slot_rank = np.zeros(num_slots, dtype=np.int64)
        self.slot_key[placed] = self.keys
        self.slot_rank[placed] = np.arange(1, n + 1)
        self.slot_key.flags.writeable = False
        self.slot_rank.flags.writeable = False

    @staticmethod
    def _fit_slot_model(keyset: RankedKeySet, num_slots: int) -> LinearModel:
        n = keyset.n
        if n == 1:
            return LinearModel(0.0, 0.0)
        x = keyset.keys.astype(np.float64)
        targets = np.arange(n, dtype=np.float64) * ((num_slots - 1) / (n - 1))
        return fit_slr(x, targets)

    def _place(self, model: LinearModel, num_slots: int) -> np.ndarray | None:
        preds = model.a * self.keys.astype(np.float64) + model.b
        placed = np.empty(len(self.keys), dtype=np.int64)
        last = -1
        for i, p in enumerate(preds):
            s = max(min(_round_half_up(p), num_slots - 1), 0)
            if s <= last:
                s = last + 1
            if s >= num_slots:
                return None
            placed[i] = s
            last = s
        return placed

    def _predicted_slot(self, key: int) -> int:
        return max(min(_round_half_up(self.model.predict(key)), self.num_slots - 1), 0)

    def lookup(self, key: int) -> LookupOutcome:
        probes = 0
        slot = self._predicted_slot(key)
        # scan over gaps to the first occupied slot at or right of the prediction
        while slot < self.num_slots and self.slot_key[slot] < 0:
            probes += 1
            slot += 1
        if slot == self.num_slots:
            raise KeyNotFoundError(key, probes)
        probes += 1
        anchor_key = self.slot_key[slot]
        if anchor_key == key:
            return LookupOutcome(int(self.slot_rank[slot]), probes)
        if anchor_key > key:
            # placement guarantees a key never sits left of its prediction
            raise KeyNotFoundError(key, probes)

        n = len(self.keys)
        base = int(self.slot_rank[slot]) - 1  # 0-based index of the anchor key
        lo, hi = base + 1, n - 1
        step = 1
        while True:
            idx = base + step
            if idx > n - 1:
                break
            probes += 1
            v = self.keys[idx]
            if v == key:
                return LookupOutcome(idx + 1, probes)
            if v < key:
                lo = idx + 1
                step *= 2
            else:
                hi = idx - 1
                break
        idx, wprobes = _window_search(self.keys, key, lo, hi)
        probes += wprobes
        if idx is None:
            raise KeyNotFoundError(key, probes)
        return LookupOutcome(idx + 1, probes)


def build_regression_index(keyset: RankedKeySet, fitter_name: str) -> RegressionIndex:
    return RegressionIndex(keyset, fitter_name)


def regression_lookup(index: RegressionIndex, key: int) -> LookupOutcome:
    return index.lookup(key)


def build_pgm(keyset: RankedKeySet, epsilon: int = DEFAULT_EPSILON) -> PgmIndex:
    return PgmIndex(keyset, epsilon)


def pgm_lookup(index: PgmIndex, key: int) -> LookupOutcome:
    return index.lookup(key)


def build_alex(keyset: RankedKeySet, density: float = DEFAULT_DENSITY) -> GappedArrayIndex:
    return GappedArrayIndex(keyset, density)


def alex_lookup(index: GappedArrayIndex, key: int) -> LookupOutcome:
    return index.lookup(key)


def build_index(name: str, keyset: RankedKeySet,
                epsilon: int = DEFAULT_EPSILON,
                density: float = DEFAULT_DENSITY):
    """Build any benchmark index by its short name."""
    name = name.lower()
    if name == "pgm":
        return PgmIndex(keyset, epsilon)
    if name == "alex":
        return GappedArrayIndex(keyset, density)
    if name in FITTERS:
        return RegressionIndex(keyset, name)
    raise ValueError(f"unknown index {name!r}, expected one of {INDEX_NAMES}")
