"""Linear CDF regressors: slope/intercept models fitted under different losses.

All fitters are deterministic pure functions of their input arrays and return
a LinearModel predicting rank from key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOSS_KINDS = ("mse", "mae", "logte", "dlogte", "maxabs")

# Loss each fitter optimizes (TheilSen and 2P are constructive, no criterion).
FITTER_CRITERION = {"slr": "mse", "lad": "mae", "logte": "logte", "dlogte": "dlogte"}

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

# LAD switches from exact two-point enumeration to IRLS above this size.
_LAD_EXHAUSTIVE_MAX = 512


class DegenerateFitError(ValueError):
    """Raised when the input admits no unique line (e.g. all keys equal)."""


@dataclass(frozen=True)
class LinearModel:
    """Rank prediction f(k) = a*k + b."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"model parameters must be finite, got ({self.a}, {self.b})")

    def predict(self, key) -> float:
        return self.a * key + self.b


def predict(model: LinearModel, key) -> float:
    """Raw position estimate a*k + b, unclamped."""
    return model.predict(key)


def _as_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise ValueError("expected two nonempty 1-d arrays of equal length")
    return x, y


def _residuals(model: LinearModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return model.a * x + model.b - y


def eval_loss(model: LinearModel, x, y, kind: str) -> float:
    """Mean loss of `model` on pairs (x, y).

    mse    mean squared residual
    mae    mean absolute residual
    logte  mean log2(|residual| + 1)
    dlogte mean ceil(log2(|residual| + 1))
    maxabs max |residual|
    """
    x, y = _as_xy(x, y)
    r = np.abs(_residuals(model, x, y))
    kind = kind.lower()
    if kind == "mse":
        return float(np.mean(r * r))
    if kind == "mae":
        return float(np.mean(r))
    if kind == "logte":
        return float(np.mean(np.log2(r + 1.0)))
    if kind == "dlogte":
        return float(np.mean(np.ceil(np.log2(r + 1.0))))
    if kind == "maxabs":
        return float(np.max(r))
    raise ValueError(f"unknown loss kind {kind!r}, expected one of {LOSS_KINDS}")


def _require_spread(x: np.ndarray, n_min: int = 2) -> None:
    if x.size < n_min:
        raise DegenerateFitError(f"need at least {n_min} pairs, got {x.size}")
    if np.min(x) == np.max(x):
        raise DegenerateFitError("all keys equal; slope is undefined")


def fit_slr(x, y) -> LinearModel:
    """Ordinary least squares via the centered closed form."""
    x, y = _as_xy(x, y)
    _require_spread(x)
    xm = float(np.mean(x))
    ym = float(np.mean(y))
    xc = x - xm
    sxx = float(np.dot(xc, xc))
    sxy = float(np.dot(xc, y - ym))
    a = sxy / sxx
    return LinearModel(a, ym - a * xm)


def fit_2p(x, y) -> LinearModel:
    """Line through the first and last pairs of the sequence."""
    x, y = _as_xy(x, y)
    if x.size < 2:
        raise DegenerateFitError("need at least 2 pairs")
    if x[0] == x[-1]:
        raise DegenerateFitError("first and last keys equal; slope is undefined")
    a = (y[-1] - y[0]) / (x[-1] - x[0])
    return LinearModel(float(a), float(y[0] - a * x[0]))


def fit_theilsen(x, y) -> LinearModel:
    """Median of all pairwise slopes; intercept is the median of y - a*x.

    Enumerates every i<j pair with distinct keys (no subsampling), so the
    result is exact and invariant under input reordering.
    """
    x, y = _as_xy(x, y)
    _require_spread(x)
    slopes = []
    for i in range(x.size - 1):
        dx = x[i + 1:] - x[i]
        dy = y[i + 1:] - y[i]
        keep = dx != 0
        if np.any(keep):
            slopes.append(dy[keep] / dx[keep])
    a = float(np.median(np.concatenate(slopes)))
    b = float(np.median(y - a * x))
    return LinearModel(a, b)


def _mae(a: float, b: float, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.abs(a * x + b - y)))


def _two_point_candidates(x, y, ii, jj, chunk: int = 4096):
    """Yield (a, b, loss) for the best line through any (ii[t], jj[t]) pair."""
    best = None
    for lo in range(0, ii.size, chunk):
        i = ii[lo:lo + chunk]
        j = jj[lo:lo + chunk]
        dx = x[j] - x[i]
        keep = dx != 0
        if not np.any(keep):
            continue
        i, j, dx = i[keep], j[keep], dx[keep]
        a = (y[j] - y[i]) / dx
        b = y[i] - a * x[i]
        losses = np.mean(np.abs(a[:, None] * x[None, :] + b[:, None] - y[None, :]),
                         axis=1)
        t = int(np.argmin(losses))
        if best is None or losses[t] < best[2]:
            best = (float(a[t]), float(b[t]), float(losses[t]))
    return best


def fit_lad(x, y) -> LinearModel:
    """Least absolute deviations.

    Exact two-point enumeration up to 512 pairs (an optimal LAD line passes
    through two sample points); IRLS plus a two-point polish over the 32
    smallest-residual anchors beyond that. Never worse than SLR on MAE.
    """
    x, y = _as_xy(x, y)
    _require_spread(x)
    n = x.size

    if n <= _LAD_EXHAUSTIVE_MAX:
        ii, jj = np.triu_indices(n, k=1)
        best = _two_point_candidates(x, y, ii, jj)
        if best is None:
            raise DegenerateFitError("all keys equal; slope is undefined")
        return LinearModel(best[0], best[1])

    slr = fit_slr(x, y)
    a, b = slr.a, slr.b
    for _ in range(100):
        w = 1.0 / np.maximum(np.abs(a * x + b - y), 1e-8)
        sw = float(np.sum(w))
        swx = float(np.dot(w, x))
        swxx = float(np.dot(w, x * x))
        swy = float(np.dot(w, y))
        swxy = float(np.dot(w, x * y))
        det = sw * swxx - swx * swx
        if det == 0.0:
            break
        a = (sw * swxy - swx * swy) / det
        b = (swxx * swy - swx * swxy) / det

    candidates = [(slr.a, slr.b, _mae(slr.a, slr.b, x, y)), (a, b, _mae(a, b, x, y))]
    anchors = np.argsort(np.abs(a * x + b - y), kind="stable")[:32]
    ii, jj = np.triu_indices(anchors.size, k=1)
    polished = _two_point_candidates(x, y, anchors[ii], anchors[jj])
    if polished is not None:
        candidates.append(polished)
    best = min(candidates, key=lambda c: c[2])
    return LinearModel(best[0], best[1])


def _bracket(f, t0: float, step: float) -> tuple[float, float]:
    """Expand around t0 until a minimum is bracketed."""
    fl, f0, fr = f(t0 - step), f(t0), f(t0 + step)
    if f0 <= fl and f0 <= fr:
        return t0 - step, t0 + step
    if fl < fr:
        sign, cur, fcur = -1.0, t0 - step, fl
    else:
        sign, cur, fcur = 1.0, t0 + step, fr
    prev = t0
    for _ in range(200):
        step *= 2.0
        nxt = cur + sign * step
        fn = f(nxt)
        if fn >= fcur:
            return min(prev, nxt), max(prev, nxt)
        prev, cur, fcur = cur, nxt, fn
    return min(prev, cur), max(prev, cur)


def _golden_min(f, t0: float, scale: float) -> float:
    """Deterministic 1-d minimization: bracket, then golden-section refine."""
    lo, hi = _bracket(f, t0, scale)
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(100):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
        if hi - lo <= 1e-12 * (abs(lo) + abs(hi)) + 1e-300:
            break
    return c if fc <= fd else d


def _coordinate_descent(x, y, kind: str, start: LinearModel) -> LinearModel:
    """Alternating golden-section line search on slope then offset.

    Works in centered coordinates (k - mean(k)) so the two directions are
    nearly independent and the descent does not stall on a diagonal valley.
    """
    xm = float(np.mean(x))
    xc = x - xm
    a = start.a
    c = start.b + start.a * xm  # offset at the centroid

    def loss_at(a_, c_):
        r = np.abs(a_ * xc + c_ - y)
        if kind == "logte":
            return float(np.mean(np.log2(r + 1.0)))
        return float(np.mean(np.ceil(np.log2(r + 1.0))))

    for _ in range(200):
        a_new = _golden_min(lambda t: loss_at(t, c), a, 1e-3 * max(abs(a), 1e-9))
        c_new = _golden_min(lambda t: loss_at(a_new, t), c, 1e-3 * max(abs(c), 1e-9))
        done = (abs(a_new - a) <= 1e-9 * max(1.0, abs(a))
                and abs(c_new - c) <= 1e-9 * max(1.0, abs(c)))
        a, c = a_new, c_new
        if done:
            break
    return LinearModel(a, c - a * xm)


def _fit_log_loss(x, y, kind: str) -> LinearModel:
    """Multi-start descent for the non-convex log losses.

    Starts from the SLR and 2P solutions; both starts stay in the candidate
    set, so the result is never worse than either under `kind`.
    """
    x, y = _as_xy(x, y)
    _require_spread(x)
    starts = [fit_slr(x, y)]
    try:
        starts.append(fit_2p(x, y))
    except DegenerateFitError:
        pass  # unsorted input can repeat the endpoint key; SLR start suffices
    candidates = list(starts) + [_coordinate_descent(x, y, kind, s) for s in starts]
    best = candidates[0]
    best_loss = eval_loss(best, x, y, kind)
    for cand in candidates[1:]:
        loss = eval_loss(cand, x, y, kind)
        if loss < best_loss:
            best, best_loss = cand, loss
    return best


def fit_logte(x, y) -> LinearModel:
    """Minimize mean log2(|residual| + 1), the log-scaled search-cost loss."""
    return _fit_log_loss(x, y, "logte")


def fit_dlogte(x, y) -> LinearModel:
    """Minimize the ceiling-discretized variant of the logte loss."""
    return _fit_log_loss(x, y, "dlogte")


FITTERS = {
    "slr": fit_slr,
    "lad": fit_lad,
    "theilsen": fit_theilsen,
    "2p": fit_2p,
    "logte": fit_logte,
    "dlogte": fit_dlogte,
}
