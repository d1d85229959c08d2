"""Clean-vs-poisoned lookup measurement: workloads, deterioration ratios, CSV.

Wall-clock numbers are reported for fidelity but are hardware noise; the
reproducible cost metric is mean_probes, a pure function of (index, queries).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .indexes import DEFAULT_DENSITY, DEFAULT_EPSILON, INDEX_NAMES, build_index
from .keyset import DatasetSpec, RankedKeySet, generate
from .poisoning import PoisonConfig, PoisonResult, greedy_poison, poison_dataset

WORKLOAD_TARGETS = ("clean-keys", "poisoned-keys-union")

RESULTS_HEADER = "index,alpha,dataset,mean_lookup_ns,p50_ns,p99_ns,mean_probes,build_ms"
RATIOS_HEADER = "index,alpha,ratio_time,ratio_probes"


class LookupValidationError(RuntimeError):
    """An index returned a wrong rank; the whole record is invalid."""


@dataclass(frozen=True)
class WorkloadSpec:
    query_count: int = 1000
    repetitions: int = 3
    seed: int = 0
    target: str = "clean-keys"

    def validate(self) -> None:
        if self.query_count < 1:
            raise ValueError(f"query_count must be >= 1, got {self.query_count}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.target not in WORKLOAD_TARGETS:
            raise ValueError(f"unknown workload target {self.target!r}, "
                             f"expected one of {WORKLOAD_TARGETS}")


@dataclass(frozen=True)
class BenchRecord:
    index_name: str
    alpha: float
    dataset_tag: str
    mean_lookup_ns: float
    mean_probes: float
    p50_lookup_ns: float
    p99_lookup_ns: float
    build_ms: float


@dataclass(frozen=True)
class DeteriorationRow:
    index_name: str
    alpha: float
    ratio_time: float
    ratio_probes: float


def draw_queries(pool: RankedKeySet | np.ndarray, spec: WorkloadSpec) -> list[int]:
    """Seeded uniform draw (with replacement) from the pool keys."""
    keys = pool.keys if isinstance(pool, RankedKeySet) else np.asarray(pool)
    rng = np.random.default_rng(spec.seed)
    picks = keys[rng.integers(0, len(keys), size=spec.query_count)]
    return [int(k) for k in picks]


def run_workload(index, pool, spec: WorkloadSpec, *,
                 index_name: str = "", alpha: float = 0.0,
                 dataset_tag: str = "clean", build_ms: float = 0.0) -> BenchRecord:
    """Measure `index` on seeded queries drawn from `pool`.

    The first pass doubles as warm-up and correctness check: every query must
    resolve to its true rank in the index's key array or the record is
    rejected. Timed passes follow, then one instrumented pass for percentiles.
    """
    spec.validate()
    queries = draw_queries(pool, spec)

    probes_total = 0
    for q in queries:
        out = index.lookup(q)
        pos = int(np.searchsorted(index.keys, q))
        if pos >= len(index.keys) or index.keys[pos] != q or out.rank != pos + 1:
            raise LookupValidationError(
                f"{index_name or type(index).__name__}: lookup of key {q} returned "
                f"rank {out.rank}, expected {pos + 1}")
        probes_total += out.probes

    lookup = index.lookup  # keep the timed loop tight
    total_ns = 0
    for _ in range(spec.repetitions):
        t0 = time.perf_counter_ns()
        for q in queries:
            lookup(q)
        total_ns += time.perf_counter_ns() - t0

    per_query = np.empty(len(queries))
    for i, q in enumerate(queries):
        t0 = time.perf_counter_ns()
        lookup(q)
        per_query[i] = time.perf_counter_ns() - t0

    p50, p99 = np.percentile(per_query, [50.0, 99.0])
    return BenchRecord(
        index_name=index_name or type(index).__name__,
        alpha=alpha,
        dataset_tag=dataset_tag,
        mean_lookup_ns=total_ns / (spec.repetitions * len(queries)),
        mean_probes=probes_total / len(queries),
        p50_lookup_ns=float(p50),
        p99_lookup_ns=float(p99),
        build_ms=build_ms,
    )


def deterioration(clean: BenchRecord, poisoned: BenchRecord) -> DeteriorationRow:
    """Poisoned-over-clean cost ratios for one index at one alpha."""
    if clean.index_name != poisoned.index_name:
        raise ValueError(f"records disagree on index: "
                         f"{clean.index_name} vs {poisoned.index_name}")
    if clean.mean_lookup_ns == 0.0 or clean.mean_probes == 0.0:
        raise ValueError("degenerate clean workload: zero mean lookup cost")
    return DeteriorationRow(
        index_name=clean.index_name,
        alpha=poisoned.alpha,
        ratio_time=poisoned.mean_lookup_ns / clean.mean_lookup_ns,
        ratio_probes=poisoned.mean_probes / clean.mean_probes,
    )


def _timed_build(name: str, keyset: RankedKeySet, epsilon: int, density: float):
    t0 = time.perf_counter_ns()
    index = build_index(name, keyset, epsilon=epsilon, density=density)
    return index, (time.perf_counter_ns() - t0) / 1e6


def bench_pair(name: str, clean: RankedKeySet, poisoned: RankedKeySet,
               alpha: float, workload: WorkloadSpec, *,
               epsilon: int = DEFAULT_EPSILON,
               density: float = DEFAULT_DENSITY) -> tuple[BenchRecord, BenchRecord]:
    """Clean and poisoned records for one index at one poisoning level.

    Both runs query the same legitimate keys (unless the workload targets the
    union), so the ratio isolates model damage from keyset growth. When the
    poisoned keyset is identical to the clean one, the clean measurements are
    reused so the degenerate ratios come out exactly 1.
    """
    c_index, c_build = _timed_build(name, clean, epsilon, density)
    c_rec = run_workload(c_index, clean, workload, index_name=name, alpha=alpha,
                         dataset_tag="clean", build_ms=c_build)
    if poisoned == clean:
        return c_rec, replace(c_rec, dataset_tag="poisoned")
    p_index, p_build = _timed_build(name, poisoned, epsilon, density)
    pool = clean if workload.target == "clean-keys" else poisoned
    p_rec = run_workload(p_index, pool, workload, index_name=name, alpha=alpha,
                         dataset_tag="poisoned", build_ms=p_build)
    return c_rec, p_rec


def experiment_sweep(dataset_spec: DatasetSpec, alphas, index_names=INDEX_NAMES,
                     workload: WorkloadSpec | None = None, *,
                     strategy: str = "gap-endpoints-plus-midpoint",
                     epsilon: int = DEFAULT_EPSILON,
                     density: float = DEFAULT_DENSITY,
                     ) -> tuple[list[BenchRecord], list[DeteriorationRow],
                                dict[float, PoisonResult]]:
    """One fresh attack per alpha, every index built on clean and poisoned sets."""
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alphas must be nonempty")
    for a in alphas:
        if not 0.0 <= a <= 0.5:
            raise ValueError(f"alpha {a} outside [0, 0.5]")
    names = [n.lower() for n in index_names]
    for n in names:
        if n not in INDEX_NAMES:
            raise ValueError(f"unknown index {n!r}, expected one of {INDEX_NAMES}")
    workload = workload or WorkloadSpec()
    workload.validate()

    clean = generate(dataset_spec)
    records: list[BenchRecord] = []
    rows: list[DeteriorationRow] = []
    attacks: dict[float, PoisonResult] = {}
    for alpha in alphas:
        result = greedy_poison(clean, PoisonConfig(alpha=alpha, strategy=strategy))
        attacks[alpha] = result
        poisoned = poison_dataset(clean, result)
        for name in names:
            c_rec, p_rec = bench_pair(name, clean, poisoned, alpha, workload,
                                      epsilon=epsilon, density=density)
            records.extend([c_rec, p_rec])
            rows.append(deterioration(c_rec, p_rec))
    return records, rows, attacks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def write_results_csv(records, path) -> None:
    lines = [RESULTS_HEADER]
    for r in records:
        lines.append(",".join([
            r.index_name, _fmt(r.alpha), r.dataset_tag, _fmt(r.mean_lookup_ns),
            _fmt(r.p50_lookup_ns), _fmt(r.p99_lookup_ns), _fmt(r.mean_probes),
            _fmt(r.build_ms)]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_results_csv(path) -> list[BenchRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != RESULTS_HEADER:
        raise ValueError(f"{path}: not a results file (bad header)")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 8:
            raise ValueError(f"{path}: malformed row: {ln!r}")
        records.append(BenchRecord(
            index_name=parts[0], alpha=float(parts[1]), dataset_tag=parts[2],
            mean_lookup_ns=float(parts[3]), p50_lookup_ns=float(parts[4]),
            p99_lookup_ns=float(parts[5]), mean_probes=float(parts[6]),
            build_ms=float(parts[7])))
    return records


def ratios_from_records(records) -> list[DeteriorationRow]:
    """Pair clean/poisoned records per (index, alpha) and compute ratios."""
    by_cell: dict[tuple[str, float], dict[str, BenchRecord]] = {}
    order: list[tuple[str, float]] = []
    for r in records:
        cell = (r.index_name, r.alpha)
        if cell not in by_cell:
            by_cell[cell] = {}
            order.append(cell)
        by_cell[cell][r.dataset_tag] = r
    rows = []
    for cell in order:
        pair = by_cell[cell]
        if "clean" in pair and "poisoned" in pair:
            rows.append(deterioration(pair["clean"], pair["poisoned"]))
    return rows


def write_ratios_csv(rows, path) -> None:
    lines = [RATIOS_HEADER]
    for r in rows:
        lines.append(",".join([
            r.index_name, _fmt(r.alpha), _fmt(r.ratio_time), _fmt(r.ratio_probes)]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
