"""Experiments, baselines, metrics, significance tests and file outputs.

Records are sorted on (algorithm, function, run) before any reduction, so
reports do not depend on execution order.  Wall times are the only
non-reproducible quantity; they are kept out of the CSV files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from rlde import bbob, ela
from rlde.de import CANONICAL_DE, DEConfig, RunResult, TrajectoryRecorder, as_generator, run_de
from rlde.errors import ConfigurationError
from rlde.meta_train import TrainedAgent, design_for

ACCURACY = 1e-8
N_CHECKPOINTS = 50
SIGNIFICANCE = 0.05
SIGMA_FLOOR = 1e-12
# exp() of a Z-sum beyond this would overflow; such cells are clipped and flagged
MAX_EXPONENT = 700.0
EXACT_LIMIT = 20


def checkpoint_schedule(max_fes: int, n: int = N_CHECKPOINTS) -> list[int]:
    """``n`` log-spaced FE marks in ``[1, max_fes]`` (duplicates after rounding dropped)."""
    if max_fes < 1:
        return []
    marks = np.unique(np.round(np.logspace(0, math.log10(max_fes), n)).astype(int))
    return [int(m) for m in marks if 1 <= m <= max_fes]


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    algorithm: str
    function_id: int
    run: int
    v_obj: float
    v_fes: int
    v_time: float
    trajectory: list
    seed: int = 0
    ela_fes: int = 0
    provenance: str = ""

    @property
    def key(self):
        return (self.algorithm, self.function_id, self.run)


def fes_to_accuracy(trajectory: Sequence[tuple[int, float]], threshold: float = ACCURACY, max_fes: int | None = None) -> int:
    """First checkpoint FE with ``gap <= threshold``; the budget (or last FE) if never."""
    if not trajectory:
        raise ValueError("empty trajectory")
    for fes, g in trajectory:
        if g <= threshold:
            return int(fes)
    return int(max_fes if max_fes is not None else trajectory[-1][0])


# ---------------------------------------------------------------------------
# algorithms
# ---------------------------------------------------------------------------


def baseline_random_search(instance: bbob.ProblemInstance, max_fes: int, rng, checkpoint_fes=(), hit_test=None, chunk: int = 4096) -> RunResult:
    """Uniform sampling over the box, ``max_fes`` points evaluated in fixed-size chunks."""
    rng = as_generator(rng)
    if max_fes < 1:
        raise ConfigurationError("random search needs max_fes >= 1")
    t0 = time.perf_counter()
    rec = TrajectoryRecorder(checkpoint_fes, max_fes, hit_test)
    done = 0
    while done < max_fes:
        n = min(chunk, max_fes - done)
        X = rng.uniform(instance.lower, instance.upper, size=(n, instance.dimension))
        rec.observe(X, bbob.evaluate_batch(instance, X))
        done += n
    return RunResult(
        best_f=rec.best_f,
        best_x=rec.best_x,
        trajectory=rec.finish(),
        fes_used=done,
        wall_time=time.perf_counter() - t0,
        hit_fes=rec.hit_fes,
    )


def baseline_canonical_de(instance, max_fes: int, rng, checkpoint_fes=(), hit_test=None) -> RunResult:
    return run_de(CANONICAL_DE, instance, max_fes, checkpoint_fes, rng, hit_test)


@dataclass
class Algorithm:
    """A named optimizer: ``solve(instance, max_fes, rng, ela_rng, checkpoints, hit_test)``.

    ``solve`` returns the run result and the number of separately budgeted
    landscape-analysis evaluations.
    """

    name: str
    solve: Callable
    provenance: str = ""


def random_search_algorithm() -> Algorithm:
    return Algorithm("random_search", lambda inst, fes, rng, erng, cp, hit: (baseline_random_search(inst, fes, rng, cp, hit), 0))


def canonical_de_algorithm() -> Algorithm:
    return Algorithm("canonical_de", lambda inst, fes, rng, erng, cp, hit: (baseline_canonical_de(inst, fes, rng, cp, hit), 0))


def fixed_de_algorithm(config: DEConfig, name: str = "de") -> Algorithm:
    return Algorithm(name, lambda inst, fes, rng, erng, cp, hit: (run_de(config, inst, fes, cp, rng, hit), 0))


def rlde_algorithm(agent: TrainedAgent, provenance: str = "", name: str = "rlde") -> Algorithm:
    def solve(inst, fes, rng, erng, cp, hit):
        config = design_for(agent, inst, erng)
        return run_de(config, inst, fes, cp, rng, hit), ela.SAMPLE_FACTOR * inst.dimension

    return Algorithm(name, solve, provenance)


BUILTIN = {"random_search": random_search_algorithm, "canonical_de": canonical_de_algorithm}


def resolve_algorithms(names: Iterable[str], agent: TrainedAgent | None = None, provenance: str = "") -> list[Algorithm]:
    valid = sorted(list(BUILTIN) + ["rlde"])
    out = []
    for name in names:
        if name in BUILTIN:
            out.append(BUILTIN[name]())
        elif name == "rlde":
            if agent is None:
                raise ConfigurationError("algorithm 'rlde' needs a trained checkpoint")
            out.append(rlde_algorithm(agent, provenance))
        else:
            raise ConfigurationError(f"unknown algorithm {name!r}; valid names: {valid}")
    return out


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_seed(seed: int, function_id: int, run: int) -> np.random.SeedSequence:
    """Per-cell seed, shared across algorithms so they see the same streams."""
    return np.random.SeedSequence(seed, spawn_key=(int(function_id), int(run)))


def run_experiment(
    algorithms: Sequence[Algorithm],
    suite_ids: Sequence[int],
    dimension: int,
    runs: int,
    max_fes: int,
    seed: int = 0,
    instance_seed_of: Callable[[int], int] = lambda fid: fid,
    progress: Callable[[RunRecord], None] | None = None,
) -> list[RunRecord]:
    if runs < 1:
        raise ConfigurationError("runs must be >= 1")
    if not algorithms:
        raise ConfigurationError("no algorithms given")
    names = [a.name for a in algorithms]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate algorithm names {names}")
    checkpoints = checkpoint_schedule(max_fes)
    records = []
    for fid in sorted(suite_ids):
        inst = bbob.make_instance(fid, dimension, instance_seed_of(fid))

        def hit(f, _inst=inst):
            return f - _inst.f_opt <= ACCURACY

        for run in range(runs):
            ss = run_seed(seed, fid, run)
            de_ss, ela_ss = ss.spawn(2)
            for alg in algorithms:
                res, ela_fes = alg.solve(
                    inst, max_fes, np.random.default_rng(de_ss), np.random.default_rng(ela_ss), checkpoints, hit
                )
                traj = [(int(c), bbob.gap(inst, v)) for c, v in res.trajectory]
                rec = RunRecord(
                    algorithm=alg.name,
                    function_id=fid,
                    run=run,
                    v_obj=bbob.gap(inst, res.best_f),
                    v_fes=int(res.hit_fes) if res.hit_fes is not None else int(max_fes),
                    v_time=res.wall_time,
                    trajectory=traj,
                    seed=int(ss.generate_state(1, dtype=np.uint64)[0]),
                    ela_fes=ela_fes,
                    provenance=alg.provenance,
                )
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return sort_records(records)


def sort_records(records: Iterable[RunRecord]) -> list[RunRecord]:
    return sorted(records, key=lambda r: r.key)


def _group(records, attr: str):
    out: dict = {}
    for r in sort_records(records):
        out.setdefault((r.algorithm, r.function_id), []).append(getattr(r, attr))
    return {k: np.array(v, dtype=float) for k, v in out.items()}


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class AeiResult:
    values: dict
    floored: list = field(default_factory=list)  # (algorithm, function, metric) with sigma floored
    clipped: list = field(default_factory=list)  # (algorithm, function) with the exponent clipped


def aei(records: Sequence[RunRecord], baseline_name: str, literal: bool = False) -> AeiResult:
    """Aggregated evaluation indicator per algorithm.

    Default: ``Z = (mean_baseline - mean_algorithm) / sigma_baseline`` for each
    of obj/fes/time, so lower raw values raise the score and the baseline
    scores exactly 1.  ``literal=True`` uses the uncentred
    ``mean(v) / sigma`` form with each algorithm's own sigma.
    """
    algorithms = sorted({r.algorithm for r in records})
    if baseline_name not in algorithms:
        raise ConfigurationError(f"baseline {baseline_name!r} not in records {algorithms}")
    functions = sorted({r.function_id for r in records if r.algorithm == baseline_name})
    metrics = {m: _group(records, a) for m, a in (("obj", "v_obj"), ("fes", "v_fes"), ("time", "v_time"))}
    out = AeiResult({})
    for alg in algorithms:
        terms = []
        for k in functions:
            z_sum = 0.0
            for m, table in metrics.items():
                if (alg, k) not in table:
                    raise ConfigurationError(f"{alg} has no records on function {k}")
                v = table[(alg, k)]
                if literal:
                    sigma = float(np.std(v))
                    if sigma < SIGMA_FLOOR:
                        sigma = SIGMA_FLOOR
                        out.floored.append((alg, k, m))
                    z = float(np.mean(v / sigma))
                else:
                    base = table[(baseline_name, k)]
                    sigma = float(np.std(base))
                    if sigma < SIGMA_FLOOR:
                        sigma = SIGMA_FLOOR
                        if alg == baseline_name:
                            out.floored.append((baseline_name, k, m))
                    z = (float(np.mean(base)) - float(np.mean(v))) / sigma
                z_sum += z
            if z_sum > MAX_EXPONENT:
                out.clipped.append((alg, k))
                z_sum = MAX_EXPONENT
            terms.append(math.exp(z_sum))
        out.values[alg] = float(np.mean(terms))
    return out


def midranks(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_v = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_ranksum(sample_a, sample_b, method: str = "auto") -> tuple[float, float]:
    """Rank-sum statistic of ``sample_a`` and its two-sided p-value.

    ``method="normal"``: normal approximation with tie-corrected variance and
    continuity correction.  ``"exact"``: permutation distribution of the
    midrank sum.  ``"auto"`` uses the exact form while ``n_a + n_b <= 20``.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("both samples need at least two values")
    n1, n2 = len(a), len(b)
    n = n1 + n2
    ranks = midranks(np.concatenate([a, b]))
    W = float(ranks[:n1].sum())
    if method == "auto":
        method = "exact" if n <= EXACT_LIMIT else "normal"
    if method == "exact":
        doubled = np.rint(2 * ranks).astype(int)
        return W, _exact_doubled(doubled, n1)
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    mu = n1 * (n + 1) / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    tie = float(np.sum(counts**3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return W, 1.0
    z = max(0.0, abs(W - mu) - 0.5) / math.sqrt(var)
    return W, float(min(1.0, math.erfc(z / math.sqrt(2.0))))


def _exact_doubled(doubled: np.ndarray, n1: int) -> float:
    """Two-sided permutation p-value of the first sample's (doubled) midrank sum.

    ``counts[k][s]`` counts k-subsets of the ranks seen so far with doubled sum s.
    """
    n = len(doubled)
    total = int(doubled.sum())
    counts = np.zeros((n1 + 1, total + 1))
    counts[0, 0] = 1.0
    for r in doubled:
        r = int(r)
        counts[1:, r:] = counts[1:, r:] + counts[:-1, : total + 1 - r]
    dist = counts[n1]
    mu2 = n1 * (n + 1)
    dev = np.abs(np.arange(total + 1) - mu2)
    obs = abs(int(doubled[:n1].sum()) - mu2)
    return float(min(1.0, dist[dev >= obs].sum() / dist.sum()))


def significance_mark(sample, reference, p: float | None = None, alpha: float = SIGNIFICANCE) -> str:
    """'+' if ``sample`` is significantly better (lower) than ``reference``, '-' if worse, else '='."""
    if p is None:
        _, p = wilcoxon_ranksum(sample, reference)
    if p > alpha:
        return "="
    ma, mb = float(np.mean(sample)), float(np.mean(reference))
    if ma != mb:
        return "+" if ma < mb else "-"
    W, _ = wilcoxon_ranksum(sample, reference, method="normal")
    mu = len(sample) * (len(sample) + len(reference) + 1) / 2.0
    if W == mu:
        return "="
    return "+" if W < mu else "-"


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class CellStats:
    mean: float
    std: float
    best: float
    worst: float
    median: float
    p_value: float | None = None
    mark: str = ""


@dataclass
class ComparisonReport:
    reference: str
    aei_baseline: str
    functions: list
    algorithms: list
    cells: dict  # (algorithm, function) -> CellStats
    aei: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "reference": self.reference,
            "aei_baseline": self.aei_baseline,
            "functions": self.functions,
            "algorithms": self.algorithms,
            "aei": self.aei,
            "cells": [
                {"algorithm": a, "function": f, **vars(self.cells[(a, f)])}
                for a in self.algorithms
                for f in self.functions
            ],
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """One row per algorithm: mean(std) and mark per function, then AEI."""
        head = ["algorithm"] + [f"f{f}" for f in self.functions] + ["AEI"]
        rows = [head]
        for a in self.algorithms:
            row = [a]
            for f in self.functions:
                c = self.cells[(a, f)]
                mark = f" {c.mark}" if c.mark else ""
                row.append(f"{c.mean:.3e}({c.std:.3e}){mark}")
            row.append(f"{self.aei[a]:.4g}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.append("")
        lines.append(f"marks versus {self.reference}: '+' better, '-' worse, '=' no significant difference (p > {SIGNIFICANCE})")
        lines.append(f"AEI relative to {self.aei_baseline}; runtime term uses wall time of the optimization loop")
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"


def build_report(records: Sequence[RunRecord], reference: str, aei_baseline: str | None = None) -> ComparisonReport:
    algorithms = sorted({r.algorithm for r in records})
    if reference not in algorithms:
        raise ConfigurationError(f"reference {reference!r} not in records {algorithms}")
    aei_baseline = aei_baseline or reference
    functions = sorted({r.function_id for r in records})
    obj = _group(records, "v_obj")
    cells = {}
    for a in algorithms:
        for f in functions:
            v = obj[(a, f)]
            c = CellStats(float(v.mean()), float(v.std()), float(v.min()), float(v.max()), float(np.median(v)))
            if a != reference:
                _, p = wilcoxon_ranksum(v, obj[(reference, f)])
                c.p_value = p
                c.mark = significance_mark(v, obj[(reference, f)], p)
            cells[(a, f)] = c
    res = aei(records, aei_baseline)
    notes = []
    if res.floored:
        notes.append("sigma floored at 1e-12 for: " + ", ".join(f"{a}/f{k}/{m}" for a, k, m in res.floored))
    if res.clipped:
        notes.append("AEI exponent clipped at 700 for: " + ", ".join(f"{a}/f{k}" for a, k in res.clipped))
    return ComparisonReport(reference, aei_baseline, functions, algorithms, cells, res.values, notes)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

RECORD_COLUMNS = ("algorithm", "function", "run", "seed", "v_obj", "v_fes", "ela_fes", "provenance")
TRAJECTORY_COLUMNS = ("algorithm", "function", "run", "fes", "gap")


def records_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in sort_records(records):
        w.writerow([r.algorithm, r.function_id, r.run, r.seed, repr(float(r.v_obj)), r.v_fes, r.ela_fes, r.provenance])
    return buf.getvalue()


def trajectories_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for r in sort_records(records):
        for fes, g in sorted(r.trajectory):
            w.writerow([r.algorithm, r.function_id, r.run, fes, repr(float(g))])
    return buf.getvalue()


def timings_json(records: Sequence[RunRecord]) -> str:
    rows = [{"algorithm": r.algorithm, "function": r.function_id, "run": r.run, "v_time": r.v_time} for r in sort_records(records)]
    return json.dumps(rows, indent=1)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export(records: Sequence[RunRecord], out_dir, report: ComparisonReport | None = None) -> dict:
    """Write records.csv, trajectories.csv, timings.json and, if given, report.{json,txt}."""
    out = Path(out_dir)
    paths = {
        "records": out / "records.csv",
        "trajectories": out / "trajectories.csv",
        "timings": out / "timings.json",
    }
    _write(paths["records"], records_csv(records))
    _write(paths["trajectories"], trajectories_csv(records))
    _write(paths["timings"], timings_json(records))
    if report is not None:
        paths["report_json"] = out / "report.json"
        paths["report_text"] = out / "report.txt"
        _write(paths["report_json"], report.to_json())
        _write(paths["report_text"], report.to_text())
    return paths


def load_records(records_path, trajectories_path=None, timings_path=None) -> list[RunRecord]:
    """Rebuild records from exported files; missing timings read as 0."""
    try:
        rows = list(csv.DictReader(io.StringIO(Path(records_path).read_text())))
        traj_rows = list(csv.DictReader(io.StringIO(Path(trajectories_path).read_text()))) if trajectories_path else []
        times = json.loads(Path(timings_path).read_text()) if timings_path else []
    except OSError as exc:
        raise OSError(f"cannot read {exc.filename}: {exc.strerror}") from exc
    missing = set(RECORD_COLUMNS) - set(rows[0] if rows else RECORD_COLUMNS)
    if missing:
        raise ConfigurationError(f"records file lacks columns {sorted(missing)}")
    trajs: dict = {}
    for t in traj_rows:
        trajs.setdefault((t["algorithm"], int(t["function"]), int(t["run"])), []).append((int(t["fes"]), float(t["gap"])))
    tmap = {(t["algorithm"], int(t["function"]), int(t["run"])): float(t["v_time"]) for t in times}
    out = []
    for r in rows:
        key = (r["algorithm"], int(r["function"]), int(r["run"]))
        out.append(
            RunRecord(
                algorithm=key[0],
                function_id=key[1],
                run=key[2],
                v_obj=float(r["v_obj"]),
                v_fes=int(r["v_fes"]),
                v_time=tmap.get(key, 0.0),
                trajectory=trajs.get(key, []),
                seed=int(r["seed"]),
                ela_fes=int(r["ela_fes"]),
                provenance=r["provenance"],
            )
        )
    return sort_records(out)
