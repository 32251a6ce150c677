"""Comparison sweeps: for each (p_dep, N_S, n_aux) cell and repeat,
generate a dataset, train the NDO, fit the MaxLik baseline, and record
both fidelities against the exact target.

Seed derivation (documented contract): a sweep row uses

    row_seed = base_seed + repeat + 10007 * (cell_index + 1)

with cells enumerated in grid order (p_dep outer, then N_S, then
n_aux). Within a row, generation / training / baseline use row_seed,
row_seed + 1, row_seed + 2. Rows are therefore individually
re-runnable.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datagen import MeasurementProtocol, nine_bases, sample_dataset
from .maxlik import maxlik_fit
from .model import materialize
from .qcore import DensityMatrix, canonical_state, depolarize, fidelity
from .training import TrainConfig, train

SWEEP_CSV_HEADER = "# ndotomo sweep v1"
CSV_COLUMNS = [
    "p_dep", "n_s", "n_aux", "repeat", "seed",
    "fidelity_ndo", "fidelity_maxlik", "nll_best",
    "fidelity_ndo_std", "fidelity_maxlik_std",
]

CELL_SEED_STRIDE = 10007

# sweep epochs target a fixed optimization-step budget per run
AUTO_UPDATE_TARGET = 180_000
AUTO_EPOCHS_MIN = 10
AUTO_EPOCHS_MAX = 300


def auto_epochs(n_records: int, batch_size: int) -> int:
    batches = max(1, math.ceil(n_records / batch_size))
    return max(AUTO_EPOCHS_MIN, min(AUTO_EPOCHS_MAX,
                                    math.ceil(AUTO_UPDATE_TARGET / batches)))


def row_seed(base_seed: int, cell_index: int, repeat: int) -> int:
    return base_seed + repeat + CELL_SEED_STRIDE * (cell_index + 1)


@dataclass(frozen=True)
class SweepTask:
    p_dep: float
    n_s: int
    n_aux: int
    cell_index: int
    repeat: int
    base_seed: int
    target_name: str = "bell_phi_plus"
    n_hidden: int = 1
    batch_size: int = 10
    epochs: int = 0  # 0 = auto


@dataclass
class SweepRow:
    task: SweepTask
    seed: int
    fidelity_ndo: float
    fidelity_maxlik: float
    nll_best: float
    error: str = ""


def run_task(task: SweepTask) -> SweepRow:
    seed = row_seed(task.base_seed, task.cell_index, task.repeat)
    try:
        target = depolarize(canonical_state(task.target_name), task.p_dep)
        protocol = MeasurementProtocol(tuple(nine_bases()), task.n_s, seed=seed)
        dataset = sample_dataset(target, protocol)
        epochs = task.epochs or auto_epochs(dataset.n_records, task.batch_size)
        config = TrainConfig(
            n_hidden=task.n_hidden,
            n_aux=task.n_aux,
            epochs=epochs,
            batch_size=task.batch_size,
            seed=seed + 1,
        )
        report = train(dataset, config)
        fid_ndo = fidelity(target, materialize(report.best_params))
        baseline = maxlik_fit(dataset, seed=seed + 2)
        fid_ml = fidelity(target, baseline.rho)
        return SweepRow(task, seed, fid_ndo, fid_ml, report.best_nll)
    except Exception as err:  # a failed cell must not kill the sweep
        return SweepRow(task, seed, float("nan"), float("nan"), float("nan"),
                        error=f"{type(err).__name__}: {err}")


def build_tasks(p_dep_list, ns_list, n_aux_list, repeats, base_seed,
                n_hidden=1, batch_size=10, epochs=0,
                target_name="bell_phi_plus"):
    tasks = []
    cell_index = 0
    for p in p_dep_list:
        for ns in ns_list:
            for na in n_aux_list:
                for rep in range(repeats):
                    tasks.append(SweepTask(
                        p_dep=p, n_s=ns, n_aux=na,
                        cell_index=cell_index, repeat=rep,
                        base_seed=base_seed, target_name=target_name,
                        n_hidden=n_hidden, batch_size=batch_size,
                        epochs=epochs,
                    ))
                cell_index += 1
    return tasks


def default_jobs() -> int:
    env = os.environ.get("NDOTOMO_JOBS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def run_sweep(tasks, jobs: int = 1) -> list:
    """Execute tasks (concurrently up to ``jobs``); results come back in
    deterministic task order regardless of completion order."""
    if jobs <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_task, tasks))


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.6f}"


def write_sweep_csv(rows, path) -> None:
    """Data rows per cell followed by one summary row carrying the cell
    mean and standard deviation of both fidelities."""
    cells: dict = {}
    for row in rows:
        cells.setdefault(row.task.cell_index, []).append(row)
    with open(path, "w", newline="") as fh:
        fh.write(SWEEP_CSV_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for cell_index in sorted(cells):
            cell_rows = sorted(cells[cell_index], key=lambda r: r.task.repeat)
            for row in cell_rows:
                writer.writerow([
                    _fmt(row.task.p_dep), row.task.n_s, row.task.n_aux,
                    row.task.repeat, row.seed,
                    _fmt(row.fidelity_ndo), _fmt(row.fidelity_maxlik),
                    _fmt(row.nll_best), "", "",
                ])
            ok = [r for r in cell_rows if not r.error]
            if ok:
                f_ndo = np.array([r.fidelity_ndo for r in ok])
                f_ml = np.array([r.fidelity_maxlik for r in ok])
                nlls = np.array([r.nll_best for r in ok])
                task = cell_rows[0].task
                writer.writerow([
                    _fmt(task.p_dep), task.n_s, task.n_aux, "summary", "",
                    _fmt(f_ndo.mean()), _fmt(f_ml.mean()), _fmt(nlls.mean()),
                    _fmt(f_ndo.std()), _fmt(f_ml.std()),
                ])


def read_sweep_csv(path):
    """Strict reader: returns (data_rows, summary_rows) as dict lists."""
    data, summaries = [], []
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != SWEEP_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {first!r}")
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for rec in reader:
            (summaries if rec["repeat"] == "summary" else data).append(rec)
    return data, summaries
