"""Monte-Carlo replication harness.

Each replicate draws (or subsamples) training data, runs the staged
ML -> ridge -> Liu-type pipeline, aligns labels to the truth, and
records root-MSE for both coefficient blocks plus classification
accuracy on held-out data. Replicates are independent and seeded by
replicate index, so results do not depend on the parallelism width.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import PoismoeError
from .heart import load_heart_dataset
from .metrics import (ReplicationSummary, align_components,
                      classification_accuracy, sqrt_mse, summarize_replicates,
                      write_summary_csv)
from .model import (Coefficients, Dataset, MixtureSpec, SemOptions,
                    responsibilities)
from .pipeline import METHODS, fit_all_methods, fit_method
from .simulate import (SimulationDesign, VALIDATION_SIZE, design_from_dict,
                       design_to_dict, simulate_dataset)

BLOCKS = ("beta", "alpha", "accuracy")

__all__ = ["BLOCKS", "StudyConfig", "StudyResult", "default_study_options",
           "run_replication_study", "config_to_dict", "config_from_dict",
           "save_config", "load_config"]


def default_study_options() -> SemOptions:
    """Chain controls sized for replicated desk-scale studies."""
    return SemOptions(epsilon=1e-6, max_iters=120, burn_in=30, n_restarts=2)


def _truth_fit_options() -> SemOptions:
    return SemOptions(epsilon=1e-8, max_iters=300, burn_in=100, n_restarts=4)


@dataclass(frozen=True)
class StudyConfig:
    """Everything one replication study needs, serializable to JSON."""

    mode: str  # "simulation" | "heart"
    design: SimulationDesign | None = None
    validation_n: int = VALIDATION_SIZE
    heart_path: str | None = None
    train_n: int = 30
    test_n: int = 100
    n_components: int = 2
    reference_class: int = 0
    slope_encoding: str = "numeric"
    replicates: int = 1
    jobs: int = 1
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    sem: SemOptions = field(default_factory=default_study_options)
    truth_sem: SemOptions = field(default_factory=_truth_fit_options)
    output_dir: str | None = None
    plots: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("simulation", "heart"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "simulation" and self.design is None:
            raise ValueError("simulation mode needs a design")
        if self.mode == "heart" and self.heart_path is None:
            raise ValueError("heart mode needs a data path")
        if self.replicates < 1 or self.jobs < 1:
            raise ValueError("replicates and jobs must be positive")


@dataclass
class StudyResult:
    """Aggregated summaries plus per-replicate rows and artifact paths."""

    summaries: list[tuple[str, str, ReplicationSummary]]
    replicate_rows: list[dict]
    failure_fraction: float
    summary_path: Path | None = None
    replicates_path: Path | None = None

    def summary_for(self, method: str, block: str) -> ReplicationSummary:
        for m, b, summary in self.summaries:
            if m == method and b == block:
                return summary
        raise KeyError((method, block))


def _replicate_seed(seed: int, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(index, stream)))


def _fit_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index, 1))
               .generate_state(1, np.uint64)[0])


def _score_methods(result, methods, truth: Coefficients, n_train: int,
                   validation: Dataset, z_true: np.ndarray) -> dict:
    scores: dict[str, dict] = {}
    for method in methods:
        fit = result.fit_for(method)
        if fit is None:
            scores[method] = {"beta": np.nan, "alpha": np.nan,
                              "accuracy": np.nan,
                              "note": result.failures.get(method, "failed")}
            continue
        try:
            aligned = fit.psi_hat.permute(align_components(fit.psi_hat, truth))
            scores[method] = {
                "beta": sqrt_mse(aligned, truth, "beta", n_train),
                "alpha": sqrt_mse(aligned, truth, "alpha", n_train),
                "accuracy": classification_accuracy(aligned, validation,
                                                    z_true, truth),
                "note": "",
            }
        except PoismoeError as exc:
            scores[method] = {"beta": np.nan, "alpha": np.nan,
                              "accuracy": np.nan,
                              "note": f"scoring failed: {exc}"}
    return scores


def _simulation_replicate(args: tuple) -> dict:
    index, config = args
    design = config.design
    data_rng = _replicate_seed(config.seed, index, 0)
    train, _, n_resampled = simulate_dataset(design, data_rng)
    validation_design = replace(design, n=config.validation_n)
    validation, z_true, _ = simulate_dataset(validation_design, data_rng)
    spec = MixtureSpec(n_components=design.n_components,
                       reference_class=design.reference_class)
    opts = replace(config.sem, rng_seed=_fit_seed(config.seed, index))
    result = fit_all_methods(train, spec, opts, methods=config.methods,
                             raise_on_failure=False)
    scores = _score_methods(result, config.methods, design.truth(), design.n,
                            validation, z_true)
    return {"index": index, "scores": scores, "n_resampled": n_resampled}


def _heart_replicate(args: tuple) -> dict:
    index, config, arrays, psi_true = args
    y, X, Omega = arrays
    rng = _replicate_seed(config.seed, index, 0)
    order = rng.permutation(y.shape[0])
    train_idx = order[:config.train_n]
    test_idx = order[config.train_n:config.train_n + config.test_n]
    train = Dataset(y=y[train_idx], X=X[train_idx], Omega=Omega[train_idx])
    test = Dataset(y=y[test_idx], X=X[test_idx], Omega=Omega[test_idx])
    z_true = responsibilities(test, psi_true).argmax(axis=1)
    spec = MixtureSpec(n_components=psi_true.n_components,
                       reference_class=psi_true.reference_class)
    opts = replace(config.sem, rng_seed=_fit_seed(config.seed, index))
    result = fit_all_methods(train, spec, opts, methods=config.methods,
                             raise_on_failure=False)
    scores = _score_methods(result, config.methods, psi_true, config.train_n,
                            test, z_true)
    return {"index": index, "scores": scores, "n_resampled": 0}


def _run_tasks(worker, tasks: list, jobs: int) -> list[dict]:
    if jobs == 1:
        return [worker(task) for task in tasks]
    chunksize = max(1, len(tasks) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks, chunksize=chunksize))


def run_replication_study(config: StudyConfig) -> StudyResult:
    """Run all replicates, aggregate summaries, and write artifacts."""
    if config.mode == "simulation":
        tasks = [(index, config) for index in range(config.replicates)]
        results = _run_tasks(_simulation_replicate, tasks, config.jobs)
    else:
        full = load_heart_dataset(config.heart_path, config.slope_encoding)
        if config.train_n + config.test_n > full.n:
            raise ValueError("train_n + test_n exceeds the population size")
        spec = MixtureSpec(n_components=config.n_components,
                           reference_class=config.reference_class)
        truth_opts = replace(config.truth_sem,
                             rng_seed=_fit_seed(config.seed, 10**6))
        psi_true = fit_method(full, spec, truth_opts, "ml").psi_hat
        arrays = (np.asarray(full.y), np.asarray(full.X),
                  np.asarray(full.Omega))
        tasks = [(index, config, arrays, psi_true)
                 for index in range(config.replicates)]
        results = _run_tasks(_heart_replicate, tasks, config.jobs)

    results.sort(key=lambda row: row["index"])
    summaries: list[tuple[str, str, ReplicationSummary]] = []
    worst_failure = 0.0
    for method in config.methods:
        failed = sum(1 for row in results
                     if not np.isfinite(row["scores"][method]["beta"]))
        worst_failure = max(worst_failure, failed / config.replicates)
        for block in BLOCKS:
            values = [row["scores"][method][block] for row in results]
            summaries.append((method, block,
                              summarize_replicates(values, metric=block)))

    replicate_rows = []
    for row in results:
        for method in config.methods:
            score = row["scores"][method]
            replicate_rows.append({
                "replicate": row["index"], "method": method,
                "sqrt_mse_beta": score["beta"],
                "sqrt_mse_alpha": score["alpha"],
                "accuracy": score["accuracy"],
                "failed": int(not np.isfinite(score["beta"])),
                "note": score["note"],
            })

    summary_path = replicates_path = None
    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary_path = out / "summary.csv"
        write_summary_csv(summary_path, summaries)
        replicates_path = out / "replicates.csv"
        _write_replicate_csv(replicates_path, replicate_rows)
        if config.plots:
            _write_plots(out, config.methods, results)
    return StudyResult(summaries=summaries, replicate_rows=replicate_rows,
                       failure_fraction=worst_failure,
                       summary_path=summary_path,
                       replicates_path=replicates_path)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_replicate_csv(path: Path, rows: Iterable[dict]) -> None:
    columns = ["replicate", "method", "sqrt_mse_beta", "sqrt_mse_alpha",
               "accuracy", "failed", "note"]
    with path.open("w", newline="") as handle:
        handle.write(",".join(columns) + "\n")
        for row in rows:
            handle.write(",".join(_format_cell(row[c]) for c in columns) + "\n")


def _write_plots(out: Path, methods: tuple[str, ...], results: list[dict]) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - plots are optional
        raise RuntimeError("plot output requires matplotlib; "
                           "install the 'plots' extra") from exc
    for block in BLOCKS:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        data = []
        for method in methods:
            values = np.asarray([row["scores"][method][block]
                                 for row in results])
            data.append(values[np.isfinite(values)])
        ax.boxplot(data, tick_labels=list(methods), showfliers=False)
        ax.set_ylabel(block)
        fig.tight_layout()
        fig.savefig(out / f"{block}.svg")
        plt.close(fig)


def config_to_dict(config: StudyConfig) -> dict:
    payload = asdict(config)
    if config.design is not None:
        payload["design"] = design_to_dict(config.design)
    payload["methods"] = list(config.methods)
    return payload


def config_from_dict(payload: dict) -> StudyConfig:
    payload = dict(payload)
    if payload.get("design") is not None:
        payload["design"] = design_from_dict(payload["design"])
    if "methods" in payload:
        payload["methods"] = tuple(payload["methods"])
    for key in ("sem", "truth_sem"):
        if key in payload and isinstance(payload[key], dict):
            payload[key] = SemOptions(**payload[key])
    return StudyConfig(**payload)


def save_config(config: StudyConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2,
                                     sort_keys=True) + "\n")


def load_config(path: str | Path) -> StudyConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
