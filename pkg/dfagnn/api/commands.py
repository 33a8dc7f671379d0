"""
Experiment commands behind the CLI verbs.

Every command validates its configuration and loads the dataset before any
training starts, then hands per-seed jobs to the RunManager and writes its
CSVs in deterministic order under ``config.output_dir``.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from dfagnn.analysis.diagnostics import mean_confidence_interval
from dfagnn.api.protocol import (
    AGGREGATE_SEED, EPOCHS_FILE, SUMMARY_FILE, SummaryRow, aggregate_row, epochs_frame, summary_frame, write_csv,
)
from dfagnn.config import DATASET_STATS, ExperimentConfig
from dfagnn.core.graph import perturb
from dfagnn.core.numkit import STREAM_ATTACK, STREAM_SPLIT, derive_rng
from dfagnn.data.dataset import Dataset, Split, load_dataset, load_split, random_split, sparse_split
from dfagnn.errors import ConfigError
from dfagnn.pipeline.run_manager import JobOutcome, RunManager, TrainJob

logger = logging.getLogger(__name__)

# (name, use_error_generator, use_node_filter)
ABLATION_VARIANTS: Tuple[Tuple[str, bool, bool], ...] = (
    ("base", False, False),
    ("eg", True, False),
    ("eg_nf", True, True),
)
ALGORITHMS = ("bp", "dfa")


@dataclass
class CommandOutput:
    frames: Dict[str, pd.DataFrame] = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)


# --- 公共步骤 ---

def prepare_dataset(config: ExperimentConfig) -> Dataset:
    ds = load_dataset(config.dataset, normalize_features=config.normalize_features)
    expected = DATASET_STATS.get(Path(config.dataset).name.lower())
    if expected is not None:
        got = (ds.num_nodes, ds.graph.num_edges, ds.num_features, ds.num_classes)
        if got != expected[:4]:
            logger.warning("[DATA] %s differs from its reference statistics: got n,m,d,c=%s, expected %s",
                           ds.name, got, expected[:4])
    return ds


def make_split(config: ExperimentConfig, dataset: Dataset, seed: int) -> Split:
    """Fixed split file if named, otherwise a fresh split from the seed's split stream."""
    if config.split_name:
        return load_split(config.dataset, config.split_name, dataset.num_nodes)
    rng = derive_rng(seed, STREAM_SPLIT)
    try:
        if config.split_mode == "sparse20":
            return sparse_split(dataset.labels, config.per_class, config.val_size, rng)
        return random_split(dataset.num_nodes, config.split_fractions, rng)
    except ValueError as e:
        raise ConfigError(f"cannot build a {config.split_mode} split of {dataset.name}: {e}") from None


def attacked(dataset: Dataset, kind: Optional[str], rate: float, seed: int) -> Dataset:
    """Topology-only attack drawn from the seed's attack stream; rate 0 leaves the dataset as is."""
    if kind is None or rate == 0:
        return dataset
    return dataset.with_graph(perturb(dataset.graph, kind, rate, derive_rng(seed, STREAM_ATTACK)))


def _manager(config: ExperimentConfig, manager: Optional[RunManager]) -> RunManager:
    return manager if manager is not None else RunManager(workers=config.workers)


def _row(command: str, outcome: JobOutcome, dataset: Dataset) -> SummaryRow:
    r = outcome.result
    t = outcome.tags
    return SummaryRow(
        command=command, algorithm=r.algorithm, dataset=dataset.name, seed=outcome.seed,
        num_layers=r.params.num_layers, best_epoch=r.best_epoch, val_acc=r.best_val_acc, test_acc=r.test_acc,
        variant=t.get("variant", "default"), attack_kind=t.get("attack_kind") or "none",
        attack_rate=t.get("attack_rate", 0.0),
    )


def with_aggregates(rows: Sequence[SummaryRow]) -> List[SummaryRow]:
    """Per-run rows followed by one mean ± CI row per group, groups in first-seen order."""
    groups: Dict[Tuple, List[SummaryRow]] = {}
    for row in rows:
        key = (row.algorithm, row.variant, row.attack_kind, row.attack_rate, row.num_layers)
        groups.setdefault(key, []).append(row)
    out = list(rows)
    for members in groups.values():
        mean, half = mean_confidence_interval([m.test_acc for m in members])
        agg = aggregate_row(members, mean, half)
        out.append(agg)
        logger.info("[RESULT] %s %s variant=%s attack=%s@%.2f layers=%d: test %.4f ± %.4f over %d seed(s)",
                    agg.dataset, agg.algorithm, agg.variant, agg.attack_kind, agg.attack_rate,
                    agg.num_layers, mean, half, agg.runs)
    return out


def _comparison(rows: Sequence[SummaryRow], index: Sequence[str]) -> pd.DataFrame:
    """One line per ``index`` value with ``<algorithm>_mean`` / ``<algorithm>_ci95`` columns."""
    table: Dict[Tuple, Dict[str, Any]] = {}
    for row in rows:
        if row.seed != AGGREGATE_SEED:
            continue
        key = tuple(getattr(row, k) for k in index)
        line = table.setdefault(key, dict(zip(index, key)))
        line[f"{row.algorithm}_mean"] = row.test_acc
        line[f"{row.algorithm}_ci95"] = row.test_ci95
        line["runs"] = row.runs
    return pd.DataFrame(list(table.values()))


def _write_summary(command: str, config: ExperimentConfig, rows: List[SummaryRow], out: CommandOutput) -> None:
    frame = summary_frame(rows)
    out.frames["summary"] = frame
    out.files.append(write_csv(Path(config.output_dir) / SUMMARY_FILE, frame, config.provenance(command=command)))


def _write_epochs(command: str, config: ExperimentConfig, outcomes: Sequence[JobOutcome], out: CommandOutput) -> None:
    for o in outcomes:
        frame = epochs_frame(o.result.records)
        out.frames[f"epochs_seed{o.seed}"] = frame
        path = Path(config.output_dir) / EPOCHS_FILE.format(seed=o.seed)
        out.files.append(write_csv(path, frame, config.provenance(command=command, seed=o.seed)))


def _trainer_config(config: ExperimentConfig, algorithm: str, num_layers: Optional[int] = None, **dfa_overrides):
    if algorithm == "dfa":
        return config.dfa_config(num_layers, **dfa_overrides)
    return config.bp_config(num_layers)


# --- 命令 ---

def cmd_train(config: ExperimentConfig, manager: Optional[RunManager] = None) -> CommandOutput:
    """Train ``config.algorithm`` once per seed; per-epoch CSVs plus a summary with mean ± 95% CI."""
    config = config.resolved()
    trainer = _trainer_config(config, config.algorithm)
    dataset = prepare_dataset(config)
    jobs = []
    for seed in config.seeds:
        split = make_split(config, dataset, seed)
        ds = attacked(dataset, config.attack_kind, config.attack_rate, seed)
        jobs.append(TrainJob(ds, split, trainer, seed,
                             tags={"attack_kind": config.attack_kind, "attack_rate": config.attack_rate}))
    outcomes = _manager(config, manager).run(jobs, desc=f"train/{config.algorithm}")

    out = CommandOutput()
    _write_epochs("train", config, outcomes, out)
    _write_summary("train", config, with_aggregates([_row("train", o, dataset) for o in outcomes]), out)
    return out


def cmd_ablate(config: ExperimentConfig, manager: Optional[RunManager] = None) -> CommandOutput:
    """Run the base, EG and EG+NF variants of DFA on identical splits and seeds."""
    config = config.resolved()
    if config.algorithm != "dfa":
        raise ConfigError("ablate compares DFA variants; set algorithm to dfa")
    trainers = {name: config.dfa_config(use_error_generator=eg, use_node_filter=nf)
                for name, eg, nf in ABLATION_VARIANTS}
    dataset = prepare_dataset(config)
    jobs = []
    for seed in config.seeds:
        split = make_split(config, dataset, seed)
        for name, trainer in trainers.items():
            jobs.append(TrainJob(dataset, split, trainer, seed, tags={"variant": name}))
    outcomes = _manager(config, manager).run(jobs, desc="ablate")

    out = CommandOutput()
    rows = with_aggregates([_row("ablate", o, dataset) for o in outcomes])
    _write_summary("ablate", config, rows, out)

    table = _comparison(rows, ["variant"])
    table["delta_vs_base"] = table["dfa_mean"] - float(table.loc[table["variant"] == "base", "dfa_mean"].iloc[0])
    out.frames["ablation"] = table
    out.files.append(write_csv(Path(config.output_dir) / "ablation.csv", table, config.provenance(command="ablate")))
    return out


def cmd_attack(config: ExperimentConfig, manager: Optional[RunManager] = None) -> CommandOutput:
    """
    Random add/remove/flip attacks at each rate, BP and DFA side by side on
    sparse splits. Uses the first ``attack_seed_count`` seeds.
    """
    config = config.resolved()
    if config.split_mode != "sparse20":
        raise ConfigError("attack experiments use sparse supervision; set split_mode to sparse20")
    trainers = {algo: _trainer_config(config, algo) for algo in ALGORITHMS}
    dataset = prepare_dataset(config)
    seeds = config.seeds[:config.attack_seed_count]
    jobs = []
    for kind in config.attack_kinds:
        for rate in config.attack_rates:
            for seed in seeds:
                split = make_split(config, dataset, seed)
                ds = attacked(dataset, kind, rate, seed)
                for algo in ALGORITHMS:
                    jobs.append(TrainJob(ds, split, trainers[algo], seed,
                                         tags={"attack_kind": kind, "attack_rate": rate}))
    outcomes = _manager(config, manager).run(jobs, desc="attack")

    out = CommandOutput()
    rows = with_aggregates([_row("attack", o, dataset) for o in outcomes])
    _write_summary("attack", config, rows, out)
    grid = _comparison(rows, ["attack_kind", "attack_rate"])
    out.frames["attack"] = grid
    out.files.append(write_csv(Path(config.output_dir) / "attack.csv", grid, config.provenance(command="attack")))
    return out


def cmd_depth(config: ExperimentConfig, manager: Optional[RunManager] = None) -> CommandOutput:
    """BP and DFA at every depth in ``config.depths`` with the same seeds and splits."""
    config = config.resolved()
    trainers = {(algo, depth): _trainer_config(config, algo, depth) for depth in config.depths for algo in ALGORITHMS}
    dataset = prepare_dataset(config)
    jobs = []
    for seed in config.seeds:
        split = make_split(config, dataset, seed)
        for depth in config.depths:
            for algo in ALGORITHMS:
                jobs.append(TrainJob(dataset, split, trainers[(algo, depth)], seed))
    outcomes = _manager(config, manager).run(jobs, desc="depth")

    out = CommandOutput()
    rows = with_aggregates([_row("depth", o, dataset) for o in outcomes])
    _write_summary("depth", config, rows, out)
    table = _comparison(rows, ["num_layers"])
    out.frames["depth"] = table
    out.files.append(write_csv(Path(config.output_dir) / "depth.csv", table, config.provenance(command="depth")))
    return out


def cmd_align(config: ExperimentConfig, manager: Optional[RunManager] = None) -> CommandOutput:
    """DFA with alignment tracking: per-epoch angles, P/Q criteria and freeze stages."""
    config = config.resolved()
    if config.algorithm != "dfa":
        raise ConfigError("align tracks DFA feedback alignment; set algorithm to dfa")
    trainer = config.dfa_config(track_alignment=True)
    dataset = prepare_dataset(config)
    jobs = [TrainJob(dataset, make_split(config, dataset, seed), trainer, seed) for seed in config.seeds]
    outcomes = _manager(config, manager).run(jobs, desc="align")

    out = CommandOutput()
    _write_epochs("align", config, outcomes, out)
    _write_summary("align", config, with_aggregates([_row("align", o, dataset) for o in outcomes]), out)
    return out


COMMANDS = {
    "train": cmd_train,
    "ablate": cmd_ablate,
    "attack": cmd_attack,
    "depth": cmd_depth,
    "align": cmd_align,
}
