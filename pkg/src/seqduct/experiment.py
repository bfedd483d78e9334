"""Experiment orchestration: configs, manifests, and the four pipeline stages.

A training experiment is described by a small JSON config (task, variant,
attention, preset, seed, paths, optional overrides). Running it produces
per-run checkpoints and logs plus a manifest that records the resolved
config, dataset digests, and artifact paths, so the whole run can be
reproduced or audited from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, metrics, tasks, training
from .errors import ConfigError, DataError, DivergenceError
from .evaluation import ModelDecoder, evaluate_splits
from .model import Seq2SeqModel, load_checkpoint, save_checkpoint
from .tasks import parse_task, scaled_config
from .training import config_from_preset, select_best_run, train_model

MANIFEST_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

MANIFEST_NAME = "manifest.json"

_CONFIG_REQUIRED = ("schema_version", "task", "variant", "attention",
                    "preset", "seed", "data_dir", "out_dir")
_CONFIG_OVERRIDES = ("hidden", "embed", "learning_rate", "l2_decay", "clip_norm",
                     "max_epochs", "eval_interval", "batch_size", "runs")


@dataclass
class ExperimentConfig:
    task: str
    variant: str
    attention: bool
    preset: str
    seed: int
    data_dir: str
    out_dir: str
    overrides: dict = field(default_factory=dict)

    def experiment_id(self) -> str:
        attn = "attn" if self.attention else "noattn"
        return f"{self.task}_{self.variant}_{attn}_{self.preset}_s{self.seed}"

    def resolve(self) -> training.TrainConfig:
        preset = scaled_config(self.preset)
        config = config_from_preset(self.task, self.variant, self.attention,
                                    preset, self.seed)
        for key, value in self.overrides.items():
            setattr(config, key, value)
        config.validate()
        return config


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and validate a config file; unknown keys are errors."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    allowed = set(_CONFIG_REQUIRED) | set(_CONFIG_OVERRIDES)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(unknown)}")
    missing = sorted(set(_CONFIG_REQUIRED) - set(raw))
    if missing:
        raise ConfigError(f"{path}: missing config keys: {', '.join(missing)}")
    if raw["schema_version"] != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {raw['schema_version']!r}")
    if not isinstance(raw["attention"], bool):
        raise ConfigError(f"{path}: attention must be a JSON boolean")
    try:
        parse_task(raw["task"])
        scaled_config(raw["preset"])
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    overrides = {k: raw[k] for k in _CONFIG_OVERRIDES if k in raw}
    config = ExperimentConfig(
        task=raw["task"], variant=raw["variant"], attention=raw["attention"],
        preset=raw["preset"], seed=int(raw["seed"]),
        data_dir=str(raw["data_dir"]), out_dir=str(raw["out_dir"]),
        overrides=overrides,
    )
    config.resolve()
    return config


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_digests(data_dir) -> dict[str, str]:
    root = Path(data_dir)
    names = [f"{s}.tsv" for s in tasks.SPLIT_ORDER] + ["dataset.json"]
    digests = {}
    for name in names:
        path = root / name
        if not path.exists():
            raise DataError(f"{path}: dataset file not found")
        digests[name] = file_digest(path)
    return digests


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read manifest ({exc})") from None
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported manifest schema")
    return manifest


def verify_manifest_digests(manifest: dict, data_dir) -> None:
    current = dataset_digests(data_dir)
    if current != manifest["dataset_digests"]:
        raise DataError("dataset files do not match the digests in the manifest")


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


def run_generate(task_name: str, preset_name: str, seed: int, out_dir) -> list[Path]:
    task = parse_task(task_name)
    preset = scaled_config(preset_name)
    splits = tasks.generate_splits(task, seed, preset)
    return tasks.write_dataset(out_dir, task, seed, preset, splits)


def run_train_experiment(config: ExperimentConfig) -> Path:
    """Train all runs of one experiment; returns the manifest path.

    A run that diverges numerically is recorded as failed in the manifest
    and re-raised after the remaining runs finish, so partial results
    survive while the failure still reaches the caller.
    """
    splits, meta = tasks.load_dataset(config.data_dir)
    if meta["task"] != config.task:
        raise DataError(f"dataset in {config.data_dir} is for task {meta['task']!r}, "
                        f"config says {config.task!r}")
    train_config = config.resolve()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    runs = []
    failures: list[str] = []
    for run_index in range(train_config.runs):
        entry = {
            "run": run_index,
            "seed": config.seed,
            "spawn_key": [run_index],
            "status": "ok",
            "checkpoint": f"run{run_index}.npz",
            "run_log": f"run{run_index}.json",
            "error": None,
        }
        try:
            result = train_model(train_config, splits, run_index=run_index)
        except DivergenceError as exc:
            entry["status"] = "failed"
            entry["checkpoint"] = None
            entry["run_log"] = None
            entry["error"] = str(exc)
            failures.append(f"run {run_index}: {exc}")
            runs.append(entry)
            continue
        save_checkpoint(out_dir / entry["checkpoint"], result.model, config.seed,
                        metadata={
                            "task": config.task,
                            "preset": config.preset,
                            "run": run_index,
                            "stopping_reason": result.log.stopping_reason,
                            "best_epoch": result.log.best_epoch,
                            "epochs_used": result.log.epochs_used,
                        })
        with open(out_dir / entry["run_log"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(result.log.to_json())
        runs.append(entry)

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "experiment_id": config.experiment_id(),
        "tool_version": __version__,
        "config": {
            "task": config.task,
            "variant": config.variant,
            "attention": config.attention,
            "preset": config.preset,
            "seed": config.seed,
            "data_dir": str(config.data_dir),
            "out_dir": str(config.out_dir),
            "resolved": {k: getattr(train_config, k) for k in (
                "hidden", "embed", "learning_rate", "l2_decay", "clip_norm",
                "max_epochs", "eval_interval", "batch_size", "runs")},
        },
        "dataset_digests": dataset_digests(config.data_dir),
        "runs": runs,
        "result_csvs": [],
    }
    manifest_path = out_dir / MANIFEST_NAME
    write_manifest(manifest_path, manifest)
    if failures:
        raise DivergenceError("; ".join(failures))
    return manifest_path


def run_evaluate(checkpoint_path, data_dir, split_names, out_csv,
                 probe_name: str | None = None, run_index: int | None = None) -> list:
    """Evaluate a checkpoint on dataset splits and write the records CSV.

    With a probe task, the splits' inputs are kept but targets are
    recomputed under the probe function, and the CSV's task column names
    the probe. If a manifest sits next to the checkpoint, the CSV path is
    appended to it.
    """
    model, _, checkpoint_meta = load_checkpoint(checkpoint_path)
    if not isinstance(model, Seq2SeqModel):
        raise DataError(f"{checkpoint_path}: not an encoder-decoder checkpoint")
    splits, meta = tasks.load_dataset(data_dir)
    probe_task = parse_task(probe_name) if probe_name else None
    task_label = probe_task.name if probe_task else meta["task"]
    if run_index is None:
        run_index = int(checkpoint_meta.get("run", 0))
    records = evaluate_splits(
        ModelDecoder(model), splits,
        task=task_label, variant=model.variant, attention=model.attention,
        run=run_index, split_names=tuple(split_names), probe_task=probe_task,
    )
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    metrics.write_records_csv(out_csv, records)

    manifest_path = Path(checkpoint_path).parent / MANIFEST_NAME
    if manifest_path.exists():
        manifest = read_manifest(manifest_path)
        entry = str(out_csv)
        if entry not in manifest["result_csvs"]:
            manifest["result_csvs"].append(entry)
            write_manifest(manifest_path, manifest)
    return records


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------

_VARIANT_COLUMNS = ("srnn", "gru", "lstm")
_SPLIT_ROWS = ("train", "test", "gen")


def _aggregate_full_seq(records) -> dict:
    """(task, variant, attention) -> {split: {run: value}} from aggregate rows."""
    table: dict = {}
    for r in records:
        if r.metric != "full_seq" or r.length != metrics.AGGREGATE:
            continue
        per_split = table.setdefault((r.task, r.variant, r.attention), {})
        per_split.setdefault(r.split, {})[r.run] = r.value
    return table


def _best_run_values(per_split: dict) -> dict[str, float]:
    """Pick one run per condition by the 0.4*test + 0.6*gen rule."""
    if "test" not in per_split or "gen" not in per_split:
        raise DataError("analyze needs aggregate test and gen rows for every condition")
    run_ids = sorted(set(per_split["test"]) & set(per_split["gen"]))
    if not run_ids:
        raise DataError("no run has both test and gen aggregate rows")
    pairs = [(per_split["test"][i], per_split["gen"][i]) for i in run_ids]
    best = run_ids[select_best_run(pairs)]
    return {split: runs[best] for split, runs in per_split.items() if best in runs}


def aggregate_table(records) -> str:
    """Text table of best-run aggregate full-sequence accuracy, in percent.

    One row block per task with one row per split; attentional variant
    columns first, then attention-less.
    """
    table = _aggregate_full_seq(records)
    if not table:
        raise DataError("no aggregate full_seq rows to tabulate")
    tasks_seen = sorted({key[0] for key in table})
    best: dict = {key: _best_run_values(per_split) for key, per_split in table.items()}

    header_groups = "".join(f"{label:<30}" for label in ("Attentional", "Attention-less"))
    lines = ["Aggregate full-sequence accuracy (%), best run per condition", ""]
    lines.append(f"{'':<30}{header_groups}".rstrip())
    columns = "".join(f"{v.upper():<10}" for v in _VARIANT_COLUMNS)
    lines.append(f"{'Task':<20}{'Split':<10}{columns}{columns}".rstrip())
    for task in tasks_seen:
        splits_present = [s for s in _SPLIT_ROWS
                          if any(s in best.get((task, v, a), {})
                                 for v in _VARIANT_COLUMNS for a in (True, False))]
        for i, split in enumerate(splits_present):
            cells = []
            for attention in (True, False):
                for variant in _VARIANT_COLUMNS:
                    values = best.get((task, variant, attention), {})
                    cells.append(f"{100.0 * values[split]:.2f}" if split in values else "-")
            row_label = task if i == 0 else ""
            body = "".join(f"{c:<10}" for c in cells)
            lines.append(f"{row_label:<20}{split:<10}{body}".rstrip())
    return "\n".join(lines) + "\n"


def std_correlations(records) -> dict[str, dict[str, float]] | None:
    """Rank correlations of per-condition run variability between splits.

    For each condition, take the standard deviation of aggregate
    full-sequence accuracy across runs, then correlate train-vs-test and
    train-vs-gen over conditions. Needs >= 2 conditions with >= 2 runs
    covering train plus the other split; returns None otherwise.
    """
    table = _aggregate_full_seq(records)
    out: dict[str, dict[str, float]] = {}
    for other in ("test", "gen"):
        xs, ys = [], []
        for per_split in table.values():
            if "train" not in per_split or other not in per_split:
                continue
            runs = sorted(set(per_split["train"]) & set(per_split[other]))
            if len(runs) < 2:
                continue
            xs.append(float(np.std([per_split["train"][r] for r in runs])))
            ys.append(float(np.std([per_split[other][r] for r in runs])))
        if len(xs) < 2:
            return None
        out[f"train_{other}"] = {
            "kendall": metrics.rank_correlation(xs, ys, "kendall"),
            "spearman": metrics.rank_correlation(xs, ys, "spearman"),
        }
    return out


def run_analyze(csv_paths, out_path=None) -> str:
    records = []
    for path in csv_paths:
        records.extend(metrics.read_records_csv(path))
    text = aggregate_table(records)
    correlations = std_correlations(records)
    if correlations is None:
        text += "\nRun-variability rank correlations: not available " \
                "(needs train rows and >= 2 runs for >= 2 conditions)\n"
    else:
        text += "\nRun-variability rank correlations (std of accuracy across runs):\n"
        for pair, values in correlations.items():
            label = pair.replace("_", "-")
            text += (f"  {label}: kendall {values['kendall']:.4f}, "
                     f"spearman {values['spearman']:.4f}\n")
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
