"""Command-line entry point: ``gen-synthetic``, ``train``, ``eval``, ``predict``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation error.
Settings come from flags, then an optional ``key = value`` config file, then
built-in defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import dataset, evaluation, nn, pipeline
from .errors import FatigueMlpError, ManifestMismatch, ValidationError

MODEL_FILE = "model.txt"
REPORT_FILE = "train_report.txt"
MANIFEST_FILE = "splits.csv"
TABLES_FILE = "tables.txt"
SCATTER_FILE = "scatter.csv"


class UsageError(ValidationError):
    pass


@dataclass
class RunConfig:
    data_path: str | None = None
    output_dir: str = "run"
    seed: int = 42
    dev_fraction: float = 0.8
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    arch: str = "3-75-1"
    init_seed: int | None = None
    train_seed: int | None = None
    max_epochs: int = 5000
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 32
    early_stop_patience: int = 50
    tables: bool = True
    scatter: bool = True

    def split_spec(self) -> pipeline.SplitSpec:
        return pipeline.SplitSpec(
            self.dev_fraction, self.train_fraction, self.val_fraction, self.test_fraction, self.seed
        )

    def mlp_config(self) -> nn.MlpConfig:
        seed = self.seed if self.init_seed is None else self.init_seed
        return nn.MlpConfig(nn.parse_arch(self.arch), init_seed=seed)

    def train_config(self) -> nn.TrainConfig:
        seed = self.seed if self.train_seed is None else self.train_seed
        return nn.TrainConfig(
            max_epochs=self.max_epochs,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            batch_size=self.batch_size,
            early_stop_patience=self.early_stop_patience,
            seed=seed,
        )


_FIELD_TYPES = {
    "data_path": str,
    "output_dir": str,
    "seed": int,
    "dev_fraction": float,
    "train_fraction": float,
    "val_fraction": float,
    "test_fraction": float,
    "arch": str,
    "init_seed": int,
    "train_seed": int,
    "max_epochs": int,
    "learning_rate": float,
    "optimizer": str,
    "batch_size": int,
    "early_stop_patience": int,
    "tables": bool,
    "scatter": bool,
}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {raw!r}")
    try:
        value = kind(text)
    except ValueError:
        raise UsageError(f"{key}: expected {kind.__name__}, got {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise UsageError(f"{key}: must be finite, got {raw!r}")
    return value


def read_config(path: str | Path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults < config file < flags, then validate."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in read_config(args.config).items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    total = cfg.train_fraction + cfg.val_fraction + cfg.test_fraction
    if abs(total - 1.0) > 1e-12:
        raise UsageError(
            "train_fraction + val_fraction + test_fraction must sum to 1 "
            f"(train_fraction={cfg.train_fraction}, val_fraction={cfg.val_fraction}, "
            f"test_fraction={cfg.test_fraction}, sum={total!r})"
        )
    cfg.split_spec()
    cfg.mlp_config()
    cfg.train_config()
    return cfg


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- run report (key = value) ----------------------------------------------------


def _floats(values) -> str:
    return ",".join(dataset.format_number(v) for v in values)


def write_train_report(path: Path, cfg: RunConfig, data_hash: str, report: nn.TrainReport) -> None:
    mcfg = cfg.mlp_config()
    tcfg = cfg.train_config()
    lines = [
        f"data_path = {cfg.data_path}",
        f"data_sha256 = {data_hash}",
        f"seed = {cfg.seed}",
        f"dev_fraction = {dataset.format_number(cfg.dev_fraction)}",
        f"train_fraction = {dataset.format_number(cfg.train_fraction)}",
        f"val_fraction = {dataset.format_number(cfg.val_fraction)}",
        f"test_fraction = {dataset.format_number(cfg.test_fraction)}",
        f"arch = {'-'.join(str(s) for s in mcfg.layer_sizes)}",
        f"init_seed = {mcfg.init_seed}",
        f"train_seed = {tcfg.seed}",
        f"optimizer = {tcfg.optimizer}",
        f"learning_rate = {dataset.format_number(tcfg.learning_rate)}",
        f"batch_size = {tcfg.batch_size}",
        f"max_epochs = {tcfg.max_epochs}",
        f"early_stop_patience = {tcfg.early_stop_patience}",
        f"epochs_run = {report.epochs_run}",
        f"best_epoch = {report.best_epoch}",
        f"best_validation_loss = {dataset.format_number(report.best_validation_loss)}",
        f"wall_time = {report.wall_time:.3f}",
        f"train_loss_history = {_floats(report.train_loss_history)}",
        f"validation_loss_history = {_floats(report.validation_loss_history)}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_train_report(path: Path) -> dict[str, str]:
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


# --- subcommands -----------------------------------------------------------------


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    if args.points < 10:
        raise UsageError(f"--points must be >= 10, got {args.points}")
    d = dataset.generate_synthetic(dataset.STANDARD_CONDITIONS, args.points, args.seed)
    out = Path(args.out)
    try:
        dataset.write_csv(d, out)
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}: {len(d.series)} series, {d.n_records} points")
    print("generator " + json.dumps(d.metadata, sort_keys=True))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if not cfg.data_path:
        raise UsageError("no data file given (use --data or data_path in the config)")
    data_path = Path(cfg.data_path)
    if not data_path.is_file():
        raise UsageError(f"data file not found: {data_path}")
    d = dataset.read_csv(data_path)
    data_hash = file_sha256(data_path)

    splits = pipeline.make_splits(d, cfg.split_spec())
    model = nn.init(cfg.mlp_config()).with_normalizer(pipeline.fit_normalizer(splits.train))
    model, report = nn.train(model, splits, cfg.train_config())

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    nn.save(model, out / MODEL_FILE)
    write_train_report(out / REPORT_FILE, cfg, data_hash, report)
    (out / MANIFEST_FILE).write_text(pipeline.manifest_text(splits), encoding="utf-8")

    print(
        f"samples: train={len(splits.train)} validation={len(splits.validation)} "
        f"dev_test={len(splits.dev_test)} extrapolation={len(splits.extrapolation)}"
    )
    print(
        f"epochs={report.epochs_run} best_epoch={report.best_epoch} "
        f"best_validation_mse={report.best_validation_loss:.6e}"
    )
    print(f"model written to {out / MODEL_FILE}")
    return 0


def _train_settings(info: dict[str, str]) -> tuple[pipeline.SplitSpec, str | None, str | None]:
    try:
        spec = pipeline.SplitSpec(
            float(info["dev_fraction"]),
            float(info["train_fraction"]),
            float(info["val_fraction"]),
            float(info["test_fraction"]),
            int(info["seed"]),
        )
    except (KeyError, ValueError) as exc:
        raise ManifestMismatch(f"{REPORT_FILE} is incomplete: {exc}") from None
    return spec, info.get("data_path"), info.get("data_sha256")


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.output_dir)
    model = nn.load(out / MODEL_FILE)
    spec, recorded_path, recorded_hash = _train_settings(read_train_report(out / REPORT_FILE))
    data_path = Path(args.data or cfg.data_path or recorded_path or "")
    if not data_path.is_file():
        raise UsageError(f"data file not found: {data_path}")
    if file_sha256(data_path) != recorded_hash:
        raise ManifestMismatch(
            f"{data_path} does not match the data used for training (sha256 differs)"
        )
    d = dataset.read_csv(data_path)
    splits = pipeline.make_splits(d, spec)
    manifest = out / MANIFEST_FILE
    if manifest.exists() and manifest.read_text(encoding="utf-8") != pipeline.manifest_text(splits):
        raise ManifestMismatch(f"recomputed splits differ from {manifest}")

    report = evaluation.evaluate(model, splits)
    if cfg.tables:
        (out / TABLES_FILE).write_text(evaluation.render_tables(report), encoding="utf-8")
    if cfg.scatter:
        evaluation.export_scatter(report, out / SCATTER_FILE)
    print(evaluation.format_overall(report))
    for cond, value in report.per_condition.items():
        print(f"R={cond.stress_ratio:g} R_ol={cond.label}: MAPE(extrapolation) = {value:.2f}%")
    return 0


def _parse_rol(text: str) -> float | str:
    if text.strip() == dataset.CA_TOKEN:
        return dataset.CA_TOKEN
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--Rol must be CA or a number, got {text!r}") from None


def cmd_predict(args: argparse.Namespace) -> int:
    if not (math.isfinite(args.N) and args.N >= 0):
        raise UsageError(f"--N must be finite and >= 0, got {args.N}")
    cond = dataset.condition_from_features(args.R, _parse_rol(args.Rol))
    model_path = Path(args.model) if args.model else Path(args.out or "run") / MODEL_FILE
    model = nn.load(model_path)
    r, rol = dataset.condition_features(cond)
    value = nn.predict(model, [args.N, r, rol])
    print(dataset.format_number(value))
    return 0


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fatigue-mlp", description="Crack-length regression with a 3-75-1 MLP."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-synthetic", help="write a synthetic Paris-law dataset")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--points", type=int, default=150, help="points per series")
    gen.add_argument("--config", help="accepted for symmetry; unused")
    gen.set_defaults(func=cmd_gen_synthetic)

    tr = sub.add_parser("train", help="split, normalize and train")
    tr.add_argument("--config")
    tr.add_argument("--data", dest="data_path")
    tr.add_argument("--out", dest="output_dir")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--arch", help="layer sizes, e.g. 3-75-1")
    tr.add_argument("--dev-fraction", type=float, dest="dev_fraction")
    tr.add_argument("--train-fraction", type=float, dest="train_fraction")
    tr.add_argument("--val-fraction", type=float, dest="val_fraction")
    tr.add_argument("--test-fraction", type=float, dest="test_fraction")
    tr.add_argument("--init-seed", type=int, dest="init_seed")
    tr.add_argument("--train-seed", type=int, dest="train_seed")
    tr.add_argument("--max-epochs", type=int, dest="max_epochs")
    tr.add_argument("--learning-rate", type=float, dest="learning_rate")
    tr.add_argument("--optimizer", choices=("adam", "sgd"))
    tr.add_argument("--batch-size", type=int, dest="batch_size")
    tr.add_argument("--patience", type=int, dest="early_stop_patience")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a trained model and write reports")
    ev.add_argument("--config")
    ev.add_argument("--out", dest="output_dir", help="run directory written by train")
    ev.add_argument("--data", help="data CSV (defaults to the path recorded at training)")
    ev.add_argument("--seed", type=int, help="ignored; the recorded seed is used")
    ev.add_argument("--no-tables", dest="tables", action="store_false", default=None)
    ev.add_argument("--no-scatter", dest="scatter", action="store_false", default=None)
    ev.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="predict crack length for one input")
    pr.add_argument("--model", help="model file (default: <out>/model.txt)")
    pr.add_argument("--out", help="run directory holding model.txt")
    pr.add_argument("--config", help="accepted for symmetry; unused")
    pr.add_argument("--seed", type=int, help="accepted for symmetry; unused")
    pr.add_argument("--N", type=float, required=True, help="load cycles")
    pr.add_argument("--R", type=float, required=True, help="stress ratio, 0 <= R < 1")
    pr.add_argument("--Rol", required=True, help="overload ratio > 1, or CA")
    pr.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FatigueMlpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
