"""Command-line entry point: ``procflow {synth,aggregate,train,eval,experiment}``.

Every command writes one ``*.manifest.json`` next to its outputs, recording
the argv, resolved configuration, seeds and timing.  Errors exit non-zero and
print ``procflow: error [<category>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from ._seeds import child_seed
from .aggregate import WINDOW_MS, aggregate_log
from .dataset import (
    OTHER,
    BinningModel,
    LabeledDataset,
    LabelSpace,
    browser_labeling,
    cap_per_class,
    min_count_filter,
    read_csv,
    split,
    top_n_relabel,
    write_csv,
)
from .errors import ProcflowError, ProcflowIOError, UsageError, ValidationError
from .events import read_jsonl, write_jsonl
from .evaluate import (
    MODELS,
    DEFAULT_N_VALUES,
    SUITES,
    ExperimentConfig,
    BinnedForest,
    evaluate,
    render_summary,
    run_experiment,
    summary_csv,
    summary_json,
    summary_rows,
    train_model,
)
from .forest import Forest, ForestParams
from .mlp import MLPModel, TrainConfig
from .synth import ScenarioConfig, builtin_profiles, generate_scenario

logger = logging.getLogger("procflow")

TASKS = ("all", "top_n", "browser_binary", "browser_fingerprint", "browser_combined")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _common(p, out_default):
    p.add_argument("--seed", type=_seed, default=0, help="random seed (default: 0)")
    p.add_argument("--out", type=Path, default=Path(out_default), help=f"output path (default: {out_default})")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _pipeline_flags(p):
    g = p.add_argument_group("dataset pipeline")
    g.add_argument("--min-samples", type=int, default=300, help="drop classes with fewer rows")
    g.add_argument("--cap", type=int, default=50_000, help="max rows per class")
    g.add_argument("--train-fraction", type=float, default=0.8)
    g.add_argument("--bins", type=int, default=64, help="quantile bins per feature")
    g.add_argument("--browsers", type=_name_list, default=None,
                   help="comma-separated browser process names")


def _model_flags(p):
    g = p.add_argument_group("random forest")
    g.add_argument("--trees", type=int, default=100)
    g.add_argument("--max-depth", type=int, default=15)
    g.add_argument("--min-split", type=int, default=2)
    g.add_argument("--feature-subsample", type=int, default=None,
                   help="features tried per split (default: floor(sqrt(F)))")
    g.add_argument("--rf-binned", action="store_true", help="train the forest on bin indices")
    g = p.add_argument_group("multilayer perceptron")
    d = TrainConfig()
    g.add_argument("--lr", type=float, default=d.learning_rate)
    g.add_argument("--batch-size", type=int, default=d.batch_size)
    g.add_argument("--epochs", type=int, default=d.epochs)
    g.add_argument("--beta1", type=float, default=d.beta1)
    g.add_argument("--beta2", type=float, default=d.beta2)
    g.add_argument("--epsilon", type=float, default=d.epsilon)
    g.add_argument("--bn-momentum", type=float, default=d.bn_momentum)
    g.add_argument("--bn-epsilon", type=float, default=d.bn_epsilon)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="procflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"procflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic JSONL event log")
    p.add_argument("--separability", "--profile-set", choices=("high", "medium", "none"), default="high")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--windows", type=int, default=2000, help="windows per process")
    p.add_argument("--hosts", type=int, default=10)
    _common(p, "events.jsonl")

    p = sub.add_parser("aggregate", help="aggregate events into per-window feature rows")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--window-ms", type=int, default=WINDOW_MS)
    _common(p, "features.csv")

    p = sub.add_parser("train", help="train a model on a feature CSV")
    p.add_argument("--model", required=True, choices=MODELS)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--task", choices=TASKS, default="all")
    p.add_argument("--n", type=int, default=None, help="N for --task top_n")
    p.add_argument("--no-split", action="store_true", help="train on every row, write no test split")
    _pipeline_flags(p)
    _model_flags(p)
    _common(p, "model.json")

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", type=Path, required=True, help="model JSON written by train")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--heatmap", action="store_true", help="print a confusion heatmap")
    _common(p, "report.json")

    p = sub.add_parser("experiment", help="run an experiment suite")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--models", type=_name_list, default=list(MODELS))
    p.add_argument("--n", type=_int_list, default=list(DEFAULT_N_VALUES), help="N values for top_n_sweep")
    _pipeline_flags(p)
    _model_flags(p)
    _common(p, "results")
    return parser


# -- helpers --------------------------------------------------------------------

def _ensure_parent(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ProcflowIOError(f"cannot create directory {path.parent}: {exc.strerror}") from None


def _write_text(path: Path, text: str):
    _ensure_parent(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ProcflowIOError(f"cannot write {path}: {exc.strerror}") from None


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ProcflowIOError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None


def load_features(path: Path) -> LabeledDataset:
    """Feature rows from a CSV, or aggregated on the fly from a JSONL event log."""
    if not Path(path).exists():
        raise ProcflowIOError(f"input file not found: {path}")
    if Path(path).suffix == ".jsonl":
        return aggregate_log(read_jsonl(path))
    return read_csv(path)


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}.{suffix}")


def _experiment_config(args) -> ExperimentConfig:
    kw = {}
    if args.browsers:
        kw["browsers"] = tuple(args.browsers)
    return ExperimentConfig(
        models=tuple(getattr(args, "models", None) or (args.model,)),
        seed=args.seed,
        n_values=tuple(args.n) if isinstance(args.n, list) else DEFAULT_N_VALUES,
        min_samples=args.min_samples,
        cap=args.cap,
        train_fraction=args.train_fraction,
        bins=args.bins,
        rf_binned=args.rf_binned,
        forest=ForestParams(n_trees=args.trees, max_depth=args.max_depth, min_split=args.min_split,
                            feature_subsample=args.feature_subsample),
        mlp=TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                        beta1=args.beta1, beta2=args.beta2, epsilon=args.epsilon,
                        bn_momentum=args.bn_momentum, bn_epsilon=args.bn_epsilon),
        **kw,
    )


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_manifest(path: Path, args, argv, outputs, started, extra=None):
    config = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "tool_version": __version__,
        "kernel_backend": kernels.ACTIVE,
        "config": _jsonable(config),
        "seed": args.seed,
        "inputs": [str(args.input)] if hasattr(args, "input") else [],
        "outputs": [str(o) for o in outputs],
        "duration_s": round(time.perf_counter() - started, 6),
    }
    if extra:
        manifest.update(_jsonable(extra))
    _write_text(path, json.dumps(manifest, indent=2) + "\n")


# -- commands ---------------------------------------------------------------------

def cmd_synth(args, argv, started):
    profiles = builtin_profiles(args.separability, args.classes)
    config = ScenarioConfig(profiles, args.windows, hosts=args.hosts, seed=args.seed)
    log = generate_scenario(config)
    _ensure_parent(args.out)
    write_jsonl(log, args.out)
    logger.info("wrote %d events for %d processes to %s", len(log), len(profiles), args.out)
    _write_manifest(_sibling(args.out, "manifest.json"), args, argv, [args.out], started,
                    {"profiles": [p.to_dict() for p in profiles]})


def cmd_aggregate(args, argv, started):
    if not args.input.exists():
        raise ProcflowIOError(f"input file not found: {args.input}")
    data = aggregate_log(read_jsonl(args.input), args.window_ms)
    _ensure_parent(args.out)
    write_csv(data, args.out)
    logger.info("wrote %d feature rows to %s", len(data), args.out)
    _write_manifest(_sibling(args.out, "manifest.json"), args, argv, [args.out], started)


def _task_pipeline(data: LabeledDataset, args) -> tuple[LabeledDataset, LabelSpace]:
    cap_seed = child_seed(args.seed, "train", "cap")
    if args.task.startswith("browser_"):
        kw = {"browsers": tuple(args.browsers)} if args.browsers else {}
        return browser_labeling(cap_per_class(data, args.cap, cap_seed), args.task.removeprefix("browser_"), **kw)
    data = cap_per_class(min_count_filter(data, args.min_samples), args.cap, cap_seed)
    if args.task == "top_n":
        if args.n is None:
            raise UsageError("--task top_n needs --n")
        return top_n_relabel(data, args.n)
    return data, LabelSpace.from_labels(data.labels)


def cmd_train(args, argv, started):
    data, space = _task_pipeline(load_features(args.input), args)
    if len(space) < 2:
        raise ValidationError(f"need at least two classes, found {list(space.classes)}")
    outputs = [args.out]
    if args.no_split:
        train, test = data, None
    else:
        train, test = split(data, args.train_fraction, child_seed(args.seed, "train", "split"))
    config = _experiment_config(args)
    model = train_model(args.model, train, space, config, tag="train")

    _ensure_parent(args.out)
    doc = {"kind": args.model, "label_space": space.to_dict()}
    if args.model == "mlp":
        doc["model"] = model.to_dict()
        binning = model.binning
    elif args.rf_binned:
        doc["model"] = model.forest.to_dict()
        binning = model.binning
    else:
        doc["model"] = model.to_dict()
        binning = None
    if binning is not None:
        bin_path = _sibling(args.out, "binning.json")
        binning.save(bin_path)
        doc["binning"] = bin_path.name
        outputs.append(bin_path)
    _write_text(args.out, json.dumps(doc))
    labels_path = _sibling(args.out, "labels.json")
    _write_text(labels_path, json.dumps(space.to_dict(), indent=2))
    outputs.append(labels_path)
    if test is not None:
        test_path = _sibling(args.out, "test.csv")
        write_csv(test, test_path)
        outputs.append(test_path)
    logger.info("trained %s on %d rows, %d classes -> %s", args.model, len(train), len(space), args.out)
    _write_manifest(_sibling(args.out, "manifest.json"), args, argv, outputs, started,
                    {"n_train": len(train), "n_test": 0 if test is None else len(test)})


def load_model(path: Path):
    """``(kind, model)`` from a ``train`` output file."""
    doc = _read_json(path)
    if doc.get("kind") not in MODELS or "model" not in doc:
        raise ValidationError(f"{path}: not a procflow model file")
    binning = None
    if "binning" in doc:
        binning = BinningModel.from_dict(_read_json(Path(path).with_name(doc["binning"])))
    if doc["kind"] == "mlp":
        return "mlp", MLPModel.from_dict(doc["model"], binning)
    forest = Forest.from_dict(doc["model"])
    if binning is not None:
        return "rf", BinnedForest(forest, binning)
    return "rf", forest


def cmd_eval(args, argv, started):
    kind, model = load_model(args.model)
    test = load_features(args.input)
    space = model.class_names
    if space.has_other:
        test = test.relabel(np.where(np.isin(test.labels, space.classes), test.labels, OTHER))
    report = evaluate(model, test, task="eval", model=kind, n_samples=len(test))
    _write_text(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    cm_path = _sibling(args.out, "confusion.csv")
    _write_text(cm_path, report.confusion.to_csv())
    rows = summary_rows([report])
    print(render_summary(rows), end="")
    if args.heatmap:
        print(report.confusion.heatmap())
    _write_manifest(_sibling(args.out, "manifest.json"), args, argv, [args.out, cm_path], started)


def cmd_experiment(args, argv, started):
    data = load_features(args.input)
    config = _experiment_config(args)
    reports = run_experiment(args.suite, data, config)
    out = args.out
    outputs = []
    for r in reports:
        stem = r.task if r.n_top is None else f"{r.task}_top{r.n_top}"
        path = out / "reports" / f"{stem}_{r.model}.json"
        _write_text(path, json.dumps(r.to_dict(), indent=2) + "\n")
        cm = path.with_name(f"{stem}_{r.model}.confusion.csv")
        _write_text(cm, r.confusion.to_csv())
        hm = path.with_name(f"{stem}_{r.model}.heatmap.txt")
        _write_text(hm, r.confusion.heatmap() + "\n")
        outputs += [path, cm, hm]
    rows = summary_rows(reports)
    table = render_summary(rows)
    for name, text in (("summary.json", summary_json(rows) + "\n"),
                       ("summary.csv", summary_csv(rows)),
                       ("summary.txt", table)):
        _write_text(out / name, text)
        outputs.append(out / name)
    print(table, end="")
    _write_manifest(out / "manifest.json", args, argv, outputs, started,
                    {"experiment_config": config})


COMMANDS = {
    "synth": cmd_synth,
    "aggregate": cmd_aggregate,
    "train": cmd_train,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"procflow: error [{exc.category}]: {exc}", file=sys.stderr)
        return 2
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        COMMANDS[args.command](args, argv, started)
    except UsageError as exc:
        print(f"procflow: error [{exc.category}]: {exc}", file=sys.stderr)
        return 2
    except ProcflowError as exc:
        print(f"procflow: error [{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"procflow: error [io]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
