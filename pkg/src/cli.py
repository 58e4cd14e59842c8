"""
Command-line entry point.

Usage:
    python -m src train     --config configs/senseval3.env --out artifacts/runs/standard
    python -m src eval      --config configs/senseval3.env --model artifacts/runs/standard/model.sbw
    python -m src predict   --config configs/senseval3.env --model ... --input data/test.xml
    python -m src gradcheck
    python -m src ablate    shuffled --config configs/senseval3.env

Every hyperparameter can be overridden with a flag named after its field
(--left_context 25, --word_dropout 0). Exit codes: 0 success, 1 usage or
configuration error, 2 data/parse/format error, 3 numerical failure.
"""

import argparse
import os
import sys
from typing import Dict, List, Optional

from rich import box
from rich.console import Console
from rich.table import Table

from .config import HYPERPARAM_FIELDS, Config, RunConfig
from .corpus import parse_answer_key, parse_lexical_sample
from .errors import (
    ConfigError,
    CorpusParseError,
    DivergenceError,
    GoldKeyError,
    InventoryError,
    ModelFormatError,
    ShapeError,
    TrainingStateError,
)
from .evaluate import (
    ABLATIONS,
    REFERENCE_F,
    EvalData,
    Prediction,
    ScoreReport,
    disambiguate_all,
    emit_report,
    gold_from_instances,
    report_table,
    run_ablation,
    score_answers,
)
from .gradcheck import GradCheckReport, grad_check
from .model import MODES
from .model_io import load_model, save_model
from .train import fit_model

console = Console()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class GradCheckFailed(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _training_paths(config: RunConfig) -> tuple:
    required = ("train_path",)
    if config.hp.word_init == "glove":
        required += ("glove_path",)
    return required


def cmd_train(config: RunConfig, verbose: bool = True) -> Dict[str, str]:
    """Parse the training data, fit a network and write the model file and training log."""
    config.validate(_training_paths(config))
    inventory, instances = parse_lexical_sample(config.train_path, verbose=verbose)

    fit = fit_model(instances, inventory, config.hp, config.variant, config.glove_path, config.threads, verbose)

    os.makedirs(config.output_dir, exist_ok=True)
    paths = {
        "model": save_model(fit.params, os.path.join(config.output_dir, Config.MODEL_FILENAME)),
        "log": fit.log.write_csv(os.path.join(config.output_dir, Config.LOG_FILENAME)),
    }
    if fit.refit_log is not None:
        paths["refit_log"] = fit.refit_log.write_csv(os.path.join(config.output_dir, "refit_log.csv"))
    return paths


def _test_data(config: RunConfig, inventory, input_path: Optional[str] = None):
    path = input_path or config.test_path
    if not path:
        raise ConfigError("test_path (or --input) is required for this command")
    if not os.path.exists(path):
        raise ConfigError(f"test data does not exist: {path}")
    _, instances = parse_lexical_sample(path, inventory=inventory)
    return instances


def _gold(config: RunConfig, instances) -> dict:
    if config.key_path:
        return parse_answer_key(config.key_path)
    return gold_from_instances(instances)


def cmd_eval(config: RunConfig, model_path: str) -> ScoreReport:
    """Decode the test set with a saved model, score it and write the report files."""
    config.validate(("key_path",) if config.key_path else ())
    params = load_model(model_path)
    instances = _test_data(config, params.inventory)
    predictions = disambiguate_all(params, instances, threads=config.threads)
    report = score_answers(predictions, _gold(config, instances))
    emit_report(report, predictions, config.output_dir)
    return report


def cmd_predict(config: RunConfig, model_path: str, input_path: Optional[str] = None) -> List[Prediction]:
    """Predict senses and write `lexelt instance-id sense-id` lines plus per-candidate probabilities."""
    params = load_model(model_path)
    predictions = disambiguate_all(params, _test_data(config, params.inventory, input_path), threads=config.threads)

    os.makedirs(config.output_dir, exist_ok=True)
    with open(os.path.join(config.output_dir, "predictions.txt"), "w", encoding="utf-8") as f:
        for pred in predictions:
            f.write(format_prediction(pred) + "\n")
    return predictions


def cmd_gradcheck(config: RunConfig, modes: Optional[List[str]] = None) -> Dict[str, GradCheckReport]:
    return {mode: grad_check(seed=config.seed, mode=mode) for mode in (modes or ["standard"])}


def cmd_ablate(config: RunConfig, names: List[str], verbose: bool = True) -> Dict[str, ScoreReport]:
    """Retrain and score once per named ablation; reports go to <out>/ablation-<name>/."""
    for name in names:
        if name not in ABLATIONS:
            raise ConfigError(f"Unknown ablation {name!r}; expected one of {sorted(ABLATIONS)}")
    needs_glove = any(ABLATIONS[n][1].get("word_init", config.hp.word_init) == "glove" for n in names)
    config.validate(("train_path", "test_path") + (("glove_path",) if needs_glove else ()))

    inventory, train_instances = parse_lexical_sample(config.train_path, verbose=verbose)
    test_instances = _test_data(config, inventory)
    data = EvalData(train_instances, test_instances, _gold(config, test_instances), inventory, config.glove_path)

    return {
        name: run_ablation(name, data, config.hp, config.threads,
                           os.path.join(config.output_dir, f"ablation-{name}"), verbose)
        for name in names
    }


# ---------------------------------------------------------------------------
# Console output
# ---------------------------------------------------------------------------

def format_prediction(pred: Prediction) -> str:
    probs = " ".join(f"{sense}={p:.4f}" for sense, p in zip(pred.candidates, pred.probabilities))
    return f"{pred.lexelt} {pred.instance_id} {pred.chosen}\t{probs}"


def _reference_table(f: float) -> Table:
    table = Table(title="Compared with published SensEval-3 results", box=box.ROUNDED)
    table.add_column("System", style="cyan")
    table.add_column("F (%)", justify="right")
    rows = sorted(list(REFERENCE_F.items()) + [("this run", 100 * f)], key=lambda kv: -kv[1])
    for system, score in rows:
        style = "bold green" if system == "this run" else ""
        table.add_row(f"[{style}]{system}[/{style}]" if style else system, f"{score:.1f}")
    return table


def _gradcheck_table(reports: Dict[str, GradCheckReport]) -> Table:
    table = Table(title="Gradient check (central differences)", box=box.ROUNDED)
    table.add_column("Mode", style="cyan")
    table.add_column("Group")
    table.add_column("Entries", justify="right")
    table.add_column("Max rel. error", justify="right")
    table.add_column("")
    for mode, report in reports.items():
        for row in report.to_frame().itertuples(index=False):
            mark = "[green]ok[/green]" if row.passed else "[red]FAIL[/red]"
            table.add_row(mode, row.group, str(row.entries), f"{row.max_rel_error:.2e}", mark)
    return table


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat key=value run configuration file")
    common.add_argument("--seed", type=int, help="Random seed (64-bit unsigned)")
    common.add_argument("--threads", type=int, help="Worker threads (1 = fully sequential)")
    common.add_argument("--out", dest="output_dir", help="Output directory")
    common.add_argument("--variant", choices=MODES, help="Architecture mode")
    common.add_argument("--train", dest="train_path", help="Training lexical-sample file")
    common.add_argument("--test", dest="test_path", help="Test lexical-sample file")
    common.add_argument("--key", dest="key_path", help="Test answer key")
    common.add_argument("--glove", dest="glove_path", help="GloVe vector file")
    for name, hp_field in HYPERPARAM_FIELDS.items():
        if name == "seed":
            continue
        flags = [f"--{name}"] + ([f"--{name.replace('_', '-')}"] if "_" in name else [])
        common.add_argument(*flags, dest=name, metavar=type(hp_field.default).__name__.upper(),
                            help=f"Override {name} (default {hp_field.default})")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="python -m src", description="Single-classifier BLSTM word sense disambiguation")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="Train a model")
    p_eval = sub.add_parser("eval", parents=[common], help="Score a saved model on the test set")
    p_eval.add_argument("--model", help="Model file (default <out>/model.sbw)")
    p_predict = sub.add_parser("predict", parents=[common], help="Predict senses with probabilities")
    p_predict.add_argument("--model", help="Model file (default <out>/model.sbw)")
    p_predict.add_argument("--input", help="Lexical-sample file to disambiguate (default test_path)")
    p_grad = sub.add_parser("gradcheck", parents=[common], help="Check gradients against finite differences")
    p_grad.add_argument("--mode", action="append", choices=MODES, help="Mode(s) to check (default standard)")
    p_ablate = sub.add_parser("ablate", parents=[common], help="Run ablation(s)")
    p_ablate.add_argument("names", nargs="+", choices=sorted(ABLATIONS) + ["all"], help="Ablation name(s)")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    keys = ["seed", "threads", "output_dir", "variant", "train_path", "test_path", "key_path", "glove_path"]
    keys += [name for name in HYPERPARAM_FIELDS if name != "seed"]
    return {key: getattr(args, key, None) for key in keys}


def _run(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config, _overrides(args))
    model_path = getattr(args, "model", None) or os.path.join(config.output_dir, Config.MODEL_FILENAME)

    if args.command == "train":
        paths = cmd_train(config)
        console.print(f"\n[green]Model written to {paths['model']}[/green]")
        console.print(f"[dim]Training log: {paths['log']}[/dim]")

    elif args.command == "eval":
        report = cmd_eval(config, model_path)
        console.print(report_table(report))
        console.print(_reference_table(report.f))
        console.print(f"[dim]Reports written to {config.output_dir}[/dim]")

    elif args.command == "predict":
        for pred in cmd_predict(config, model_path, args.input):
            console.print(format_prediction(pred), markup=False, highlight=False)

    elif args.command == "gradcheck":
        reports = cmd_gradcheck(config, args.mode)
        console.print(_gradcheck_table(reports))
        failed = [f"{mode}:{group}" for mode, r in reports.items() for group in r.failed_groups]
        if failed:
            raise GradCheckFailed(f"gradient check failed for {', '.join(failed)}")
        console.print("[green]All parameter groups passed.[/green]")

    elif args.command == "ablate":
        names = sorted(ABLATIONS) if "all" in args.names else args.names
        reports = cmd_ablate(config, names)
        table = Table(title="Ablations", box=box.ROUNDED)
        table.add_column("Ablation", style="cyan")
        table.add_column("F (%)", justify="right")
        table.add_column("Reference", justify="right")
        for name, report in reports.items():
            table.add_row(name, f"{100 * report.f:.1f}", f"{ABLATIONS[name][2]:.1f}")
        console.print(table)

    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        return _run(args)
    except ConfigError as e:
        console.print(f"[red]Configuration error:[/red] {e}")
        return EXIT_USAGE
    except (CorpusParseError, ModelFormatError, ShapeError, OSError) as e:
        console.print(f"[red]Data error:[/red] {e}")
        return EXIT_DATA
    except (InventoryError, GoldKeyError) as e:
        console.print(f"[red]Data error:[/red] {e.args[0] if e.args else e}")
        return EXIT_DATA
    except (DivergenceError, TrainingStateError, GradCheckFailed) as e:
        console.print(f"[red]Numerical failure:[/red] {e}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
