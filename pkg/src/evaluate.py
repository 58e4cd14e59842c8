"""
Evaluation Module
Sense decoding, fine-grained scoring against a SensEval answer key, report
files and the ablation runner.

A prediction always attempts its instance (every candidate gets a score), so
on a full run precision, recall and F coincide.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from rich import box
from rich.console import Console
from rich.table import Table

from .config import HyperParams
from .corpus import DisambiguationInstance, lexelt_pos
from .embeddings import SenseInventory
from .errors import ConfigError, CorpusParseError, GoldKeyError
from .model import ExampleBatch, NetworkParams, forward, window_for_instance
from .model_io import quantize
from .numkit import softmax
from .train import fit_model

GoldKey = Dict[str, Tuple[str, Set[str]]]

SCORE_COLUMNS = ["scope", "attempted", "total", "correct", "precision", "recall", "f"]

# Fine-grained F (%) on the SensEval-3 English lexical sample
REFERENCE_F = {
    "Multi-classifier BLSTM": 73.4,
    "IMS+adapted CW": 73.4,
    "htsa3": 72.9,
    "IRST-Kernels": 72.6,
    "Single-classifier BLSTM": 72.5,
    "nusels": 72.4,
    "IRST-Ties": 58.9,
    "R2D2": 57.2,
    "NRC-Coarse": 48.5,
    "NRC-Coarse2": 48.4,
    "DLSI-UA-LS-SU": 44.4,
}

# One modification each: (architecture mode, hyperparameter changes, reference F)
ABLATIONS = {
    "standard": ("standard", {}, 72.5),
    "reversed": ("reversed", {}, 68.9),
    "shuffled": ("shuffled", {}, 67.3),
    "fc": ("fc", {}, 70.2),
    "no-glove": ("standard", {"word_init": "random"}, 65.6),
    "no-word-dropout": ("standard", {"word_dropout": 0.0}, 71.1),
    "context-25": ("standard", {"left_context": 25, "right_context": 25}, 71.4),
}


@dataclass
class Prediction:
    instance_id: str
    lexelt: str
    candidates: List[str]
    scores: np.ndarray
    probabilities: np.ndarray
    chosen: str


class Answer(NamedTuple):
    """One line of a SensEval answer file."""
    lexelt: str
    instance_id: str
    chosen: str


@dataclass
class ScoreReport:
    attempted: int
    total: int
    correct: int
    precision: float
    recall: float
    f: float
    by_lexelt: pd.DataFrame = field(default_factory=pd.DataFrame)
    by_pos: pd.DataFrame = field(default_factory=pd.DataFrame)

    def rows(self) -> pd.DataFrame:
        """Total, per-POS and per-lexelt rows in report column order."""
        total = pd.DataFrame([{
            "scope": "total", "attempted": self.attempted, "total": self.total, "correct": self.correct,
            "precision": self.precision, "recall": self.recall, "f": self.f,
        }])
        pos = self.by_pos.reset_index().rename(columns={"pos": "scope"})
        pos["scope"] = "pos:" + pos["scope"].astype(str)
        lex = self.by_lexelt.reset_index().rename(columns={"lexelt": "scope"})
        lex["scope"] = "lexelt:" + lex["scope"].astype(str)
        return pd.concat([total, pos, lex], ignore_index=True)[SCORE_COLUMNS]


@dataclass
class EvalData:
    """Inputs of a train-and-score run."""
    train_instances: List[DisambiguationInstance]
    test_instances: List[DisambiguationInstance]
    gold: GoldKey
    inventory: SenseInventory
    glove_path: Optional[str] = None


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def choose_sense(candidates: Sequence[str], scores: np.ndarray) -> str:
    """Candidate with the highest score; ties go to the lowest candidate index."""
    return candidates[int(np.argmax(scores))]


def disambiguate(params: NetworkParams, inst: DisambiguationInstance) -> Prediction:
    """
    Score every candidate sense of an instance on the same window and pick the best.

    Ties go to the lowest candidate index.
    """
    candidates = params.inventory.senses(inst.lexelt)
    columns = params.inventory.columns(inst.lexelt)
    window = window_for_instance(params, inst)
    n = len(columns)
    batch = ExampleBatch(
        sense_cols=np.array(columns, dtype=np.int64),
        left_ids=np.tile(window.left_ids, (n, 1)),
        right_ids=np.tile(window.right_ids, (n, 1)),
    )
    scores, _ = forward(params, batch)
    return Prediction(
        instance_id=inst.instance_id,
        lexelt=inst.lexelt,
        candidates=list(candidates),
        scores=scores,
        probabilities=softmax(scores),
        chosen=choose_sense(candidates, scores),
    )


def disambiguate_all(
    params: NetworkParams,
    instances: Iterable[DisambiguationInstance],
    threads: int = 1,
) -> List[Prediction]:
    """Predictions for every instance, in input order."""
    instances = list(instances)
    if threads > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(lambda inst: disambiguate(params, inst), instances))
    return [disambiguate(params, inst) for inst in instances]


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def gold_from_instances(instances: Iterable[DisambiguationInstance]) -> GoldKey:
    return {inst.instance_id: (inst.lexelt, set(inst.gold)) for inst in instances if inst.gold}


def _with_rates(counts: pd.DataFrame) -> pd.DataFrame:
    counts = counts.astype({"attempted": int, "total": int, "correct": int})
    counts["precision"] = np.where(counts["attempted"] > 0, counts["correct"] / counts["attempted"].clip(lower=1), 0.0)
    counts["recall"] = np.where(counts["total"] > 0, counts["correct"] / counts["total"].clip(lower=1), 0.0)
    pr = counts["precision"] + counts["recall"]
    counts["f"] = np.where(pr > 0, 2 * counts["precision"] * counts["recall"] / pr.where(pr > 0, 1.0), 0.0)
    return counts


def score_answers(predictions: Iterable, gold: GoldKey) -> ScoreReport:
    """
    Fine-grained scoring: an answer is correct iff it is one of the gold senses.

    Args:
        predictions: Prediction or Answer records (instance_id, lexelt, chosen)
        gold: instance_id -> (lexelt, gold sense ids), as read by parse_answer_key

    Returns:
        ScoreReport with totals and per-lexelt / per-POS breakdowns
    """
    chosen: Dict[str, str] = {}
    for pred in predictions:
        chosen[pred.instance_id] = pred.chosen
    missing = [iid for iid in chosen if iid not in gold]
    if missing:
        raise GoldKeyError(missing)

    rows = []
    for instance_id, (lexelt, senses) in gold.items():
        answered = instance_id in chosen
        rows.append({
            "lexelt": lexelt,
            "pos": lexelt_pos(lexelt),
            "attempted": int(answered),
            "total": 1,
            "correct": int(answered and chosen[instance_id] in senses),
        })
    frame = pd.DataFrame(rows, columns=["lexelt", "pos", "attempted", "total", "correct"])
    counts = ["attempted", "total", "correct"]

    attempted = int(frame["attempted"].sum())
    total = len(frame)
    correct = int(frame["correct"].sum())
    precision = correct / attempted if attempted else 0.0
    recall = correct / total if total else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    return ScoreReport(
        attempted=attempted,
        total=total,
        correct=correct,
        precision=precision,
        recall=recall,
        f=f,
        by_lexelt=_with_rates(frame.groupby("lexelt")[counts].sum()),
        by_pos=_with_rates(frame.groupby("pos")[counts].sum()),
    )


def read_answers(path: str) -> List[Answer]:
    """Read `lexelt instance-id sense-id` lines (first sense id per line)."""
    answers = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise CorpusParseError("expected 'lexelt instance-id sense-id'", path=path, line=line_no)
            answers.append(Answer(parts[0], parts[1], parts[2]))
    return answers


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def report_table(report: ScoreReport, title: str = "Fine-grained scores") -> Table:
    table = Table(title=title, box=box.ASCII)
    table.add_column("Scope")
    for name in ("Attempted", "Total", "Correct", "P", "R", "F"):
        table.add_column(name, justify="right")
    if report.attempted == 0 and report.total == 0:
        return table
    for row in report.rows().itertuples(index=False):
        table.add_row(
            row.scope, str(row.attempted), str(row.total), str(row.correct),
            f"{100 * row.precision:.1f}", f"{100 * row.recall:.1f}", f"{100 * row.f:.1f}",
        )
    return table


def emit_report(
    report: ScoreReport,
    predictions: List,
    out_dir: str,
    title: str = "Fine-grained scores",
) -> Dict[str, str]:
    """
    Write report.txt (aligned table), report.csv (machine rows) and answers.txt.

    An empty prediction set gives header-only files.

    Returns:
        Dict of output kind -> path
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "text": os.path.join(out_dir, "report.txt"),
        "csv": os.path.join(out_dir, "report.csv"),
        "answers": os.path.join(out_dir, "answers.txt"),
    }
    predictions = sorted(predictions, key=lambda p: p.instance_id)
    empty = not predictions

    rows = pd.DataFrame(columns=SCORE_COLUMNS) if empty else report.rows()
    rows.to_csv(paths["csv"], index=False, float_format="%.6f")

    with open(paths["text"], "w", encoding="utf-8") as f:
        console = Console(file=f, width=100, color_system=None, force_terminal=False)
        shown = ScoreReport(0, 0, 0, 0.0, 0.0, 0.0) if empty else report
        console.print(report_table(shown, title))

    with open(paths["answers"], "w", encoding="utf-8") as f:
        for pred in predictions:
            f.write(f"{pred.lexelt} {pred.instance_id} {pred.chosen}\n")

    return paths


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------

def run_ablation(
    name: str,
    data: EvalData,
    hp: HyperParams,
    threads: int = 1,
    out_dir: Optional[str] = None,
    verbose: bool = True,
) -> ScoreReport:
    """
    Train from scratch with one modification and score the test set.

    The model is rounded to its on-disk precision before decoding, so
    "standard" reproduces a train run followed by an eval of its model file.

    Args:
        name: Key of ABLATIONS
        data: Training/test instances, gold key, inventory, GloVe path
        hp: Base hyperparameters (the modification is applied on top)
        threads: Worker threads
        out_dir: When given, report files are written there
        verbose: Print progress

    Returns:
        ScoreReport on the test set
    """
    if name not in ABLATIONS:
        raise ConfigError(f"Unknown ablation {name!r}; expected one of {sorted(ABLATIONS)}")
    mode, changes, reference = ABLATIONS[name]
    hp = hp.with_overrides(**changes)

    fit = fit_model(data.train_instances, data.inventory, hp, mode, data.glove_path, threads, verbose)
    model = quantize(fit.params)
    predictions = disambiguate_all(model, data.test_instances, threads=threads)
    report = score_answers(predictions, data.gold)

    if verbose:
        print(f"\nAblation {name}: F = {100 * report.f:.1f} (reference {reference})")
    if out_dir:
        emit_report(report, predictions, out_dir, title=f"Ablation: {name}")
    return report
