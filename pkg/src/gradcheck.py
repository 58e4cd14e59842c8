"""
Gradient Check
Compares backward() with central finite differences on a small random
network, one parameter group at a time.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import HyperParams
from .embeddings import SenseInventory, Vocabulary
from .model import ArchVariant, DenseParams, ExampleBatch, NetworkParams, build_network, forward
from .numkit import SeededRng
from .train import backward, draw_masks

STEP = 1e-5
TOLERANCE = 1e-4
ERROR_FLOOR = 1e-8
KINK_MARGIN = 1e-4


@dataclass
class GradCheckReport:
    max_errors: Dict[str, float] = field(default_factory=dict)
    entries: Dict[str, int] = field(default_factory=dict)
    tolerance: float = TOLERANCE

    @property
    def failed_groups(self) -> List[str]:
        return [name for name, err in self.max_errors.items() if not err < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failed_groups

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "group": list(self.max_errors),
            "entries": [self.entries[name] for name in self.max_errors],
            "max_rel_error": list(self.max_errors.values()),
            "passed": [err < self.tolerance for err in self.max_errors.values()],
        })


def small_hyperparams(seed: int = 0) -> HyperParams:
    return HyperParams(
        left_context=3, right_context=3, embedding_size=8, hidden_size=5, fc_size=5,
        dropout_embed=0.2, dropout_lstm_out=0.2, dropout_fc=0.2, word_dropout=0.0,
        word_init="random", seed=seed,
    ).validate()


def _random_network(hp: HyperParams, mode: str, rng: SeededRng) -> NetworkParams:
    vocab = Vocabulary(f"w{i}" for i in range(10))
    inventory = SenseInventory({"alpha.n": ["1", "2", "3"], "beta.v": ["1", "2"]})
    variant = ArchVariant(mode, hp.left_context, hp.right_context, hp.seed)
    params = build_network(vocab, inventory, hp, rng, variant=variant)
    # non-zero biases so every bias gradient is exercised
    for name, arr in params.arrays().items():
        if name.endswith("bias") or name.startswith("head.b_"):
            arr += rng.uniform(-0.5, 0.5, arr.shape)
    return params


def _random_batch(params: NetworkParams, hp: HyperParams, size: int, rng: SeededRng) -> ExampleBatch:
    V = len(params.vocab)
    left = rng.integers(0, V, (size, hp.left_context))
    right = rng.integers(0, V, (size, hp.right_context))
    left[0, 0] = 0  # at least one PAD slot
    return ExampleBatch(
        sense_cols=rng.integers(0, len(params.inventory), size),
        left_ids=left,
        right_ids=right,
        targets=(rng.random(size) < 0.5).astype(np.float64),
    )


def _clear_relu_kinks(params: NetworkParams, batch: ExampleBatch, masks, rng: SeededRng, tries: int = 100):
    """Shift biases until no ReLU pre-activation lies within KINK_MARGIN of 0."""
    for _ in range(tries):
        _, trace = forward(params, batch, masks, record=True)
        clean = True
        near = (np.abs(trace.hidden_pre) < KINK_MARGIN).any(axis=0)
        if near.any():
            params.head.b_hidden[near] += rng.uniform(0.01, 0.05, int(near.sum()))
            clean = False
        for side, side_trace in ((params.left, trace.left_side), (params.right, trace.right_side)):
            if isinstance(side, DenseParams):
                near = (np.abs(side_trace.pre) < KINK_MARGIN).any(axis=0)
                if near.any():
                    side.bias[near] += rng.uniform(0.01, 0.05, int(near.sum()))
                    clean = False
        if clean:
            return


def grad_check(
    hp: Optional[HyperParams] = None,
    seed: int = 0,
    mode: str = "standard",
    batch_size: int = 3,
    backward_fn: Callable = backward,
    verbose: bool = False,
) -> GradCheckReport:
    """
    Finite-difference check of every parameter group.

    Args:
        hp: Network sizes and dropout rates (small_hyperparams(seed) if omitted)
        seed: Seed for the network, the batch and the dropout masks
        mode: Architecture mode to check
        batch_size: Examples in the checked batch
        backward_fn: Gradient function under test
        verbose: Print the per-group table

    Returns:
        GradCheckReport with the max relative error of each group;
        passed iff every group is below TOLERANCE
    """
    hp = hp or small_hyperparams(seed)
    rng = SeededRng(seed)
    params = _random_network(hp, mode, rng)
    batch = _random_batch(params, hp, batch_size, rng)
    masks = draw_masks(batch_size, params, hp, rng)
    _clear_relu_kinks(params, batch, masks, rng)

    _, trace = forward(params, batch, masks, record=True)
    analytic = backward_fn(params, trace)

    def loss() -> float:
        y, _ = forward(params, batch, masks)
        return float(np.sum((y - batch.targets) ** 2))

    report = GradCheckReport()
    frozen = params.word_table.frozen_columns
    for name, arr in params.arrays().items():
        worst, count = 0.0, 0
        for idx in np.ndindex(arr.shape):
            if name == "word_table" and idx[1] in frozen:
                continue
            original = arr[idx]
            arr[idx] = original + STEP
            plus = loss()
            arr[idx] = original - STEP
            minus = loss()
            arr[idx] = original
            numeric = (plus - minus) / (2 * STEP)
            exact = analytic[name][idx]
            err = abs(exact - numeric) / max(abs(exact), abs(numeric), ERROR_FLOOR)
            worst = max(worst, err)
            count += 1
        report.max_errors[name] = worst
        report.entries[name] = count

    if verbose:
        print(report.to_frame().to_string(index=False))
    return report
