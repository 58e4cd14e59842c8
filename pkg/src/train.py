"""
Training Module
Positive/negative example generation, MSE loss, backpropagation through the
whole network (embeddings included) and RMSprop updates.

Training targets follow the sigmoid-scoring scheme: for every labeled
instance, each gold sense paired with the instance window is a 1.0 example
and every other candidate sense is a 0.0 example.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import HyperParams
from .corpus import ContextWindow, DisambiguationInstance, build_vocab, make_window, split_validation
from .embeddings import PAD_ID, SenseInventory, Vocabulary, load_glove
from .errors import ConfigError, DivergenceError, InventoryError, TrainingStateError
from .model import (
    ArchVariant,
    DenseParams,
    DropoutMasks,
    ExampleBatch,
    ForwardTrace,
    LstmParams,
    NetworkParams,
    SideTrace,
    build_network,
    forward,
    window_for_instance,
)
from .numkit import SeededRng, bernoulli_mask

Gradients = Dict[str, np.ndarray]


@dataclass
class TrainingExample:
    sense_col: int
    window: ContextWindow
    target: float
    lexelt: str = ""
    sense_id: str = ""


@dataclass
class OptimizerState:
    """RMSprop running averages of squared gradients, one per parameter array."""
    accumulators: Dict[str, np.ndarray]
    steps: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "OptimizerState":
        return cls({name: np.zeros_like(arr) for name, arr in params.arrays().items()})


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    val_f: float
    elapsed_seconds: float


@dataclass
class TrainingLog:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.epoch, r.mean_loss, r.val_f, r.elapsed_seconds) for r in self.records],
            columns=["epoch", "mean_loss", "val_f", "elapsed_seconds"],
        )

    def write_csv(self, path: str) -> str:
        """One comma-separated line per epoch: epoch, mean-loss, val-F, elapsed-seconds."""
        self.to_frame().to_csv(path, index=False, float_format="%.10g", na_rep="nan")
        return path


# ---------------------------------------------------------------------------
# Examples and regularization
# ---------------------------------------------------------------------------

def generate_examples(
    inst: DisambiguationInstance,
    inventory: SenseInventory,
    vocab: Vocabulary,
    hp: HyperParams,
    window: Optional[ContextWindow] = None,
) -> List[TrainingExample]:
    """
    Training examples of one instance, in candidate order.

    Args:
        inst: Labeled instance (unlabeled instances yield no examples)
        inventory: Sense inventory
        vocab: Training vocabulary
        hp: Context sizes
        window: Precomputed window (e.g. shuffled); built from hp when omitted

    Returns:
        One example per candidate sense: target 1.0 for gold senses, 0.0 otherwise
    """
    candidates = inventory.senses(inst.lexelt)
    if not inst.gold:
        return []
    unknown = inst.gold.difference(candidates)
    if unknown:
        raise InventoryError(f"{inst.instance_id}: gold sense(s) {sorted(unknown)} not candidates of {inst.lexelt}")

    if window is None:
        window = make_window(inst, vocab, hp.left_context, hp.right_context)

    return [
        TrainingExample(
            sense_col=inventory.column(inst.lexelt, sense),
            window=window,
            target=1.0 if sense in inst.gold else 0.0,
            lexelt=inst.lexelt,
            sense_id=sense,
        )
        for sense in candidates
    ]


def examples_to_batch(examples: Sequence[TrainingExample]) -> ExampleBatch:
    return ExampleBatch(
        sense_cols=np.array([ex.sense_col for ex in examples], dtype=np.int64),
        left_ids=np.stack([ex.window.left_ids for ex in examples]),
        right_ids=np.stack([ex.window.right_ids for ex in examples]),
        targets=np.array([ex.target for ex in examples], dtype=np.float64),
    )


def mse_loss(y_hat: float, target: float) -> Tuple[float, float]:
    """Squared error and its derivative with respect to y_hat."""
    diff = y_hat - target
    return diff * diff, 2.0 * diff


def apply_dropout(values: np.ndarray, rate: float, rng: SeededRng) -> Tuple[np.ndarray, np.ndarray]:
    """Inverted dropout on an array; returns (masked values, mask)."""
    mask = bernoulli_mask(rng, values.shape, 1.0 - rate)
    return values * mask, mask


def _mask(shape: Tuple[int, ...], rate: float, rng: SeededRng) -> np.ndarray:
    return apply_dropout(np.ones(shape), rate, rng)[1]


def draw_masks(batch_size: int, params: NetworkParams, hp: HyperParams, rng: SeededRng) -> DropoutMasks:
    """Dropout masks for embeddings (before the cosine), the merge output and the hidden layer."""
    d, H, F = params.embedding_size, params.hidden_size, params.fc_size
    L, R = params.variant.left_context, params.variant.right_context
    return DropoutMasks(
        sense=_mask((batch_size, d), hp.dropout_embed, rng),
        left=_mask((batch_size, L, d), hp.dropout_embed, rng),
        right=_mask((batch_size, R, d), hp.dropout_embed, rng),
        merge=_mask((batch_size, 2 * H), hp.dropout_lstm_out, rng),
        fc=_mask((batch_size, F), hp.dropout_fc, rng),
    )


def drop_words(ids: np.ndarray, rate: float, rng: SeededRng) -> np.ndarray:
    """Replace each non-PAD id by PAD with probability rate."""
    if rate <= 0.0:
        return ids.copy()
    dropped = (rng.random(ids.shape) < rate) & (ids != PAD_ID)
    return np.where(dropped, PAD_ID, ids)


def apply_word_dropout(window: ContextWindow, hp: HyperParams, rng: SeededRng) -> ContextWindow:
    """Word dropout on one window; the training loop applies drop_words to whole batches."""
    return ContextWindow(
        drop_words(window.left_ids, hp.word_dropout, rng),
        drop_words(window.right_ids, hp.word_dropout, rng),
    )


# ---------------------------------------------------------------------------
# Backward pass
# ---------------------------------------------------------------------------

def _lstm_backward(p: LstmParams, trace: SideTrace, dh_final: np.ndarray, grads: Gradients, prefix: str) -> np.ndarray:
    B, T, H = trace.hiddens.shape
    x = trace.inputs
    dw_input = np.zeros_like(p.w_input)
    dw_recurrent = np.zeros_like(p.w_recurrent)
    dbias = np.zeros_like(p.bias)
    dx = np.zeros_like(x)

    dh = dh_final.copy()
    dc = np.zeros((B, H))
    zeros = np.zeros((B, H))
    for t in reversed(range(T)):
        gates = trace.gates[:, t]
        i, f, o, g = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:3 * H], gates[:, 3 * H:]
        tanh_c = np.tanh(trace.cells[:, t])
        c_prev = trace.cells[:, t - 1] if t > 0 else zeros
        h_prev = trace.hiddens[:, t - 1] if t > 0 else zeros

        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            do * o * (1.0 - o),
            dc * i * (1.0 - g ** 2),
        ], axis=1)

        dw_input += dz.T @ x[:, t]
        dw_recurrent += dz.T @ h_prev
        dbias += dz.sum(axis=0)
        dx[:, t] = dz @ p.w_input
        dh = dz @ p.w_recurrent
        dc = dc * f

    grads[f"{prefix}.w_input"] = dw_input
    grads[f"{prefix}.w_recurrent"] = dw_recurrent
    grads[f"{prefix}.bias"] = dbias
    return dx[..., 0]


def _dense_backward(p: DenseParams, trace: SideTrace, dout: np.ndarray, grads: Gradients, prefix: str) -> np.ndarray:
    seq = trace.inputs[..., 0]
    dpre = dout * (trace.pre > 0)
    grads[f"{prefix}.weight"] = dpre.T @ seq
    grads[f"{prefix}.bias"] = dpre.sum(axis=0)
    return dpre @ p.weight


def _side_backward(side, trace: SideTrace, dout: np.ndarray, grads: Gradients, prefix: str) -> np.ndarray:
    if isinstance(side, DenseParams):
        dseq = _dense_backward(side, trace, dout, grads, prefix)
    else:
        dseq = _lstm_backward(side, trace, dout, grads, prefix)
    dcos = np.zeros_like(dseq)
    dcos[:, trace.order] = dseq
    return dcos


def _cosine_backward(
    sense: np.ndarray, words: np.ndarray, cos: np.ndarray,
    sense_norms: np.ndarray, word_norms: np.ndarray, dcos: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of cos(s, x_t) w.r.t. s (B, d) and every x_t (B, T, d); zero where a norm is zero."""
    denom = word_norms * sense_norms[:, None]
    inv = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom > 0)
    coef = dcos * inv
    weighted_cos = dcos * cos

    inv_s2 = np.divide(1.0, sense_norms ** 2, out=np.zeros_like(sense_norms), where=sense_norms > 0)
    dsense = np.einsum("bt,btd->bd", coef, words) - (weighted_cos.sum(axis=1) * inv_s2)[:, None] * sense

    inv_x2 = np.divide(1.0, word_norms ** 2, out=np.zeros_like(word_norms), where=word_norms > 0)
    dwords = coef[..., None] * sense[:, None, :] - (weighted_cos * inv_x2)[..., None] * words
    return dsense, dwords


def backward(params: NetworkParams, trace: ForwardTrace, targets: Optional[np.ndarray] = None) -> Gradients:
    """
    Exact gradients of sum_b (y_b - target_b)^2 for every parameter array.

    Args:
        params: The parameters the trace was recorded with
        trace: ForwardTrace from forward(..., record=True), same dropout masks
        targets: Overrides the batch targets

    Returns:
        Dict keyed like NetworkParams.arrays(); frozen word columns get zero
    """
    if trace.signature != params.signature():
        raise TrainingStateError("forward trace was recorded with differently shaped parameters")
    targets = trace.batch.targets if targets is None else targets
    if targets is None:
        raise TrainingStateError("backward needs training targets")

    grads: Gradients = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}
    masks = trace.masks
    head = params.head
    H = params.hidden_size

    y = trace.y
    dlogit = 2.0 * (y - targets) * y * (1.0 - y)
    grads["head.w_out"] = (dlogit @ trace.h_cl)[None, :]
    grads["head.b_out"] = np.array([dlogit.sum()])

    dh_cl = np.outer(dlogit, head.w_out[0])
    if masks is not None:
        dh_cl = dh_cl * masks.fc
    dpre = dh_cl * (trace.hidden_pre > 0)
    grads["head.w_hidden"] = dpre.T @ trace.merged
    grads["head.b_hidden"] = dpre.sum(axis=0)

    denc = dpre @ head.w_hidden
    if masks is not None:
        denc = denc * masks.merge

    dleft_cos = _side_backward(params.left, trace.left_side, denc[:, :H], grads, "left")
    dright_cos = _side_backward(params.right, trace.right_side, denc[:, H:], grads, "right")

    ds_left, dleft = _cosine_backward(trace.sense_vecs, trace.left_vecs, trace.left_cos,
                                      trace.sense_norms, trace.left_norms, dleft_cos)
    ds_right, dright = _cosine_backward(trace.sense_vecs, trace.right_vecs, trace.right_cos,
                                        trace.sense_norms, trace.right_norms, dright_cos)
    dsense = ds_left + ds_right
    if masks is not None:
        dsense = dsense * masks.sense
        dleft = dleft * masks.left
        dright = dright * masks.right

    d = params.embedding_size
    batch = trace.batch
    np.add.at(grads["sense_table"].T, batch.sense_cols, dsense)
    np.add.at(grads["word_table"].T, batch.left_ids.ravel(), dleft.reshape(-1, d))
    np.add.at(grads["word_table"].T, batch.right_ids.ravel(), dright.reshape(-1, d))
    for col in params.word_table.frozen_columns:
        grads["word_table"][:, col] = 0.0
    return grads


def rmsprop_step(params: NetworkParams, grads: Gradients, state: OptimizerState, hp: HyperParams) -> Tuple[NetworkParams, OptimizerState]:
    """
    In-place RMSprop update.

    acc <- rho * acc + (1 - rho) * g^2;  w <- w - lr * g / (sqrt(acc) + eps)
    """
    rho, lr, eps = hp.rms_decay, hp.learning_rate, hp.rms_epsilon
    for name, weights in params.arrays().items():
        g = grads[name]
        acc = state.accumulators[name]
        if g.shape != weights.shape or acc.shape != weights.shape:
            raise TrainingStateError(f"shape mismatch for {name}: {weights.shape} / {g.shape} / {acc.shape}")
        acc *= rho
        acc += (1.0 - rho) * g * g
        weights -= lr * g / (np.sqrt(acc) + eps)
    state.steps += 1
    return params, state


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _shard_gradients(params: NetworkParams, batch: ExampleBatch, masks: DropoutMasks) -> Tuple[float, Gradients]:
    y, trace = forward(params, batch, masks, record=True)
    loss = float(np.sum((y - batch.targets) ** 2))
    return loss, backward(params, trace)


def batch_gradients(
    params: NetworkParams,
    batch: ExampleBatch,
    masks: DropoutMasks,
    executor: Optional[ThreadPoolExecutor] = None,
    shards: int = 1,
) -> Tuple[float, Gradients]:
    """
    Summed loss and gradients of a batch.

    With an executor the batch is cut into contiguous shards computed
    concurrently; shard results are reduced in shard order.
    """
    if executor is None or shards <= 1 or len(batch) < 2:
        return _shard_gradients(params, batch, masks)

    pieces = [idx for idx in np.array_split(np.arange(len(batch)), shards) if len(idx)]
    results = list(executor.map(lambda idx: _shard_gradients(params, batch.take(idx), masks.take(idx)), pieces))
    loss, grads = results[0]
    for shard_loss, shard_grads in results[1:]:
        loss += shard_loss
        for name, g in shard_grads.items():
            grads[name] += g
    return loss, grads


def _validation_f(params: NetworkParams, instances: List[DisambiguationInstance], threads: int) -> float:
    from .evaluate import disambiguate_all, gold_from_instances, score_answers

    predictions = disambiguate_all(params, instances, threads=threads)
    return score_answers(predictions, gold_from_instances(instances)).f


def train(
    train_instances: List[DisambiguationInstance],
    val_instances: List[DisambiguationInstance],
    params: NetworkParams,
    hp: HyperParams,
    threads: int = 1,
    verbose: bool = True,
    keep_last: bool = False,
) -> Tuple[NetworkParams, TrainingLog]:
    """
    Train a network with minibatch RMSprop and early stopping on validation F.

    Args:
        train_instances: Labeled training instances
        val_instances: Labeled validation instances (may be empty: selection then uses training loss)
        params: Initialized network; updated in place
        hp: Hyperparameters (batch size, epochs, patience, dropout rates, optimizer)
        threads: Worker threads per batch (1 = fully sequential)
        verbose: Print one line per epoch
        keep_last: Return the final epoch's parameters instead of the best ones (refit)

    Returns:
        Tuple of (best parameters, TrainingLog)
    """
    examples: List[TrainingExample] = []
    for inst in train_instances:
        window = window_for_instance(params, inst)
        examples.extend(generate_examples(inst, params.inventory, params.vocab, hp, window=window))
    if not examples:
        raise ConfigError("No training examples: the training set is empty or unlabeled")

    data = examples_to_batch(examples)
    n = len(data)
    rng = SeededRng(hp.seed).child(1)
    state = OptimizerState.zeros_like(params)
    log = TrainingLog()

    if verbose:
        print("\n" + "=" * 60)
        print(f"Training on {len(train_instances)} instances ({n} examples), "
              f"validating on {len(val_instances)}")
        print("=" * 60)

    best_params = params.copy()
    best_metric = -np.inf
    since_best = 0
    start = time.perf_counter()
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    try:
        for epoch in range(1, hp.max_epochs + 1):
            order = rng.permutation(n)
            total_loss = 0.0
            for batch_no, begin in enumerate(range(0, n, hp.batch_size)):
                batch = data.take(order[begin:begin + hp.batch_size])
                batch.left_ids = drop_words(batch.left_ids, hp.word_dropout, rng)
                batch.right_ids = drop_words(batch.right_ids, hp.word_dropout, rng)
                masks = draw_masks(len(batch), params, hp, rng)

                loss, grads = batch_gradients(params, batch, masks, executor, threads)
                if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise DivergenceError(f"Non-finite loss or gradient at epoch {epoch}, batch {batch_no + 1}")
                scale = 1.0 / len(batch)
                for g in grads.values():
                    g *= scale
                rmsprop_step(params, grads, state, hp)
                total_loss += loss

            mean_loss = total_loss / n
            val_f = _validation_f(params, val_instances, threads) if val_instances else float("nan")
            elapsed = time.perf_counter() - start if hp.log_timing else 0.0
            log.records.append(EpochRecord(epoch, mean_loss, val_f, elapsed))
            if verbose:
                print(f"  Epoch {epoch:3d}: loss={mean_loss:.5f}  val_F={val_f:.4f}  ({elapsed:.1f}s)")

            metric = val_f if val_instances else -mean_loss
            if metric > best_metric:
                best_metric = metric
                best_params = params.copy()
                log.best_epoch = epoch
                since_best = 0
            else:
                since_best += 1
            if since_best >= hp.patience:
                if verbose:
                    print(f"  Stopping: no improvement for {since_best} epoch(s)")
                break
    finally:
        if executor is not None:
            executor.shutdown()

    if keep_last:
        log.best_epoch = len(log.records)
    if verbose:
        print(f"  Best epoch: {log.best_epoch}")
    return (params if keep_last else best_params), log


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    params: NetworkParams
    log: TrainingLog
    refit_log: Optional[TrainingLog] = None


def fit_model(
    instances: List[DisambiguationInstance],
    inventory: SenseInventory,
    hp: HyperParams,
    mode: str = "standard",
    glove_path: Optional[str] = None,
    threads: int = 1,
    verbose: bool = True,
) -> FitResult:
    """
    Full training pipeline: vocabulary, word table, validation split, training
    and (with hp.refit_full) retraining on all data for the selected epoch count.

    Args:
        instances: Labeled training instances
        inventory: Sense inventory built from the training data
        hp: Hyperparameters
        mode: Architecture mode
        glove_path: GloVe file (required when hp.word_init == "glove")
        threads: Worker threads per batch
        verbose: Print progress

    Returns:
        FitResult with the selected parameters and the training log(s)
    """
    hp = hp.validate()
    if hp.word_init == "glove" and not glove_path:
        raise ConfigError("word_init=glove needs a GloVe file (glove_path)")
    variant = ArchVariant(mode, hp.left_context, hp.right_context, hp.seed)

    if verbose:
        print("\n" + "=" * 60)
        print(f"Fitting {mode} network (seed {hp.seed})")
        print("=" * 60)
        print("\n[1/3] Building vocabulary and word embeddings...")
    vocab = build_vocab(instances)
    rng = SeededRng(hp.seed)
    word_table = load_glove(glove_path, vocab, hp.embedding_size, rng) if hp.word_init == "glove" else None
    params = build_network(vocab, inventory, hp, rng, variant=variant, word_table=word_table)
    initial = params.copy() if hp.refit_full else None
    if verbose:
        print(f"  Vocabulary: {len(vocab)} tokens (incl. PAD), senses: {len(inventory)}")

    if verbose:
        print("\n[2/3] Splitting validation data...")
    train_set, val_set = split_validation(instances, hp.validation_fraction, SeededRng(hp.seed).child(2))
    if verbose:
        print(f"  Train: {len(train_set)}  Validation: {len(val_set)}")
        print("\n[3/3] Training...")
    best, log = train(train_set, val_set, params, hp, threads=threads, verbose=verbose)

    if not hp.refit_full:
        return FitResult(best, log)

    epochs = max(1, log.best_epoch)
    if verbose:
        print(f"\nRefitting on all {len(instances)} instances for {epochs} epoch(s)...")
    refit_hp = hp.with_overrides(max_epochs=epochs, patience=epochs)
    refit, refit_log = train(instances, [], initial, refit_hp, threads=threads, verbose=verbose, keep_last=True)
    return FitResult(refit, log, refit_log)
