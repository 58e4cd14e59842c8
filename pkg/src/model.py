"""
Model Module
Forward computation of the single sense classifier shared by all lexelts.

For one (sense, context window) pair:
1. Cosine layer - cosine of the sense embedding with each context word embedding
2. BLSTM layer - the left LSTM reads the left cosines outside-in (-L ... -1),
   the right LSTM reads the right cosines outside-in (+R ... +1)
3. Merge - concatenation of the two final hidden states
4. Hidden layer - ReLU(W_h . merge + b_h)
5. Output - sigmoid(W_out . h_cl + b_out), the score of the examined sense

Everything is batched over a leading example axis; single-example helpers
wrap a batch of one.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .config import HyperParams
from .corpus import ContextWindow, DisambiguationInstance, instance_seed, make_window, shuffle_window
from .embeddings import EmbeddingTable, SenseInventory, Vocabulary, init_sense_table, init_word_table
from .errors import ConfigError, ShapeError
from .numkit import SeededRng, relu, sigmoid, tanh_

MODES = ("standard", "reversed", "shuffled", "fc")
FORGET_BIAS = 1.0


@dataclass(frozen=True)
class ArchVariant:
    """Architecture switch; exactly one mode is active."""
    mode: str = "standard"
    left_context: int = 15
    right_context: int = 15
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"Unknown architecture mode {self.mode!r}; expected one of {MODES}")
        if self.left_context <= 0 or self.right_context <= 0:
            raise ConfigError("context sizes must be positive")


@dataclass
class LstmParams:
    """Gate blocks stacked in the order input, forget, output, candidate."""
    w_input: np.ndarray      # (4H, I)
    w_recurrent: np.ndarray  # (4H, H)
    bias: np.ndarray         # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_recurrent.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_input.shape[1]

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"w_input": self.w_input, "w_recurrent": self.w_recurrent, "bias": self.bias}

    def copy(self) -> "LstmParams":
        return LstmParams(self.w_input.copy(), self.w_recurrent.copy(), self.bias.copy())


@dataclass
class DenseParams:
    """Fully-connected side encoder used instead of an LSTM (fc variant)."""
    weight: np.ndarray  # (H, T)
    bias: np.ndarray    # (H,)

    @property
    def hidden(self) -> int:
        return self.weight.shape[0]

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def copy(self) -> "DenseParams":
        return DenseParams(self.weight.copy(), self.bias.copy())


SideParams = Union[LstmParams, DenseParams]


@dataclass
class HeadParams:
    w_hidden: np.ndarray  # (F, 2H)
    b_hidden: np.ndarray  # (F,)
    w_out: np.ndarray     # (1, F)
    b_out: np.ndarray     # (1,)

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"w_hidden": self.w_hidden, "b_hidden": self.b_hidden, "w_out": self.w_out, "b_out": self.b_out}

    def copy(self) -> "HeadParams":
        return HeadParams(self.w_hidden.copy(), self.b_hidden.copy(), self.w_out.copy(), self.b_out.copy())


@dataclass
class NetworkParams:
    """All trainable weights. There are no per-word parameters."""
    vocab: Vocabulary
    inventory: SenseInventory
    word_table: EmbeddingTable
    sense_table: EmbeddingTable
    left: SideParams
    right: SideParams
    head: HeadParams
    variant: ArchVariant = field(default_factory=ArchVariant)

    @property
    def embedding_size(self) -> int:
        return self.word_table.dim

    @property
    def hidden_size(self) -> int:
        return self.left.hidden

    @property
    def fc_size(self) -> int:
        return self.head.w_hidden.shape[0]

    def arrays(self) -> Dict[str, np.ndarray]:
        """Every trainable array by name, in serialization order. Values are live views."""
        named = {"word_table": self.word_table.matrix, "sense_table": self.sense_table.matrix}
        for prefix, side in (("left", self.left), ("right", self.right)):
            for name, arr in side.arrays().items():
                named[f"{prefix}.{name}"] = arr
        for name, arr in self.head.arrays().items():
            named[f"head.{name}"] = arr
        return named

    def signature(self) -> Tuple:
        return tuple((name, arr.shape) for name, arr in self.arrays().items()) + (self.variant,)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            vocab=self.vocab,
            inventory=self.inventory,
            word_table=self.word_table.copy(),
            sense_table=self.sense_table.copy(),
            left=self.left.copy(),
            right=self.right.copy(),
            head=self.head.copy(),
            variant=self.variant,
        )


@dataclass
class ExampleBatch:
    """Stacked (sense, window) pairs; targets only for training."""
    sense_cols: np.ndarray  # (B,)
    left_ids: np.ndarray    # (B, L)
    right_ids: np.ndarray   # (B, R)
    targets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.sense_cols)

    def take(self, idx) -> "ExampleBatch":
        return ExampleBatch(
            self.sense_cols[idx], self.left_ids[idx], self.right_ids[idx],
            None if self.targets is None else self.targets[idx],
        )


@dataclass
class DropoutMasks:
    """Inverted-dropout masks of one training batch."""
    sense: np.ndarray  # (B, d)
    left: np.ndarray   # (B, L, d)
    right: np.ndarray  # (B, R, d)
    merge: np.ndarray  # (B, 2H)
    fc: np.ndarray     # (B, F)

    def take(self, idx) -> "DropoutMasks":
        return DropoutMasks(self.sense[idx], self.left[idx], self.right[idx], self.merge[idx], self.fc[idx])


@dataclass
class SideTrace:
    """Activations of one directional encoder, in traversal order."""
    order: np.ndarray                   # window position visited at each step
    inputs: np.ndarray                  # (B, T, I)
    output: np.ndarray                  # (B, H)
    gates: Optional[np.ndarray] = None  # (B, T, 4H) activated i, f, o, g
    cells: Optional[np.ndarray] = None  # (B, T, H)
    hiddens: Optional[np.ndarray] = None
    pre: Optional[np.ndarray] = None    # (B, H) dense pre-activation


@dataclass
class ForwardTrace:
    """Everything the backward pass needs from one forward pass."""
    signature: Tuple
    batch: ExampleBatch
    masks: Optional[DropoutMasks]
    sense_vecs: np.ndarray   # (B, d) after dropout
    left_vecs: np.ndarray    # (B, L, d)
    right_vecs: np.ndarray   # (B, R, d)
    left_cos: np.ndarray     # (B, L) window order
    right_cos: np.ndarray    # (B, R)
    sense_norms: np.ndarray
    left_norms: np.ndarray
    right_norms: np.ndarray
    left_side: SideTrace
    right_side: SideTrace
    encoding: np.ndarray     # (B, 2H) before merge dropout
    merged: np.ndarray       # (B, 2H) after merge dropout
    hidden_pre: np.ndarray   # (B, F)
    h_cl: np.ndarray         # (B, F) after ReLU and dropout
    logits: np.ndarray       # (B,)
    y: np.ndarray            # (B,)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def _glorot(rng: SeededRng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def init_lstm(hidden: int, input_dim: int, rng: SeededRng) -> LstmParams:
    bias = np.zeros(4 * hidden)
    bias[hidden:2 * hidden] = FORGET_BIAS
    return LstmParams(
        w_input=_glorot(rng, (4 * hidden, input_dim), input_dim, hidden),
        w_recurrent=_glorot(rng, (4 * hidden, hidden), hidden, hidden),
        bias=bias,
    )


def init_dense(hidden: int, length: int, rng: SeededRng) -> DenseParams:
    return DenseParams(_glorot(rng, (hidden, length), length, hidden), np.zeros(hidden))


def init_head(enc_size: int, fc_size: int, rng: SeededRng) -> HeadParams:
    return HeadParams(
        w_hidden=_glorot(rng, (fc_size, enc_size), enc_size, fc_size),
        b_hidden=np.zeros(fc_size),
        w_out=_glorot(rng, (1, fc_size), fc_size, 1),
        b_out=np.zeros(1),
    )


def build_network(
    vocab: Vocabulary,
    inventory: SenseInventory,
    hp: HyperParams,
    rng: SeededRng,
    variant: Optional[ArchVariant] = None,
    word_table: Optional[EmbeddingTable] = None,
) -> NetworkParams:
    """
    Create a freshly initialized network.

    Args:
        vocab: Training vocabulary
        inventory: Sense inventory (one sense-table column per sense)
        hp: Hyperparameters (sizes)
        rng: Initialization stream
        variant: Architecture variant (standard with hp context sizes if omitted)
        word_table: Pre-loaded word table (e.g. from GloVe); random when omitted

    Returns:
        NetworkParams
    """
    if variant is None:
        variant = ArchVariant("standard", hp.left_context, hp.right_context, hp.seed)
    d, H = hp.embedding_size, hp.hidden_size

    if word_table is None:
        word_table = init_word_table(vocab, d, rng)
    elif word_table.dim != d or word_table.width != len(vocab):
        raise ShapeError(f"word table {word_table.matrix.shape} does not match d={d}, |V|={len(vocab)}")
    sense_table = init_sense_table(inventory, d, rng)

    if variant.mode == "fc":
        left: SideParams = init_dense(H, variant.left_context, rng)
        right: SideParams = init_dense(H, variant.right_context, rng)
    else:
        left = init_lstm(H, 1, rng)
        right = init_lstm(H, 1, rng)

    return NetworkParams(
        vocab=vocab,
        inventory=inventory,
        word_table=word_table,
        sense_table=sense_table,
        left=left,
        right=right,
        head=init_head(2 * H, hp.fc_size, rng),
        variant=variant,
    )


# ---------------------------------------------------------------------------
# Forward pieces
# ---------------------------------------------------------------------------

def batched_cosine(sense: np.ndarray, words: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Cosines between each row's sense vector and its word vectors.

    Args:
        sense: (B, d)
        words: (B, T, d)

    Returns:
        Tuple of (cos (B, T), sense norms (B,), word norms (B, T)); zero norm gives cos 0
    """
    if sense.shape[-1] != words.shape[-1]:
        raise ShapeError(f"sense dim {sense.shape[-1]} != word dim {words.shape[-1]}")
    sense_norms = np.linalg.norm(sense, axis=-1)
    word_norms = np.linalg.norm(words, axis=-1)
    dots = np.einsum("btd,bd->bt", words, sense)
    denom = word_norms * sense_norms[:, None]
    cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    np.clip(cos, -1.0, 1.0, out=cos)
    return cos, sense_norms, word_norms


def cosine_sequence(sense: np.ndarray, window: ContextWindow, word_table: EmbeddingTable) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cosine of a sense vector with every window position (PAD positions give 0).

    Single-window form of the batched_cosine calls inside forward.
    """
    if sense.shape != (word_table.dim,):
        raise ShapeError(f"sense vector {sense.shape} does not match word dim {word_table.dim}")
    left_vecs = word_table.matrix[:, window.left_ids].T[None]
    right_vecs = word_table.matrix[:, window.right_ids].T[None]
    left, _, _ = batched_cosine(sense[None], left_vecs)
    right, _, _ = batched_cosine(sense[None], right_vecs)
    return left[0], right[0]


def _lstm_gates(p: LstmParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    H = p.hidden
    z = x @ p.w_input.T + h_prev @ p.w_recurrent.T + p.bias
    gates = np.empty_like(z)
    gates[..., :3 * H] = sigmoid(z[..., :3 * H])
    gates[..., 3 * H:] = tanh_(z[..., 3 * H:])
    return gates


def lstm_step(p: LstmParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    One LSTM step (forget gate, no peepholes).

    i, f, o = sigmoid(W x + U h_prev + b); g = tanh(...);
    c = f * c_prev + i * g; h = o * tanh(c)
    """
    H = p.hidden
    gates = _lstm_gates(p, x, h_prev)
    i, f, o, g = (gates[..., k * H:(k + 1) * H] for k in range(4))
    c = f * c_prev + i * g
    return o * tanh_(c), c


def run_lstm(p: LstmParams, seq: np.ndarray) -> SideTrace:
    """
    Run an LSTM over sequences from zero initial state.

    Args:
        p: LSTM parameters
        seq: (B, T) scalar inputs or (B, T, I)

    Returns:
        SideTrace with per-step gates, cells and hidden states (order = identity)
    """
    if seq.ndim == 2:
        seq = seq[..., None]
    B, T, I = seq.shape
    if I != p.input_dim:
        raise ShapeError(f"LSTM expects input dim {p.input_dim}, got {I}")
    H = p.hidden
    gates = np.zeros((B, T, 4 * H))
    cells = np.zeros((B, T, H))
    hiddens = np.zeros((B, T, H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        step = _lstm_gates(p, seq[:, t], h)
        c = step[:, H:2 * H] * c + step[:, :H] * step[:, 3 * H:]
        h = step[:, 2 * H:3 * H] * tanh_(c)
        gates[:, t], cells[:, t], hiddens[:, t] = step, c, h
    return SideTrace(order=np.arange(T), inputs=seq, output=h, gates=gates, cells=cells, hiddens=hiddens)


def run_dense(p: DenseParams, seq: np.ndarray) -> SideTrace:
    """Dense side encoder: ReLU(W x + b) over the whole sequence at once."""
    if seq.shape[1] != p.weight.shape[1]:
        raise ShapeError(f"dense encoder expects length {p.weight.shape[1]}, got {seq.shape[1]}")
    pre = seq @ p.weight.T + p.bias
    return SideTrace(order=np.arange(seq.shape[1]), inputs=seq[..., None], output=relu(pre), pre=pre)


def traversal_order(variant: ArchVariant, side: str, length: int) -> np.ndarray:
    """
    Window positions in the order a side encoder reads them.

    Standard: both sides run outside-in and end next to the target.
    Reversed: both run inside-out.
    """
    positions = np.arange(length)
    outside_in = positions if side == "left" else positions[::-1]
    if variant.mode == "reversed":
        return outside_in[::-1].copy()
    return outside_in.copy()


def _encode_side(side: SideParams, cos: np.ndarray, order: np.ndarray) -> SideTrace:
    seq = cos[:, order]
    trace = run_dense(side, seq) if isinstance(side, DenseParams) else run_lstm(side, seq)
    trace.order = order
    return trace


def _check_lengths(params: NetworkParams, L: int, R: int):
    if (L, R) != (params.variant.left_context, params.variant.right_context):
        raise ShapeError(
            f"window {L}/{R} does not match configured context "
            f"{params.variant.left_context}/{params.variant.right_context}"
        )


def blstm_encode(params: NetworkParams, left_seq: np.ndarray, right_seq: np.ndarray) -> np.ndarray:
    """
    Concatenated final states [h_left ; h_right] for cosine sequences.

    Accepts single sequences (L,), (R,) or batches (B, L), (B, R).
    """
    single = left_seq.ndim == 1
    left_seq = np.atleast_2d(left_seq)
    right_seq = np.atleast_2d(right_seq)
    _check_lengths(params, left_seq.shape[1], right_seq.shape[1])
    left = _encode_side(params.left, left_seq, traversal_order(params.variant, "left", left_seq.shape[1]))
    right = _encode_side(params.right, right_seq, traversal_order(params.variant, "right", right_seq.shape[1]))
    enc = np.concatenate([left.output, right.output], axis=-1)
    return enc[0] if single else enc


def head_forward(head: HeadParams, enc: np.ndarray) -> Tuple[np.ndarray, Union[float, np.ndarray]]:
    """h_cl = ReLU(W_h enc + b_h); y = sigmoid(W_out h_cl + b_out)."""
    if enc.shape[-1] != head.w_hidden.shape[1]:
        raise ShapeError(f"encoding size {enc.shape[-1]} != head input {head.w_hidden.shape[1]}")
    h_cl = relu(enc @ head.w_hidden.T + head.b_hidden)
    y = sigmoid(h_cl @ head.w_out[0] + head.b_out[0])
    return h_cl, y


def forward(
    params: NetworkParams,
    batch: ExampleBatch,
    masks: Optional[DropoutMasks] = None,
    record: bool = False,
) -> Tuple[np.ndarray, Optional[ForwardTrace]]:
    """
    Score a batch of (sense, window) pairs.

    Args:
        params: Network parameters
        batch: Stacked sense columns and window ids
        masks: Dropout masks (training only); None means inference
        record: Keep the intermediate values for backward()

    Returns:
        Tuple of (scores y (B,), trace or None)
    """
    _check_lengths(params, batch.left_ids.shape[1], batch.right_ids.shape[1])
    words = params.word_table.matrix
    sense_vecs = params.sense_table.matrix[:, batch.sense_cols].T
    left_vecs = np.moveaxis(words[:, batch.left_ids], 0, -1)
    right_vecs = np.moveaxis(words[:, batch.right_ids], 0, -1)
    if masks is not None:
        sense_vecs = sense_vecs * masks.sense
        left_vecs = left_vecs * masks.left
        right_vecs = right_vecs * masks.right

    left_cos, sense_norms, left_norms = batched_cosine(sense_vecs, left_vecs)
    right_cos, _, right_norms = batched_cosine(sense_vecs, right_vecs)

    variant = params.variant
    left_side = _encode_side(params.left, left_cos, traversal_order(variant, "left", left_cos.shape[1]))
    right_side = _encode_side(params.right, right_cos, traversal_order(variant, "right", right_cos.shape[1]))
    encoding = np.concatenate([left_side.output, right_side.output], axis=1)

    merged = encoding * masks.merge if masks is not None else encoding
    hidden_pre = merged @ params.head.w_hidden.T + params.head.b_hidden
    h_cl = relu(hidden_pre)
    if masks is not None:
        h_cl = h_cl * masks.fc
    logits = h_cl @ params.head.w_out[0] + params.head.b_out[0]
    y = sigmoid(logits)

    if not record:
        return y, None
    trace = ForwardTrace(
        signature=params.signature(),
        batch=batch,
        masks=masks,
        sense_vecs=sense_vecs,
        left_vecs=left_vecs,
        right_vecs=right_vecs,
        left_cos=left_cos,
        right_cos=right_cos,
        sense_norms=sense_norms,
        left_norms=left_norms,
        right_norms=right_norms,
        left_side=left_side,
        right_side=right_side,
        encoding=encoding,
        merged=merged,
        hidden_pre=hidden_pre,
        h_cl=h_cl,
        logits=logits,
        y=y,
    )
    return y, trace


def score_sense(
    params: NetworkParams,
    sense_col: int,
    window: ContextWindow,
    record: bool = False,
) -> Tuple[float, Optional[ForwardTrace]]:
    """
    Score one sense against one window (no dropout).

    Batch-of-one call into forward; decoding scores all candidates of an
    instance in a single forward batch instead.

    Args:
        params: Network parameters
        sense_col: Global sense column (see SenseInventory.column)
        window: Context window
        record: Return the forward trace as well

    Returns:
        Tuple of (y in (0, 1), trace or None)
    """
    if not 0 <= sense_col < params.sense_table.width:
        raise IndexError(f"sense column {sense_col} outside inventory of {params.sense_table.width}")
    batch = ExampleBatch(
        np.array([sense_col]), window.left_ids[None, :], window.right_ids[None, :]
    )
    y, trace = forward(params, batch, record=record)
    return float(y[0]), trace


def window_for_instance(params: NetworkParams, inst: DisambiguationInstance) -> ContextWindow:
    """Window of an instance under the network's variant (shuffled per instance when asked)."""
    variant = params.variant
    window = make_window(inst, params.vocab, variant.left_context, variant.right_context)
    if variant.mode == "shuffled":
        window = shuffle_window(window, SeededRng(instance_seed(variant.shuffle_seed, inst.instance_id)))
    return window
