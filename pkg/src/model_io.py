"""
Model file reader/writer.

Layout (little-endian; full description in docs/MODEL_FORMAT.md):
    magic "SBW1" | version u8
    header u32 x 6: d, |V|, sense count, hidden, L, R
    extension u32 x 3: fc size, lexelt count, LSTM input dim
    variant: mode u8, shuffle seed u64
    vocab tokens (ids 1..|V|-1): u32 byte length + UTF-8
    inventory per lexelt: lexelt string, u32 n, n sense strings
    weight blocks in NetworkParams.arrays() order, row-major float32
"""

import struct
from typing import List

import numpy as np

from .embeddings import PAD_ID, EmbeddingTable, SenseInventory, Vocabulary
from .errors import CorruptModelError, ModelFormatError
from .model import MODES, ArchVariant, DenseParams, HeadParams, LstmParams, NetworkParams

MAGIC = b"SBW1"
FORMAT_VERSION = 1


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModelError(f"{self.path}: file truncated at byte {len(self.data)} (needed {self.pos + n})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptModelError(f"{self.path}: invalid UTF-8 string ({e})")

    def floats(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)


def _string(value: str) -> bytes:
    encoded = value.encode("utf-8")
    return struct.pack("<I", len(encoded)) + encoded


def save_model(params: NetworkParams, path: str) -> str:
    """
    Write a model file (weights stored as float32).

    Returns:
        The path written
    """
    variant = params.variant
    inventory = params.inventory
    input_dim = params.left.input_dim if isinstance(params.left, LstmParams) else 1

    chunks: List[bytes] = [
        MAGIC,
        struct.pack("<B", FORMAT_VERSION),
        struct.pack(
            "<6I", params.embedding_size, len(params.vocab), len(inventory),
            params.hidden_size, variant.left_context, variant.right_context,
        ),
        struct.pack("<3I", params.fc_size, len(inventory.lexelts), input_dim),
        struct.pack("<BQ", MODES.index(variant.mode), variant.shuffle_seed),
    ]
    for idx in range(1, len(params.vocab)):
        chunks.append(_string(params.vocab.token(idx)))
    for lexelt in inventory.lexelts:
        senses = inventory.senses(lexelt)
        chunks.append(_string(lexelt))
        chunks.append(struct.pack("<I", len(senses)))
        chunks.extend(_string(s) for s in senses)
    for arr in params.arrays().values():
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    with open(path, "wb") as f:
        f.write(b"".join(chunks))
    return path


def load_model(path: str) -> NetworkParams:
    """
    Read a model file written by save_model.

    Raises:
        ModelFormatError: bad magic or unsupported version
        CorruptModelError: truncated file or trailing bytes
    """
    with open(path, "rb") as f:
        reader = _Reader(f.read(), path)

    if reader.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    (version,) = reader.unpack("<B")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version} (expected {FORMAT_VERSION})")

    d, vocab_size, sense_count, hidden, L, R = reader.unpack("<6I")
    fc_size, lexelt_count, input_dim = reader.unpack("<3I")
    mode_code, shuffle_seed = reader.unpack("<BQ")
    if mode_code >= len(MODES):
        raise ModelFormatError(f"{path}: unknown architecture mode code {mode_code}")
    variant = ArchVariant(MODES[mode_code], L, R, shuffle_seed)

    vocab = Vocabulary(reader.string() for _ in range(vocab_size - 1))
    if len(vocab) != vocab_size:
        raise CorruptModelError(f"{path}: duplicate vocabulary tokens")

    candidates = {}
    for _ in range(lexelt_count):
        lexelt = reader.string()
        (n,) = reader.unpack("<I")
        candidates[lexelt] = [reader.string() for _ in range(n)]
    inventory = SenseInventory(candidates)
    if len(inventory) != sense_count:
        raise CorruptModelError(f"{path}: inventory has {len(inventory)} senses, header says {sense_count}")

    word_table = EmbeddingTable(reader.floats((d, vocab_size)), "word", frozenset({PAD_ID}))
    sense_table = EmbeddingTable(reader.floats((d, sense_count)), "sense")
    if variant.mode == "fc":
        left = DenseParams(reader.floats((hidden, L)), reader.floats((hidden,)))
        right = DenseParams(reader.floats((hidden, R)), reader.floats((hidden,)))
    else:
        left = LstmParams(reader.floats((4 * hidden, input_dim)), reader.floats((4 * hidden, hidden)),
                          reader.floats((4 * hidden,)))
        right = LstmParams(reader.floats((4 * hidden, input_dim)), reader.floats((4 * hidden, hidden)),
                           reader.floats((4 * hidden,)))
    head = HeadParams(
        w_hidden=reader.floats((fc_size, 2 * hidden)),
        b_hidden=reader.floats((fc_size,)),
        w_out=reader.floats((1, fc_size)),
        b_out=reader.floats((1,)),
    )
    if reader.pos != len(reader.data):
        raise CorruptModelError(f"{path}: {len(reader.data) - reader.pos} unexpected trailing bytes")

    return NetworkParams(vocab, inventory, word_table, sense_table, left, right, head, variant)


def quantize(params: NetworkParams) -> NetworkParams:
    """Copy of params with every weight rounded through float32, as a save/load would."""
    rounded = params.copy()
    for arr in rounded.arrays().values():
        arr[...] = arr.astype(np.float32).astype(np.float64)
    return rounded
