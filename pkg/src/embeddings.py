"""
Embeddings Module
Word vocabulary, sense inventory and the two trainable lookup tables.

Tables are stored column-major in the d x v sense: column j is the vector of
word (or sense) j, so a lookup is the product of the table with a one-hot
vector. Word id 0 is reserved for PAD/UNK and its column stays zero.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, GloveFormatError, InventoryError
from .numkit import SeededRng

PAD_TOKEN = "<pad>"
PAD_ID = 0
INIT_RANGE = 0.1


class Vocabulary:
    """Bijective token <-> id map with id 0 reserved for PAD/UNK."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.id_to_token: List[str] = [PAD_TOKEN]
        self.token_to_id: Dict[str, int] = {}
        for token in tokens:
            if token not in self.token_to_id and token != PAD_TOKEN:
                self.token_to_id[token] = len(self.id_to_token)
                self.id_to_token.append(token)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id(self, token: str) -> int:
        """Id of a token; unknown tokens map to PAD_ID."""
        return self.token_to_id.get(token, PAD_ID)

    def ids(self, tokens: Iterable[str]) -> List[int]:
        return [self.token_to_id.get(t, PAD_ID) for t in tokens]

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]


class SenseInventory:
    """
    Candidate senses per lexelt and their global sense-table columns.

    Sense ids are only unique within a lexelt ("U" appears everywhere in
    SensEval keys), so a global sense is addressed by its column index.
    """

    def __init__(self, candidates: Dict[str, List[str]]):
        self.candidates: Dict[str, List[str]] = {}
        self._columns: Dict[Tuple[str, str], int] = {}
        self.column_lexelt: List[str] = []
        self.column_sense: List[str] = []
        for lexelt in sorted(candidates):
            senses = list(dict.fromkeys(candidates[lexelt]))
            if not senses:
                continue
            self.candidates[lexelt] = senses
            for sense in senses:
                self._columns[(lexelt, sense)] = len(self.column_sense)
                self.column_lexelt.append(lexelt)
                self.column_sense.append(sense)

    def __len__(self) -> int:
        """Number of senses (sense-table width)."""
        return len(self.column_sense)

    def __contains__(self, lexelt: str) -> bool:
        return lexelt in self.candidates

    @property
    def lexelts(self) -> List[str]:
        return list(self.candidates)

    def senses(self, lexelt: str) -> List[str]:
        if lexelt not in self.candidates:
            raise InventoryError(f"Unknown lexelt: {lexelt}")
        return self.candidates[lexelt]

    def column(self, lexelt: str, sense: str) -> int:
        try:
            return self._columns[(lexelt, sense)]
        except KeyError:
            raise InventoryError(f"Sense {sense!r} is not a candidate of {lexelt!r}")

    def columns(self, lexelt: str) -> List[int]:
        """Sense-table columns of a lexelt's candidates, in candidate order."""
        return [self._columns[(lexelt, s)] for s in self.senses(lexelt)]

    def lexelt_of(self, column: int) -> str:
        return self.column_lexelt[column]


@dataclass
class EmbeddingTable:
    """d x v matrix of trainable vectors."""
    matrix: np.ndarray
    kind: str  # "word" | "sense"
    frozen_columns: FrozenSet[int] = field(default_factory=frozenset)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.matrix.copy(), self.kind, self.frozen_columns)


def _lookup(table: EmbeddingTable, idx: int) -> np.ndarray:
    if not 0 <= idx < table.width:
        raise IndexError(f"{table.kind} id {idx} outside table of width {table.width}")
    return table.matrix[:, idx].copy()


def lookup_word(table: EmbeddingTable, word_id: int) -> np.ndarray:
    """
    Column word_id of the word table (equals W_w @ one_hot(word_id)).

    Single-id form of the column gather model.forward does for a whole batch.
    """
    return _lookup(table, word_id)


def lookup_sense(table: EmbeddingTable, sense_column: int) -> np.ndarray:
    """Column of the sense table (equals W_s @ one_hot(sense_column)); single-id form of the batched gather."""
    return _lookup(table, sense_column)


def init_word_table(vocab: Vocabulary, d: int, rng: SeededRng) -> EmbeddingTable:
    """Random unif(-0.1, 0.1) word table with a zero PAD column."""
    if d <= 0:
        raise ConfigError(f"embedding size must be positive, got {d}")
    matrix = rng.uniform(-INIT_RANGE, INIT_RANGE, (d, len(vocab)))
    matrix[:, PAD_ID] = 0.0
    return EmbeddingTable(matrix, "word", frozenset({PAD_ID}))


def init_sense_table(inventory: SenseInventory, d: int, rng: SeededRng) -> EmbeddingTable:
    """Sense table with every entry i.i.d. unif(-0.1, 0.1)."""
    if d <= 0:
        raise ConfigError(f"embedding size must be positive, got {d}")
    if len(inventory) == 0:
        raise ConfigError("Cannot build a sense table for an empty inventory")
    matrix = rng.uniform(-INIT_RANGE, INIT_RANGE, (d, len(inventory)))
    return EmbeddingTable(matrix, "sense")


def load_glove(path: str, vocab: Vocabulary, d: int, rng: Optional[SeededRng] = None) -> EmbeddingTable:
    """
    Build the word table from a GloVe text file.

    Vocabulary tokens found in the file get the file vector; the others keep a
    unif(-0.1, 0.1) initialization. Only lines of vocabulary tokens are
    converted to floats, but every line is checked for the field count.

    Args:
        path: GloVe file, one `token f_1 ... f_d` entry per line (UTF-8)
        vocab: Training vocabulary
        d: Expected vector length
        rng: Stream for the fallback initialization (seed 0 if omitted)

    Returns:
        Word EmbeddingTable of shape d x len(vocab)
    """
    table = init_word_table(vocab, d, rng or SeededRng(0))
    found = 0

    print(f"  Loading GloVe vectors from {path}...")
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) - 1 != d:
                raise GloveFormatError(
                    f"expected {d} values, found {len(parts) - 1}", path=path, line=line_no
                )
            idx = vocab.token_to_id.get(parts[0])
            if idx is None:
                continue
            try:
                table.matrix[:, idx] = np.array(parts[1:], dtype=np.float64)
            except ValueError as e:
                raise GloveFormatError(f"bad number ({e})", path=path, line=line_no)
            found += 1

    print(f"  Found vectors for {found}/{len(vocab) - 1} vocabulary tokens.")
    return table


def write_glove(table: EmbeddingTable, vocab: Vocabulary, path: str) -> str:
    """Write every non-PAD word column in GloVe text format (exact float repr)."""
    with open(path, "w", encoding="utf-8") as f:
        for idx in range(1, len(vocab)):
            values = " ".join(repr(float(x)) for x in table.matrix[:, idx])
            f.write(f"{vocab.token(idx)} {values}\n")
    return path
