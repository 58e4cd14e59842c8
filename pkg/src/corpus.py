"""
Corpus Module
Reads SensEval-3 lexical-sample markup and answer keys, applies the
preprocessing (lower-casing, number removal), builds the training vocabulary
and cuts fixed-size context windows around each target occurrence.

Markup handled:
    <lexelt item="cold.a"> <instance id="..."> <answer instance="..." senseid="..."/>
    <context> ... <head>cold</head> ... </context> </instance> </lexelt>
Answer keys: `lexelt instance-id sense-id [sense-id ...]` per line.
"""

import hashlib
import html
import re
import string
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
import pandas as pd

from .embeddings import PAD_ID, SenseInventory, Vocabulary
from .errors import ConfigError, CorpusParseError, InventoryError
from .numkit import SeededRng

LEXELT_RE = re.compile(r'<lexelt\s+item="([^"]+)"[^>]*>(.*?)</lexelt>', re.DOTALL)
INSTANCE_RE = re.compile(r'<instance\s+id="([^"]+)"[^>]*>(.*?)</instance>', re.DOTALL)
ANSWER_RE = re.compile(r'<answer\s+instance="([^"]+)"\s+senseid="([^"]*)"\s*/>')
CONTEXT_RE = re.compile(r"<context>(.*?)</context>", re.DOTALL)
HEAD_RE = re.compile(r"<head>(.*?)</head>", re.DOTALL)
TAG_RE = re.compile(r"<[^>]+>")
NUMBER_RE = re.compile(r"^[\d.,]*\d[\d.,]*$")

PUNCTUATION = string.punctuation + "‘’“”–—"


@dataclass
class DisambiguationInstance:
    """One labeled (or unlabeled) occurrence of an ambiguous word."""
    instance_id: str
    lexelt: str
    left_tokens: List[str]
    right_tokens: List[str]
    target: str = ""
    gold: Set[str] = field(default_factory=set)

    @property
    def pos(self) -> str:
        return lexelt_pos(self.lexelt)


@dataclass
class ContextWindow:
    """Fixed-length word ids: left = positions -L..-1, right = +1..+R."""
    left_ids: np.ndarray
    right_ids: np.ndarray

    @property
    def L(self) -> int:
        return len(self.left_ids)

    @property
    def R(self) -> int:
        return len(self.right_ids)


def lexelt_pos(lexelt: str) -> str:
    """POS letter of a lexelt key such as 'cold.a'."""
    return lexelt.rsplit(".", 1)[-1] if "." in lexelt else "?"


def tokenize(text: str) -> List[str]:
    """Split on whitespace and strip leading/trailing punctuation from each token."""
    tokens = []
    for raw in text.split():
        token = raw.strip(PUNCTUATION)
        if token:
            tokens.append(token)
    return tokens


def preprocess(tokens: Iterable[str]) -> List[str]:
    """Lower-case tokens and drop purely numeric ones ("12", "3.14", "1,000")."""
    return [t.lower() for t in tokens if not NUMBER_RE.match(t)]


def _context_tokens(text: str) -> List[str]:
    return preprocess(tokenize(html.unescape(TAG_RE.sub(" ", text))))


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def parse_answer_key(path: str, inventory: Optional[SenseInventory] = None) -> Dict[str, Tuple[str, Set[str]]]:
    """
    Read an answer key.

    Args:
        path: Key file with `lexelt instance-id sense-id [sense-id ...]` lines
        inventory: When given, every lexelt must belong to it

    Returns:
        Dict of instance_id -> (lexelt, set of gold sense ids)
    """
    key: Dict[str, Tuple[str, Set[str]]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise CorpusParseError("expected 'lexelt instance-id sense-id'", path=path, line=line_no)
            lexelt, instance_id, senses = parts[0], parts[1], parts[2:]
            if inventory is not None and lexelt not in inventory:
                raise InventoryError(f"{path}:{line_no}: unknown lexelt {lexelt!r} in answer key")
            _, gold = key.setdefault(instance_id, (lexelt, set()))
            gold.update(senses)
    return key


def parse_lexical_sample(
    path: str,
    key_path: Optional[str] = None,
    inventory: Optional[SenseInventory] = None,
    verbose: bool = True,
) -> Tuple[SenseInventory, List[DisambiguationInstance]]:
    """
    Parse a SensEval-3 lexical-sample file.

    Gold senses come from inline <answer> records and, if key_path is given,
    from the answer key. Instances without <head> markup are skipped with a
    diagnostic.

    Args:
        path: Lexical-sample markup file
        key_path: Optional separate answer key
        inventory: Existing inventory (test data); when omitted the inventory is
            built from the gold senses observed in this file

    Returns:
        Tuple of (SenseInventory, instances in file order)
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()

    instances: List[DisambiguationInstance] = []
    rejected: List[str] = []

    for lex_match in LEXELT_RE.finditer(text):
        lexelt = lex_match.group(1)
        body_offset = lex_match.start(2)
        for inst_match in INSTANCE_RE.finditer(lex_match.group(2)):
            instance_id, body = inst_match.group(1), inst_match.group(2)
            context = CONTEXT_RE.search(body)
            head = HEAD_RE.search(context.group(1)) if context else None
            if head is None:
                line = _line_of(text, body_offset + inst_match.start())
                rejected.append(f"{path}:{line}: instance {instance_id} has no <head> target markup")
                continue

            ctx = context.group(1)
            # Only the first <head> is the target; later ones are ordinary context
            target_tokens = _context_tokens(head.group(1))
            gold = {sense for inst_ref, sense in ANSWER_RE.findall(body) if sense}
            instances.append(DisambiguationInstance(
                instance_id=instance_id,
                lexelt=lexelt,
                left_tokens=_context_tokens(ctx[:head.start()]),
                right_tokens=_context_tokens(ctx[head.end():]),
                target=target_tokens[0] if target_tokens else "",
                gold=gold,
            ))

    for message in rejected:
        print(f"  Warning: {message}")

    if key_path:
        key = parse_answer_key(key_path, inventory)
        lexelts_in_file = {inst.lexelt for inst in instances}
        for instance_id, (lexelt, senses) in key.items():
            if inventory is None and lexelt not in lexelts_in_file:
                raise InventoryError(f"{key_path}: unknown lexelt {lexelt!r} in answer key")
        for inst in instances:
            if inst.instance_id in key:
                inst.gold |= key[inst.instance_id][1]

    if inventory is None:
        candidates: Dict[str, Set[str]] = {}
        for inst in instances:
            candidates.setdefault(inst.lexelt, set()).update(inst.gold)
        inventory = SenseInventory({lex: sorted(s) for lex, s in candidates.items()})
    else:
        unknown = sorted({inst.lexelt for inst in instances if inst.lexelt not in inventory})
        if unknown:
            print(f"  Warning: {len(unknown)} lexelt(s) not in the inventory were dropped: {unknown[:5]}")
            instances = [inst for inst in instances if inst.lexelt in inventory]

    if verbose:
        print(f"  Parsed {len(instances)} instances over {len(inventory)} senses "
              f"of {len(inventory.lexelts)} lexelts from {path} ({len(rejected)} rejected)")
    return inventory, instances


def write_lexical_sample(instances: List[DisambiguationInstance], path: str, with_answers: bool = True) -> str:
    """Serialize instances back to lexical-sample markup (tokens space-joined)."""
    by_lexelt: Dict[str, List[DisambiguationInstance]] = {}
    for inst in instances:
        by_lexelt.setdefault(inst.lexelt, []).append(inst)

    lines = ['<corpus lang="english">']
    for lexelt, group in by_lexelt.items():
        lines.append(f'<lexelt item="{html.escape(lexelt)}">')
        for inst in group:
            lines.append(f'<instance id="{html.escape(inst.instance_id)}">')
            if with_answers:
                for sense in sorted(inst.gold):
                    lines.append(f'<answer instance="{html.escape(inst.instance_id)}" senseid="{html.escape(sense)}"/>')
            left = html.escape(" ".join(inst.left_tokens))
            right = html.escape(" ".join(inst.right_tokens))
            lines.append("<context>")
            lines.append(f"{left} <head>{html.escape(inst.target)}</head> {right}")
            lines.append("</context>")
            lines.append("</instance>")
        lines.append("</lexelt>")
    lines.append("</corpus>")

    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return path


def write_answer_key(instances: List[DisambiguationInstance], path: str) -> str:
    """Write `lexelt instance-id sense-id...` lines for labeled instances."""
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            if inst.gold:
                f.write(f"{inst.lexelt} {inst.instance_id} {' '.join(sorted(inst.gold))}\n")
    return path


def build_vocab(instances: Iterable[DisambiguationInstance]) -> Vocabulary:
    """Vocabulary over all distinct context tokens (sorted), plus PAD at id 0."""
    tokens: Set[str] = set()
    for inst in instances:
        tokens.update(inst.left_tokens)
        tokens.update(inst.right_tokens)
    return Vocabulary(sorted(tokens))


def make_window(inst: DisambiguationInstance, vocab: Vocabulary, L: int, R: int) -> ContextWindow:
    """
    Fixed-size window around the target.

    Keeps the L nearest tokens on the left and the R nearest on the right;
    padding (id 0) fills the positions farthest from the target.
    """
    if L <= 0 or R <= 0:
        raise ConfigError(f"context sizes must be positive, got L={L}, R={R}")
    left = vocab.ids(inst.left_tokens[-L:])
    right = vocab.ids(inst.right_tokens[:R])
    left_ids = np.zeros(L, dtype=np.int64)
    right_ids = np.zeros(R, dtype=np.int64)
    if left:
        left_ids[L - len(left):] = left
    right_ids[:len(right)] = right
    return ContextWindow(left_ids, right_ids)


def instance_seed(seed: int, instance_id: str) -> int:
    """Stable 64-bit seed for one instance, independent of processing order."""
    digest = hashlib.sha256(f"{seed}|{instance_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def shuffle_window(window: ContextWindow, rng: SeededRng) -> ContextWindow:
    """Permute the non-PAD ids of a window across both sides; PAD slots stay put."""
    joined = np.concatenate([window.left_ids, window.right_ids])
    slots = np.flatnonzero(joined != PAD_ID)
    joined[slots] = joined[slots[rng.permutation(len(slots))]]
    return ContextWindow(joined[:window.L].copy(), joined[window.L:].copy())


def split_validation(
    instances: List[DisambiguationInstance],
    fraction: float,
    rng: SeededRng,
) -> Tuple[List[DisambiguationInstance], List[DisambiguationInstance]]:
    """
    Stratified random train/validation split.

    Each lexelt with at least 2 instances sends round(fraction * n) of them
    (at least 1, at most n - 1) to validation. Lexelts are visited in sorted
    order so the split only depends on the seed and the data. Unlabeled
    instances cannot be scored and always stay in the training part.

    Returns:
        Tuple of (train, validation), both in input order
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"validation fraction must be in (0, 1), got {fraction}")

    by_lexelt: Dict[str, List[int]] = {}
    for i, inst in enumerate(instances):
        if inst.gold:
            by_lexelt.setdefault(inst.lexelt, []).append(i)

    held_out: Set[int] = set()
    for lexelt in sorted(by_lexelt):
        members = by_lexelt[lexelt]
        n = len(members)
        if n < 2:
            continue
        n_val = min(n - 1, max(1, int(np.floor(fraction * n + 0.5))))
        order = rng.permutation(n)
        held_out.update(members[j] for j in order[:n_val])

    train = [inst for i, inst in enumerate(instances) if i not in held_out]
    validation = [inst for i, inst in enumerate(instances) if i in held_out]
    return train, validation


def inventory_stats(inventory: SenseInventory) -> pd.DataFrame:
    """
    Word counts and mean candidate-sense counts per POS, plus a Total row.

    Returns:
        DataFrame indexed by POS with columns 'words' and 'avg_senses'
    """
    rows = [{"lexelt": lex, "pos": lexelt_pos(lex), "senses": len(senses)}
            for lex, senses in inventory.candidates.items()]
    df = pd.DataFrame(rows, columns=["lexelt", "pos", "senses"])
    stats = df.groupby("pos").agg(words=("lexelt", "count"), avg_senses=("senses", "mean"))
    total = pd.DataFrame(
        {"words": [len(df)], "avg_senses": [df["senses"].mean() if len(df) else 0.0]},
        index=["total"],
    )
    stats = pd.concat([stats, total])
    stats["avg_senses"] = stats["avg_senses"].round(2)
    return stats
