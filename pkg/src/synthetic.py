"""
Synthetic lexical-sample corpus.

Each pseudo-lexelt has a few senses; every sense owns a pool of context words
whose pseudo-GloVe vectors cluster around a sense-specific direction. Contexts
mix pool words with shared filler words, so the sense of an instance can be
read from the cosine pattern of its window.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .corpus import DisambiguationInstance, write_answer_key, write_lexical_sample
from .embeddings import EmbeddingTable, SenseInventory, Vocabulary, write_glove
from .numkit import SeededRng

POS_CYCLE = ("n", "v", "a")


@dataclass
class SyntheticCorpus:
    instances: List[DisambiguationInstance]
    inventory: SenseInventory
    vectors: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(next(iter(self.vectors.values())))

    def write(self, out_dir: str, name: str = "synthetic") -> Dict[str, str]:
        """Materialize as lexical-sample markup, answer key and GloVe file."""
        os.makedirs(out_dir, exist_ok=True)
        vocab = Vocabulary(sorted(self.vectors))
        matrix = np.zeros((self.dim, len(vocab)))
        for token, vec in self.vectors.items():
            matrix[:, vocab.id(token)] = vec
        return {
            "train": write_lexical_sample(self.instances, os.path.join(out_dir, f"{name}.xml")),
            "key": write_answer_key(self.instances, os.path.join(out_dir, f"{name}.key")),
            "glove": write_glove(EmbeddingTable(matrix, "word"), vocab, os.path.join(out_dir, f"{name}.glove.txt")),
        }


def generate_corpus(
    seed: int = 0,
    lexelts: int = 5,
    senses: int = 3,
    instances: int = 200,
    pool_size: int = 8,
    fillers: int = 40,
    context: int = 12,
    pool_share: float = 0.7,
    dim: int = 16,
    noise: float = 0.3,
) -> SyntheticCorpus:
    """
    Generate a labeled corpus with sense-specific context word pools.

    Args:
        seed: Random seed
        lexelts: Number of pseudo-lexelts
        senses: Senses per lexelt
        instances: Total instances (assigned round-robin over lexelts and senses)
        pool_size: Context words per sense
        fillers: Shared filler words
        context: Tokens on each side of the target
        pool_share: Probability that a context token comes from the sense pool
        dim: Vector dimension
        noise: Spread of pool vectors around their sense direction

    Returns:
        SyntheticCorpus with instances, inventory and pseudo-GloVe vectors
    """
    rng = SeededRng(seed)
    vectors: Dict[str, np.ndarray] = {}
    pools: Dict[str, List[List[str]]] = {}

    for i in range(lexelts):
        lexelt = f"pseudo{i}.{POS_CYCLE[i % len(POS_CYCLE)]}"
        pools[lexelt] = []
        for j in range(senses):
            center = rng.normal(1.0, dim)
            center /= np.linalg.norm(center)
            words = [f"lex{i}s{j}w{k}" for k in range(pool_size)]
            for word in words:
                vectors[word] = center + rng.normal(noise / np.sqrt(dim), dim)
            pools[lexelt].append(words)

    filler_words = [f"filler{k}" for k in range(fillers)]
    for word in filler_words:
        vectors[word] = rng.normal(1.0 / np.sqrt(dim), dim)

    lexelt_names = list(pools)
    corpus: List[DisambiguationInstance] = []
    for k in range(instances):
        lexelt = lexelt_names[k % lexelts]
        sense = (k // lexelts) % senses
        pool = pools[lexelt][sense]

        def side() -> List[str]:
            from_pool = rng.random(context) < pool_share
            picks_pool = rng.integers(0, len(pool), context)
            picks_fill = rng.integers(0, len(filler_words), context)
            return [pool[p] if use else filler_words[f] for use, p, f in zip(from_pool, picks_pool, picks_fill)]

        corpus.append(DisambiguationInstance(
            instance_id=f"{lexelt.split('.')[0]}.{k:04d}",
            lexelt=lexelt,
            left_tokens=side(),
            right_tokens=side(),
            target=lexelt.split(".")[0],
            gold={f"s{sense}"},
        ))

    inventory = SenseInventory({lex: [f"s{j}" for j in range(senses)] for lex in lexelt_names})
    return SyntheticCorpus(corpus, inventory, vectors)
