from pathlib import Path

import numpy as np
import pytest

from src.config import HyperParams
from src.corpus import DisambiguationInstance
from src.embeddings import SenseInventory, Vocabulary
from src.model import ArchVariant, build_network
from src.numkit import SeededRng

FIXTURES = Path(__file__).parent / "fixtures"
TRAIN_XML = str(FIXTURES / "lexical_sample_train.xml")
TEST_XML = str(FIXTURES / "lexical_sample_test.xml")
TEST_KEY = str(FIXTURES / "lexical_sample_test.key")
GLOVE_MINI = str(FIXTURES / "glove_mini.txt")


def tiny_vocab() -> Vocabulary:
    return Vocabulary(["apple", "bank", "money", "river", "stream", "water", "loan", "cash"])


def tiny_inventory() -> SenseInventory:
    return SenseInventory({"bank.n": ["finance", "shore"], "cold.a": ["U", "temp", "manner"], "solo.n": ["U"]})


def small_hp(**changes) -> HyperParams:
    base = dict(
        left_context=3, right_context=3, embedding_size=8, hidden_size=5, fc_size=5,
        batch_size=4, max_epochs=3, patience=2, word_init="random", log_timing=False, seed=7,
    )
    base.update(changes)
    return HyperParams(**base).validate()


def make_network(mode: str = "standard", seed: int = 0, **hp_changes):
    hp = small_hp(**hp_changes)
    variant = ArchVariant(mode, hp.left_context, hp.right_context, seed)
    return build_network(tiny_vocab(), tiny_inventory(), hp, SeededRng(seed), variant=variant)


def make_instance(instance_id: str, lexelt: str, left, right, gold=()) -> DisambiguationInstance:
    return DisambiguationInstance(instance_id, lexelt, list(left), list(right), lexelt.split(".")[0], set(gold))


def fixture_args(out_dir, *extra):
    """CLI arguments for a fast run on the bundled fixture corpus."""
    return [
        "--train", TRAIN_XML, "--test", TEST_XML, "--key", TEST_KEY, "--glove", GLOVE_MINI,
        "--out", str(out_dir), "--seed", "11", "--threads", "1",
        "--embedding_size", "8", "--hidden_size", "4", "--fc_size", "4",
        "--left_context", "5", "--right_context", "5", "--batch_size", "8",
        "--max_epochs", "3", "--patience", "2", "--log_timing", "false",
        *extra,
    ]


@pytest.fixture
def network():
    return make_network()


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(0)
