import numpy as np
import pytest

from src.embeddings import (
    PAD_ID,
    SenseInventory,
    Vocabulary,
    init_sense_table,
    init_word_table,
    load_glove,
    lookup_sense,
    lookup_word,
    write_glove,
)
from src.errors import ConfigError, GloveFormatError, InventoryError
from src.numkit import SeededRng

from conftest import FIXTURES, GLOVE_MINI, tiny_inventory, tiny_vocab


def test_vocabulary_reserves_pad_and_maps_unknown_to_it():
    vocab = Vocabulary(["money", "river", "money"])
    assert len(vocab) == 3
    assert vocab.token(PAD_ID) == "<pad>"
    assert vocab.id("money") == 1
    assert vocab.id("zebra") == PAD_ID
    assert vocab.ids(["river", "zebra"]) == [2, PAD_ID]
    assert "river" in vocab and "zebra" not in vocab


def test_inventory_gives_each_lexelt_sense_its_own_column():
    inventory = tiny_inventory()
    assert inventory.lexelts == ["bank.n", "cold.a", "solo.n"]
    assert len(inventory) == 6
    assert inventory.column("cold.a", "U") != inventory.column("solo.n", "U")
    assert inventory.columns("cold.a") == [2, 3, 4]
    assert inventory.lexelt_of(5) == "solo.n"


def test_inventory_unknown_entries_raise():
    inventory = tiny_inventory()
    with pytest.raises(InventoryError):
        inventory.senses("tree.n")
    with pytest.raises(KeyError):
        inventory.column("bank.n", "U")


def test_word_table_pad_column_is_zero_and_frozen():
    table = init_word_table(tiny_vocab(), 6, SeededRng(0))
    assert table.matrix.shape == (6, 9)
    assert np.all(table.matrix[:, PAD_ID] == 0.0)
    assert PAD_ID in table.frozen_columns
    assert np.all(np.abs(table.matrix) <= 0.1)


def test_sense_table_uniform_init():
    table = init_sense_table(tiny_inventory(), 4, SeededRng(0))
    assert table.matrix.shape == (4, 6)
    assert np.all(np.abs(table.matrix) <= 0.1)
    with pytest.raises(ConfigError):
        init_sense_table(SenseInventory({}), 4, SeededRng(0))


def test_lookup_equals_one_hot_product():
    table = init_word_table(tiny_vocab(), 5, SeededRng(3))
    one_hot = np.zeros(table.width)
    one_hot[4] = 1.0
    assert np.array_equal(lookup_word(table, 4), table.matrix @ one_hot)
    assert np.all(lookup_word(table, PAD_ID) == 0.0)


def test_lookup_out_of_range():
    table = init_sense_table(tiny_inventory(), 4, SeededRng(0))
    with pytest.raises(IndexError):
        lookup_sense(table, 6)
    with pytest.raises(IndexError):
        lookup_word(init_word_table(tiny_vocab(), 4, SeededRng(0)), -1)


def test_load_glove_uses_file_vectors_for_known_tokens():
    vocab = Vocabulary(["money", "river", "unseen"])
    table = load_glove(GLOVE_MINI, vocab, 8, SeededRng(0))
    assert table.matrix[:, vocab.id("money")].tolist() == [0.8, 0.1, -0.3, 0.2, 0.5, -0.1, 0.05, 0.3]
    assert table.matrix[0, vocab.id("river")] == -0.6
    assert np.all(np.abs(table.matrix[:, vocab.id("unseen")]) <= 0.1)
    assert np.all(table.matrix[:, PAD_ID] == 0.0)


def test_load_glove_reports_line_of_bad_width():
    with pytest.raises(GloveFormatError) as err:
        load_glove(str(FIXTURES / "glove_bad_width.txt"), Vocabulary(["money"]), 8)
    assert ":2:" in str(err.value)


def test_load_glove_rejects_wrong_dimension():
    with pytest.raises(GloveFormatError):
        load_glove(GLOVE_MINI, Vocabulary(["money"]), 10)


def test_glove_round_trip_is_exact(tmp_path):
    vocab = tiny_vocab()
    table = init_word_table(vocab, 8, SeededRng(9))
    path = write_glove(table, vocab, str(tmp_path / "vectors.txt"))
    reloaded = load_glove(path, vocab, 8, SeededRng(1))
    assert np.array_equal(reloaded.matrix, table.matrix)
