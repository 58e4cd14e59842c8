import math
from unittest.mock import patch

import numpy as np
import pytest

from src import model
from src.corpus import ContextWindow
from src.errors import ConfigError, CorruptModelError, ModelFormatError, ShapeError
from src.model import (
    ArchVariant,
    ExampleBatch,
    LstmParams,
    batched_cosine,
    blstm_encode,
    cosine_sequence,
    forward,
    head_forward,
    lstm_step,
    score_sense,
    traversal_order,
)
from src.model_io import MAGIC, load_model, quantize, save_model
from src.numkit import cosine, relu, sigmoid

from conftest import make_network


def _random_batch(params, size, seed=0):
    gen = np.random.default_rng(seed)
    V = len(params.vocab)
    return ExampleBatch(
        sense_cols=gen.integers(0, len(params.inventory), size),
        left_ids=gen.integers(0, V, (size, params.variant.left_context)),
        right_ids=gen.integers(0, V, (size, params.variant.right_context)),
    )


def _unrolled(p: LstmParams, seq):
    h = np.zeros(p.hidden)
    c = np.zeros(p.hidden)
    for x in seq:
        h, c = lstm_step(p, np.array([x]), h, c)
    return h


def test_batched_cosine_matches_direct_formula(np_rng):
    sense = np_rng.normal(size=(2, 5))
    words = np_rng.normal(size=(2, 3, 5))
    words[1, 2] = 0.0
    cos, _, _ = batched_cosine(sense, words)
    for b in range(2):
        for t in range(3):
            assert abs(cos[b, t] - cosine(sense[b], words[b, t])) < 1e-12
    assert cos[1, 2] == 0.0


def test_cosine_sequence_gives_zero_for_pad(network):
    window = ContextWindow(np.array([0, 1, 2]), np.array([3, 0, 0]))
    sense = network.sense_table.matrix[:, 0]
    left, right = cosine_sequence(sense, window, network.word_table)
    assert left[0] == 0.0 and right[1] == 0.0 and right[2] == 0.0
    assert abs(left[1] - cosine(sense, network.word_table.matrix[:, 1])) < 1e-12
    with pytest.raises(ShapeError):
        cosine_sequence(np.ones(3), window, network.word_table)


def test_lstm_step_matches_scalar_hand_calculation():
    p = LstmParams(
        w_input=np.array([[0.5], [-0.3], [0.8], [1.2]]),
        w_recurrent=np.array([[0.1], [0.2], [-0.4], [0.7]]),
        bias=np.array([0.0, 1.0, 0.1, -0.2]),
    )
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    h_ref, c_ref = 0.0, 0.0
    h, c = np.zeros(1), np.zeros(1)
    for x in (0.6, -0.9):
        i = sig(0.5 * x + 0.1 * h_ref + 0.0)
        f = sig(-0.3 * x + 0.2 * h_ref + 1.0)
        o = sig(0.8 * x - 0.4 * h_ref + 0.1)
        g = math.tanh(1.2 * x + 0.7 * h_ref - 0.2)
        c_ref = f * c_ref + i * g
        h_ref = o * math.tanh(c_ref)
        h, c = lstm_step(p, np.array([x]), h, c)
        assert abs(h[0] - h_ref) < 1e-12
        assert abs(c[0] - c_ref) < 1e-12


def test_blstm_encode_matches_unrolled_oracle(np_rng):
    for trial in range(100):
        L, R = int(np_rng.integers(1, 5)), int(np_rng.integers(1, 5))
        params = make_network(seed=trial, left_context=L, right_context=R)
        left = np_rng.uniform(-1, 1, L)
        right = np_rng.uniform(-1, 1, R)
        expected = np.concatenate([_unrolled(params.left, left), _unrolled(params.right, right[::-1])])
        assert np.max(np.abs(blstm_encode(params, left, right) - expected)) < 1e-12


def test_reversed_mode_reads_inside_out(np_rng):
    standard = make_network("standard", seed=3)
    reversed_ = make_network("reversed", seed=3)
    left = np_rng.uniform(-1, 1, 3)
    right = np_rng.uniform(-1, 1, 3)
    expected = np.concatenate([_unrolled(standard.left, left[::-1]), _unrolled(standard.right, right)])
    assert np.max(np.abs(blstm_encode(reversed_, left, right) - expected)) < 1e-12


def test_traversal_orders():
    standard = ArchVariant("standard", 3, 3)
    reversed_ = ArchVariant("reversed", 3, 3)
    assert traversal_order(standard, "left", 3).tolist() == [0, 1, 2]
    assert traversal_order(standard, "right", 3).tolist() == [2, 1, 0]
    assert traversal_order(reversed_, "left", 3).tolist() == [2, 1, 0]
    assert traversal_order(reversed_, "right", 3).tolist() == [0, 1, 2]


def test_unknown_mode_is_a_config_error():
    with pytest.raises(ConfigError):
        ArchVariant("transformer", 3, 3)


def test_blstm_encode_rejects_wrong_lengths(network):
    with pytest.raises(ShapeError):
        blstm_encode(network, np.zeros(4), np.zeros(3))


def test_head_saturates_with_large_output_bias(network):
    head = network.head.copy()
    for arr in head.arrays().values():
        arr[...] = 0.0
    head.b_out[0] = 20.0
    _, y = head_forward(head, np.ones(2 * network.hidden_size))
    assert y >= 1 - 1e-8


def test_forward_matches_composition_of_kernels(network):
    batch = _random_batch(network, 5, seed=2)
    y, _ = forward(network, batch)
    words = network.word_table.matrix
    for b in range(5):
        sense = network.sense_table.matrix[:, batch.sense_cols[b]]
        left = np.array([cosine(sense, words[:, i]) for i in batch.left_ids[b]])
        right = np.array([cosine(sense, words[:, i]) for i in batch.right_ids[b]])
        enc = blstm_encode(network, left, right)
        h = relu(network.head.w_hidden @ enc + network.head.b_hidden)
        expected = sigmoid(network.head.w_out[0] @ h + network.head.b_out[0])
        assert abs(y[b] - expected) < 1e-12


def test_fc_mode_forward_is_finite():
    params = make_network("fc", seed=1)
    y, trace = forward(params, _random_batch(params, 4), record=True)
    assert y.shape == (4,)
    assert np.all((y > 0) & (y < 1))
    assert trace.left_side.pre.shape == (4, params.hidden_size)


def test_score_sense_of_zero_network_is_half(network):
    for arr in network.arrays().values():
        arr[...] = 0.0
    window = ContextWindow(np.array([1, 2, 3]), np.array([4, 5, 6]))
    y, trace = score_sense(network, 0, window)
    assert y == 0.5
    assert trace is None
    with pytest.raises(IndexError):
        score_sense(network, len(network.inventory), window)


def test_score_sense_rejects_window_of_wrong_size(network):
    with pytest.raises(ShapeError):
        score_sense(network, 0, ContextWindow(np.array([1, 2]), np.array([1, 2, 3])))


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["standard", "reversed", "shuffled", "fc"])
def test_model_file_round_trip(tmp_path, mode):
    params = make_network(mode, seed=4)
    path = save_model(params, str(tmp_path / "model.sbw"))
    loaded = load_model(path)

    assert loaded.variant == params.variant
    assert loaded.inventory.candidates == params.inventory.candidates
    assert loaded.vocab.id_to_token == params.vocab.id_to_token
    for name, arr in quantize(params).arrays().items():
        assert np.array_equal(loaded.arrays()[name], arr), name

    window = ContextWindow(np.array([1, 0, 2]), np.array([3, 4, 0]))
    assert abs(score_sense(loaded, 2, window)[0] - score_sense(params, 2, window)[0]) < 1e-5


def test_model_file_is_byte_stable(tmp_path):
    params = make_network(seed=5)
    a = save_model(params, str(tmp_path / "a.sbw"))
    b = save_model(load_model(a), str(tmp_path / "b.sbw"))
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_bad_magic_and_version(tmp_path):
    path = save_model(make_network(), str(tmp_path / "model.sbw"))
    data = open(path, "rb").read()

    bad_magic = tmp_path / "magic.sbw"
    bad_magic.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ModelFormatError):
        load_model(str(bad_magic))

    bad_version = tmp_path / "version.sbw"
    bad_version.write_bytes(MAGIC + bytes([99]) + data[5:])
    with pytest.raises(ModelFormatError) as err:
        load_model(str(bad_version))
    assert "version" in str(err.value)


def test_truncated_and_trailing_bytes(tmp_path):
    path = save_model(make_network(), str(tmp_path / "model.sbw"))
    data = open(path, "rb").read()

    truncated = tmp_path / "short.sbw"
    truncated.write_bytes(data[:-3])
    with pytest.raises(CorruptModelError):
        load_model(str(truncated))

    padded = tmp_path / "long.sbw"
    padded.write_bytes(data + b"\x00")
    with pytest.raises(CorruptModelError):
        load_model(str(padded))


def test_fc_mode_permuting_inputs_and_weights_together_changes_nothing():
    params = make_network("fc", seed=2)
    params.left.bias[...] = 1.0
    params.head.b_hidden[...] = 1.0
    batch = ExampleBatch(np.array([0, 1]), np.array([[1, 2, 3], [4, 0, 6]]), np.array([[5, 6, 7], [8, 1, 0]]))
    y, _ = forward(params, batch)

    perm = np.array([2, 0, 1])
    permuted = params.copy()
    permuted.left.weight = params.left.weight[:, perm]
    shuffled = ExampleBatch(batch.sense_cols, batch.left_ids[:, perm], batch.right_ids)
    y_perm, _ = forward(permuted, shuffled)
    assert np.allclose(y, y_perm, atol=1e-12)

    y_plain, _ = forward(params, shuffled)
    assert not np.allclose(y, y_plain, atol=1e-12)


def test_every_lexelt_is_scored_with_the_same_encoders_and_head(network):
    network.head.b_hidden[...] = 1.0
    columns = network.inventory.columns("bank.n") + network.inventory.columns("cold.a")
    batch = ExampleBatch(np.array(columns), np.tile([1, 2, 3], (5, 1)), np.tile([4, 5, 6], (5, 1)))
    with patch("src.model.run_lstm", wraps=model.run_lstm) as spy:
        y, _ = forward(network, batch)
    assert spy.call_count == 2
    assert {id(call.args[0]) for call in spy.call_args_list} == {id(network.left), id(network.right)}

    network.head.b_out[...] += 0.5
    y_shifted, _ = forward(network, batch)
    assert np.all(y_shifted > y)

    names = set(network.arrays())
    assert not any(lexelt in name for name in names for lexelt in network.inventory.lexelts)
