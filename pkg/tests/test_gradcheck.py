import pytest

from src.gradcheck import TOLERANCE, grad_check, small_hyperparams
from src.train import backward


@pytest.mark.parametrize("mode", ["standard", "reversed", "shuffled", "fc"])
def test_backward_matches_finite_differences(mode):
    report = grad_check(mode=mode)
    assert report.passed, report.to_frame().to_string()
    assert set(report.max_errors) >= {"sense_table", "word_table", "head.w_hidden", "head.b_hidden",
                                      "head.w_out", "head.b_out"}
    assert any(name.startswith("left.") for name in report.max_errors)


def test_every_entry_except_pad_is_checked():
    report = grad_check()
    hp = small_hyperparams(0)
    # 10 words + PAD, the PAD column is frozen
    assert report.entries["word_table"] == hp.embedding_size * 10
    assert report.entries["sense_table"] == hp.embedding_size * 5
    assert report.entries["head.w_out"] == hp.fc_size


def test_corrupted_backward_is_caught():
    def scaled_backward(params, trace):
        grads = backward(params, trace)
        grads["head.w_out"] = grads["head.w_out"] * 1.5
        return grads

    report = grad_check(backward_fn=scaled_backward)
    assert not report.passed
    assert "head.w_out" in report.failed_groups
    assert report.max_errors["head.w_out"] > TOLERANCE


def test_report_frame_lists_every_group():
    report = grad_check(mode="fc")
    frame = report.to_frame()
    assert list(frame.columns) == ["group", "entries", "max_rel_error", "passed"]
    assert frame["passed"].all()
    assert "left.weight" in set(frame["group"])
