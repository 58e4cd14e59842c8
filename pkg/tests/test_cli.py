import os
from unittest.mock import patch

import pytest

from src.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, build_parser, main
from src.config import RunConfig
from src.errors import DivergenceError
from src.evaluate import read_answers
from src.gradcheck import GradCheckReport

from conftest import fixture_args


def _read(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _scores(out_dir):
    rows = {}
    with open(os.path.join(out_dir, "report.csv")) as f:
        header = f.readline().strip().split(",")
        for line in f:
            values = dict(zip(header, line.strip().split(",")))
            rows[values["scope"]] = values
    return rows


def test_train_writes_model_and_log(tmp_path):
    assert main(["train", *fixture_args(tmp_path)]) == EXIT_OK
    assert (tmp_path / "model.sbw").exists()
    lines = (tmp_path / "training_log.csv").read_text().splitlines()
    assert lines[0] == "epoch,mean_loss,val_f,elapsed_seconds"
    assert 2 <= len(lines) <= 4
    assert all(line.endswith(",0") for line in lines[1:])


def test_train_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", *fixture_args(a)]) == EXIT_OK
    assert main(["train", *fixture_args(b)]) == EXIT_OK
    assert _read(a / "model.sbw") == _read(b / "model.sbw")
    assert _read(a / "training_log.csv") == _read(b / "training_log.csv")


def test_missing_glove_file_is_a_usage_error(tmp_path):
    code = main(["train", *fixture_args(tmp_path, "--glove", str(tmp_path / "missing.txt"))])
    assert code == EXIT_USAGE
    assert not (tmp_path / "model.sbw").exists()


def test_random_init_does_not_need_glove(tmp_path):
    args = [a for a in fixture_args(tmp_path) if a != "--glove"]
    args = [a for a in args if not a.endswith("glove_mini.txt")]
    assert main(["train", *args, "--word_init", "random"]) == EXIT_OK


def test_eval_scores_every_test_instance(tmp_path):
    assert main(["train", *fixture_args(tmp_path)]) == EXIT_OK
    assert main(["eval", *fixture_args(tmp_path)]) == EXIT_OK

    total = _scores(tmp_path)["total"]
    assert total["attempted"] == total["total"] == "6"
    assert float(total["precision"]) == float(total["recall"])
    assert float(total["f"]) == pytest.approx(float(total["precision"]), abs=1e-6)
    assert len(read_answers(str(tmp_path / "answers.txt"))) == 6


def test_predict_writes_one_line_per_instance(tmp_path):
    assert main(["train", *fixture_args(tmp_path)]) == EXIT_OK
    assert main(["predict", *fixture_args(tmp_path), "--model", str(tmp_path / "model.sbw")]) == EXIT_OK

    lines = (tmp_path / "predictions.txt").read_text().splitlines()
    assert len(lines) == 6
    lexelt, instance_id, rest = lines[0].split(" ", 2)
    chosen, probs = rest.split("\t")
    assert lexelt in instance_id
    total = sum(float(item.split("=")[1]) for item in probs.split())
    assert total == pytest.approx(1.0, abs=1e-3)
    assert chosen + "=" in probs


def test_gradcheck_command_passes():
    assert main(["gradcheck", "--seed", "0"]) == EXIT_OK


def test_ablate_standard_matches_train_then_eval(tmp_path):
    assert main(["train", *fixture_args(tmp_path)]) == EXIT_OK
    assert main(["eval", *fixture_args(tmp_path)]) == EXIT_OK
    assert main(["ablate", "standard", *fixture_args(tmp_path)]) == EXIT_OK

    evaluated = _scores(tmp_path)["total"]["f"]
    ablated = _scores(tmp_path / "ablation-standard")["total"]["f"]
    assert ablated == evaluated


def test_unknown_config_key_is_a_usage_error(tmp_path):
    config = tmp_path / "run.env"
    config.write_text("LEFT_CONTEXT=5\nLEARNING_SPEED=3\n")
    assert main(["train", "--config", str(config), *fixture_args(tmp_path)]) == EXIT_USAGE


def test_config_file_values_and_flag_precedence(tmp_path):
    config = tmp_path / "run.env"
    config.write_text("# context sizes\nLEFT_CONTEXT=7\nRIGHT_CONTEXT=9\nvariant=reversed\n")
    loaded = RunConfig.load(str(config), {"right_context": "4", "threads": None})
    assert loaded.hp.left_context == 7
    assert loaded.hp.right_context == 4
    assert loaded.variant == "reversed"


def test_corrupt_model_file_is_a_data_error(tmp_path):
    bad = tmp_path / "model.sbw"
    bad.write_bytes(b"not a model")
    assert main(["eval", *fixture_args(tmp_path), "--model", str(bad)]) == EXIT_DATA


def test_bad_arguments_are_usage_errors():
    assert main(["train", "--variant", "transformer"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    args = build_parser().parse_args(["train", "--word-dropout", "0", "--left_context", "25"])
    assert args.word_dropout == "0" and args.left_context == "25"


@patch("src.cli.grad_check")
def test_failed_gradient_check_exits_with_numeric_code(mock_check):
    mock_check.return_value = GradCheckReport({"head.w_out": 0.3, "head.b_out": 1e-9}, {"head.w_out": 5, "head.b_out": 1})
    assert main(["gradcheck", "--mode", "fc"]) == EXIT_NUMERIC
    assert mock_check.call_args.kwargs["mode"] == "fc"


@patch("src.cli.fit_model")
def test_divergence_exits_with_numeric_code(mock_fit, tmp_path):
    mock_fit.side_effect = DivergenceError("Non-finite loss at epoch 2, batch 1")
    assert main(["train", *fixture_args(tmp_path)]) == EXIT_NUMERIC
    mock_fit.assert_called_once()
    assert not (tmp_path / "model.sbw").exists()
