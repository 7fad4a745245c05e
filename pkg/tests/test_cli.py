import json

import numpy as np
import pytest

from sia import synthetic
from sia.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from sia.conllu import save_dialogues, save_eval_cases
from sia.masks import assemble, intra_mask, mask_to_json, sia_mask

SIMPLE_CONLLU = (
    "1\tshe\t_\t_\t_\t_\t2\tnsubj\t_\t_\n"
    "2\teats\t_\t_\t_\t_\t0\troot\t_\t_\n"
    "3\tapples\t_\t_\t_\t_\t2\tobj\t_\t_\n"
    "\n"
    "1\tok\t_\t_\t_\t_\t0\troot\t_\t_\n"
)


@pytest.fixture
def dialogue_file(tmp_path, simple_example):
    path = tmp_path / "dialogue.json"
    save_dialogues(str(path), [simple_example])
    return str(path)


@pytest.fixture
def trained_checkpoint(tmp_path):
    data_path = tmp_path / "train.json"
    save_dialogues(str(data_path), synthetic.keyword_dialogues(8, seed=0))
    ckpt = tmp_path / "model.json"
    rc = main([
        "train", str(data_path), "--checkpoint", str(ckpt),
        "--epochs", "2", "--lr", "0.1", "--dim", "4", "--heads", "2", "--layers", "1",
    ])
    assert rc == EXIT_OK
    return str(ckpt)


# --- parse ---------------------------------------------------------------------


def test_parse_writes_trees(tmp_path, capsys):
    src = tmp_path / "in.conllu"
    src.write_text(SIMPLE_CONLLU, encoding="utf-8")
    dst = tmp_path / "out.json"
    assert main(["parse", str(src), str(dst)]) == EXIT_OK
    data = json.loads(dst.read_text())
    assert len(data) == 2
    assert data[0]["tokens"][1]["form"] == "eats"
    # emitted utterances satisfy the dialogue-JSON utterance schema
    from sia.conllu import tree_from_dict

    trees = [tree_from_dict(obj) for obj in data]
    assert [len(t) for t in trees] == [3, 1]


def test_parse_cyclic_head_fails_naming_line(tmp_path, capsys):
    src = tmp_path / "in.conllu"
    src.write_text(
        "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n",
        encoding="utf-8",
    )
    rc = main(["parse", str(src), str(tmp_path / "out.json")])
    assert rc == EXIT_DATA
    assert "line" in capsys.readouterr().err


def test_parse_missing_file(tmp_path, capsys):
    rc = main(["parse", str(tmp_path / "nope.conllu"), str(tmp_path / "out.json")])
    assert rc == EXIT_DATA
    assert "error" in capsys.readouterr().err


# --- mask ----------------------------------------------------------------------


# hand-derived: positions [CLS] she eats apples [EOU] [SEP] ok [SEP];
# specials fully open, she->eats and apples->eats are the only ancestor links
GOLDEN_INTRA_ROWS = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 0, 1, 1, 0, 1],
    [1, 0, 1, 0, 1, 1, 0, 1],
    [1, 0, 1, 1, 1, 1, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 0, 0, 1, 1, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1],
]


def test_mask_intra_matches_golden(dialogue_file, simple_example, capsys):
    assert main(["mask", dialogue_file, "--mask-kind", "intra"]) == EXIT_OK
    got = json.loads(capsys.readouterr().out)
    assert got == {"n": 8, "rows": GOLDEN_INTRA_ROWS, "kind": "intra", "m": None}
    assert got == mask_to_json(intra_mask(assemble(simple_example)))


def test_mask_sia_m1_equals_intra_modulo_kind(dialogue_file, capsys):
    assert main(["mask", dialogue_file, "--mask-kind", "sia", "--m", "1"]) == EXIT_OK
    sia_obj = json.loads(capsys.readouterr().out)
    assert main(["mask", dialogue_file, "--mask-kind", "intra"]) == EXIT_OK
    intra_obj = json.loads(capsys.readouterr().out)
    assert sia_obj["rows"] == intra_obj["rows"]
    assert sia_obj["kind"] == "sia" and intra_obj["kind"] == "intra"
    assert sia_obj["m"] == 1 and intra_obj["m"] is None


def test_mask_ascii_popcount_cross_check(dialogue_file, simple_example, capsys):
    assert main(["mask", dialogue_file, "--format", "ascii", "--m", "3"]) == EXIT_OK
    text = capsys.readouterr().out
    mask = sia_mask(assemble(simple_example), 3)
    assert text.count("█") == int(mask.cells.sum())


def test_mask_deterministic_bytes(dialogue_file, capsys):
    assert main(["mask", dialogue_file, "--m", "4"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["mask", dialogue_file, "--m", "4"]) == EXIT_OK
    assert capsys.readouterr().out == first


def test_mask_bad_kind_is_usage_error(dialogue_file, capsys):
    assert main(["mask", dialogue_file, "--mask-kind", "nope"]) == EXIT_USAGE


def test_mask_bad_m_is_usage_error(dialogue_file, capsys):
    assert main(["mask", dialogue_file, "--m", "0"]) == EXIT_USAGE


# --- train ----------------------------------------------------------------------


def test_train_writes_checkpoint_and_csv(tmp_path, capsys):
    data_path = tmp_path / "train.json"
    save_dialogues(str(data_path), synthetic.keyword_dialogues(6, seed=1))
    ckpt = tmp_path / "m.json"
    csv = tmp_path / "losses.csv"
    rc = main([
        "train", str(data_path), "--checkpoint", str(ckpt), "--loss-csv", str(csv),
        "--epochs", "3", "--lr", "0.1", "--dim", "4", "--layers", "1",
    ])
    assert rc == EXIT_OK
    payload = json.loads(ckpt.read_text())
    assert payload["format"] == "sia-checkpoint"
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss"
    assert len(lines) == 4


def test_train_seed_determinism_bytes(tmp_path):
    data_path = tmp_path / "train.json"
    save_dialogues(str(data_path), synthetic.keyword_dialogues(6, seed=2))
    outs = []
    for name in ("a", "b"):
        ckpt = tmp_path / f"{name}.json"
        csv = tmp_path / f"{name}.csv"
        rc = main([
            "train", str(data_path), "--checkpoint", str(ckpt), "--loss-csv", str(csv),
            "--epochs", "2", "--lr", "0.1", "--dim", "4", "--layers", "1", "--seed", "5",
        ])
        assert rc == EXIT_OK
        outs.append((ckpt.read_bytes(), csv.read_bytes()))
    assert outs[0] == outs[1]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
def test_train_divergence_exit_code(tmp_path, capsys):
    data_path = tmp_path / "train.json"
    save_dialogues(str(data_path), synthetic.keyword_dialogues(6, seed=3))
    rc = main([
        "train", str(data_path), "--checkpoint", str(tmp_path / "m.json"),
        "--epochs", "5", "--lr", "1e160", "--dim", "4", "--layers", "1",
    ])
    assert rc == EXIT_NUMERIC
    assert "numerical" in capsys.readouterr().err


def test_train_bad_flag_usage_error(tmp_path, capsys):
    rc = main(["train", str(tmp_path / "x.json"), "--checkpoint", "m.json", "--epochs", "zero"])
    assert rc == EXIT_USAGE


def test_train_incompatible_dim_heads_usage_error(tmp_path, capsys):
    data_path = tmp_path / "train.json"
    save_dialogues(str(data_path), synthetic.keyword_dialogues(4, seed=4))
    rc = main([
        "train", str(data_path), "--checkpoint", str(tmp_path / "m.json"),
        "--dim", "6", "--heads", "4", "--epochs", "1",
    ])
    assert rc == EXIT_USAGE


# --- evaluate ----------------------------------------------------------------------


def test_evaluate_report_keys(tmp_path, trained_checkpoint, capsys):
    eval_path = tmp_path / "eval.json"
    save_eval_cases(str(eval_path), synthetic.keyword_eval_cases(5, candidates=2, seed=5))
    rc = main(["evaluate", trained_checkpoint, str(eval_path)])
    assert rc == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert list(report) == ["R2@1", "R2@2", "MAP", "MRR", "P@1", "num_cases"]
    assert report["num_cases"] == 5


def test_evaluate_writes_output_file(tmp_path, trained_checkpoint, capsys):
    eval_path = tmp_path / "eval.json"
    save_eval_cases(str(eval_path), synthetic.keyword_eval_cases(3, candidates=2, seed=6))
    out = tmp_path / "report.json"
    rc = main(["evaluate", trained_checkpoint, str(eval_path), "--output", str(out)])
    assert rc == EXIT_OK
    assert json.loads(out.read_text()) == json.loads(capsys.readouterr().out)


def test_evaluate_perfect_checkpoint_scores_r2_at_1(tmp_path, capsys):
    # hand-built model: zero q/k -> uniform attention pools all token values into
    # [CLS]; embeddings put +/- mass on the marker words; the head reads coord 0
    from conftest import tree
    from sia.conllu import EvalCase
    from sia.model import ModelConfig, ModelParams, Vocab, save_checkpoint

    cases = []
    for i in range(4):
        cases.append(
            EvalCase(
                context=(tree(("hi", 0), ("there", 1)),),
                candidates=(tree(("yes", 0)), tree(("no", 0)))[:: 1 if i % 2 else -1],
                labels=(1, 0) if i % 2 else (0, 1),
            )
        )
    cfg = ModelConfig(dim=4, heads=1, layers=1, m=2, max_len=16, sia=True)
    vocab = Vocab(["hi", "there", "yes", "no"])
    params = ModelParams.init(vocab, cfg, np.random.default_rng(0))
    for _, arr in params.named_arrays():
        arr[...] = 0.0
    params.embed[vocab.id_of("yes"), 0] = 5.0
    params.embed[vocab.id_of("no"), 0] = -5.0
    layer = params.layers[0]
    layer.mha.wv[0][:] = np.eye(4)
    layer.mha.wo[:] = np.eye(4)
    layer.ln_gain[:] = 1.0
    params.w_task[0] = 4.0
    ckpt = tmp_path / "perfect.json"
    save_checkpoint(str(ckpt), params, cfg)
    eval_path = tmp_path / "eval.json"
    save_eval_cases(str(eval_path), cases)
    assert main(["evaluate", str(ckpt), str(eval_path)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["R2@1"] == 1.0


def test_evaluate_empty_set_fails(tmp_path, trained_checkpoint, capsys):
    eval_path = tmp_path / "eval.json"
    eval_path.write_text("[]")
    rc = main(["evaluate", trained_checkpoint, str(eval_path)])
    assert rc == EXIT_DATA


def test_evaluate_mixed_pool_sizes_is_data_error(tmp_path, trained_checkpoint, capsys):
    from sia.conllu import EvalCase
    from conftest import tree

    cases = [
        EvalCase(context=(tree(("hi", 0)),), candidates=(tree(("a", 0)), tree(("b", 0))), labels=(1, 0)),
        EvalCase(context=(tree(("hi", 0)),), candidates=(tree(("a", 0)),), labels=(1,)),
    ]
    eval_path = tmp_path / "eval.json"
    save_eval_cases(str(eval_path), cases)
    rc = main(["evaluate", trained_checkpoint, str(eval_path)])
    assert rc == EXIT_DATA
    assert "size" in capsys.readouterr().err


def test_evaluate_case_without_positive_is_data_error(tmp_path, trained_checkpoint, capsys):
    from sia.conllu import EvalCase
    from conftest import tree

    cases = [
        EvalCase(context=(tree(("hi", 0)),), candidates=(tree(("a", 0)), tree(("b", 0))), labels=(0, 0)),
    ]
    eval_path = tmp_path / "eval.json"
    save_eval_cases(str(eval_path), cases)
    rc = main(["evaluate", trained_checkpoint, str(eval_path)])
    assert rc == EXIT_DATA


def test_evaluate_rejects_tampered_checkpoint(tmp_path, trained_checkpoint, capsys):
    eval_path = tmp_path / "eval.json"
    save_eval_cases(str(eval_path), synthetic.keyword_eval_cases(2, candidates=2, seed=7))
    payload = json.loads(open(trained_checkpoint).read())
    payload["params"]["w_task"]["shape"] = [9]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(payload))
    rc = main(["evaluate", str(bad), str(eval_path)])
    assert rc == EXIT_DATA
    assert "shape" in capsys.readouterr().err


# --- inspect-attention ------------------------------------------------------------------


def test_inspect_blocked_cells_zero_and_rows_sum(tmp_path, trained_checkpoint, dialogue_file, capsys):
    rc = main(["inspect-attention", trained_checkpoint, dialogue_file, "--layer", "1", "--head", "1"])
    assert rc == EXIT_OK
    dump = json.loads(capsys.readouterr().out)
    weights = np.array(dump["weights"])
    assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-9)
    # reconstruct the mask and confirm every blocked cell is exactly zero
    from sia.conllu import load_dialogues

    ex = load_dialogues(dialogue_file)[0]
    cells = sia_mask(assemble(ex), 4).cells
    assert dump["n"] == cells.shape[0]
    assert np.all(weights[~cells] == 0.0)


def test_inspect_compare_backbone(tmp_path, trained_checkpoint, dialogue_file, capsys):
    rc = main([
        "inspect-attention", trained_checkpoint, dialogue_file,
        "--layer", "2", "--head", "2", "--compare-backbone",
    ])
    assert rc == EXIT_OK
    dump = json.loads(capsys.readouterr().out)
    assert "backbone_weights" in dump
    backbone = np.array(dump["backbone_weights"])
    assert np.allclose(backbone.sum(axis=1), 1.0, atol=1e-9)


def test_inspect_ascii_format(trained_checkpoint, dialogue_file, capsys):
    rc = main(["inspect-attention", trained_checkpoint, dialogue_file, "--format", "ascii"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "syntax branch layer 1" in out
    assert "u1:she" in out


def test_inspect_layer_out_of_range(trained_checkpoint, dialogue_file, capsys):
    rc = main(["inspect-attention", trained_checkpoint, dialogue_file, "--layer", "3"])
    assert rc == EXIT_USAGE
    rc = main(["inspect-attention", trained_checkpoint, dialogue_file, "--head", "9"])
    assert rc == EXIT_USAGE


def test_inspect_golden_against_forward_states(trained_checkpoint, dialogue_file, capsys):
    from sia.conllu import load_dialogues
    from sia.model import forward_states, load_checkpoint

    rc = main(["inspect-attention", trained_checkpoint, dialogue_file, "--layer", "1", "--head", "1"])
    assert rc == EXIT_OK
    dump = json.loads(capsys.readouterr().out)
    params, cfg = load_checkpoint(trained_checkpoint)
    ex = load_dialogues(dialogue_file)[0]
    states = forward_states(ex, params, cfg)
    assert np.array_equal(np.array(dump["weights"]), states.sia_attn[0][0])


# --- global --------------------------------------------------------------------------------


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == EXIT_USAGE


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE


def test_sia_log_env_controls_verbosity(tmp_path, monkeypatch, capsys):
    import logging

    src = tmp_path / "in.conllu"
    src.write_text(SIMPLE_CONLLU, encoding="utf-8")
    monkeypatch.setenv("SIA_LOG", "info")
    assert main(["parse", str(src), str(tmp_path / "out.json")]) == EXIT_OK
    assert logging.getLogger("sia").level == logging.INFO
    monkeypatch.setenv("SIA_LOG", "warning")
    assert main(["parse", str(src), str(tmp_path / "out2.json")]) == EXIT_OK
    assert logging.getLogger("sia").level == logging.WARNING
