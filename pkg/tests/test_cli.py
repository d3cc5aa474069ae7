import json
import os

import numpy as np
import pytest

from mdpm.cli import dispatch
from mdpm.context import PixelMasks, write_maskfile
from mdpm.featstore import read_vector_file
from mdpm.lda import read_detector_bank
from mdpm.miner import read_patterns


def run(*argv):
    return dispatch(list(argv))


@pytest.fixture()
def synth_file(tmp_path):
    out = tmp_path / "feats.bin"
    truth = tmp_path / "truth.json"
    code = run("synth", "--out", str(out), "--truth", str(truth),
               "--dim", "32", "--categories", "2", "--images", "8",
               "--patches", "4", "--concepts", "1", "--concept-items", "3",
               "--seed", "0")
    assert code == 0
    return out


def test_synth_then_mine_happy_path(tmp_path, synth_file):
    patterns = tmp_path / "patterns.jsonl"
    code = run("mine", "--in", str(synth_file), "--target", "0",
               "--k", "4", "--supp-min", "0.05", "--conf-min", "0.5",
               "--out", str(patterns))
    assert code == 0
    mined = read_patterns(patterns)
    assert mined and all(p.category == 0 for p in mined)


def test_mine_writes_to_stdout_without_out(capsys, synth_file):
    assert run("mine", "--in", str(synth_file), "--target", "0",
               "--k", "4", "--supp-min", "0.05", "--conf-min", "0.5") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(json.loads(l)["category"] == 0 for l in lines)


def test_mine_missing_input_is_usage_error(capsys):
    assert run("mine") == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_mine_supp_min_range(capsys, synth_file):
    code = run("mine", "--in", str(synth_file), "--target", "0",
               "--supp-min", "1.5")
    assert code == 1
    assert "supp-min must be in (0,1]" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert run("frobnicate") == 1
    assert run() == 1


def test_missing_file_is_data_error(tmp_path, capsys):
    code = run("mine", "--in", str(tmp_path / "nope.bin"), "--target", "0")
    assert code == 2


def test_config_file_defaults_and_flag_override(tmp_path, synth_file, capsys):
    cfg = tmp_path / "mdpm.cfg"
    cfg.write_text("supp-min = 0.05\nconf-min = 0.5\nk = 4\n")
    out_a = tmp_path / "a.jsonl"
    assert run("mine", "--in", str(synth_file), "--target", "0",
               "--config", str(cfg), "--out", str(out_a)) == 0
    # a stricter explicit flag must beat the config value
    out_b = tmp_path / "b.jsonl"
    assert run("mine", "--in", str(synth_file), "--target", "0",
               "--config", str(cfg), "--supp-min", "0.9", "--out", str(out_b)) == 0
    assert len(read_patterns(out_b)) <= len(read_patterns(out_a))


def test_full_pipeline(tmp_path):
    feats = tmp_path / "feats.bin"
    assert run("synth", "--out", str(feats),
               "--dim", "32", "--categories", "2", "--images", "10",
               "--patches", "4", "--concepts", "1", "--concept-items", "3") == 0

    patterns = tmp_path / "p0.jsonl"
    assert run("mine", "--in", str(feats), "--target", "0", "--k", "4",
               "--supp-min", "0.05", "--conf-min", "0.5", "--min-len", "2",
               "--max-len", "3", "--out", str(patterns)) == 0

    elements = tmp_path / "e0.jsonl"
    assert run("retrieve", "--in", str(feats), "--patterns", str(patterns),
               "--target", "0", "--k", "4", "--out", str(elements)) == 0

    selected = tmp_path / "sel0.jsonl"
    sel_patterns = tmp_path / "selp0.jsonl"
    assert run("select", "--elements", str(elements), "--top-x", "3",
               "--out", str(selected), "--patterns-out", str(sel_patterns)) == 0
    assert len(read_patterns(sel_patterns)) <= 3

    bank = tmp_path / "d0.bin"
    merged = tmp_path / "m0.jsonl"
    assert run("merge", "--in", str(feats), "--elements", str(selected),
               "--target", "0", "--th", "0.0", "--detectors", str(bank),
               "--merged", str(merged)) == 0
    dim, detectors = read_detector_bank(bank)
    assert dim == 32 and detectors

    enc_boe = tmp_path / "boe.bin"
    assert run("encode-boe", "--in", str(feats), "--detectors", str(bank),
               "--out", str(enc_boe)) == 0
    enc_dim, rows = read_vector_file(enc_boe)
    assert enc_dim == len(detectors) * 5
    assert len(rows) == 20  # one encoding per image

    enc_bop = tmp_path / "bop.bin"
    assert run("encode-bop", "--in", str(feats), "--patterns", str(sel_patterns),
               "--out", str(enc_bop)) == 0
    bop_dim, bop_rows = read_vector_file(enc_bop)
    assert bop_dim == len(read_patterns(sel_patterns)) * 5
    assert len(bop_rows) == 20

    model = tmp_path / "model.json"
    assert run("train", "--encodings", str(enc_boe), "--out", str(model),
               "--reg-grid", "0.1,1", "--folds", "3") == 0

    report = tmp_path / "report.jsonl"
    assert run("eval", "--encodings", str(enc_boe), "--model", str(model),
               "--metric", "accuracy", "--out", str(report)) == 0
    payload = json.loads(report.read_text().splitlines()[-1])
    assert payload["metric"] == "accuracy"
    assert payload["value"] >= 0.5


def test_eval_ap_report(tmp_path):
    feats = tmp_path / "feats.bin"
    run("synth", "--out", str(feats), "--dim", "16", "--categories", "2",
        "--images", "8", "--patches", "3", "--concepts", "1",
        "--concept-items", "3")
    patterns = tmp_path / "p.jsonl"
    run("mine", "--in", str(feats), "--target", "0", "--k", "4",
        "--supp-min", "0.05", "--conf-min", "0.5", "--out", str(patterns))
    elements = tmp_path / "e.jsonl"
    run("retrieve", "--in", str(feats), "--patterns", str(patterns),
        "--target", "0", "--k", "4", "--out", str(elements))
    bank = tmp_path / "d.bin"
    run("merge", "--in", str(feats), "--elements", str(elements),
        "--target", "0", "--th", "0.0", "--detectors", str(bank))
    enc = tmp_path / "enc.bin"
    run("encode-boe", "--in", str(feats), "--detectors", str(bank),
        "--out", str(enc))
    model = tmp_path / "model.json"
    run("train", "--encodings", str(enc), "--out", str(model),
        "--reg-grid", "0.1", "--folds", "2")
    report = tmp_path / "ap.jsonl"
    assert run("eval", "--encodings", str(enc), "--model", str(model),
               "--metric", "ap", "--out", str(report)) == 0
    lines = [json.loads(l) for l in report.read_text().splitlines()]
    assert lines[-1]["metric"] == "mAP"
    assert 0.0 < lines[-1]["value"] <= 1.0


def test_context_command(tmp_path):
    mask_path = tmp_path / "img0.msk"
    labels = np.zeros((40, 40), dtype=np.uint8)
    labels[:, :20] = 1
    write_maskfile(PixelMasks(labels), mask_path)
    spec = {
        "element": 0,
        "images": [{"mask": str(mask_path),
                    "detections": [[2, 2, 10, 10, 5.0], [25, 25, 10, 10, 1.5]]}],
    }
    input_path = tmp_path / "ctx.jsonl"
    input_path.write_text(json.dumps(spec) + "\n")
    report = tmp_path / "ctx_report.jsonl"
    assert run("context", "--input", str(input_path), "--threshold", "2.0",
               "--out", str(report)) == 0
    lines = [json.loads(l) for l in report.read_text().splitlines()]
    assert lines[0] == {"element": 0, "type": "ground_truth_object"}
    assert lines[1]["counts"]["ground_truth_object"] == 1


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert run("bench", "--transactions", "2000", "--items", "64",
               "--k", "6", "--supp-min", "0.001", "--conf-min", "0.6",
               "--out", str(out)) == 0
    payload = json.loads(out.read_text())
    assert payload["transactions"] == 2000
    assert payload["mine_seconds"] < 30


def test_outputs_are_atomic(tmp_path, synth_file):
    # no temp litter next to outputs after a successful run
    patterns = tmp_path / "patterns.jsonl"
    assert run("mine", "--in", str(synth_file), "--target", "0",
               "--k", "4", "--supp-min", "0.05", "--conf-min", "0.5",
               "--out", str(patterns)) == 0
    assert patterns.exists()
    leftovers = [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]
    assert leftovers == []


def test_pipeline_classifies_held_out_split(tmp_path):
    """Planted data, mined/merged/encoded/trained purely through the CLI."""
    common = ["--dim", "64", "--categories", "3", "--images", "40",
              "--patches", "25", "--concepts", "2", "--concept-items", "4"]
    train = tmp_path / "train.bin"
    test = tmp_path / "test.bin"
    assert run("synth", "--out", str(train), "--seed", "0", *common) == 0
    assert run("synth", "--out", str(test), "--seed", "1", *common) == 0

    banks = []
    for cat in range(3):
        patterns = tmp_path / f"p{cat}.jsonl"
        assert run("mine", "--in", str(train), "--target", str(cat), "--k", "8",
                   "--supp-min", "0.01", "--conf-min", "0.6",
                   "--out", str(patterns)) == 0
        elements = tmp_path / f"e{cat}.jsonl"
        assert run("retrieve", "--in", str(train), "--patterns", str(patterns),
                   "--target", str(cat), "--k", "8", "--out", str(elements)) == 0
        bank = tmp_path / f"d{cat}.bin"
        # raw-score threshold calibrated for the planted signal scale
        assert run("merge", "--in", str(train), "--elements", str(elements),
                   "--target", str(cat), "--th", "100", "--top-x", "10",
                   "--detectors", str(bank)) == 0
        banks.append(str(bank))

    enc_train = tmp_path / "enc_train.bin"
    enc_test = tmp_path / "enc_test.bin"
    assert run("encode-boe", "--in", str(train), "--detectors", *banks,
               "--out", str(enc_train)) == 0
    assert run("encode-boe", "--in", str(test), "--detectors", *banks,
               "--out", str(enc_test)) == 0

    model = tmp_path / "model.json"
    assert run("train", "--encodings", str(enc_train), "--out", str(model),
               "--folds", "5") == 0
    report = tmp_path / "report.jsonl"
    assert run("eval", "--encodings", str(enc_test), "--model", str(model),
               "--metric", "accuracy", "--out", str(report)) == 0
    payload = json.loads(report.read_text().splitlines()[-1])
    assert payload["value"] >= 0.95


def test_synth_spec_file(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("dim = 16\ncategories = 2\nimages = 4\npatches = 3\n"
                    "concepts = 1\nconcept-items = 3\n")
    out = tmp_path / "feats.bin"
    assert run("synth", "--spec", str(spec), "--out", str(out)) == 0
    dim, rows = read_vector_file(out)  # same header layout
    assert dim == 16 and len(rows) == 2 * 4 * 3
    # flags beat spec-file values
    out2 = tmp_path / "feats2.bin"
    assert run("synth", "--spec", str(spec), "--out", str(out2), "--images", "2") == 0
    _, rows2 = read_vector_file(out2)
    assert len(rows2) == 2 * 2 * 3


def test_seed_fixes_synth_output(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    for path in (a, b):
        assert run("synth", "--out", str(path), "--dim", "16",
                   "--categories", "2", "--images", "4", "--patches", "3",
                   "--concepts", "1", "--concept-items", "3", "--seed", "7") == 0
    assert a.read_bytes() == b.read_bytes()
