"""End-user command line: every subcommand exercised on tiny inputs."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from primadnn.cli import main
from primadnn.frontend import read_feature_file

runner = CliRunner()


def invoke(args):
    result = runner.invoke(main, args, catch_exceptions=False)
    return result


@pytest.fixture(scope="module")
def cli_workspace(small_corpus, tmp_path_factory):
    """A trained 1-epoch checkpoint over the small corpus, via the CLI."""
    corpus, _ = small_corpus
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.json"
    config.write_text(json.dumps({"train": {"max_epochs": 1, "batch_size": 4, "seed": 0}}))
    run_dir = root / "run"
    result = invoke(
        ["train", "--corpus", str(corpus), "--config", str(config),
         "--fold", "0", "--out", str(run_dir)]
    )
    assert result.exit_code == 0, result.output
    return corpus, config, run_dir


class TestSynth:
    def test_synth_writes_manifest(self, tmp_path):
        out = tmp_path / "c"
        result = invoke(["synth", "--out", str(out), "--clips", "2", "--singers", "2", "--seed", "1"])
        assert result.exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["clips"]) == 2
        assert (out / manifest["clips"][0]["wav"]).exists()


class TestExtract:
    def test_feature_files_written_and_deterministic(self, small_corpus, tmp_path):
        corpus, manifest = small_corpus
        out1, out2 = tmp_path / "f1", tmp_path / "f2"
        for out in (out1, out2):
            result = invoke(["extract", "--corpus", str(corpus), "--out", str(out)])
            assert result.exit_code == 0
        name = Path(manifest["clips"][0]["wav"]).stem + ".pdnf"
        stack = read_feature_file(out1 / name)
        assert stack.data.shape == (4, 160, 1000)
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestTrain:
    def test_artifacts_written(self, cli_workspace):
        _, _, run_dir = cli_workspace
        assert (run_dir / "checkpoint.pdnc").exists()
        assert (run_dir / "metrics.json").exists()
        log = (run_dir / "train_log.jsonl").read_text().strip().splitlines()
        assert len(log) == 1  # one epoch
        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert "macro_f" in metrics


class TestInfer:
    def test_corpus_inference_matches_in_process(self, cli_workspace, tmp_path):
        from primadnn.dataset import load_corpus_examples
        from primadnn.model import load_checkpoint
        from primadnn.synth import load_manifest
        from primadnn.training import make_fold_plan, predict_activations

        corpus, _, run_dir = cli_workspace
        out = tmp_path / "inf"
        result = invoke(
            ["infer", "--checkpoint", str(run_dir / "checkpoint.pdnc"),
             "--corpus", str(corpus), "--fold", "0", "--out", str(out)]
        )
        assert result.exit_code == 0
        acts = sorted(out.glob("*.act.npy"))
        dets = sorted(out.glob("*.det.csv"))
        assert len(acts) == len(dets) == 2  # fold 0 test split: one singer, two clips

        ckpt = load_checkpoint(run_dir / "checkpoint.pdnc")
        manifest = load_manifest(corpus)
        examples = load_corpus_examples(manifest, corpus)
        plan = make_fold_plan(sorted({e.singer_id for e in examples}), k=7, seed=0)
        _, _, test_singers = plan.fold(0)
        test = [e for e in examples if e.singer_id in set(test_singers)]
        ref = predict_activations(test, ckpt.model, ckpt.config, stats=ckpt.stats)
        by_stem = {Path(e.clip_id).stem: a for e, a in zip(test, ref)}
        for path in acts:
            loaded = np.load(path)
            np.testing.assert_array_equal(loaded, np.asarray(by_stem[path.stem.replace(".act", "")]))

    def test_single_wav_inference(self, cli_workspace, small_corpus, tmp_path):
        corpus, _, run_dir = cli_workspace
        _, manifest = small_corpus
        rec = manifest["clips"][0]
        out = tmp_path / "one"
        result = invoke(
            ["infer", "--checkpoint", str(run_dir / "checkpoint.pdnc"),
             "--wav", str(corpus / rec["wav"]), "--pitch", str(corpus / rec["pitch_csv"]),
             "--out", str(out)]
        )
        assert result.exit_code == 0
        assert len(list(out.glob("*.act.npy"))) == 1

    def test_requires_exactly_one_source(self, cli_workspace):
        _, _, run_dir = cli_workspace
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(run_dir / "checkpoint.pdnc"), "--out", "/tmp/x"]
        )
        assert result.exit_code != 0


class TestEval:
    def test_hand_example_prints_f_point_eight(self, tmp_path):
        ref = tmp_path / "ref.csv"
        pred = tmp_path / "pred.csv"
        ref.write_text("0.0,0.3,vibrato\n")
        pred.write_text("0.1,0.3,vibrato\n")
        out = tmp_path / "m.json"
        result = invoke(
            ["eval", "--ref", str(ref), "--pred", str(pred), "--duration", "10.0",
             "--out", str(out)]
        )
        assert result.exit_code == 0
        vib = [l for l in result.output.splitlines() if "vibrato" in l][0]
        assert "P=1.000" in vib and "F=0.800" in vib
        metrics = json.loads(out.read_text())
        assert metrics["per_class"]["vibrato"]["f_measure"] == pytest.approx(0.8)

    def test_corpus_mode_matches_run_metrics(self, cli_workspace, tmp_path):
        corpus, _, run_dir = cli_workspace
        out = tmp_path / "inf"
        invoke(
            ["infer", "--checkpoint", str(run_dir / "checkpoint.pdnc"),
             "--corpus", str(corpus), "--fold", "0", "--out", str(out)]
        )
        m = tmp_path / "metrics.json"
        result = invoke(
            ["eval", "--corpus", str(corpus), "--pred-dir", str(out), "--out", str(m)]
        )
        assert result.exit_code == 0
        cli_metrics = json.loads(m.read_text())
        run_metrics = json.loads((run_dir / "metrics.json").read_text())
        assert cli_metrics["macro_f"] == pytest.approx(run_metrics["macro_f"], abs=1e-12)

    def test_usage_error_without_inputs(self):
        result = runner.invoke(main, ["eval"])
        assert result.exit_code != 0


class TestGradcheckCommand:
    def test_reports_pass(self):
        result = invoke(["gradcheck", "--seed", "0"])
        assert result.exit_code == 0
        assert "PASS" in result.output
        for name in ("conv", "norm", "se", "lstm", "fc", "focal", "bce"):
            assert name in result.output


class TestViz:
    def test_timeline_csv(self, cli_workspace, small_corpus, tmp_path):
        corpus, _, run_dir = cli_workspace
        _, manifest = small_corpus
        rec = manifest["clips"][0]
        out = tmp_path / "timeline.csv"
        result = invoke(
            ["viz", "--checkpoint", str(run_dir / "checkpoint.pdnc"),
             "--wav", str(corpus / rec["wav"]), "--pitch", str(corpus / rec["pitch_csv"]),
             "--ref", str(corpus / rec["annotation_csv"]), "--out", str(out)]
        )
        assert result.exit_code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "time,class,reference,activation,detection"
        assert len(lines) == 1 + 1000 * 9
        row = lines[1].split(",")
        assert row[0] == "0.000"
        assert 0.0 < float(row[3]) < 1.0
        assert row[4] in ("0", "1")
