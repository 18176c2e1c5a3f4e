import json

import pytest

from synthdata import news_stream, template_corpus
from teigo.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from teigo.corpus import Corpus, write_corpus_jsonl


@pytest.fixture()
def ref_corpus_path(tmp_path):
    corpus = Corpus("ref", "en", tuple(template_corpus(30)))
    path = tmp_path / "ref.jsonl"
    write_corpus_jsonl(corpus, path)
    return str(path)


def run(*argv):
    return main(list(argv))


class TestExitCodes:
    def test_no_command_usage(self):
        assert run() == EXIT_USAGE

    def test_unknown_command(self):
        assert run("frobnicate") == EXIT_USAGE

    def test_unknown_mix_value(self, ref_corpus_path, tmp_path):
        code = run("train", "--mix", "bogus", "--ref", ref_corpus_path,
                   "--out", str(tmp_path / "m.teigo"))
        assert code == EXIT_USAGE

    def test_bad_config_id(self, ref_corpus_path, tmp_path):
        assert run("train", "--config", "99", "--ref", ref_corpus_path,
                   "--out", str(tmp_path / "m.teigo")) == EXIT_USAGE
        assert run("train", "--config", "soon", "--ref", ref_corpus_path,
                   "--out", str(tmp_path / "m.teigo")) == EXIT_USAGE

    def test_missing_corpus_is_data_error(self, tmp_path):
        assert run("stats", "--in", str(tmp_path / "absent.jsonl")) == EXIT_DATA

    def test_malformed_jsonl_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"spans": []}\n')
        assert run("stats", "--in", str(bad)) == EXIT_DATA

    def test_corrupt_model_is_data_error(self, tmp_path):
        model = tmp_path / "bad.teigo"
        model.write_bytes(b"XXXXX not a model")
        empty = tmp_path / "in.txt"
        empty.write_text("some text\n")
        code = run("tag", "--model", str(model), "--in", str(empty))
        assert code == EXIT_DATA

    def test_usage_error_writes_no_artifacts(self, ref_corpus_path, tmp_path):
        out = tmp_path / "m.teigo"
        run("train", "--config", "99", "--ref", ref_corpus_path, "--out", str(out))
        assert not out.exists()
        assert not (tmp_path / "m.teigo.report.json").exists()


class TestSplit:
    def test_split_artifact(self, ref_corpus_path, tmp_path, capsys):
        out = tmp_path / "split.json"
        assert run("split", "--in", ref_corpus_path, "--seed", "5",
                   "--out", str(out)) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["seed"] == 5
        assert payload["schema_version"] == 1
        assert len(payload["assignment"]) == 30
        parts = list(payload["assignment"].values())
        assert parts.count("test") == 6
        assert parts.count("validation") == 5
        assert parts.count("train") == 19

    def test_idempotent_byte_identical(self, ref_corpus_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("split", "--in", ref_corpus_path, "--seed", "5", "--out", str(a))
        run("split", "--in", ref_corpus_path, "--seed", "5", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_artifact(self, ref_corpus_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("split", "--in", ref_corpus_path, "--seed", "5", "--out", str(a))
        run("split", "--in", ref_corpus_path, "--seed", "6", "--out", str(b))
        assert a.read_bytes() != b.read_bytes()


class TestStats:
    def test_toy_values(self, tmp_path, capsys):
        path = tmp_path / "toy.jsonl"
        path.write_text(
            '{"id": "a", "text": "Met today.", "spans": [[4, 9]]}\n'
            '{"id": "b", "text": "In 1999 and 2000.", "spans": [[3, 7], [12, 16]]}\n'
        )
        out = tmp_path / "stats.json"
        assert run("stats", "--in", str(path), "--out", str(out)) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["n_docs"] == 2
        assert payload["n_timexs"] == 3
        assert payload["n_tokens"] == 8
        assert "toy" in capsys.readouterr().out


class TestWeaklabel:
    def test_conservation_and_artifacts(self, tmp_path):
        raws = news_stream(40)
        in_path = tmp_path / "raw.jsonl"
        with open(in_path, "w") as fh:
            for raw in raws:
                fh.write(json.dumps({"id": raw.id, "text": raw.text, "dct": raw.dct}) + "\n")
        out = tmp_path / "weak.jsonl"
        assert run("weaklabel", "--in", str(in_path), "--out", str(out)) == EXIT_OK
        report = json.loads((tmp_path / "weak.jsonl.report.json").read_text())
        assert report["total"] == 40
        kept_lines = [l for l in out.read_text().splitlines() if l.strip()]
        assert len(kept_lines) == report["kept"]
        for line in kept_lines:
            doc = json.loads(line)
            assert doc["provenance"] == "weak"
            assert doc["spans"]

    def test_custom_rule_file(self, tmp_path):
        rules = tmp_path / "mini.rules"
        rules.write_text("only 10 sometime\n")
        in_path = tmp_path / "raw.jsonl"
        in_path.write_text(
            '{"id": "a", "text": "it happened sometime", "dct": "2023-01-01"}\n'
            '{"id": "b", "text": "it happened today", "dct": "2023-01-01"}\n'
        )
        out = tmp_path / "weak.jsonl"
        assert run("weaklabel", "--in", str(in_path), "--rules", str(rules),
                   "--out", str(out)) == EXIT_OK
        docs = [json.loads(l) for l in out.read_text().splitlines()]
        assert [d["id"] for d in docs] == ["a"]


class TestTrainTagEval:
    @pytest.fixture()
    def trained_model(self, ref_corpus_path, tmp_path):
        out = tmp_path / "model.teigo"
        code = run("train", "--ref", ref_corpus_path, "--config", "1",
                   "--out", str(out))
        assert code == EXIT_OK
        return out

    def test_train_writes_model_and_report(self, trained_model, tmp_path):
        assert trained_model.exists() and trained_model.stat().st_size > 0
        report = json.loads((tmp_path / "model.teigo.report.json").read_text())
        assert report["schema_version"] == 1
        assert report["stop_reason"] in ("patience", "max_epochs")
        assert report["best_epoch"] >= 1

    def test_tag_text_mode(self, trained_model, tmp_path, capsys):
        in_path = tmp_path / "texts.txt"
        in_path.write_text("We met on 12 of March 2021 in town.\n\nno dates\n")
        assert run("tag", "--model", str(trained_model),
                   "--in", str(in_path)) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("{")]
        assert len(lines) == 2  # blank line skipped
        first = json.loads(lines[0])
        assert first["text"].startswith("We met")
        for start, end in first["spans"]:
            assert 0 <= start < end <= len(first["text"])

    def test_eval_report(self, trained_model, ref_corpus_path, tmp_path, capsys):
        out = tmp_path / "eval.json"
        assert run("eval", "--model", str(trained_model), "--in", ref_corpus_path,
                   "--out", str(out)) == EXIT_OK
        payload = json.loads(out.read_text())
        assert 0.0 <= payload["strict"]["f1"] <= 1.0
        assert payload["relaxed"]["f1"] >= payload["strict"]["f1"]
        assert "F1R" in capsys.readouterr().out

    def test_bench_reports_latency(self, trained_model, ref_corpus_path, tmp_path):
        out = tmp_path / "bench.json"
        assert run("bench", "--model", str(trained_model), "--in", ref_corpus_path,
                   "--reps", "2", "--out", str(out)) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["ms_per_sentence"] > 0.0
        assert payload["repetitions"] == 2
