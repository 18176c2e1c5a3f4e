"""Batch command-line surface: train, tag, eval, bench, weaklabel, split, stats.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
failure. All randomness flows from explicit --seed flags; JSON artifacts are
written atomically with canonical key order and a schema_version field, so
identical inputs and seeds produce byte-identical outputs.
"""

import json
import os
import sys
import tempfile

import click

from . import corpus as corpus_mod
from .corpus import (
    MixMode,
    MixSpec,
    Part,
    mix,
    partition,
    read_corpus_jsonl,
    split_corpus,
    write_corpus_jsonl,
)
from .errors import DataError, TeigoError
from .evaluator import benchmark, evaluate, render_table
from .tagger import load_model_file, predict_spans, save_model
from .teacher import RawDocument, build_weak_corpus, load_rules, parse_rules
from .trainer import grid_search, load_grid, train

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def _write_json(path, payload: dict):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    data = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".teigo-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_corpora(paths):
    corpora = {}
    for path in paths:
        corpus = read_corpus_jsonl(path)
        corpora[corpus.name] = corpus
    return corpora


@click.group()
def cli():
    """Temporal-expression identification toolkit."""


@cli.command("train")
@click.option("--mix", "mix_mode", type=click.Choice(["base", "compilation", "all"]),
              default="base", show_default=True)
@click.option("--ref", "ref_path", required=True, type=click.Path(dir_okay=False))
@click.option("--aux", "aux_paths", multiple=True, type=click.Path(dir_okay=False))
@click.option("--weak", "weak_paths", multiple=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_id", default="1", show_default=True,
              help="grid config id (1-26) or 'grid' for the full search")
@click.option("--seed", default=13, show_default=True, type=int,
              help="seed for the document-level splits")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_train(mix_mode, ref_path, aux_paths, weak_paths, config_id, seed, out_path):
    """Train a tagger on a Base/Compilation/All mixture of JSONL corpora."""
    if config_id != "grid":
        try:
            cid = int(config_id)
        except ValueError:
            raise click.UsageError(f"--config must be 1-26 or 'grid', got {config_id!r}")
        grid = {c.id: c for c in load_grid()}
        if cid not in grid:
            raise click.UsageError(f"no grid config with id {cid}")

    mode = MixMode(mix_mode)
    if mode != MixMode.BASE and not aux_paths:
        click.echo("warning: no --aux corpora given; mixture degenerates to the "
                   "reference corpus", err=True)

    corpora = _load_corpora([ref_path, *aux_paths, *weak_paths])
    ref_name = read_corpus_jsonl(ref_path).name
    aux_names = tuple(read_corpus_jsonl(p).name for p in aux_paths)
    weak_names = tuple(read_corpus_jsonl(p).name for p in weak_paths)
    splits = {name: split_corpus(c, seed) for name, c in corpora.items()}
    spec = MixSpec(mode, ref_name, aux_names, weak_names)
    train_corpus = mix(spec, corpora, splits)
    val_docs = partition(corpora[ref_name], splits[ref_name], Part.VALIDATION)
    meta = {"mix": mode.value, "reference": ref_name, "split_seed": seed}

    if config_id == "grid":
        result = grid_search(train_corpus.documents, val_docs, meta=meta)
        model = result.best_model
        _write_json(out_path + ".leaderboard.json", {"leaderboard": result.leaderboard,
                                                     "best_id": result.best_id})
        click.echo(f"{'id':>4} {'best_val_f1':>12} {'best_epoch':>11}")
        for row in result.leaderboard:
            if "best_val_f1" in row:
                click.echo(f"{row['id']:>4} {row['best_val_f1']:>12.4f} "
                           f"{row['best_epoch']:>11}")
            else:
                click.echo(f"{row['id']:>4} failed: {row['error']}")
        report = result.reports[result.best_id]
    else:
        config = grid[cid]
        model, report = train(config, train_corpus.documents, val_docs, meta=meta)
    save_model(model, out_path)
    _write_json(out_path + ".report.json", report.to_dict())
    click.echo(f"model written to {out_path} "
               f"(best epoch {report.best_epoch}, {report.stop_reason})")


@cli.command("tag")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--in", "in_path", default="-", show_default=True,
              help="input file or - for standard input")
@click.option("--format", "fmt", type=click.Choice(["jsonl", "text"]),
              default="text", show_default=True)
def cmd_tag(model_path, in_path, fmt):
    """Tag input lines, streaming one JSONL document per line to stdout."""
    model = load_model_file(model_path)
    stream = sys.stdin if in_path == "-" else open(in_path, encoding="utf-8")
    try:
        for i, line in enumerate(stream):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if fmt == "jsonl":
                doc = corpus_mod.read_jsonl(line)
                text, doc_id = doc.text, doc.id
            else:
                text, doc_id = line, str(i)
            spans = predict_spans(model, text)
            click.echo(json.dumps(
                {"id": doc_id, "text": text, "language": model.language,
                 "provenance": "weak",
                 "spans": [[s.start, s.end] for s in spans]},
                sort_keys=True, ensure_ascii=False,
            ))
    finally:
        if stream is not sys.stdin:
            stream.close()


@cli.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--reps", default=1, show_default=True, type=int)
def cmd_eval(model_path, in_path, out_path, reps):
    """Strict/relaxed F1 and per-sentence latency on a JSONL corpus."""
    model = load_model_file(model_path)
    corpus = read_corpus_jsonl(in_path)
    report = evaluate(model, corpus, repetitions=reps)
    row = dict(report.to_dict(), name=corpus.name)
    click.echo(render_table([row]))
    if out_path:
        _write_json(out_path, report.to_dict())


@cli.command("bench")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--reps", default=3, show_default=True, type=int)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def cmd_bench(model_path, in_path, reps, out_path):
    """Per-sentence tagging latency (warm-up excluded)."""
    model = load_model_file(model_path)
    corpus = read_corpus_jsonl(in_path)
    mean, std, n_sentences = benchmark(model, corpus, repetitions=reps)
    click.echo(f"{mean:.3f} ms/sentence (std {std:.3f}, {n_sentences} sentences, "
               f"{reps} repetitions)")
    if out_path:
        _write_json(out_path, {"ms_per_sentence": mean, "ms_per_sentence_std": std,
                               "n_sentences": n_sentences, "repetitions": reps})


@cli.command("weaklabel")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False),
              help="raw document stream: JSONL with id, text, dct fields")
@click.option("--rules", "rules_arg", default="en", show_default=True,
              help="language code of a shipped rule pack, or a rule file path")
@click.option("--budget", default=3600.0, show_default=True, type=float,
              help="wall-clock budget in seconds")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--lang", default="en", show_default=True)
def cmd_weaklabel(in_path, rules_arg, budget, out_path, lang):
    """Build a weakly labeled corpus from a raw document stream."""
    if os.path.exists(rules_arg):
        with open(rules_arg, encoding="utf-8") as fh:
            rules = parse_rules(fh.read(), lang)
    else:
        rules = load_rules(rules_arg)

    def raw_stream():
        with open(in_path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                if not line.strip():
                    continue
                obj = json.loads(line)
                yield RawDocument(id=str(obj.get("id", i)), text=obj["text"],
                                  dct=obj.get("dct"), fetched_at=obj.get("fetched_at"))

    weak_corpus, report = build_weak_corpus(
        raw_stream(), rules, budget_s=budget, language=lang,
        name=os.path.splitext(os.path.basename(out_path))[0],
    )
    write_corpus_jsonl(weak_corpus, out_path)
    _write_json(out_path + ".report.json", report.to_dict())
    click.echo(f"kept {report.kept} of {report.total} documents "
               f"(non-utf8 {report.rejected_non_utf8}, bad dct {report.rejected_bad_dct}, "
               f"html {report.rejected_html}, zero timex {report.rejected_zero_timex})")


@cli.command("split")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_split(in_path, seed, out_path):
    """Deterministic 80/20 document-level split of a JSONL corpus."""
    corpus = read_corpus_jsonl(in_path)
    split = split_corpus(corpus, seed)
    _write_json(out_path, {
        "corpus": corpus.name,
        "seed": seed,
        "assignment": {doc_id: part.value for doc_id, part in split.assignment.items()},
    })
    counts = {p.value: len(split.ids(p)) for p in Part}
    click.echo(" ".join(f"{k}={v}" for k, v in sorted(counts.items())))


@cli.command("stats")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def cmd_stats(in_path, out_path):
    """Document/sentence/token/timex counts of a JSONL corpus."""
    corpus = read_corpus_jsonl(in_path)
    st = corpus_mod.stats(corpus)
    payload = {"corpus": corpus.name, "n_docs": st.n_docs,
               "n_sentences": st.n_sentences, "n_tokens": st.n_tokens,
               "n_timexs": st.n_timexs}
    header = f"{'corpus':<24} {'docs':>8} {'sents':>8} {'tokens':>10} {'timexs':>8}"
    click.echo(header)
    click.echo("-" * len(header))
    click.echo(f"{corpus.name:<24} {st.n_docs:>8} {st.n_sentences:>8} "
               f"{st.n_tokens:>10} {st.n_timexs:>8}")
    if out_path:
        _write_json(out_path, payload)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except TeigoError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
