"""Command line entry points.

Every command reads and writes line-delimited JSON in the same record
shapes the library uses, so commands compose through files.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .classify import (
    HeuristicConfig,
    heuristic_classify,
    load_surface_model,
    lr_classify,
    save_surface_model,
    train_surface_lr,
)
from .core import (
    PipelineError,
    RulechatError,
    read_utterances_jsonl,
    utterance_to_dict,
    write_utterances_jsonl,
)
from .corpus import (
    SplitSpec,
    dataset_stats,
    load_dataset,
    sample_negative_questions,
    sample_negative_scenarios,
    split_dataset,
)
from .entailment import (
    derive_entailment_corpus,
    entail,
    entail_heuristic,
    load_entailment_model,
    read_entailment_jsonl,
    save_entailment_model,
    train_entailment,
    write_entailment_jsonl,
)
from .followup import generate_followup, map_question_to_span
from .metrics import (
    MetricReport,
    confusion_counts,
    corpus_bleu,
    micro_macro_accuracy,
)
from .parsing import extract_rule_texts, parse_rule
from .pipeline import (
    FixedOracle,
    RandomOracle,
    evaluate_pipeline,
    heuristic_components,
    model_components,
    run_dialog,
)
from .core import make_utterance


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _write_jsonl(path: str | None, records: list[dict]) -> None:
    handle = sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")
    try:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    finally:
        if handle is not sys.stdout:
            handle.close()


def _write_report(path: str | None, report: MetricReport) -> None:
    payload = json.dumps(report.to_dict(), indent=2, ensure_ascii=False)
    if path in (None, "-"):
        click.echo(payload)
    else:
        Path(path).write_text(payload + "\n", encoding="utf-8")


@click.group()
@click.version_option(version=__version__, prog_name="rulechat")
def main() -> None:
    """Conversational reading of natural-language rule texts."""


# --- parsing ---------------------------------------------------------------------


@main.command()
@click.argument("document", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-len", default=120, show_default=True, help="Token budget per snippet.")
@click.option("--max-bullets", default=6, show_default=True, help="Bullet budget per snippet.")
@click.option("--whole", is_flag=True, help="Parse the file as one snippet instead of extracting.")
@click.option("--output", "-o", default="-", help="Output JSONL path ('-' for stdout).")
def parse(document: str, max_len: int, max_bullets: int, whole: bool, output: str) -> None:
    """Extract rule snippets from DOCUMENT and parse their logic."""
    text = Path(document).read_text(encoding="utf-8")
    if whole:
        snippets = [text]
    else:
        snippets = [
            s.text
            for s in extract_rule_texts(text, max_len=max_len, max_bullets=max_bullets)
        ]
    records = []
    for snippet in snippets:
        try:
            logic = parse_rule(snippet)
        except RulechatError as exc:
            records.append({"snippet": snippet, "error": str(exc)})
            continue
        records.append({"snippet": snippet, "logic": logic.to_dict()})
    _write_jsonl(output, records)


# --- classification ----------------------------------------------------------------


@main.command()
@click.option("--input", "-i", "input_path", required=True, type=click.Path(exists=True))
@click.option("--model", default="heuristic", show_default=True,
              help="'heuristic' or a path to a trained model file.")
@click.option("--relevance-threshold", default=0.1, show_default=True)
@click.option("--output", "-o", default="-")
def classify(input_path: str, model: str, relevance_threshold: float, output: str) -> None:
    """Predict the decision class for each utterance."""
    utterances = list(read_utterances_jsonl(input_path))
    records = []
    if model == "heuristic":
        cfg = HeuristicConfig(relevance_threshold=relevance_threshold)
        for u in utterances:
            logic = parse_rule(u.snippet)
            decision = heuristic_classify(u, logic, cfg)
            records.append({"utterance_id": u.utterance_id, "label": decision.label.value})
    else:
        surface = load_surface_model(model)
        for u in utterances:
            decision = lr_classify(surface, u)
            records.append(
                {
                    "utterance_id": u.utterance_id,
                    "label": decision.label.value,
                    "probabilities": dict(decision.probabilities or ()),
                }
            )
    _write_jsonl(output, records)


@main.command()
@click.option("--input", "-i", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "-o", default="-")
@click.option("--span-threshold", default=3, show_default=True,
              help="Minimum common-subsequence length for span grounding.")
def followup(input_path: str, output: str, span_threshold: int) -> None:
    """Generate the next follow-up question for each utterance."""
    records = []
    for u in read_utterances_jsonl(input_path):
        logic = parse_rule(u.snippet)
        try:
            generated = generate_followup(u, logic)
        except PipelineError as exc:
            records.append({"utterance_id": u.utterance_id, "error": str(exc)})
            continue
        mapping = map_question_to_span(u.snippet, generated.text, threshold=span_threshold)
        records.append(
            {
                "utterance_id": u.utterance_id,
                "text": generated.text,
                "span": list(mapping.span) if mapping else None,
            }
        )
    _write_jsonl(output, records)


@main.command()
@click.option("--input", "-i", "input_path", required=True, type=click.Path(exists=True))
@click.option("--model", default="heuristic", show_default=True)
@click.option("--output", "-o", default="-")
def entailment(input_path: str, model: str, output: str) -> None:
    """Label (premise, hypothesis) pairs from a JSONL file."""
    pairs = []
    with open(input_path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                record = json.loads(line)
                pairs.append((str(record["premise"]), str(record["hypothesis"])))
    trained = None if model == "heuristic" else load_entailment_model(model)
    records = []
    for premise, hypothesis in pairs:
        if trained is None:
            label = entail_heuristic(premise, hypothesis)
        else:
            label = entail(trained, premise, hypothesis).label
        records.append({"premise": premise, "hypothesis": hypothesis, "label": label})
    _write_jsonl(output, records)


# --- training -----------------------------------------------------------------------


@main.group()
def train() -> None:
    """Train the linear models."""


@train.command("classifier")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=300, show_default=True)
@click.option("--learning-rate", default=1.0, show_default=True)
@click.option("--l2", default=1e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_classifier(data: str, out: str, epochs: int, learning_rate: float, l2: float, seed: int) -> None:
    examples = [(u, u.decision()) for u in read_utterances_jsonl(data)]
    model = train_surface_lr(
        examples, epochs=epochs, learning_rate=learning_rate, l2=l2, seed=seed
    )
    save_surface_model(model, out)
    click.echo(f"saved classifier ({len(examples)} examples) to {out}")


@train.command("entailment")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--epochs", default=300, show_default=True)
@click.option("--learning-rate", default=1.0, show_default=True)
@click.option("--l2", default=1e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_entailment_cmd(data: str, out: str, epochs: int, learning_rate: float, l2: float, seed: int) -> None:
    instances = read_entailment_jsonl(data)
    model = train_entailment(
        instances, epochs=epochs, learning_rate=learning_rate, l2=l2, seed=seed
    )
    save_entailment_model(model, out)
    click.echo(f"saved entailment model ({len(instances)} pairs) to {out}")


# --- dialog --------------------------------------------------------------------------


def _parse_oracle(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "random":
        return RandomOracle(int(arg or 0))
    if kind == "fixed":
        replies = [r.strip() for r in arg.split(",") if r.strip()]
        return FixedOracle(replies)
    if kind == "interactive":
        class _Interactive:
            def reply(self, question: str) -> str | None:
                click.echo(f"agent: {question}")
                answer = click.prompt("you (Yes/No, empty to stop)", default="", show_default=False)
                answer = answer.strip().capitalize()
                return answer if answer in ("Yes", "No") else None
        return _Interactive()
    _fail(f"unknown oracle {spec!r}; use random:SEED, fixed:Yes,No,... or interactive")


@main.command()
@click.option("--rule", "rule_path", required=True, type=click.Path(exists=True),
              help="File holding the rule text.")
@click.option("--question", required=True)
@click.option("--scenario", default="")
@click.option("--oracle", default="interactive", show_default=True)
@click.option("--max-steps", default=None, type=int)
def dialog(rule_path: str, question: str, scenario: str, oracle: str, max_steps: int | None) -> None:
    """Run one dialog against a rule text."""
    rule_text = Path(rule_path).read_text(encoding="utf-8").strip()
    utterance = make_utterance(snippet=rule_text, question=question, answer="", scenario=scenario)
    user = _parse_oracle(oracle)
    try:
        transcript = run_dialog(utterance, user, max_steps=max_steps)
    except RulechatError as exc:
        _fail(str(exc))
    for turn in transcript.turns:
        answer = turn.response.answer
        if answer.is_terminal:
            click.echo(f"agent: {answer.text}")
        elif oracle != "interactive":
            click.echo(f"agent: {answer.text}")
            if turn.user_reply is not None:
                click.echo(f"user: {turn.user_reply}")
    click.echo(f"final: {transcript.final.text}")


# --- evaluation ------------------------------------------------------------------------


@main.command("eval")
@click.option("--task", type=click.Choice(["classification", "followup", "entailment"]),
              required=True)
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--gold", required=True, type=click.Path(exists=True))
@click.option("--report", default="-", help="Report JSON path ('-' for stdout).")
def eval_cmd(task: str, pred: str, gold: str, report: str) -> None:
    """Score a prediction file against gold labels."""
    with open(pred, encoding="utf-8") as handle:
        pred_records = [json.loads(line) for line in handle if line.strip()]

    if task == "entailment":
        gold_instances = read_entailment_jsonl(gold)
        if len(pred_records) != len(gold_instances):
            _fail("prediction and gold counts differ")
        golds = [g.label for g in gold_instances]
        preds = [str(r["label"]) for r in pred_records]
        micro, macro = micro_macro_accuracy(preds, golds)
        out = MetricReport(micro, macro, counts=confusion_counts(preds, golds),
                           meta={"task": task, "size": len(golds)})
        _write_report(report, out)
        return

    gold_utterances = {u.utterance_id: u for u in read_utterances_jsonl(gold)}
    if task == "classification":
        golds, preds = [], []
        for record in pred_records:
            u = gold_utterances.get(str(record.get("utterance_id")))
            if u is None:
                _fail(f"prediction for unknown utterance {record.get('utterance_id')!r}")
            golds.append(u.decision().value)
            preds.append(str(record["label"]))
        micro, macro = micro_macro_accuracy(preds, golds)
        out = MetricReport(micro, macro, counts=confusion_counts(preds, golds),
                           meta={"task": task, "size": len(golds)})
        _write_report(report, out)
        return

    # follow-up generation: BLEU against gold follow-up texts
    pairs = []
    for record in pred_records:
        u = gold_utterances.get(str(record.get("utterance_id")))
        if u is None or u.answer in ("Yes", "No", "Irrelevant"):
            continue
        if "text" in record:
            pairs.append((str(record["text"]), u.answer))
    if not pairs:
        _fail("no scorable follow-up pairs")
    bleu_scores = {order: corpus_bleu(pairs, order) for order in (1, 2, 3, 4)}
    out = MetricReport(0.0, 0.0, bleu=bleu_scores,
                       meta={"task": task, "pairs": len(pairs)})
    _write_report(report, out)


@main.command("eval-e2e")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", default="heuristic", show_default=True,
              help="'heuristic' or a trained classifier model path.")
@click.option("--entailment-model", default=None, type=click.Path(exists=True))
@click.option("--report", default="-")
def eval_e2e(data: str, model: str, entailment_model: str | None, report: str) -> None:
    """Run the full pipeline over labeled utterances and score it."""
    utterances = list(read_utterances_jsonl(data))
    if model == "heuristic":
        components = heuristic_components()
    else:
        trained_entailer = (
            load_entailment_model(entailment_model) if entailment_model else None
        )
        components = model_components(load_surface_model(model), trained_entailer)
    out = evaluate_pipeline(utterances, components)
    _write_report(report, out)


# --- corpus tooling ----------------------------------------------------------------------


@main.group()
def data() -> None:
    """Dataset loading, sampling, splitting, statistics."""


@data.command("stats")
@click.argument("path", type=click.Path(exists=True))
def data_stats(path: str) -> None:
    ds = load_dataset(path)
    click.echo(json.dumps(dataset_stats(ds), indent=2))


@data.command("load")
@click.argument("path", type=click.Path(exists=True))
def data_load(path: str) -> None:
    """Validate a dataset file and report what loaded."""
    ds = load_dataset(path)
    click.echo(
        f"{len(ds.utterances)} utterances, {len(ds.trees)} trees, "
        f"{len(ds.load_errors)} invalid records"
    )
    for lineno, message in ds.load_errors:
        click.echo(f"  line {lineno}: {message}", err=True)


@data.command("split")
@click.argument("path", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--ratios", default="0.7,0.1,0.2", show_default=True)
@click.option("--unit", type=click.Choice(["source", "tree"]), default="source",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
def data_split(path: str, out_dir: str, ratios: str, unit: str, seed: int) -> None:
    parts = tuple(float(r) for r in ratios.split(","))
    if len(parts) != 3:
        _fail("ratios must be three comma-separated numbers")
    ds = load_dataset(path)
    train_ds, dev_ds, test_ds = split_dataset(ds, SplitSpec(parts, unit), seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, subset in (("train", train_ds), ("dev", dev_ds), ("test", test_ds)):
        n = write_utterances_jsonl(out / f"{name}.jsonl", subset.utterances)
        click.echo(f"{name}: {n} utterances")


@data.command("neg-questions")
@click.argument("path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
def data_neg_questions(path: str, out: str, seed: int) -> None:
    ds = load_dataset(path)
    negatives = sample_negative_questions(ds, seed=seed)
    write_utterances_jsonl(out, negatives)
    click.echo(f"{len(negatives)} negative questions")


@data.command("neg-scenarios")
@click.argument("path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--max-draws", default=1000, show_default=True)
def data_neg_scenarios(path: str, out: str, seed: int, threshold: float, max_draws: int) -> None:
    ds = load_dataset(path)
    negatives = sample_negative_scenarios(
        ds, seed=seed, threshold=threshold, max_draws=max_draws
    )
    write_utterances_jsonl(out, negatives)
    click.echo(f"{len(negatives)} negative-scenario utterances")


@data.command("derive-entailment")
@click.argument("path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def data_derive_entailment(path: str, out: str) -> None:
    ds = load_dataset(path)
    provenance = ds.provenance_map() or None
    instances = derive_entailment_corpus(ds.utterances, provenance)
    write_entailment_jsonl(out, instances)
    click.echo(f"{len(instances)} entailment pairs")


@data.command("enumerate")
@click.argument("path", type=click.Path(exists=True))
@click.option("--out", default="-")
def data_enumerate(path: str, out: str) -> None:
    """Dump the utterances of a dataset back out (round-trip check)."""
    ds = load_dataset(path)
    _write_jsonl(out, [utterance_to_dict(u) for u in ds.utterances])


# --- service -------------------------------------------------------------------------------


@main.command()
@click.option("--port", default=None, type=int, help="Defaults to $RULECHAT_PORT or 8000.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default=None, help="Defaults to $RULECHAT_DATA_DIR.")
@click.option("--rules", default=None, help="Catalog JSON; defaults to $RULECHAT_RULES or the demo catalog.")
@click.option("--ui-dir", default=None, help="Static UI directory; defaults to $RULECHAT_UI_DIR.")
@click.option("--idle-timeout", default=None, type=float, help="Seconds before idle sessions abort.")
def serve(port: int | None, host: str, data_dir: str | None, rules: str | None,
          ui_dir: str | None, idle_timeout: float | None) -> None:
    """Run the HTTP service."""
    import os

    import uvicorn

    from .service import DEFAULT_IDLE_TIMEOUT_S, create_app

    app = create_app(
        data_dir=data_dir,
        rules_path=rules,
        idle_timeout_s=idle_timeout if idle_timeout is not None else DEFAULT_IDLE_TIMEOUT_S,
        ui_dir=ui_dir,
    )
    resolved_port = port if port is not None else int(os.environ.get("RULECHAT_PORT", "8000"))
    uvicorn.run(app, host=host, port=resolved_port)


if __name__ == "__main__":
    main()
