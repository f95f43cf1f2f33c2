"""Command line front end: one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .augmentation import (
    DEFAULT_PROMPT_TEMPLATE,
    DEFAULT_TARGET,
    DEFAULT_THRESHOLD,
    augmentation_plan,
    build_prompt,
    ingest_generated,
    write_audit,
)
from .bridge import BridgeClient, StdioTransport, TcpTransport
from .classifiers import (
    KmerNBClassifier,
    Modality,
    SoftmaxTextClassifier,
    load_model,
    save_model,
    sequence_inputs,
    text_inputs,
)
from .dataset import (
    Dataset,
    counts_by_class,
    load_dataset,
    load_manifest,
    merge,
    save_dataset,
    save_manifest,
    stratified_split,
)
from .ensemble import (
    DEFAULT_STEP,
    EnsembleWeights,
    load_weights,
    save_weights,
    soft_vote,
    tune_weights,
)
from .errors import ArgkitError, InputError, VocabMismatch
from ._mix import fnv1a64
from .metrics import evaluate, format_report
from .ontology import (
    ClassMapping,
    LocalTableLookup,
    RemoteLookup,
    UnmappedPolicy,
    apply_mapping,
    build_gene_family_mapping,
    default_table_path,
    load_graph,
    load_mapping_table,
)
from .read_sim import ReadProfile, reads_to_dataset, simulate_reads, write_fastq
from .seq_io import (
    BUILTIN_SCHEMAS,
    Axis,
    HeaderSchema,
    LabelSet,
    SequenceRecord,
    SourceDb,
    parse_fasta,
    parse_header,
    load_card_metadata,
)
from .text_format import MarkerStyle, render


def _axis(value: str) -> Axis:
    try:
        return Axis(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown axis {value!r}") from None


def _style(value: str) -> MarkerStyle:
    try:
        return MarkerStyle(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown style {value!r}") from None


def _policy(value: str) -> UnmappedPolicy:
    try:
        return UnmappedPolicy(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown policy {value!r}") from None


def _fractions(value: str) -> tuple[float, float, float]:
    parts = value.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected train,test,val fractions")
    return tuple(float(p) for p in parts)


def _model_inputs(model, ds: Dataset, style: MarkerStyle, verbatim: bool) -> list[str]:
    if model.modality is Modality.SEQUENCE:
        return sequence_inputs(ds)
    return text_inputs(ds, style, table1_verbatim=verbatim)


def _check_vocab(model, ds: Dataset, what: str) -> None:
    if tuple(model.class_names) != tuple(ds.class_names):
        raise VocabMismatch(f"{what} does not share the dataset's class vocabulary")


def _ids_digest(ds: Dataset) -> str:
    joined = "\n".join(sorted(rec.id for rec in ds.records))
    return f"{fnv1a64(joined.encode('utf-8')):016x}"


def _cmd_ingest(args) -> int:
    if args.schema in BUILTIN_SCHEMAS:
        schema = BUILTIN_SCHEMAS[args.schema]
    elif os.path.exists(args.schema):
        schema = HeaderSchema.from_config(args.schema)
    else:
        raise InputError(f"schema {args.schema!r} is neither built in nor a config file")
    if args.source is not None:
        source = SourceDb(args.source)
    elif schema.name in ("card", "megares"):
        source = SourceDb.CARD if schema.name == "card" else SourceDb.MEGARES
    else:
        raise InputError("custom schemas need --source")
    metadata = load_card_metadata(args.metadata) if args.metadata else None
    if not os.path.exists(args.fasta):
        raise InputError(f"missing FASTA file: {args.fasta}")
    with open(args.fasta, "r", encoding="utf-8") as fh:
        pairs = parse_fasta(fh)
    records: list[SequenceRecord] = []
    labels: dict[str, LabelSet] = {}
    n_flagged = 0
    for header, seq in pairs:
        if schema.flags and not args.keep_flagged:
            tokens = header.split(schema.delimiter)
            if any(tok in schema.flags for tok in tokens):
                n_flagged += 1
                continue
        rid, ls = parse_header(header, schema)
        if metadata is not None:
            ls = metadata.get(rid, LabelSet())
        records.append(SequenceRecord(id=rid, header=header, nucleotides=seq, source_db=source))
        labels[rid] = ls
    ds = Dataset.build(records, labels, args.task_axis)
    save_dataset(ds, args.out)
    dropped = len(records) - len(ds)
    print(
        f"ingested {len(ds)} records ({n_flagged} flagged skipped, "
        f"{dropped} without a {args.task_axis.value} label) -> {args.out}"
    )
    return 0


def _cmd_integrate(args) -> int:
    ds = load_dataset(args.in_dir)
    second = load_dataset(args.in2) if args.in2 else None
    axis = ds.task_axis
    total = len(ds) + (len(second) if second is not None else 0)
    if args.ontology:
        graph = load_graph(args.ontology)
        if args.remote_cache:
            lookup = RemoteLookup(url=args.ontology_url, cache_path=args.remote_cache)
        else:
            lookup = LocalTableLookup(graph)
        raw = {ds.labels[rec.id].get(axis) for rec in ds.records}
        if second is not None:
            raw |= {second.labels[rec.id].get(second.task_axis) for rec in second.records}
        mapping = build_gene_family_mapping(raw, graph, lookup, args.level, args.policy)
        if axis is not Axis.GENE_FAMILY:
            mapping = ClassMapping(axis, mapping.raw_to_integrated, args.policy)
    elif args.mapping:
        mapping = load_mapping_table(args.mapping, axis, args.policy)
    else:
        if axis is Axis.GENE_FAMILY:
            raise InputError("gene_family integration needs --ontology or --mapping")
        mapping = load_mapping_table(default_table_path(axis), axis, args.policy)
    # duplicates are judged on integrated labels, so map before merging
    out = apply_mapping(ds, mapping)
    if second is not None:
        out = merge(out, apply_mapping(second, mapping))
    save_dataset(out, args.out)
    print(
        f"integrated {len(out)} records into {len(out.class_names)} classes "
        f"(dropped {total - len(out)}) -> {args.out}"
    )
    return 0


def _cmd_split(args) -> int:
    ds = load_dataset(args.in_dir)
    split = stratified_split(ds, args.fractions, args.seed)
    os.makedirs(args.out, exist_ok=True)
    for name in ("train", "test", "val"):
        save_dataset(split.part(name), os.path.join(args.out, name))
    save_manifest(split.manifest, os.path.join(args.out, "manifest.tsv"))
    print(f"seed={args.seed}")
    print(
        f"split {len(ds)} records: train={len(split.train)} test={len(split.test)} "
        f"val={len(split.val)} (manifest digest {split.manifest.digest()}) -> {args.out}"
    )
    return 0


def _cmd_train(args) -> int:
    ds = load_dataset(args.in_dir)
    if args.modality == "sequence":
        model = KmerNBClassifier(k=args.k, alpha=args.alpha)
        inputs = sequence_inputs(ds)
    else:
        model = SoftmaxTextClassifier(lr=args.lr, epochs=args.epochs, l2=args.l2, seed=args.seed)
        inputs = text_inputs(ds, args.style, table1_verbatim=args.table1_verbatim)
    model.fit(inputs, ds.y, len(ds.class_names), class_names=ds.class_names)
    save_model(model, args.out)
    print(
        f"trained {model.kind} on {len(ds)} records, "
        f"{len(ds.class_names)} classes -> {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.in_dir)
    _check_vocab(model, ds, "the model")
    probs = model.predict_proba(_model_inputs(model, ds, args.style, args.table1_verbatim))
    y_hat = np.argmax(probs, axis=1)
    lines = ["# id\tprediction\tprobability"]
    for i, (rec, yi) in enumerate(zip(ds.records, y_hat)):
        lines.append(f"{rec.id}\t{model.class_names[yi]}\t{probs[i, yi]:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(ds)} predictions -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_tune_ensemble(args) -> int:
    first = load_model(args.model)
    second = load_model(args.model2)
    ds = load_dataset(args.val)
    _check_vocab(first, ds, "the first model")
    _check_vocab(second, ds, "the second model")
    p1 = first.predict_proba(_model_inputs(first, ds, args.style, args.table1_verbatim))
    p2 = second.predict_proba(_model_inputs(second, ds, args.style, args.table1_verbatim))
    (w1, w2), score = tune_weights([p1, p2], ds.y, step=args.step)
    if args.manifest:
        digest = load_manifest(args.manifest).digest()
    else:
        digest = _ids_digest(ds)
    ew = EnsembleWeights(
        members=(os.path.basename(args.model), os.path.basename(args.model2)),
        weights=(w1, w2),
        objective="macro_f1",
        score=score,
        step=args.step,
        val_manifest=digest,
    )
    save_weights(ew, args.out)
    print(f"tuned weights ({w1:.2f}, {w2:.2f}), macro_f1={score:.4f} -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.in_dir)
    _check_vocab(model, ds, "the model")
    probs = model.predict_proba(_model_inputs(model, ds, args.style, args.table1_verbatim))
    if args.model2:
        if not args.weights:
            raise InputError("two models need --weights")
        second = load_model(args.model2)
        _check_vocab(second, ds, "the second model")
        ew = load_weights(args.weights)
        if len(ew.weights) != 2:
            raise InputError("weights file must hold exactly two weights")
        p2 = second.predict_proba(_model_inputs(second, ds, args.style, args.table1_verbatim))
        probs = soft_vote([probs, p2], ew.weights)
    y_hat = np.argmax(probs, axis=1)
    report = evaluate(ds.y, y_hat, len(ds.class_names))
    text = format_report(report, list(ds.class_names))
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


def _cmd_simulate_reads(args) -> int:
    ds = load_dataset(args.in_dir)
    profile = ReadProfile(
        read_len=args.read_len,
        sub_rate=args.sub_rate,
        ins_rate=args.ins_rate,
        del_rate=args.del_rate,
        coverage=args.coverage,
        reads_per_ref=args.reads_per_ref,
        paired=args.paired,
        fragment_mean=args.fragment_mean,
        fragment_sd=args.fragment_sd,
    )
    reads, skipped = simulate_reads(ds.records, profile, args.seed)
    out_ds = reads_to_dataset(ds, reads)
    save_dataset(out_ds, args.out)
    if args.fastq:
        write_fastq(reads, args.fastq)
    print(f"seed={args.seed}")
    print(f"simulated {len(reads)} reads ({skipped} references skipped) -> {args.out}")
    return 0


def _cmd_augment(args) -> int:
    ds = load_dataset(args.in_dir)
    plans = augmentation_plan(ds, args.threshold, args.target)
    template = DEFAULT_PROMPT_TEMPLATE
    if args.template_file:
        if not os.path.exists(args.template_file):
            raise InputError(f"missing template file: {args.template_file}")
        with open(args.template_file, "r", encoding="utf-8") as fh:
            template = fh.read()
    audit = []
    if plans:
        if args.server_cmd:
            transport = StdioTransport(args.server_cmd)
        elif args.tcp:
            host, _, port = args.tcp.rpartition(":")
            transport = TcpTransport(host or "127.0.0.1", int(port))
        else:
            raise InputError("augment needs --server-cmd or --tcp")
        with BridgeClient(transport, timeout=args.timeout) as client:
            for plan in plans:
                seqs = {rec.id: rec.nucleotides for rec in ds.records}
                exemplars = [seqs[rid] for rid in plan.exemplar_ids]
                prompt = build_prompt(template, plan.class_name, exemplars)
                samples = client.generate(prompt, plan.needed)
                ds, rows = ingest_generated(ds, plan.class_name, samples, args.target)
                audit.extend(rows)
    save_dataset(ds, args.out)
    write_audit(audit, os.path.join(args.out, "audit.tsv"))
    accepted = sum(1 for r in audit if r.decision == "accepted")
    print(
        f"augmented {len(plans)} classes: {accepted} accepted, "
        f"{len(audit) - accepted} rejected -> {args.out}"
    )
    return 0


def _cmd_render(args) -> int:
    pairs = []
    for item in args.pair:
        if "=" not in item:
            raise InputError(f"expected NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        pairs.append((name, value))
    print(render(pairs, args.style, table1_verbatim=args.table1_verbatim))
    return 0


def _add_style_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--style", type=_style, default=MarkerStyle.TYPED_ENTITY_MARKER_PUNCT)
    p.add_argument("--table1-verbatim", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="argkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"argkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a FASTA into a labelled dataset")
    p.add_argument("--fasta", required=True)
    p.add_argument("--schema", required=True, help="built-in name or schema config path")
    p.add_argument("--metadata", default=None, help="accession->labels sidecar TSV")
    p.add_argument("--task-axis", type=_axis, required=True)
    p.add_argument("--source", choices=[s.value for s in SourceDb], default=None)
    p.add_argument("--keep-flagged", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("integrate", help="consolidate labels, optionally merging two datasets")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--in2", default=None)
    p.add_argument("--mapping", default=None, help="raw<TAB>integrated table")
    p.add_argument("--ontology", default=None, help="term table for family mapping")
    p.add_argument("--ontology-url", default=None)
    p.add_argument("--remote-cache", default=None)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--policy", type=_policy, default=UnmappedPolicy.DROP)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_integrate)

    p = sub.add_parser("split", help="stratified train/test/val split")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--fractions", type=_fractions, default=(0.75, 0.20, 0.05))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="fit a baseline model on a dataset")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--modality", choices=("sequence", "text"), required=True)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    _add_style_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="per-record predictions from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    _add_style_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("tune-ensemble", help="grid-search two-member voting weights")
    p.add_argument("--model", required=True)
    p.add_argument("--model2", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--manifest", default=None, help="split manifest for provenance digest")
    _add_style_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tune_ensemble)

    p = sub.add_parser("evaluate", help="metrics report for one model or a weighted pair")
    p.add_argument("--model", required=True)
    p.add_argument("--model2", default=None)
    p.add_argument("--weights", default=None)
    p.add_argument("--in", dest="in_dir", required=True)
    _add_style_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate-reads", help="draw error-bearing reads from references")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--read-len", type=int, default=150)
    p.add_argument("--sub-rate", type=float, default=0.0)
    p.add_argument("--ins-rate", type=float, default=0.0)
    p.add_argument("--del-rate", type=float, default=0.0)
    p.add_argument("--coverage", type=float, default=None)
    p.add_argument("--reads-per-ref", type=int, default=None)
    p.add_argument("--paired", action="store_true")
    p.add_argument("--fragment-mean", type=float, default=None)
    p.add_argument("--fragment-sd", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fastq", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate_reads)

    p = sub.add_parser("augment", help="top up rare training classes via a generator server")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--server-cmd", default=None, help="child process speaking the line protocol")
    p.add_argument("--tcp", default=None, help="host:port of a protocol server")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    p.add_argument("--target", type=int, default=DEFAULT_TARGET)
    p.add_argument("--template-file", default=None)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("render", help="print one marker-style rendering of NAME=VALUE pairs")
    p.add_argument("pair", nargs="+")
    _add_style_args(p)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ArgkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
