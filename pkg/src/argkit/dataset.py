"""Labelled sequence collections: building, merging, filtering, splitting."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ._mix import fnv1a64, mix64, str_key
from .errors import DataError, InputError
from .seq_io import (
    Axis,
    LabelSet,
    SequenceRecord,
    SourceDb,
    parse_fasta,
    serialize_fasta,
)

SPLIT_NAMES = ("train", "test", "val")  # remainder priority order


class DuplicateId(DataError):
    pass


class AxisMismatch(InputError):
    pass


class EmptyDataset(DataError):
    pass


class BadFractions(InputError):
    pass


class ManifestMismatch(DataError):
    pass


class SidecarMismatch(DataError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Records plus labels, with a fixed class vocabulary on one task axis.

    ``class_names`` is sorted and shared by construction across subsets of
    the same parent, so per-class indices stay aligned between splits.
    """

    records: tuple[SequenceRecord, ...]
    labels: dict[str, LabelSet]
    task_axis: Axis
    class_names: tuple[str, ...]
    y: np.ndarray

    @property
    def class_to_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.class_names)}

    def __len__(self) -> int:
        return len(self.records)

    @staticmethod
    def build(
        records,
        labels: dict[str, LabelSet],
        task_axis: Axis,
        class_names: tuple[str, ...] | None = None,
    ) -> "Dataset":
        """Assemble a dataset, keeping only records labelled on the task axis.

        With ``class_names=None`` the vocabulary is inferred (sorted unique
        labels); passing it pins a parent vocabulary onto a subset, which is
        the only way to build an empty dataset.
        """
        kept: list[SequenceRecord] = []
        kept_labels: dict[str, LabelSet] = {}
        seen: set[str] = set()
        for rec in records:
            if rec.id in seen:
                raise DuplicateId(f"record id {rec.id!r} appears twice")
            seen.add(rec.id)
            ls = labels.get(rec.id)
            if ls is None or ls.get(task_axis) is None:
                continue
            kept.append(rec)
            kept_labels[rec.id] = ls
        if class_names is None:
            if not kept:
                raise EmptyDataset(f"no records labelled on {task_axis.value}")
            class_names = tuple(sorted({ls.get(task_axis) for ls in kept_labels.values()}))
        index = {name: i for i, name in enumerate(class_names)}
        y = np.empty(len(kept), dtype=np.int64)
        for i, rec in enumerate(kept):
            name = kept_labels[rec.id].get(task_axis)
            if name not in index:
                raise DataError(f"label {name!r} not in the class vocabulary")
            y[i] = index[name]
        return Dataset(tuple(kept), kept_labels, task_axis, class_names, y)

    def subset(self, ids) -> "Dataset":
        wanted = set(ids)
        recs = [r for r in self.records if r.id in wanted]
        missing = wanted - {r.id for r in recs}
        if missing:
            raise DataError(f"unknown record ids: {sorted(missing)[:5]}")
        labels = {r.id: self.labels[r.id] for r in recs}
        return Dataset.build(recs, labels, self.task_axis, self.class_names)


def counts_by_class(ds: Dataset) -> dict[str, int]:
    counts = np.bincount(ds.y, minlength=len(ds.class_names))
    return {name: int(counts[i]) for i, name in enumerate(ds.class_names)}


def merge(first: Dataset, second: Dataset) -> Dataset:
    """Union of two datasets with exact duplicates removed.

    A record is a duplicate only when both its bases and its task-axis label
    match an earlier record; the same sequence under a different class is a
    genuine disagreement and both copies stay. The earlier argument wins a
    duplicate; the same id with different bases in both inputs is an error.
    """
    if first.task_axis is not second.task_axis:
        raise AxisMismatch(
            f"cannot merge {first.task_axis.value} with {second.task_axis.value}"
        )
    axis = first.task_axis
    seen: set[tuple[str, str]] = set()
    by_id: dict[str, SequenceRecord] = {}
    records: list[SequenceRecord] = []
    labels: dict[str, LabelSet] = {}
    for ds in (first, second):
        for rec in ds.records:
            prior = by_id.get(rec.id)
            if prior is not None:
                if prior.nucleotides != rec.nucleotides:
                    raise DuplicateId(f"id {rec.id!r} maps to two different sequences")
                continue
            key = (rec.nucleotides, ds.labels[rec.id].get(axis))
            if key in seen:
                continue
            seen.add(key)
            by_id[rec.id] = rec
            records.append(rec)
            labels[rec.id] = ds.labels[rec.id]
    return Dataset.build(records, labels, first.task_axis)


def filter_rare_classes(ds: Dataset, min_samples: int = 15) -> Dataset:
    """Drop every class with fewer than ``min_samples`` records.

    The boundary is inclusive: a class with exactly ``min_samples`` stays.
    """
    if min_samples < 1:
        raise InputError("min_samples must be positive")
    counts = np.bincount(ds.y, minlength=len(ds.class_names))
    keep = {ds.class_names[i] for i in range(len(ds.class_names)) if counts[i] >= min_samples}
    if not keep:
        raise EmptyDataset(f"every class has fewer than {min_samples} records")
    recs = [r for r in ds.records if ds.labels[r.id].get(ds.task_axis) in keep]
    labels = {r.id: ds.labels[r.id] for r in recs}
    return Dataset.build(recs, labels, ds.task_axis)


@dataclass(frozen=True)
class SplitManifest:
    """Reproducible record of which id landed in which split."""

    seed: int
    fractions: tuple[float, float, float]
    assignment: dict[str, str]

    def canonical_bytes(self) -> bytes:
        # sorted by id so the digest ignores record order
        lines = [f"seed={self.seed}", "fractions=" + ",".join(repr(f) for f in self.fractions)]
        lines.extend(f"{rid}\t{name}" for rid, name in sorted(self.assignment.items()))
        return ("\n".join(lines) + "\n").encode("utf-8")

    def digest(self) -> str:
        return f"{fnv1a64(self.canonical_bytes()):016x}"


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    val: Dataset
    manifest: SplitManifest

    def part(self, name: str) -> Dataset:
        if name not in SPLIT_NAMES:
            raise InputError(f"unknown split {name!r}")
        return getattr(self, name)


def _check_fractions(fractions) -> tuple[float, float, float]:
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise BadFractions("need exactly three fractions: train, test, val")
    if any(f < 0 for f in fractions):
        raise BadFractions("fractions must be non-negative")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions sum to {sum(fractions)}, expected 1")
    return fractions


def stratified_split(
    ds: Dataset,
    fractions: tuple[float, float, float] = (0.75, 0.20, 0.05),
    seed: int = 0,
) -> Split:
    """Deterministic per-class split into train/test/val.

    Within each class, records are ordered by a keyed hash of (seed, class,
    record id), sizes are the floors of class_count * fraction, and leftover
    records go one at a time to train, then test, then val.
    """
    fractions = _check_fractions(fractions)
    assignment: dict[str, str] = {}
    for class_index in range(len(ds.class_names)):
        ids = [rec.id for rec, label in zip(ds.records, ds.y) if label == class_index]
        ids.sort(key=lambda rid: (mix64(seed, class_index, str_key(rid)), rid))
        n = len(ids)
        sizes = [math.floor(n * f) for f in fractions]
        for i in range(n - sum(sizes)):
            sizes[i % 3] += 1
        cursor = 0
        for name, size in zip(SPLIT_NAMES, sizes):
            for rid in ids[cursor : cursor + size]:
                assignment[rid] = name
            cursor += size
    manifest = SplitManifest(seed=int(seed), fractions=fractions, assignment=assignment)
    return _materialize(ds, manifest)


def _materialize(ds: Dataset, manifest: SplitManifest) -> Split:
    parts: dict[str, list[SequenceRecord]] = {name: [] for name in SPLIT_NAMES}
    for rec in ds.records:
        parts[manifest.assignment[rec.id]].append(rec)
    built = {}
    for name in SPLIT_NAMES:
        recs = parts[name]
        labels = {r.id: ds.labels[r.id] for r in recs}
        built[name] = Dataset.build(recs, labels, ds.task_axis, ds.class_names)
    return Split(train=built["train"], test=built["test"], val=built["val"], manifest=manifest)


def apply_manifest(ds: Dataset, manifest: SplitManifest) -> Split:
    """Re-create a split from its manifest; ids must match exactly."""
    ours = {rec.id for rec in ds.records}
    theirs = set(manifest.assignment)
    if ours != theirs:
        extra = sorted(theirs - ours)[:3]
        missing = sorted(ours - theirs)[:3]
        raise ManifestMismatch(
            f"manifest does not cover this dataset (missing {missing}, extra {extra})"
        )
    bad = {name for name in manifest.assignment.values() if name not in SPLIT_NAMES}
    if bad:
        raise ManifestMismatch(f"unknown split names {sorted(bad)}")
    return _materialize(ds, manifest)


def save_manifest(manifest: SplitManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={manifest.seed}\n")
        fh.write("# fractions=" + ",".join(repr(f) for f in manifest.fractions) + "\n")
        for rid, name in manifest.assignment.items():
            fh.write(f"{rid}\t{name}\n")


def load_manifest(path: str) -> SplitManifest:
    if not os.path.exists(path):
        raise InputError(f"missing manifest file: {path}")
    seed: int | None = None
    fractions: tuple[float, float, float] | None = None
    assignment: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("seed="):
                    seed = int(body[len("seed=") :])
                elif body.startswith("fractions="):
                    parts = body[len("fractions=") :].split(",")
                    if len(parts) != 3:
                        raise ManifestMismatch(f"line {lineno}: expected three fractions")
                    fractions = tuple(float(p) for p in parts)
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ManifestMismatch(f"line {lineno}: expected 'id<TAB>split'")
            rid, name = cols
            if name not in SPLIT_NAMES:
                raise ManifestMismatch(f"line {lineno}: unknown split {name!r}")
            if rid in assignment:
                raise ManifestMismatch(f"line {lineno}: duplicate id {rid!r}")
            assignment[rid] = name
    if seed is None or fractions is None:
        raise ManifestMismatch("manifest lacks seed or fractions header")
    return SplitManifest(seed=seed, fractions=fractions, assignment=assignment)


_SEQUENCES_FILE = "sequences.fasta"
_LABELS_FILE = "labels.tsv"
_LABEL_COLUMNS = ("id", "source_db", "header", "drug_class", "gene_family", "resistance_mechanism")


def save_dataset(ds: Dataset, directory: str) -> None:
    """Write a dataset as a FASTA plus a label sidecar, round-trippable."""
    os.makedirs(directory, exist_ok=True)
    pairs = [(rec.id, rec.nucleotides) for rec in ds.records]
    with open(os.path.join(directory, _SEQUENCES_FILE), "w", encoding="utf-8") as fh:
        fh.write(serialize_fasta(pairs))
    with open(os.path.join(directory, _LABELS_FILE), "w", encoding="utf-8") as fh:
        fh.write(f"# task_axis={ds.task_axis.value}\n")
        # class names may hold spaces and commas but never tabs (checked below)
        fh.write("# classes=" + "\t".join(ds.class_names) + "\n")
        fh.write("# " + "\t".join(_LABEL_COLUMNS) + "\n")
        for rec in ds.records:
            ls = ds.labels[rec.id]
            cells = (
                rec.id,
                rec.source_db.value,
                rec.header,
                ls.drug_class or "",
                ls.gene_family or "",
                ls.resistance_mechanism or "",
            )
            for cell in cells:
                if "\t" in cell or "\n" in cell:
                    raise DataError(f"record {rec.id!r}: tab or newline in a sidecar field")
            fh.write("\t".join(cells) + "\n")


def load_dataset(directory: str) -> Dataset:
    seq_path = os.path.join(directory, _SEQUENCES_FILE)
    lab_path = os.path.join(directory, _LABELS_FILE)
    for path in (seq_path, lab_path):
        if not os.path.exists(path):
            raise InputError(f"missing dataset file: {path}")
    with open(seq_path, "r", encoding="utf-8") as fh:
        pairs = parse_fasta(fh)
    task_axis: Axis | None = None
    class_names: tuple[str, ...] | None = None
    rows: dict[str, tuple[SourceDb, str, LabelSet]] = {}
    with open(lab_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("task_axis="):
                    task_axis = Axis(body[len("task_axis=") :])
                elif body.startswith("classes="):
                    names = body[len("classes=") :].split("\t")
                    class_names = tuple(n for n in names if n)
                continue
            cols = line.split("\t")
            if len(cols) != len(_LABEL_COLUMNS):
                raise SidecarMismatch(f"line {lineno}: expected {len(_LABEL_COLUMNS)} columns")
            rid, source, header, drug, family, mechanism = cols
            if rid in rows:
                raise SidecarMismatch(f"line {lineno}: duplicate id {rid!r}")
            rows[rid] = (
                SourceDb(source),
                header,
                LabelSet(
                    drug_class=drug or None,
                    gene_family=family or None,
                    resistance_mechanism=mechanism or None,
                ),
            )
    if task_axis is None:
        raise SidecarMismatch("label sidecar lacks the task_axis header")
    fasta_ids = [h for h, _ in pairs]
    if set(fasta_ids) != set(rows):
        raise SidecarMismatch("FASTA ids and label sidecar ids differ")
    records = []
    labels = {}
    for rid, seq in pairs:
        source, header, ls = rows[rid]
        records.append(SequenceRecord(id=rid, header=header, nucleotides=seq, source_db=source))
        labels[rid] = ls
    # an old sidecar without the classes header falls back to inference
    return Dataset.build(records, labels, task_axis, class_names)
