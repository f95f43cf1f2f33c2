"""Generative augmentation of under-represented training classes.

Candidate sequences come from an external generator over the line protocol;
this module decides who needs topping up, builds the prompts, validates what
comes back, and injects survivors into the training set only. Test and
validation splits are never touched, so leakage cannot happen by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import Dataset, counts_by_class
from .errors import InputError
from .seq_io import LabelSet, MalformedFasta, SequenceRecord, SourceDb, normalize_sequence

DEFAULT_THRESHOLD = 15
DEFAULT_TARGET = 15
MAX_EXEMPLARS = 5
MIN_LENGTH = 50
MAX_LENGTH = 1000

DEFAULT_PROMPT_TEMPLATE = (
    "Generate one plausible nucleotide sequence for a resistance gene of "
    "class {class}. Reference examples:\n{exemplars}"
)

_PLACEHOLDERS = {"class", "exemplars"}


class BadTemplate(InputError):
    pass


@dataclass(frozen=True)
class ClassPlan:
    class_name: str
    have: int
    needed: int
    exemplar_ids: tuple[str, ...]


def augmentation_plan(
    train: Dataset, threshold: int = DEFAULT_THRESHOLD, target: int = DEFAULT_TARGET
) -> list[ClassPlan]:
    """One entry per class below the threshold, with its prompt exemplars."""
    if threshold < 1 or target < threshold:
        raise InputError("need threshold >= 1 and target >= threshold")
    plans = []
    counts = counts_by_class(train)
    for class_index, name in enumerate(train.class_names):
        have = counts[name]
        if have >= threshold:
            continue
        ids = sorted(rec.id for rec, y in zip(train.records, train.y) if y == class_index)
        plans.append(
            ClassPlan(
                class_name=name,
                have=have,
                needed=target - have,
                exemplar_ids=tuple(ids[:MAX_EXEMPLARS]),
            )
        )
    return plans


def build_prompt(template: str, class_name: str, exemplar_seqs) -> str:
    """Fill {class} and {exemplars}; any other placeholder is an error."""
    names = set()
    i = 0
    while True:
        open_at = template.find("{", i)
        if open_at < 0:
            break
        close_at = template.find("}", open_at)
        if close_at < 0:
            raise BadTemplate("unbalanced '{' in template")
        names.add(template[open_at + 1 : close_at])
        i = close_at + 1
    unknown = names - _PLACEHOLDERS
    if unknown:
        raise BadTemplate(f"unknown placeholders: {sorted(unknown)}")
    if names != _PLACEHOLDERS:
        missing = _PLACEHOLDERS - names
        raise BadTemplate(f"template must use {{class}} and {{exemplars}}; missing {sorted(missing)}")
    joined = "\n".join(exemplar_seqs)
    return template.replace("{class}", class_name).replace("{exemplars}", joined)


@dataclass(frozen=True)
class AuditRow:
    class_name: str
    sample_index: int  # position in the generator's reply, 1-based
    decision: str  # accepted | rejected
    reason: str  # empty when accepted; alphabet | length | duplicate | cap
    record_id: str  # empty when rejected


def ingest_generated(
    train: Dataset,
    class_name: str,
    samples,
    target: int = DEFAULT_TARGET,
) -> tuple[Dataset, list[AuditRow]]:
    """Validate generated samples for one class and inject the survivors.

    Validators run in a fixed order per sample: alphabet, length window,
    duplicate (against current train plus earlier accepts), capacity.
    """
    if class_name not in train.class_to_index:
        raise InputError(f"unknown class {class_name!r}")
    have = counts_by_class(train)[class_name]
    existing_seqs = {rec.nucleotides for rec in train.records}
    existing_ids = {rec.id for rec in train.records}
    audit: list[AuditRow] = []
    new_records: list[SequenceRecord] = []
    new_labels: dict[str, LabelSet] = {}
    accepted = 0
    for i, raw in enumerate(samples, start=1):
        def reject(reason: str) -> None:
            audit.append(AuditRow(class_name, i, "rejected", reason, ""))

        try:
            seq = normalize_sequence(str(raw))
        except MalformedFasta:
            reject("alphabet")
            continue
        if not MIN_LENGTH <= len(seq) <= MAX_LENGTH:
            reject("length")
            continue
        if seq in existing_seqs:
            reject("duplicate")
            continue
        if have + accepted >= target:
            reject("cap")
            continue
        accepted += 1
        rid = f"aug:{class_name}:{have + accepted}"
        while rid in existing_ids:  # ids from an earlier round stay unique
            rid += "x"
        existing_ids.add(rid)
        existing_seqs.add(seq)
        ls = LabelSet().replace(train.task_axis, class_name)
        new_records.append(
            SequenceRecord(id=rid, header=rid, nucleotides=seq, source_db=SourceDb.AUGMENTED)
        )
        new_labels[rid] = ls
        audit.append(AuditRow(class_name, i, "accepted", "", rid))
    merged_records = list(train.records) + new_records
    merged_labels = dict(train.labels)
    merged_labels.update(new_labels)
    out = Dataset.build(merged_records, merged_labels, train.task_axis, train.class_names)
    return out, audit


def write_audit(rows, path: str) -> None:
    """Deterministic TSV of ingest decisions; deliberately no timestamps."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# class\tsample\tdecision\treason\trecord_id\n")
        for r in rows:
            fh.write(f"{r.class_name}\t{r.sample_index}\t{r.decision}\t{r.reason}\t{r.record_id}\n")
