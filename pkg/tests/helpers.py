"""Shared builders for test data."""

import numpy as np

from argkit.dataset import Dataset
from argkit.seq_io import Axis, LabelSet, SequenceRecord, SourceDb

BASES = "ACGT"


def random_seq(rng: np.random.Generator, length: int, alphabet: str = BASES) -> str:
    return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=length))


def make_record(rid: str, seq: str, source: SourceDb = SourceDb.CARD) -> SequenceRecord:
    return SequenceRecord(id=rid, header=rid, nucleotides=seq, source_db=source)


def make_dataset(
    class_sizes: dict[str, int],
    seq_len: int = 120,
    axis: Axis = Axis.DRUG_CLASS,
    seed: int = 0,
    prefix: str = "r",
) -> Dataset:
    """One dataset with random sequences and the given per-class counts."""
    rng = np.random.default_rng(seed)
    records = []
    labels = {}
    i = 0
    for name, count in class_sizes.items():
        for _ in range(count):
            rid = f"{prefix}{i:04d}"
            records.append(make_record(rid, random_seq(rng, seq_len)))
            labels[rid] = LabelSet().replace(axis, name)
            i += 1
    return Dataset.build(records, labels, axis)
