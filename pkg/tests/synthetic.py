"""Synthetic corpus where sequence and text carry disjoint information.

Classes 0-4 are separable only by a planted sequence motif: their rendered
attribute text is a carbon copy across all five. Classes 5-9 are separable
only by text: their bases are pure noise, their attributes class-specific.
A single-modality model can solve half the problem at best; a working
ensemble solves both halves.
"""

import numpy as np

from argkit.dataset import Dataset
from argkit.seq_io import Axis, LabelSet, SequenceRecord, SourceDb

BASES = "ACGT"

MOTIFS = ("AACCGGTT", "ACGTACGT", "GGATCCGA", "TTGACAGC", "CAGTCAGT")


def _random_seq(rng, length):
    return "".join(BASES[i] for i in rng.integers(0, 4, size=length))


def _planted_seq(rng, length, motif, every=40):
    seq = list(_random_seq(rng, length))
    for start in range(0, length - len(motif), every):
        seq[start : start + len(motif)] = motif
    return "".join(seq)


def two_modality_dataset(seed: int = 1, per_class: int = 50, seq_len: int = 300) -> Dataset:
    rng = np.random.default_rng(seed)
    records = []
    labels = {}
    i = 0
    for c in range(10):
        name = f"class{c}"
        for _ in range(per_class):
            rid = f"s{i:04d}"
            if c < 5:
                seq = _planted_seq(rng, seq_len, MOTIFS[c])
                ls = LabelSet(
                    drug_class=name,
                    gene_family="uncharacterized protein",
                    resistance_mechanism="unknown function",
                )
            else:
                seq = _random_seq(rng, seq_len)
                ls = LabelSet(
                    drug_class=name,
                    gene_family=f"synthetic family {c}",
                    resistance_mechanism=f"synthetic mechanism {c}",
                )
            records.append(
                SequenceRecord(id=rid, header=rid, nucleotides=seq, source_db=SourceDb.SIMULATED)
            )
            labels[rid] = ls
            i += 1
    return Dataset.build(records, labels, Axis.DRUG_CLASS)
