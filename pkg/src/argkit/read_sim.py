"""Short-read simulation from reference sequences with a per-base error model.

Every draw is a pure function of (seed, reference id, read number), so a
given profile and seed always produce byte-identical reads, on either
kernel backend, regardless of how references are batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._kernels import simulate_bases
from ._mix import mix64, str_key, unit_float
from .errors import InputError
from .seq_io import SequenceRecord, SourceDb, decode_bases, encode_bases, reverse_complement


class BadProfile(InputError):
    pass


@dataclass(frozen=True)
class ReadProfile:
    """How many reads to draw per reference and how to corrupt them."""

    read_len: int = 150
    sub_rate: float = 0.0
    ins_rate: float = 0.0
    del_rate: float = 0.0
    coverage: float | None = None
    reads_per_ref: int | None = None
    paired: bool = False
    fragment_mean: float | None = None
    fragment_sd: float = 0.0

    def __post_init__(self) -> None:
        if self.read_len < 1:
            raise BadProfile("read_len must be positive")
        for name in ("sub_rate", "ins_rate", "del_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise BadProfile(f"{name} must lie in [0, 1]")
        if self.sub_rate + self.ins_rate + self.del_rate > 1.0:
            raise BadProfile("error rates sum past 1")
        if (self.coverage is None) == (self.reads_per_ref is None):
            raise BadProfile("set exactly one of coverage or reads_per_ref")
        if self.coverage is not None and self.coverage <= 0:
            raise BadProfile("coverage must be positive")
        if self.reads_per_ref is not None and self.reads_per_ref < 1:
            raise BadProfile("reads_per_ref must be positive")
        if self.paired:
            if self.fragment_mean is None:
                raise BadProfile("paired mode needs fragment_mean")
            if self.fragment_mean < self.read_len:
                raise BadProfile("fragment_mean must be at least read_len")
            if self.fragment_sd < 0:
                raise BadProfile("fragment_sd must be non-negative")

    def templates_for(self, ref_len: int) -> int:
        if self.reads_per_ref is not None:
            return self.reads_per_ref
        bases_per_template = self.read_len * (2 if self.paired else 1)
        return max(1, math.ceil(self.coverage * ref_len / bases_per_template))


@dataclass(frozen=True)
class SimulatedRead:
    id: str
    nucleotides: str
    ref_id: str
    mate: int  # 0 unpaired, then 1 and 2
    template_start: int  # on the strand the read was drawn from
    n_sub: int
    n_ins: int
    n_del: int


def _gauss(base: int, mean: float, sd: float) -> float:
    # sum of 12 uniforms, shifted: mean 0, variance 1, no libm involved
    z = sum(unit_float(base, 10 + j) for j in range(12)) - 6.0
    return mean + sd * z


def simulate_reads(records, profile: ReadProfile, seed: int) -> tuple[list[SimulatedRead], int]:
    """Draw reads from every reference; returns (reads, skipped references).

    References shorter than read_len (or than the drawn fragment floor in
    paired mode) are skipped rather than padded.
    """
    reads: list[SimulatedRead] = []
    skipped = 0
    for rec in records:
        ref_len = len(rec.nucleotides)
        if ref_len < profile.read_len:
            skipped += 1
            continue
        fwd = encode_bases(rec.nucleotides)
        rev = encode_bases(reverse_complement(rec.nucleotides)) if profile.paired else None
        ref_key = str_key(rec.id)
        for n in range(1, profile.templates_for(ref_len) + 1):
            base = mix64(seed, ref_key, n)
            if profile.paired:
                frag = int(round(_gauss(base, profile.fragment_mean, profile.fragment_sd)))
                frag = min(max(frag, profile.read_len), ref_len)
                start = int(unit_float(base, 0) * (ref_len - frag + 1))
                first = _one_read(fwd, start, profile, mix64(base, 1))
                reads.append(
                    SimulatedRead(f"{rec.id}/read{n}/1", first[0], rec.id, 1, start, *first[1:])
                )
                start2 = ref_len - (start + frag)
                second = _one_read(rev, start2, profile, mix64(base, 2))
                reads.append(
                    SimulatedRead(f"{rec.id}/read{n}/2", second[0], rec.id, 2, start2, *second[1:])
                )
            else:
                start = int(unit_float(base, 0) * (ref_len - profile.read_len + 1))
                bases, n_sub, n_ins, n_del = _one_read(fwd, start, profile, mix64(base, 1))
                reads.append(
                    SimulatedRead(f"{rec.id}/read{n}", bases, rec.id, 0, start, n_sub, n_ins, n_del)
                )
    # deletions can, at extreme rates, consume a whole template window
    return [r for r in reads if r.nucleotides], skipped


def _one_read(codes, start: int, profile: ReadProfile, stream: int):
    out, n_sub, n_ins, n_del = simulate_bases(
        codes, start, profile.read_len, profile.sub_rate, profile.ins_rate, profile.del_rate, stream
    )
    return decode_bases(out), n_sub, n_ins, n_del


def reads_to_dataset(ds, reads):
    """Dataset of simulated reads, each inheriting its reference's labels."""
    from .dataset import Dataset

    by_ref = {rec.id: ds.labels[rec.id] for rec in ds.records}
    records = [
        SequenceRecord(id=r.id, header=r.id, nucleotides=r.nucleotides, source_db=SourceDb.SIMULATED)
        for r in reads
    ]
    labels = {r.id: by_ref[r.ref_id] for r in reads}
    return Dataset.build(records, labels, ds.task_axis, ds.class_names)


def build_reads_dataset(ds, profile: ReadProfile, seed: int):
    """Expand a reference dataset into a read-level dataset with inherited labels."""
    reads, skipped = simulate_reads(ds.records, profile, seed)
    return reads_to_dataset(ds, reads), skipped


def write_fastq(reads, fh, quality_char: str = "I") -> None:
    """Plain four-line FASTQ with a constant quality character."""
    if len(quality_char) != 1:
        raise InputError("quality_char must be a single character")
    own = isinstance(fh, str)
    out = open(fh, "w", encoding="utf-8") if own else fh
    try:
        for read in reads:
            out.write(f"@{read.id}\n{read.nucleotides}\n+\n{quality_char * len(read.nucleotides)}\n")
    finally:
        if own:
            out.close()
