"""FASTA ingestion: parsing, header schemas, and sequence normalization.

Normalization maps sequences onto the {A,C,G,T,N} alphabet: lowercase is
uppercased, U becomes T, IUPAC ambiguity codes collapse to N. Any other
character is a parse error, not an N.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import InputError

ALPHABET = "ACGTN"
_AMBIGUITY = set("RYSWKMBDHV")

# A=0 C=1 G=2 T=3 N=4; 255 marks anything else
_CODE_LUT = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate(ALPHABET):
    _CODE_LUT[ord(_b)] = _i

_COMPLEMENT = {"A": "T", "C": "G", "G": "C", "T": "A", "N": "N"}


class MalformedFasta(InputError):
    pass


class HeaderMismatch(InputError):
    pass


class SourceDb(enum.Enum):
    CARD = "CARD"
    MEGARES = "MEGARES"
    AUGMENTED = "AUGMENTED"
    SIMULATED = "SIMULATED"


class Axis(enum.Enum):
    """The three label axes a classification task can target."""

    DRUG_CLASS = "drug_class"
    GENE_FAMILY = "gene_family"
    MECHANISM = "resistance_mechanism"


class Role(enum.Enum):
    ID = "ID"
    TYPE = "TYPE"
    DRUG_CLASS = "DRUG_CLASS"
    MECHANISM = "MECHANISM"
    GENE_FAMILY = "GENE_FAMILY"
    IGNORE = "IGNORE"


@dataclass(frozen=True)
class LabelSet:
    """Labels on the three attribute axes; absent axes are None."""

    drug_class: str | None = None
    gene_family: str | None = None
    resistance_mechanism: str | None = None

    def get(self, axis: Axis) -> str | None:
        return getattr(self, axis.value)

    def replace(self, axis: Axis, value: str | None) -> "LabelSet":
        fields = {
            "drug_class": self.drug_class,
            "gene_family": self.gene_family,
            "resistance_mechanism": self.resistance_mechanism,
        }
        fields[axis.value] = value
        return LabelSet(**fields)

    def has_any(self) -> bool:
        return any((self.drug_class, self.gene_family, self.resistance_mechanism))


@dataclass(frozen=True)
class SequenceRecord:
    """One normalized nucleotide sequence with provenance."""

    id: str
    header: str
    nucleotides: str
    source_db: SourceDb

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        bad = set(self.nucleotides) - set(ALPHABET)
        if bad:
            raise ValueError(f"record {self.id}: invalid bases {sorted(bad)}")


@dataclass(frozen=True)
class HeaderSchema:
    """Declarative description of one database's FASTA header grammar."""

    name: str
    delimiter: str
    roles: tuple[Role, ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")
        n_id = sum(1 for r in self.roles if r is Role.ID)
        if n_id != 1:
            raise ValueError("schema needs exactly one ID role")
        for role in (Role.TYPE, Role.DRUG_CLASS, Role.MECHANISM, Role.GENE_FAMILY):
            if sum(1 for r in self.roles if r is role) > 1:
                raise ValueError(f"schema repeats role {role.value}")

    @property
    def id_index(self) -> int:
        return self.roles.index(Role.ID)

    @staticmethod
    def from_config(path: str | Path) -> "HeaderSchema":
        """Load a schema from a flat key=value config file."""
        if not Path(path).exists():
            raise InputError(f"missing schema config: {path}")
        kv: dict[str, str] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
        missing = {"name", "delimiter", "roles"} - kv.keys()
        if missing:
            raise InputError(f"{path}: missing keys {sorted(missing)}")
        try:
            roles = tuple(Role(tok.strip()) for tok in kv["roles"].split(",") if tok.strip())
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
        flags = tuple(tok.strip() for tok in kv.get("flags", "").split(",") if tok.strip())
        try:
            return HeaderSchema(kv["name"], kv["delimiter"], roles, flags)
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None


BUILTIN_SCHEMAS: dict[str, HeaderSchema] = {
    # MEG_1|Drugs|Aminoglycosides|A16S|GeneGrp[|RequiresSNPConfirmation]
    "megares": HeaderSchema(
        name="megares",
        delimiter="|",
        roles=(Role.ID, Role.TYPE, Role.DRUG_CLASS, Role.MECHANISM, Role.GENE_FAMILY),
        flags=("RequiresSNPConfirmation",),
    ),
    # gb|GQ343019.1|+|132-1023|ARO:3002999|CblA-1 [Bacteroides uniformis]
    # labels come out-of-band from the metadata sidecar, keyed by ARO accession
    "card": HeaderSchema(
        name="card",
        delimiter="|",
        roles=(Role.IGNORE, Role.IGNORE, Role.IGNORE, Role.IGNORE, Role.ID, Role.IGNORE),
    ),
}


def normalize_sequence(seq: str, line: int | None = None) -> str:
    """Uppercase, map U->T and ambiguity codes->N; reject anything else."""
    up = seq.upper().replace("U", "T")
    out = []
    for ch in up:
        if ch in ALPHABET:
            out.append(ch)
        elif ch in _AMBIGUITY:
            out.append("N")
        else:
            where = f" at line {line}" if line else ""
            raise MalformedFasta(f"invalid sequence character {ch!r}{where}")
    return "".join(out)


def _iter_lines(source: str | bytes | IO | Iterable[str]) -> Iterator[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        yield from source.splitlines()
        return
    for raw in source:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw.rstrip("\n").rstrip("\r")


def parse_fasta(source: str | bytes | IO | Iterable[str]) -> list[tuple[str, str]]:
    """Parse FASTA text into (header, normalized sequence) pairs."""
    pairs: list[tuple[str, str]] = []
    header: str | None = None
    chunks: list[str] = []
    header_line = 0

    def flush() -> None:
        if header is None:
            return
        if not chunks:
            raise MalformedFasta(f"record {header!r} at line {header_line} has an empty sequence body")
        pairs.append((header, "".join(chunks)))

    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise MalformedFasta(f"empty header at line {lineno}")
            header_line = lineno
            chunks = []
        else:
            if header is None:
                raise MalformedFasta(f"sequence content before first '>' at line {lineno}")
            chunks.append(normalize_sequence("".join(line.split()), line=lineno))
    flush()
    return pairs


def serialize_fasta(pairs: Iterable[tuple[str, str]], width: int = 70) -> str:
    """Inverse of parse_fasta on normalized records."""
    out: list[str] = []
    for header, seq in pairs:
        out.append(f">{header}")
        for i in range(0, len(seq), width):
            out.append(seq[i : i + width])
        if not seq:
            out.append("")
    return "\n".join(out) + "\n" if out else ""


def parse_header(header: str, schema: HeaderSchema) -> tuple[str, LabelSet]:
    """Split a header by the schema and assign fields by role."""
    fields = [f for f in header.split(schema.delimiter) if f not in schema.flags]
    if len(fields) <= schema.id_index or not fields[schema.id_index].strip():
        raise HeaderMismatch(
            f"header {header!r} has no field for the {schema.name!r} schema's ID role"
        )
    rec_id = fields[schema.id_index].strip()
    values: dict[str, str | None] = {"drug_class": None, "gene_family": None, "resistance_mechanism": None}
    for role, field in zip(schema.roles, fields):
        value = field.strip()
        if not value:
            continue
        if role is Role.DRUG_CLASS:
            values["drug_class"] = value
        elif role is Role.GENE_FAMILY:
            values["gene_family"] = value
        elif role is Role.MECHANISM:
            values["resistance_mechanism"] = value
    return rec_id, LabelSet(**values)


def truncate(seq: str, max_len: int = 1000) -> str:
    """Keep the 5' prefix of at most max_len bases."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return seq[:max_len]


def was_truncated(seq: str, max_len: int = 1000) -> bool:
    return len(seq) > max_len


def reverse_complement(seq: str) -> str:
    return "".join(_COMPLEMENT[c] for c in reversed(seq))


def encode_bases(seq: str) -> np.ndarray:
    """Sequence -> uint8 codes (A=0 C=1 G=2 T=3 N=4) for the kernels."""
    raw = np.frombuffer(seq.encode("ascii"), dtype=np.uint8)
    codes = _CODE_LUT[raw]
    if codes.size and codes.max() == 255:
        bad = seq[int(np.argmax(codes == 255))]
        raise ValueError(f"cannot encode base {bad!r}")
    return codes


def decode_bases(codes: np.ndarray) -> str:
    return "".join(ALPHABET[c] for c in codes)


def load_card_metadata(path: str | Path) -> dict[str, LabelSet]:
    """Accession -> labels sidecar for the card schema (TSV, 4 columns)."""
    if not Path(path).exists():
        raise InputError(f"missing metadata file: {path}")
    table: dict[str, LabelSet] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise InputError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(parts)}")
        accession, drug, family, mechanism = (p.strip() for p in parts)
        if not accession:
            raise InputError(f"{path}:{lineno}: empty accession")
        table[accession] = LabelSet(
            drug_class=drug or None,
            gene_family=family or None,
            resistance_mechanism=mechanism or None,
        )
    return table
