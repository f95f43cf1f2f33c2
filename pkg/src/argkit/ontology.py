"""Term DAG, level mapping, and label consolidation tables.

The gene-family axis is harmonized by resolving raw labels to ontology terms
and replacing them with the name of an ancestor at a fixed depth from the
roots. The mechanism and drug-class axes use flat consolidation tables.
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import DataError, InputError
from .seq_io import Axis

ONTOLOGY_URL_ENV = "ARGKIT_ONTOLOGY_URL"
OTHER_BUCKET_NAME = "OTHER"


class ParseError(InputError):
    pass


class CyclicOntology(DataError):
    pass


class DanglingParent(DataError):
    pass


class UnknownTerm(DataError):
    pass


class LookupUnavailable(InputError):
    pass


class UnmappedPolicy(enum.Enum):
    DROP = "drop"
    KEEP_RAW = "keep-raw"
    OTHER_BUCKET = "other-bucket"


@dataclass(frozen=True)
class OntologyTerm:
    term_id: str
    name: str
    parent_ids: frozenset[str] = frozenset()
    synonyms: tuple[str, ...] = ()


class OntologyGraph:
    """Immutable is-a DAG over ontology terms, validated on construction."""

    def __init__(self, terms: dict[str, OntologyTerm]):
        if not terms:
            raise ParseError("ontology has no terms")
        for term in terms.values():
            if term.term_id in term.parent_ids:
                raise CyclicOntology(f"term {term.term_id} lists itself as parent")
            for pid in term.parent_ids:
                if pid not in terms:
                    raise DanglingParent(f"term {term.term_id} has unknown parent {pid}")
        self.terms = terms
        self.root_ids = {t.term_id for t in terms.values() if not t.parent_ids}
        self._check_acyclic()
        if not self.root_ids:  # pragma: no cover - acyclicity already implies a root
            raise CyclicOntology("ontology has no root term")
        self._depths: dict[str, int] = {}

    def _check_acyclic(self) -> None:
        # iterative DFS over child->parent edges, 0=white 1=grey 2=black
        color: dict[str, int] = {}
        for start in self.terms:
            if color.get(start):
                continue
            stack: list[tuple[str, iter]] = [(start, iter(sorted(self.terms[start].parent_ids)))]
            color[start] = 1
            while stack:
                node, parents = stack[-1]
                advanced = False
                for pid in parents:
                    c = color.get(pid, 0)
                    if c == 1:
                        raise CyclicOntology(f"cycle through {pid}")
                    if c == 0:
                        color[pid] = 1
                        stack.append((pid, iter(sorted(self.terms[pid].parent_ids))))
                        advanced = True
                        break
                if not advanced:
                    color[node] = 2
                    stack.pop()

    def depth_of(self, term_id: str) -> int:
        """Minimum number of parent edges from any root (roots are depth 0)."""
        if term_id not in self.terms:
            raise UnknownTerm(f"unknown term {term_id}")
        if term_id in self._depths:
            return self._depths[term_id]
        stack = [term_id]
        while stack:
            tid = stack[-1]
            if tid in self._depths:
                stack.pop()
                continue
            parents = self.terms[tid].parent_ids
            if not parents:
                self._depths[tid] = 0
                stack.pop()
                continue
            pending = [p for p in parents if p not in self._depths]
            if pending:
                stack.extend(pending)
            else:
                self._depths[tid] = 1 + min(self._depths[p] for p in parents)
                stack.pop()
        return self._depths[term_id]

    def ancestors_or_self(self, term_id: str) -> set[str]:
        if term_id not in self.terms:
            raise UnknownTerm(f"unknown term {term_id}")
        seen = {term_id}
        stack = [term_id]
        while stack:
            for pid in self.terms[stack.pop()].parent_ids:
                if pid not in seen:
                    seen.add(pid)
                    stack.append(pid)
        return seen

    def ancestor_at_level(self, term_id: str, level: int = 2) -> str:
        """Ancestor-or-self at the given depth; the term itself if shallower.

        Ties among same-depth ancestors break to the smallest term_id.
        """
        if level < 0:
            raise InputError("level must be non-negative")
        if self.depth_of(term_id) < level:
            return term_id
        at_level = [a for a in self.ancestors_or_self(term_id) if self.depth_of(a) == level]
        return min(at_level)


def load_graph(path: str | Path) -> OntologyGraph:
    """Read the tab-separated term table (id, name, parents, synonyms)."""
    if not Path(path).exists():
        raise InputError(f"missing ontology file: {path}")
    terms: dict[str, OntologyTerm] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) < 2:
            raise ParseError(f"{path}:{lineno}: expected at least term_id and name")
        term_id = parts[0].strip()
        name = parts[1].strip()
        if not term_id or not name:
            raise ParseError(f"{path}:{lineno}: empty term_id or name")
        if term_id in terms:
            raise ParseError(f"{path}:{lineno}: duplicate term {term_id}")
        parents = frozenset(
            p.strip() for p in (parts[2] if len(parts) > 2 else "").split("|") if p.strip()
        )
        synonyms = tuple(
            s.strip() for s in (parts[3] if len(parts) > 3 else "").split("|") if s.strip()
        )
        terms[term_id] = OntologyTerm(term_id, name, parents, synonyms)
    return OntologyGraph(terms)


def normalize_label(label: str) -> str:
    """Lowercase, unify separators, collapse whitespace."""
    lowered = label.lower().replace("_", " ").replace("-", " ")
    return re.sub(r"\s+", " ", lowered).strip()


class OntologyLookup(Protocol):
    def resolve(self, normalized_label: str) -> str | None: ...


class LocalTableLookup:
    """Name and synonym index over a loaded graph; never unavailable."""

    def __init__(self, graph: OntologyGraph):
        self._names: dict[str, str] = {}
        self._synonyms: dict[str, str] = {}
        for tid in sorted(graph.terms):
            term = graph.terms[tid]
            self._names.setdefault(normalize_label(term.name), tid)
            for syn in term.synonyms:
                self._synonyms.setdefault(normalize_label(syn), tid)

    def resolve(self, normalized_label: str) -> str | None:
        hit = self._names.get(normalized_label)
        if hit is not None:
            return hit
        return self._synonyms.get(normalized_label)


class RemoteLookup:
    """HTTP lookup with a local append-only cache keyed by normalized label.

    The endpoint answers GET <url>?label=<normalized> with a JSON object
    carrying term_id, label, and parent_ids; 404 means no match.
    """

    def __init__(
        self,
        url: str | None = None,
        cache_path: str | Path | None = None,
        timeout: float = 10.0,
        retries: int = 3,
    ):
        self.url = url or os.environ.get(ONTOLOGY_URL_ENV) or ""
        if not self.url:
            raise LookupUnavailable(f"no ontology endpoint configured ({ONTOLOGY_URL_ENV} unset)")
        self.timeout = timeout
        self.retries = retries
        self.cache_path = Path(cache_path) if cache_path else None
        self._cache: dict[str, str | None] = {}
        if self.cache_path and self.cache_path.exists():
            for raw in self.cache_path.read_text().splitlines():
                if not raw.strip():
                    continue
                label, found, tid = raw.split("\t")
                self._cache[label] = tid if found == "1" else None

    def _remember(self, label: str, term_id: str | None) -> None:
        self._cache[label] = term_id
        if self.cache_path:
            with self.cache_path.open("a") as fh:
                fh.write(f"{label}\t{1 if term_id else 0}\t{term_id or ''}\n")

    def resolve(self, normalized_label: str) -> str | None:
        if normalized_label in self._cache:
            return self._cache[normalized_label]
        import requests

        last_error: Exception | None = None
        for _ in range(1 + self.retries):
            try:
                resp = requests.get(
                    self.url, params={"label": normalized_label}, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 404:
                self._remember(normalized_label, None)
                return None
            if resp.status_code != 200:
                last_error = LookupUnavailable(f"endpoint returned {resp.status_code}")
                continue
            try:
                term_id = resp.json()["term_id"]
            except (ValueError, KeyError) as exc:
                last_error = exc
                continue
            self._remember(normalized_label, term_id)
            return term_id
        raise LookupUnavailable(f"ontology endpoint unreachable: {last_error}")


def resolve_label(raw_label: str, lookup: OntologyLookup) -> str | None:
    """Normalize and resolve a raw label to a term id, or None."""
    if not raw_label:
        raise ValueError("raw_label must be non-empty")
    return lookup.resolve(normalize_label(raw_label))


@dataclass(frozen=True)
class ClassMapping:
    """Raw -> integrated label table for one axis, with an unmapped policy."""

    axis: Axis
    raw_to_integrated: dict[str, str] = field(repr=False)
    unmapped_policy: UnmappedPolicy = UnmappedPolicy.DROP

    def map_label(self, raw: str | None) -> str | None:
        """Integrated label for a raw one; None means the record is dropped."""
        if raw is None:
            return None
        hit = self.raw_to_integrated.get(normalize_label(raw))
        if hit is not None:
            return hit
        if self.unmapped_policy is UnmappedPolicy.KEEP_RAW:
            return raw
        if self.unmapped_policy is UnmappedPolicy.OTHER_BUCKET:
            return OTHER_BUCKET_NAME
        return None

    def integrated_classes(self) -> set[str]:
        return set(self.raw_to_integrated.values())


def build_gene_family_mapping(
    raw_labels: set[str],
    graph: OntologyGraph,
    lookup: OntologyLookup,
    level: int = 2,
    policy: UnmappedPolicy = UnmappedPolicy.DROP,
) -> ClassMapping:
    """Map each raw family label to its level-ancestor's name via the lookup."""
    table: dict[str, str] = {}
    for raw in sorted(raw_labels):
        term_id = resolve_label(raw, lookup)
        key = normalize_label(raw)
        if term_id is not None:
            table[key] = graph.terms[graph.ancestor_at_level(term_id, level)].name
        elif policy is UnmappedPolicy.KEEP_RAW:
            table[key] = raw
        elif policy is UnmappedPolicy.OTHER_BUCKET:
            table[key] = OTHER_BUCKET_NAME
    return ClassMapping(Axis.GENE_FAMILY, table, policy)


def load_mapping_table(
    path: str | Path, axis: Axis, policy: UnmappedPolicy = UnmappedPolicy.DROP
) -> ClassMapping:
    """Read a raw<TAB>integrated consolidation table; keys are normalized."""
    if not Path(path).exists():
        raise InputError(f"missing mapping table: {path}")
    table: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(f"{path}:{lineno}: expected raw<TAB>integrated")
        table[normalize_label(parts[0])] = parts[1].strip()
    return ClassMapping(axis, table, policy)


def default_table_path(axis: Axis) -> Path:
    name = {
        Axis.MECHANISM: "mechanism_default.tsv",
        Axis.DRUG_CLASS: "drug_class_default.tsv",
    }[axis]
    return Path(__file__).parent / "data" / name


def apply_mapping(ds, mapping: ClassMapping):
    """Replace raw labels on the dataset's task axis; DROP removes unmapped."""
    from .dataset import AxisMismatch, Dataset

    if mapping.axis is not ds.task_axis:
        raise AxisMismatch(f"mapping is for {mapping.axis}, dataset task is {ds.task_axis}")
    new_records = []
    new_labels = {}
    for rec in ds.records:
        labels = ds.labels[rec.id]
        integrated = mapping.map_label(labels.get(mapping.axis))
        if integrated is None:
            continue
        new_records.append(rec)
        new_labels[rec.id] = labels.replace(mapping.axis, integrated)
    return Dataset.build(new_records, new_labels, ds.task_axis)


def apply_mapping_to_labelsets(labels: dict, mapping: ClassMapping) -> dict:
    """Sidecar-level integration: rewrite one axis of every label set.

    Unlike apply_mapping this never discards records; a DROPped label is
    cleared instead, so non-task axes can be consolidated too.
    """
    out = {}
    for rec_id, ls in labels.items():
        raw = ls.get(mapping.axis)
        out[rec_id] = ls if raw is None else ls.replace(mapping.axis, mapping.map_label(raw))
    return out
