"""Entity-marker renderings of attribute labels for the text classifier.

Four styles: plain name/value pairs, bracketed names, starred/hashed values,
and the combined form. Marker characters occurring inside names or values are
escaped by doubling so rendering stays injective.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InputError
from .seq_io import Axis, LabelSet

_MARKERS = "*#[]"

AXIS_DISPLAY = {
    Axis.GENE_FAMILY: "Gene Family",
    Axis.MECHANISM: "Resistance Mechanism",
    Axis.DRUG_CLASS: "Drug Class",
}

# rendering order for attribute pairs; iteration order of AXIS_DISPLAY
ATTRIBUTE_ORDER = tuple(AXIS_DISPLAY)


class EmptyPairs(InputError):
    pass


class MarkerStyle(enum.Enum):
    BASE = "base"
    ENTITY_MARKER_PUNCT = "punct"
    TYPED_ENTITY_MARKER = "typed"
    TYPED_ENTITY_MARKER_PUNCT = "typed-punct"


@dataclass(frozen=True)
class AttributePair:
    attribute_name: str
    value: str

    def __post_init__(self) -> None:
        if not self.attribute_name or not self.value:
            raise ValueError("attribute name and value must be non-empty")


def _escape(text: str) -> str:
    for ch in _MARKERS:
        text = text.replace(ch, ch + ch)
    return text


def _as_pairs(pairs: Iterable) -> list[AttributePair]:
    out = []
    for p in pairs:
        out.append(p if isinstance(p, AttributePair) else AttributePair(*p))
    if not out:
        raise EmptyPairs("at least one attribute pair is required")
    return out


def render(pairs: Sequence, style: MarkerStyle, table1_verbatim: bool = False) -> str:
    """Join attribute pairs into one classifier input string.

    table1_verbatim reproduces the published typed-marker example exactly,
    where even-numbered pairs show the attribute name instead of the value.
    """
    items = _as_pairs(pairs)
    parts: list[str] = []
    for i, pair in enumerate(items):
        name = _escape(pair.attribute_name)
        value = _escape(pair.value)
        wrap = "*" if i % 2 == 0 else "#"
        if style is MarkerStyle.BASE:
            parts.append(f"{name}: {value}")
        elif style is MarkerStyle.ENTITY_MARKER_PUNCT:
            parts.append(f"[{name}]: {value}")
        elif style is MarkerStyle.TYPED_ENTITY_MARKER:
            shown = name if (table1_verbatim and i % 2 == 1) else value
            parts.append(f"{wrap}{shown}{wrap}")
        elif style is MarkerStyle.TYPED_ENTITY_MARKER_PUNCT:
            parts.append(f"{wrap}[{name}]: {value}{wrap}")
        else:  # pragma: no cover
            raise ValueError(f"unknown style {style!r}")
    return ", ".join(parts)


def attribute_pairs(labels: LabelSet, exclude: Axis | None = None) -> list[AttributePair]:
    """Pairs for every present label axis except the excluded (target) one."""
    pairs = []
    for axis in ATTRIBUTE_ORDER:
        if axis is exclude:
            continue
        value = labels.get(axis)
        if value is not None:
            pairs.append(AttributePair(AXIS_DISPLAY[axis], value))
    return pairs


def attribute_text(
    labels: LabelSet,
    style: MarkerStyle,
    exclude: Axis | None = None,
    table1_verbatim: bool = False,
) -> str:
    """Rendered text input for one record; empty string when no attributes."""
    pairs = attribute_pairs(labels, exclude)
    if not pairs:
        return ""
    return render(pairs, style, table1_verbatim)
