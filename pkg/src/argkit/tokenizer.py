"""k-mer tokenization and the integer vocabulary for sequence model input.

Default chunking is non-overlapping (stride = k) with a final shorter-than-k
remainder emitted as single-character tokens, so joining the tokens always
reproduces the input. Overlapping windows for feature extraction are available
via the stride parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError
from .seq_io import ALPHABET

PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"
CLS_TOKEN = "<CLS>"
SPECIALS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN)
SINGLE_TOKENS = ("A", "C", "G", "T", "N")


class InvalidAlphabet(InputError):
    pass


class PadTooShort(InputError):
    pass


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source_id: str = ""


def _check_alphabet(seq: str) -> None:
    bad = set(seq) - set(ALPHABET)
    if bad:
        raise InvalidAlphabet(f"sequence contains non-{{A,C,G,T,N}} characters: {sorted(bad)}")


def kmer_tokenize(seq: str, k: int = 6, stride: int | None = None) -> TokenSequence:
    """Chunk a sequence into k-mers.

    stride=None chunks without overlap and emits the remainder as 1-character
    tokens; an explicit stride yields overlapping length-k windows only.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_alphabet(seq)
    if stride is not None:
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return TokenSequence(tuple(seq[i : i + k] for i in range(0, max(len(seq) - k + 1, 0), stride)))
    tokens: list[str] = []
    whole = len(seq) - len(seq) % k
    for i in range(0, whole, k):
        tokens.append(seq[i : i + k])
    tokens.extend(seq[whole:])
    return TokenSequence(tuple(tokens))


@dataclass(frozen=True)
class KmerVocabulary:
    """Dense token->id table: specials, single bases, then all 4**k k-mers."""

    k: int
    token_to_id: dict[str, int] = field(repr=False)

    @staticmethod
    def build(k: int = 6) -> "KmerVocabulary":
        if k < 1:
            raise ValueError("k must be >= 1")
        tokens = list(SPECIALS) + list(SINGLE_TOKENS)
        bases = "ACGT"
        stack = [""]
        for _ in range(k):
            stack = [prefix + b for prefix in stack for b in bases]
        tokens.extend(stack)
        table: dict[str, int] = {}
        for tok in tokens:  # k=1 would repeat the single bases; keep ids dense
            if tok not in table:
                table[tok] = len(table)
        return KmerVocabulary(k, table)

    def __len__(self) -> int:
        return len(self.token_to_id)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS_TOKEN]

    def save(self, path: str | Path) -> None:
        ordered = sorted(self.token_to_id.items(), key=lambda kv: kv[1])
        Path(path).write_text("\n".join(tok for tok, _ in ordered) + "\n")

    @staticmethod
    def load(path: str | Path) -> "KmerVocabulary":
        tokens = Path(path).read_text().splitlines()
        if tuple(tokens[:3]) != SPECIALS:
            raise InputError(f"{path}: vocabulary must start with {SPECIALS}")
        kmers = [t for t in tokens if len(t) > 1 and not t.startswith("<")]
        k = len(kmers[0]) if kmers else 1
        vocab = KmerVocabulary(k, {tok: i for i, tok in enumerate(tokens)})
        if len(vocab.token_to_id) != len(tokens):
            raise InputError(f"{path}: duplicate tokens in vocabulary")
        return vocab


def encode(ts: TokenSequence, vocab: KmerVocabulary, pad_to: int | None = None) -> list[int]:
    """Map tokens to ids; length-k tokens containing N map to UNK."""
    if pad_to is not None and pad_to < len(ts.tokens):
        raise PadTooShort(f"pad_to={pad_to} < {len(ts.tokens)} tokens")
    ids: list[int] = []
    for tok in ts.tokens:
        if len(tok) == vocab.k and "N" in tok:
            ids.append(vocab.unk_id)
            continue
        try:
            ids.append(vocab.token_to_id[tok])
        except KeyError:
            raise InvalidAlphabet(f"token {tok!r} not in vocabulary (k={vocab.k})") from None
    if pad_to is not None:
        ids.extend([vocab.pad_id] * (pad_to - len(ids)))
    return ids
