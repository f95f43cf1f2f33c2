"""Baseline probabilistic classifiers for the sequence and text modalities.

Both models expose the same contract: ``fit(inputs, y, n_classes)`` over raw
strings, ``predict_proba(inputs)`` returning one probability row per input,
and binary save/load. Integer labels index a class vocabulary the caller
owns; ``class_names`` is carried along only for reporting.
"""

from __future__ import annotations

import enum
import os
import struct

import numpy as np

from ._kernels import count_kmers, _sm64_np
from ._mix import M64, mix64
from .errors import DataError, InputError, LengthMismatch
from .seq_io import encode_bases, truncate
from .text_format import MarkerStyle, attribute_text


class Modality(enum.Enum):
    SEQUENCE = "sequence"
    TEXT = "text"


class NotFitted(InputError):
    pass


class BadProbabilities(DataError):
    pass


class EmptyClass(DataError):
    pass


class ModalityMismatch(InputError):
    pass


class CorruptModelFile(DataError):
    pass


class VersionMismatch(DataError):
    pass


PROB_TOL = 1e-6


def check_probabilities(probs: np.ndarray, n_classes: int, tol: float = PROB_TOL) -> np.ndarray:
    """Validate a (n, n_classes) probability matrix; rows must sum to 1."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != n_classes:
        raise BadProbabilities(f"expected shape (*, {n_classes}), got {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise BadProbabilities("non-finite probability")
    if probs.size and probs.min() < -tol:
        raise BadProbabilities(f"negative probability {probs.min()}")
    if probs.size:
        sums = probs.sum(axis=1)
        worst = float(np.abs(sums - 1.0).max())
        if worst > tol:
            raise BadProbabilities(f"row sums deviate from 1 by {worst}")
    return probs


def _check_targets(n_inputs: int, y: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise InputError("y must be one-dimensional")
    if y.shape[0] != n_inputs:
        raise LengthMismatch(f"{n_inputs} inputs vs {y.shape[0]} labels")
    if y.size == 0:
        raise InputError("cannot fit on zero samples")
    if not np.issubdtype(y.dtype, np.integer):
        raise InputError("labels must be integers")
    if y.min() < 0 or y.max() >= n_classes:
        raise InputError(f"labels outside [0, {n_classes})")
    counts = np.bincount(y, minlength=n_classes)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyClass(f"classes with no training samples: {empty.tolist()}")
    return y.astype(np.int64)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def sequence_inputs(ds, max_len: int = 1000) -> list[str]:
    """Length-capped nucleotide strings, one per dataset record."""
    return [truncate(rec.nucleotides, max_len) for rec in ds.records]


def text_inputs(ds, style: MarkerStyle, table1_verbatim: bool = False) -> list[str]:
    """Rendered attribute text per record, excluding the task axis."""
    return [
        attribute_text(ds.labels[rec.id], style, exclude=ds.task_axis, table1_verbatim=table1_verbatim)
        for rec in ds.records
    ]


class KmerNBClassifier:
    """Multinomial naive Bayes over stride-1 k-mer counts.

    Per-class k-mer distributions are smoothed in frequency space:
    theta = (freq + alpha) / (1 + alpha * 4**k), so rescaling all pooled
    training counts by a positive constant leaves the model unchanged.
    """

    modality = Modality.SEQUENCE
    kind = "kmer_nb"

    def __init__(self, k: int = 6, alpha: float = 1.0):
        if k < 1:
            raise InputError("k must be positive")
        if alpha <= 0:
            raise InputError("alpha must be positive")
        self.k = int(k)
        self.alpha = float(alpha)
        self.n_classes: int | None = None
        self.class_names: tuple[str, ...] | None = None
        self.log_prior: np.ndarray | None = None
        self.log_theta: np.ndarray | None = None

    def _featurize(self, inputs) -> np.ndarray:
        X = np.zeros((len(inputs), 4**self.k), dtype=np.int64)
        for i, seq in enumerate(inputs):
            count_kmers(encode_bases(seq), self.k, out=X[i])
        return X

    def fit_counts(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "KmerNBClassifier":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 4**self.k:
            raise InputError(f"expected count matrix with {4 ** self.k} columns")
        if np.any(X < 0):
            raise InputError("counts must be non-negative")
        y = _check_targets(X.shape[0], y, n_classes)
        n_features = X.shape[1]
        pooled = np.zeros((n_classes, n_features), dtype=np.float64)
        np.add.at(pooled, y, X)
        totals = pooled.sum(axis=1, keepdims=True)
        freq = np.divide(pooled, totals, out=np.zeros_like(pooled), where=totals > 0)
        self.log_theta = np.log((freq + self.alpha) / (1.0 + self.alpha * n_features))
        class_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        self.log_prior = np.log(class_counts / y.shape[0])
        self.n_classes = n_classes
        return self

    def fit(self, inputs, y, n_classes: int, class_names=None) -> "KmerNBClassifier":
        self.fit_counts(self._featurize(inputs), y, n_classes)
        self.class_names = _resolve_names(class_names, n_classes)
        return self

    def predict_proba(self, inputs) -> np.ndarray:
        if self.log_theta is None:
            raise NotFitted("fit the model before predicting")
        X = self._featurize(inputs).astype(np.float64)
        scores = X @ self.log_theta.T + self.log_prior
        return _softmax_rows(scores)


def softmax_loss_and_grad(
    params: np.ndarray, X1: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient for softmax regression.

    ``params`` is (n_classes, n_features + 1) with the bias in the last
    column; ``X1`` already carries the appended all-ones column. L2 applies
    to everything except the bias column.
    """
    n = X1.shape[0]
    logits = X1 @ params.T
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    data_loss = float((lse - logits[np.arange(n), y]).mean())
    weights = params[:, :-1]
    loss = data_loss + 0.5 * l2 * float((weights * weights).sum())
    probs = np.exp(logits - lse[:, None])
    probs[np.arange(n), y] -= 1.0
    grad = probs.T @ X1 / n
    grad[:, :-1] += l2 * weights
    return loss, grad


class SoftmaxTextClassifier:
    """Softmax regression over bag-of-words counts of rendered label text.

    The token vocabulary is built from the training texts (sorted unique
    whitespace tokens, lowercased); unseen tokens are dropped at predict
    time. Training is full-batch gradient descent from a small
    deterministic init, so refits are bit-reproducible.
    """

    modality = Modality.TEXT
    kind = "softmax_text"

    def __init__(self, lr: float = 0.5, epochs: int = 300, l2: float = 1e-4, seed: int = 0):
        if lr <= 0 or epochs < 1 or l2 < 0:
            raise InputError("need lr > 0, epochs >= 1, l2 >= 0")
        self.lr = float(lr)
        self.epochs = int(epochs)
        self.l2 = float(l2)
        self.seed = int(seed)
        self.n_classes: int | None = None
        self.class_names: tuple[str, ...] | None = None
        self.vocab: dict[str, int] | None = None
        self.params: np.ndarray | None = None

    @staticmethod
    def _tokens(text: str) -> list[str]:
        return text.lower().split()

    def _featurize(self, texts) -> np.ndarray:
        X1 = np.zeros((len(texts), len(self.vocab) + 1), dtype=np.float64)
        X1[:, -1] = 1.0
        for i, text in enumerate(texts):
            for tok in self._tokens(text):
                j = self.vocab.get(tok)
                if j is not None:
                    X1[i, j] += 1.0
        return X1

    def _init_params(self, n_classes: int, n_features: int) -> np.ndarray:
        size = n_classes * (n_features + 1)
        base = np.uint64(mix64(self.seed, 0x57A7) & M64)
        h = _sm64_np(base ^ np.arange(size, dtype=np.uint64))
        u = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return ((u - 0.5) * 0.02).reshape(n_classes, n_features + 1)

    def fit(self, texts, y, n_classes: int, class_names=None) -> "SoftmaxTextClassifier":
        y = _check_targets(len(texts), y, n_classes)
        tokens = sorted({tok for text in texts for tok in self._tokens(text)})
        self.vocab = {tok: i for i, tok in enumerate(tokens)}
        X1 = self._featurize(texts)
        params = self._init_params(n_classes, len(tokens))
        for _ in range(self.epochs):
            _, grad = softmax_loss_and_grad(params, X1, y, self.l2)
            params -= self.lr * grad
        self.params = params
        self.n_classes = n_classes
        self.class_names = _resolve_names(class_names, n_classes)
        return self

    def predict_proba(self, texts) -> np.ndarray:
        if self.params is None:
            raise NotFitted("fit the model before predicting")
        return _softmax_rows(self._featurize(texts) @ self.params.T)


def _resolve_names(class_names, n_classes: int) -> tuple[str, ...]:
    if class_names is None:
        return tuple(str(i) for i in range(n_classes))
    names = tuple(str(n) for n in class_names)
    if len(names) != n_classes:
        raise LengthMismatch(f"{len(names)} class names for {n_classes} classes")
    return names


# ---------------------------------------------------------------------------
# binary model files: little-endian, length-prefixed strings, float64 arrays

MODEL_MAGIC = b"ARGKMODL"
MODEL_VERSION = 1


def _w_u64(fh, value: int) -> None:
    fh.write(struct.pack("<Q", value))


def _w_f64(fh, value: float) -> None:
    fh.write(struct.pack("<d", value))


def _w_str(fh, text: str) -> None:
    data = text.encode("utf-8")
    _w_u64(fh, len(data))
    fh.write(data)


def _w_arr(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    _w_u64(fh, arr.size)
    fh.write(arr.tobytes())


class _Reader:
    def __init__(self, fh):
        self._fh = fh

    def take(self, n: int) -> bytes:
        data = self._fh.read(n)
        if len(data) != n:
            raise CorruptModelFile("model file is truncated")
        return data

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def text(self) -> str:
        n = self.u64()
        if n > 1 << 32:
            raise CorruptModelFile("unreasonable string length")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as err:
            raise CorruptModelFile("string field is not UTF-8") from err

    def arr(self, shape) -> np.ndarray:
        n = self.u64()
        expected = int(np.prod(shape)) if shape else n
        if n != expected:
            raise CorruptModelFile(f"array has {n} values, expected {expected}")
        flat = np.frombuffer(self.take(8 * n), dtype="<f8")
        return flat.reshape(shape).astype(np.float64)

    def expect_eof(self) -> None:
        if self._fh.read(1):
            raise CorruptModelFile("trailing bytes after model payload")


def save_model(model, path: str) -> None:
    if getattr(model, "n_classes", None) is None:
        raise NotFitted("cannot save an unfitted model")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        _w_u64(fh, MODEL_VERSION)
        _w_str(fh, model.kind)
        _w_str(fh, model.modality.value)
        _w_u64(fh, model.n_classes)
        for name in model.class_names:
            _w_str(fh, name)
        if isinstance(model, KmerNBClassifier):
            _w_u64(fh, model.k)
            _w_f64(fh, model.alpha)
            _w_arr(fh, model.log_prior)
            _w_arr(fh, model.log_theta)
        elif isinstance(model, SoftmaxTextClassifier):
            _w_f64(fh, model.lr)
            _w_u64(fh, model.epochs)
            _w_f64(fh, model.l2)
            _w_u64(fh, model.seed)
            _w_u64(fh, len(model.vocab))
            for tok in sorted(model.vocab, key=model.vocab.get):
                _w_str(fh, tok)
            _w_arr(fh, model.params)
        else:
            raise InputError(f"cannot serialize {type(model).__name__}")


def load_model(path: str):
    if not os.path.exists(path):
        raise InputError(f"missing model file: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise CorruptModelFile(f"bad magic {magic!r}")
        r = _Reader(fh)
        version = r.u64()
        if version != MODEL_VERSION:
            raise VersionMismatch(f"model format version {version}, expected {MODEL_VERSION}")
        kind = r.text()
        modality = r.text()
        n_classes = r.u64()
        if n_classes < 1 or n_classes > 1 << 20:
            raise CorruptModelFile(f"unreasonable class count {n_classes}")
        class_names = tuple(r.text() for _ in range(n_classes))
        if kind == "kmer_nb":
            model = KmerNBClassifier(k=r.u64(), alpha=r.f64())
            model.log_prior = r.arr((n_classes,))
            model.log_theta = r.arr((n_classes, 4**model.k))
        elif kind == "softmax_text":
            model = SoftmaxTextClassifier(lr=r.f64(), epochs=r.u64(), l2=r.f64(), seed=r.u64())
            n_vocab = r.u64()
            model.vocab = {r.text(): i for i in range(n_vocab)}
            model.params = r.arr((n_classes, n_vocab + 1))
        else:
            raise CorruptModelFile(f"unknown model kind {kind!r}")
        if modality != model.modality.value:
            raise CorruptModelFile(f"kind {kind!r} cannot have modality {modality!r}")
        r.expect_eof()
    model.n_classes = n_classes
    model.class_names = class_names
    return model
