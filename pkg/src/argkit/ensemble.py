"""Weighted soft voting over member probability outputs, with grid tuning."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError, LengthMismatch, VocabMismatch
from .metrics import evaluate

WEIGHT_TOL = 1e-9
DEFAULT_STEP = 0.05


class BadWeights(InputError):
    pass


def _check_members(prob_list) -> list[np.ndarray]:
    if len(prob_list) < 2:
        raise InputError("an ensemble needs at least two members")
    mats = [np.asarray(p, dtype=np.float64) for p in prob_list]
    first = mats[0]
    for p in mats[1:]:
        if p.ndim != 2 or first.ndim != 2:
            raise InputError("probability matrices must be two-dimensional")
        if p.shape[1] != first.shape[1]:
            raise VocabMismatch(f"members disagree on class count: {first.shape[1]} vs {p.shape[1]}")
        if p.shape[0] != first.shape[0]:
            raise LengthMismatch(f"members disagree on row count: {first.shape[0]} vs {p.shape[0]}")
    return mats


def _check_weights(weights, n_members: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != n_members:
        raise BadWeights(f"need {n_members} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise BadWeights("weights must be non-negative")
    if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
        raise BadWeights(f"weights sum to {float(w.sum())}, expected 1")
    return w


def soft_vote(prob_list, weights) -> np.ndarray:
    """Convex combination of member probability matrices."""
    mats = _check_members(prob_list)
    w = _check_weights(weights, len(mats))
    out = np.zeros_like(mats[0])
    for wi, p in zip(w, mats):
        out += wi * p
    return out


def predict_ensemble(prob_list, weights) -> np.ndarray:
    """Vote then argmax; equal scores resolve to the lowest class index."""
    return np.argmax(soft_vote(prob_list, weights), axis=1)


def tune_weights(prob_list, y_val, step: float = DEFAULT_STEP) -> tuple[tuple[float, float], float]:
    """Grid-search the two-member mixing weight on validation labels.

    Scans w1 from 0 to 1 in ``step`` increments, maximizing macro-F1 of the
    voted argmax; ties keep the smallest w1 seen first.
    """
    mats = _check_members(prob_list)
    if len(mats) != 2:
        raise InputError("weight tuning covers exactly two members")
    if not 0 < step <= 1:
        raise InputError("step must lie in (0, 1]")
    n_grid = round(1.0 / step)
    if abs(n_grid * step - 1.0) > WEIGHT_TOL:
        raise InputError(f"step {step} does not divide 1")
    y_val = np.asarray(y_val)
    n_classes = mats[0].shape[1]
    best_w1 = 0.0
    best_score = -1.0
    for i in range(n_grid + 1):
        w1 = i / n_grid
        y_hat = np.argmax(w1 * mats[0] + (1.0 - w1) * mats[1], axis=1)
        score = evaluate(y_val, y_hat, n_classes).macro_f1
        if score > best_score:  # strict: ties keep the earlier, smaller w1
            best_score = score
            best_w1 = w1
    return (best_w1, 1.0 - best_w1), best_score


@dataclass(frozen=True)
class EnsembleWeights:
    members: tuple[str, ...]
    weights: tuple[float, ...]
    objective: str
    score: float
    step: float
    val_manifest: str


def save_weights(ew: EnsembleWeights, path: str) -> None:
    _check_weights(ew.weights, len(ew.members))
    if len(ew.members) != len(ew.weights):
        raise LengthMismatch(f"{len(ew.members)} members vs {len(ew.weights)} weights")
    with open(path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(ew.members):
            fh.write(f"member.{i}={name}\n")
        for i, w in enumerate(ew.weights):
            fh.write(f"weight.{i}={w!r}\n")
        fh.write(f"objective={ew.objective}\n")
        fh.write(f"score={ew.score!r}\n")
        fh.write(f"step={ew.step!r}\n")
        fh.write(f"val_manifest={ew.val_manifest}\n")


def load_weights(path: str) -> EnsembleWeights:
    if not os.path.exists(path):
        raise InputError(f"missing weights file: {path}")
    kv: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise BadWeights(f"line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            if key in kv:
                raise BadWeights(f"line {lineno}: duplicate key {key!r}")
            kv[key] = value
    try:
        n = sum(1 for k in kv if k.startswith("member."))
        members = tuple(kv[f"member.{i}"] for i in range(n))
        weights = tuple(float(kv[f"weight.{i}"]) for i in range(n))
        ew = EnsembleWeights(
            members=members,
            weights=weights,
            objective=kv["objective"],
            score=float(kv["score"]),
            step=float(kv["step"]),
            val_manifest=kv["val_manifest"],
        )
    except KeyError as err:
        raise BadWeights(f"weights file is missing key {err.args[0]!r}") from err
    except ValueError as err:
        raise BadWeights(f"weights file has a malformed number: {err}") from err
    _check_weights(ew.weights, len(ew.members))
    return ew
