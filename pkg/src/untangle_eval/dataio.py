"""Bit-exact file formats for predictions, labels, and embeddings.

Binary prediction files: 24-byte little-endian header (magic "UQP1",
version u16, flags u16 with bit0 = dirichlet payload / bit1 = logits
payload, n u64, M u32, C u32) followed by 32-bit IEEE-754 little-endian
floats, sample-major then member-major then class-major. A line-oriented
JSON alternative carries the same data with explicit ids. Files store
float32; all computation upstream is float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .core import DirichletPrediction, PredictionSet, SampleRecord, SoftLabel
from .errors import (
    BadMagic,
    EmptyInput,
    FlagConflict,
    IdMismatch,
    InvalidInput,
    ShapeError,
    TruncatedPayload,
)
from .posthoc import EmbeddingRecord

PREDICTION_MAGIC = b"UQP1"
EMBEDDING_MAGIC = b"UQE1"
FORMAT_VERSION = 1
FLAG_DIRICHLET = 0x1
FLAG_LOGITS = 0x2

_HEADER = struct.Struct("<4sHHQII")


@dataclass
class PredictionBatch:
    """Either an n x M x C logit tensor or an n x C Dirichlet matrix."""

    ids: List[str]
    logits: Optional[np.ndarray] = None
    dirichlet: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.logits is None) == (self.dirichlet is None):
            raise FlagConflict("exactly one of logits/dirichlet must be present")
        n = len(self.ids)
        payload = self.logits if self.logits is not None else self.dirichlet
        if payload.shape[0] != n:
            raise ShapeError("ids and payload disagree on sample count")

    @property
    def n(self) -> int:
        return len(self.ids)

    def prediction(self, i: int) -> Union[PredictionSet, DirichletPrediction]:
        if self.logits is not None:
            return PredictionSet(self.logits[i])
        return DirichletPrediction(self.dirichlet[i])


def write_predictions(path, batch: PredictionBatch, binary: bool = True) -> None:
    path = Path(path)
    if binary:
        if batch.logits is not None:
            flags = FLAG_LOGITS
            payload = np.ascontiguousarray(batch.logits, dtype="<f4")
            n, m, c = payload.shape
        else:
            flags = FLAG_DIRICHLET
            payload = np.ascontiguousarray(batch.dirichlet, dtype="<f4")
            n, c = payload.shape
            m = 1
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(PREDICTION_MAGIC, FORMAT_VERSION, flags, n, m, c))
            fh.write(payload.tobytes())
        return
    with path.open("w", encoding="utf-8") as fh:
        for i, sample_id in enumerate(batch.ids):
            if batch.logits is not None:
                obj = {"id": sample_id, "logits": batch.logits[i].tolist()}
            else:
                obj = {"id": sample_id, "dirichlet": batch.dirichlet[i].tolist()}
            fh.write(json.dumps(obj) + "\n")


def _read_binary_predictions(raw: bytes) -> PredictionBatch:
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"file shorter than the {_HEADER.size}-byte header")
    magic, version, flags, n, m, c = _HEADER.unpack_from(raw)
    if magic != PREDICTION_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise BadMagic(f"unsupported format version {version}")
    if flags not in (FLAG_DIRICHLET, FLAG_LOGITS):
        raise FlagConflict(f"exactly one payload flag must be set, got {flags:#x}")
    count = n * m * c if flags == FLAG_LOGITS else n * c
    expected = _HEADER.size + 4 * count
    if len(raw) != expected:
        offset = min(len(raw), expected)
        raise TruncatedPayload(f"expected {expected} bytes, got {len(raw)} (offset {offset})")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    ids = [str(i) for i in range(n)]
    if flags == FLAG_LOGITS:
        return PredictionBatch(ids=ids, logits=values.reshape(n, m, c))
    return PredictionBatch(ids=ids, dirichlet=values.reshape(n, c))


def _read_text_predictions(path: Path) -> PredictionBatch:
    ids: List[str] = []
    logits: List[np.ndarray] = []
    dirichlet: List[np.ndarray] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in obj:
                raise InvalidInput(f"{path}:{lineno}: missing mandatory 'id'")
            has_logits = "logits" in obj
            has_dirichlet = "dirichlet" in obj
            if has_logits == has_dirichlet:
                raise FlagConflict(f"{path}:{lineno}: exactly one of 'logits'/'dirichlet' required")
            ids.append(str(obj["id"]))
            if has_logits:
                logits.append(np.asarray(obj["logits"], dtype=np.float64))
            else:
                dirichlet.append(np.asarray(obj["dirichlet"], dtype=np.float64))
    if not ids:
        raise EmptyInput(f"{path}: no prediction records")
    if logits and dirichlet:
        raise FlagConflict(f"{path}: mixed logits and dirichlet records")
    if logits:
        shapes = {arr.shape for arr in logits}
        if len(shapes) != 1:
            raise ShapeError(f"{path}: inconsistent logit shapes {sorted(shapes)}")
        return PredictionBatch(ids=ids, logits=np.stack(logits))
    shapes = {arr.shape for arr in dirichlet}
    if len(shapes) != 1:
        raise ShapeError(f"{path}: inconsistent dirichlet shapes {sorted(shapes)}")
    return PredictionBatch(ids=ids, dirichlet=np.stack(dirichlet))


def read_predictions(path) -> PredictionBatch:
    path = Path(path)
    raw = path.read_bytes()
    if not raw:
        raise EmptyInput(f"{path}: empty file")
    if raw[:4] == PREDICTION_MAGIC:
        return _read_binary_predictions(raw)
    if not raw.lstrip().startswith(b"{"):
        raise BadMagic(f"{path}: bad magic {raw[:4]!r} and not a JSON-lines file")
    try:
        return _read_text_predictions(path)
    except UnicodeDecodeError as exc:
        raise BadMagic(f"{path}: not valid UTF-8 text") from exc


@dataclass
class LabelRecord:
    id: str
    label: int
    votes: Optional[np.ndarray] = None
    ood: bool = False
    severity: int = 0


def write_labels(path, records: Sequence[LabelRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            obj: Dict = {"id": r.id, "label": int(r.label), "ood": bool(r.ood), "severity": int(r.severity)}
            if r.votes is not None:
                obj["votes"] = [int(v) for v in r.votes]
            fh.write(json.dumps(obj) + "\n")


def read_labels(path) -> List[LabelRecord]:
    path = Path(path)
    records: List[LabelRecord] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in obj or "label" not in obj:
                raise InvalidInput(f"{path}:{lineno}: 'id' and 'label' are mandatory")
            votes = np.asarray(obj["votes"], dtype=np.int64) if "votes" in obj else None
            records.append(
                LabelRecord(
                    id=str(obj["id"]),
                    label=int(obj["label"]),
                    votes=votes,
                    ood=bool(obj.get("ood", False)),
                    severity=int(obj.get("severity", 0)),
                )
            )
    if not records:
        raise EmptyInput(f"{path}: no label records")
    return records


def join_dataset(predictions: PredictionBatch, labels: Sequence[LabelRecord]) -> List[SampleRecord]:
    """Join predictions and labels by id into SampleRecords."""
    by_id = {r.id: r for r in labels}
    pred_ids = set(predictions.ids)
    missing = sorted(pred_ids.symmetric_difference(by_id))[:10]
    if missing:
        raise IdMismatch(f"prediction/label id sets differ; first offenders: {missing}")
    samples = []
    for i, sample_id in enumerate(predictions.ids):
        rec = by_id[sample_id]
        pred = predictions.prediction(i)
        if rec.votes is not None and rec.votes.shape[0] != pred.n_classes:
            raise ShapeError(f"sample {sample_id}: votes length != C")
        samples.append(
            SampleRecord(
                id=sample_id,
                prediction=pred,
                label=rec.label,
                soft_label=SoftLabel(rec.votes) if rec.votes is not None else None,
                ood=rec.ood,
                severity=rec.severity,
            )
        )
    return samples


_EMB_HEADER = struct.Struct("<4sHHQ")


def write_embeddings(path, records: Sequence[EmbeddingRecord]) -> None:
    records = list(records)
    if not records:
        raise EmptyInput("no embedding records to write")
    dims = [layer.shape[0] for layer in records[0].layers]
    with Path(path).open("wb") as fh:
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, len(dims), len(records)))
        fh.write(np.asarray(dims, dtype="<u4").tobytes())
        for r in records:
            if [layer.shape[0] for layer in r.layers] != dims:
                raise ShapeError(f"record {r.id}: inconsistent layer dimensions")
            for layer in r.layers:
                fh.write(np.ascontiguousarray(layer, dtype="<f4").tobytes())


def read_embeddings(path) -> List[EmbeddingRecord]:
    path = Path(path)
    raw = path.read_bytes()
    if not raw:
        raise EmptyInput(f"{path}: empty file")
    if len(raw) < _EMB_HEADER.size:
        raise TruncatedPayload(f"{path}: shorter than the embedding header")
    magic, version, n_layers, n = _EMB_HEADER.unpack_from(raw)
    if magic != EMBEDDING_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise BadMagic(f"{path}: unsupported format version {version}")
    offset = _EMB_HEADER.size
    if len(raw) < offset + 4 * n_layers:
        raise TruncatedPayload(f"{path}: truncated layer dimension table")
    dims = np.frombuffer(raw, dtype="<u4", count=n_layers, offset=offset).tolist()
    offset += 4 * n_layers
    record_floats = int(sum(dims))
    expected = offset + 4 * record_floats * n
    if len(raw) != expected:
        raise TruncatedPayload(f"{path}: expected {expected} bytes, got {len(raw)} (offset {min(len(raw), expected)})")
    values = np.frombuffer(raw, dtype="<f4", offset=offset).astype(np.float64).reshape(n, record_floats)
    records = []
    for i in range(n):
        layers = []
        pos = 0
        for d in dims:
            layers.append(values[i, pos : pos + d].copy())
            pos += d
        records.append(EmbeddingRecord(id=str(i), layers=layers))
    return records
