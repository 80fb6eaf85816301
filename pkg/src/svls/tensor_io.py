"""Bit-exact volume interchange and report serialization.

Volume container (extension-agnostic, conventionally `.svlv`), all integers
little-endian regardless of host:

    bytes 0-3   magic "SVLV"
    bytes 4-7   u32 version (1)
    bytes 8-11  u32 dtype code: 0 = u8 labels, 1 = f32 probabilities
    bytes 12-15 u32 spatial rank (2 or 3)
    then        u32 extents: `rank` of them for labels, `rank + 1` for
                probability volumes (leading class axis first)
    then        raw row-major little-endian payload, nothing after it

A JSON sidecar at `<path>.json` carries what the payload cannot: spacing
(mm per axis), num_classes, a class-name map covering [0, N), and provenance
(method, alpha, sigma, rater files, tool version). Readers reject invalid
files instead of repairing them.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationReport
from .loss import LogitVolume, LossReport
from .seg_metrics import SegmentationScores
from .volume import LabelVolume, SoftLabelVolume

MAGIC = b"SVLV"
VERSION = 1
DTYPE_LABELS = 0
DTYPE_PROBS = 1

TOOL_VERSION = "0.1.0"


class VolumeFormatError(ValueError):
    """A volume file violated the container contract; `field` names the culprit."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class BadMagicError(VolumeFormatError):
    pass


class VersionMismatchError(VolumeFormatError):
    pass


class HeaderFieldError(VolumeFormatError):
    pass


class TruncatedPayloadError(VolumeFormatError):
    pass


class PayloadValidationError(VolumeFormatError):
    pass


class SidecarError(VolumeFormatError):
    pass


def sidecar_path(path) -> str:
    return str(path) + ".json"


def _atomic_write_bytes(path, blob: bytes) -> None:
    path = str(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.chmod(tmp, 0o644)  # mkstemp creates 0600; match regular file creation
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class SidecarMeta:
    spacing: tuple[float, ...]
    num_classes: int
    class_names: dict
    provenance: dict


def _default_class_names(num_classes: int) -> dict:
    names = {0: "background"}
    for c in range(1, num_classes):
        names[c] = f"class_{c}"
    return names


def _encode_volume(volume) -> tuple[bytes, int, int]:
    if isinstance(volume, LabelVolume):
        payload = volume.data.astype("<u1", copy=False).tobytes(order="C")
        return payload, DTYPE_LABELS, volume.rank
    if isinstance(volume, (SoftLabelVolume, LogitVolume)):
        payload = volume.data.astype("<f4").tobytes(order="C")
        rank = volume.data.ndim - 1
        return payload, DTYPE_PROBS, rank
    raise TypeError(f"cannot serialize {type(volume).__name__}")


def write_volume(volume, path, class_names=None, provenance=None) -> None:
    """Write a volume and its sidecar; both writes are atomic (temp + rename).

    LogitVolume payloads use the f32 dtype code and are readable only via
    read_logits (their voxel sums are not probability sums).
    """
    payload, dtype_code, rank = _encode_volume(volume)
    if isinstance(volume, LabelVolume):
        axes = volume.dims
        num_classes = volume.num_classes
    else:
        axes = volume.data.shape  # leading class axis included
        num_classes = volume.data.shape[0]
    header = MAGIC + struct.pack("<3I", VERSION, dtype_code, rank)
    header += struct.pack(f"<{len(axes)}I", *axes)
    _atomic_write_bytes(path, header + payload)

    meta = {
        "spacing": list(volume.spacing),
        "num_classes": num_classes,
        "class_names": {str(k): v for k, v in (class_names or _default_class_names(num_classes)).items()},
        "provenance": dict(provenance or {}),
    }
    meta["provenance"].setdefault("tool_version", TOOL_VERSION)
    atomic_write_text(sidecar_path(path), json.dumps(meta, indent=2) + "\n")


def read_sidecar(path) -> SidecarMeta:
    side = sidecar_path(path)
    try:
        with open(side, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise SidecarError("sidecar", f"missing sidecar {side}")
    except json.JSONDecodeError as exc:
        raise SidecarError("sidecar", f"unparseable sidecar {side}: {exc}")
    try:
        spacing = tuple(float(s) for s in meta["spacing"])
        num_classes = int(meta["num_classes"])
        class_names = {int(k): str(v) for k, v in meta.get("class_names", {}).items()}
        provenance = dict(meta.get("provenance", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise SidecarError("sidecar", f"bad sidecar field in {side}: {exc}")
    if any(s <= 0 for s in spacing):
        raise SidecarError("spacing", f"spacing must be positive, got {spacing}")
    if class_names and sorted(class_names) != list(range(num_classes)):
        raise SidecarError("class_names", f"class map must cover [0, {num_classes})")
    return SidecarMeta(spacing, num_classes, class_names, provenance)


def _parse_container(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise TruncatedPayloadError("header", f"file is {len(blob)} bytes, header needs 16")
    if blob[:4] != MAGIC:
        raise BadMagicError("magic", f"expected {MAGIC!r}, got {blob[:4]!r}")
    version, dtype_code, rank = struct.unpack_from("<3I", blob, 4)
    if version != VERSION:
        raise VersionMismatchError("version", f"expected {VERSION}, got {version}")
    if dtype_code not in (DTYPE_LABELS, DTYPE_PROBS):
        raise HeaderFieldError("dtype", f"unknown dtype code {dtype_code}")
    if rank not in (2, 3):
        raise HeaderFieldError("rank", f"rank must be 2 or 3, got {rank}")
    naxes = rank if dtype_code == DTYPE_LABELS else rank + 1
    offset = 16
    if len(blob) < offset + 4 * naxes:
        raise TruncatedPayloadError("dims", "header ends before the extent list")
    axes = struct.unpack_from(f"<{naxes}I", blob, offset)
    offset += 4 * naxes
    if any(a < 1 for a in axes):
        raise HeaderFieldError("dims", f"extents must be >= 1, got {axes}")
    itemsize = 1 if dtype_code == DTYPE_LABELS else 4
    expected = itemsize * int(np.prod(axes))
    payload = blob[offset:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            "payload", f"expected {expected} payload bytes, found {len(payload)}"
        )
    dtype = np.dtype("<u1") if dtype_code == DTYPE_LABELS else np.dtype("<f4")
    data = np.frombuffer(payload, dtype=dtype).reshape(axes)
    return dtype_code, data


def read_volume(path):
    """Read a label or probability volume (decided by the dtype code)."""
    dtype_code, data = _parse_container(path)
    meta = read_sidecar(path)
    if dtype_code == DTYPE_LABELS:
        try:
            return LabelVolume(data, meta.spacing, meta.num_classes)
        except ValueError as exc:
            raise PayloadValidationError("payload", str(exc))
    if data.shape[0] != meta.num_classes:
        raise SidecarError(
            "num_classes",
            f"sidecar says {meta.num_classes} classes, payload has {data.shape[0]}",
        )
    try:
        return SoftLabelVolume(data.astype(np.float32), meta.spacing)
    except ValueError as exc:
        raise PayloadValidationError("payload", str(exc))


def read_logits(path) -> LogitVolume:
    """Read an f32 volume as raw scores, skipping the probability checks."""
    dtype_code, data = _parse_container(path)
    if dtype_code != DTYPE_PROBS:
        raise HeaderFieldError("dtype", "logits must use the f32 dtype code")
    meta = read_sidecar(path)
    if data.shape[0] != meta.num_classes:
        raise SidecarError(
            "num_classes",
            f"sidecar says {meta.num_classes} classes, payload has {data.shape[0]}",
        )
    try:
        return LogitVolume(data.astype(np.float64), meta.spacing)
    except ValueError as exc:
        raise PayloadValidationError("payload", str(exc))


def _sig6(x: float):
    """Round to 6 significant decimals; None for NaN (empty cells)."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(f"{float(x):.6g}")


def _sig6_str(x: float) -> str:
    v = _sig6(x)
    return "" if v is None else f"{v:.6g}"


def _calibration_json(report: CalibrationReport) -> dict:
    return {
        "ece": _sig6(report.ece),
        "tace": _sig6(report.tace),
        "num_bins": report.num_bins,
        "tace_threshold": _sig6(report.tace_threshold),
        "tace_ranges": report.tace_ranges,
        "bins": [
            {
                "lower": _sig6(b.lower),
                "upper": _sig6(b.upper),
                "count": b.count,
                "mean_confidence": _sig6(b.mean_confidence),
                "accuracy": _sig6(b.accuracy),
            }
            for b in report.bins
        ],
    }


def _calibration_csv(report: CalibrationReport) -> str:
    lines = ["lower,upper,count,mean_confidence,accuracy"]
    for b in report.bins:
        lines.append(
            f"{_sig6_str(b.lower)},{_sig6_str(b.upper)},{b.count},"
            f"{_sig6_str(b.mean_confidence)},{_sig6_str(b.accuracy)}"
        )
    return "\n".join(lines) + "\n"


def _scores_json(scores: SegmentationScores) -> dict:
    return {
        "tolerance_mm": _sig6(scores.tolerance_mm),
        "classes": [
            {"class": str(c), "dsc": _sig6(scores.per_class_dsc[c]), "sd": _sig6(scores.per_class_sd[c])}
            for c in scores.per_class_dsc
        ],
    }


def _scores_csv(scores: SegmentationScores) -> str:
    lines = ["class,dsc,sd"]
    for c in scores.per_class_dsc:
        lines.append(f"{c},{_sig6_str(scores.per_class_dsc[c])},{_sig6_str(scores.per_class_sd[c])}")
    return "\n".join(lines) + "\n"


def _loss_json(report: LossReport) -> dict:
    return {"total": _sig6(report.total), "voxels": int(report.per_voxel.size)}


def write_report(report, path, format: str = "json") -> None:
    """Serialize a metric report with fixed field order and 6 significant decimals."""
    if format not in ("json", "csv"):
        raise ValueError(f"format must be json or csv, got {format!r}")
    if isinstance(report, CalibrationReport):
        payload = _calibration_csv(report) if format == "csv" else _calibration_json(report)
    elif isinstance(report, SegmentationScores):
        payload = _scores_csv(report) if format == "csv" else _scores_json(report)
    elif isinstance(report, LossReport):
        if format == "csv":
            payload = f"total,voxels\n{_sig6_str(report.total)},{report.per_voxel.size}\n"
        else:
            payload = _loss_json(report)
    else:
        raise TypeError(f"cannot serialize {type(report).__name__}")
    if format == "json":
        atomic_write_text(path, json.dumps(payload, indent=2) + "\n")
    else:
        atomic_write_text(path, payload)
