"""Feature-bundle interchange: the XFB1 binary format and the performance table.

One ``.xfb`` file holds all sampled features for one case. Layout, with every
integer a little-endian u32 and every float IEEE-754 binary32:

    magic "XFERFVB1" | version=1 | case_id_len | case_id (UTF-8)
    | num_classes | D | D scale blocks

    scale block:
        channels | n_class_entries
        | per entry: class_id, n_rows, f32[n_rows * channels]
        | global_rows, f32[global_rows * channels]
        | has_posteriors (0|1)
        | if 1: source_classes, p_rows, f32[p_rows * source_classes]

Class entries are written in ascending class_id order so identical bundles
serialize to identical bytes. Readers accept any order but reject duplicates.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, TextIO

import numpy as np

from .errors import BundleFormatError, FormatError, InvalidBundleError

MAGIC = b"XFERFVB1"
VERSION = 1

POSTERIOR_ROW_SUM_TOL = 1e-5


@dataclass
class ScaleSamples:
    """Sampled features for one decoder scale of one case.

    class_samples maps foreground class id (>= 1) to an (n_k, channels)
    float32 matrix; absent classes are omitted, never stored empty.
    global_samples is an (L, channels) float32 matrix drawn over all voxels.
    source_posteriors, when present, has one probability row per class-sample
    row, aligned with the ascending-class-id concatenation of class_samples.
    """

    channels: int
    class_samples: dict[int, np.ndarray] = field(default_factory=dict)
    global_samples: np.ndarray | None = None
    source_posteriors: np.ndarray | None = None

    def __post_init__(self):
        if self.global_samples is None:
            self.global_samples = np.empty((0, self.channels), dtype=np.float32)

    def class_sample_rows(self) -> int:
        return sum(m.shape[0] for m in self.class_samples.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScaleSamples):
            return NotImplemented
        if self.channels != other.channels:
            return False
        if sorted(self.class_samples) != sorted(other.class_samples):
            return False
        for k, m in self.class_samples.items():
            if not np.array_equal(m, other.class_samples[k]):
                return False
        if not np.array_equal(self.global_samples, other.global_samples):
            return False
        if (self.source_posteriors is None) != (other.source_posteriors is None):
            return False
        if self.source_posteriors is not None and not np.array_equal(
            self.source_posteriors, other.source_posteriors
        ):
            return False
        return True


@dataclass
class CaseBundle:
    """All sampled features for one target-dataset case.

    scales[0] is the decoder stage nearest the output; scales[-1] is nearest
    the bottleneck. Scale indices elsewhere in the package are 1-based.
    """

    case_id: str
    num_classes: int
    scales: list[ScaleSamples]

    @property
    def num_scales(self) -> int:
        return len(self.scales)

    def scale(self, scale_index: int) -> ScaleSamples:
        """1-based scale access; index 1 is nearest the output."""
        if not 1 <= scale_index <= len(self.scales):
            raise ValueError(
                f"scale_index {scale_index} out of range 1..{len(self.scales)}"
            )
        return self.scales[scale_index - 1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CaseBundle):
            return NotImplemented
        return (
            self.case_id == other.case_id
            and self.num_classes == other.num_classes
            and self.scales == other.scales
        )


@dataclass(frozen=True)
class PerformanceRecord:
    model_id: str
    dice: float


@dataclass(frozen=True)
class Diagnostic:
    """One invariant violation; code is machine-readable and stable."""

    code: str
    location: str
    message: str


def _check_matrix(m, channels: int, location: str, diags: list[Diagnostic]) -> None:
    if m.ndim != 2 or m.shape[1] != channels:
        diags.append(
            Diagnostic(
                "CHANNEL_MISMATCH",
                location,
                f"expected {channels} columns, found shape {m.shape}",
            )
        )
    if m.size and not np.isfinite(m).all():
        diags.append(Diagnostic("NON_FINITE_VALUE", location, "NaN or Inf entry"))


def validate_bundle(bundle: CaseBundle) -> list[Diagnostic]:
    """All invariant violations of one bundle; empty list means valid."""
    diags: list[Diagnostic] = []
    if not bundle.scales:
        diags.append(Diagnostic("EMPTY_SCALES", "scales", "bundle has no scales"))
    if bundle.num_classes < 2:
        diags.append(
            Diagnostic(
                "NUM_CLASSES_TOO_SMALL",
                "num_classes",
                f"num_classes={bundle.num_classes}, need >= 2",
            )
        )
    for si, scale in enumerate(bundle.scales, start=1):
        loc = f"scales[{si}]"
        for class_id in sorted(scale.class_samples):
            m = scale.class_samples[class_id]
            mloc = f"{loc}.class_samples[{class_id}]"
            if class_id == 0:
                diags.append(
                    Diagnostic(
                        "BACKGROUND_CLASS_ENTRY", mloc, "class 0 is never sampled"
                    )
                )
            elif not 1 <= class_id < bundle.num_classes:
                diags.append(
                    Diagnostic(
                        "CLASS_ID_OUT_OF_RANGE",
                        mloc,
                        f"class_id {class_id} outside 1..{bundle.num_classes - 1}",
                    )
                )
            if m.shape[0] == 0:
                diags.append(
                    Diagnostic(
                        "EMPTY_CLASS_ENTRY", mloc, "absent classes must be omitted"
                    )
                )
            _check_matrix(m, scale.channels, mloc, diags)
        _check_matrix(scale.global_samples, scale.channels, f"{loc}.global_samples", diags)
        post = scale.source_posteriors
        if post is not None:
            ploc = f"{loc}.source_posteriors"
            if post.ndim != 2:
                diags.append(
                    Diagnostic("POSTERIOR_ROW_MISMATCH", ploc, "not a 2-D matrix")
                )
                continue
            if post.size and not np.isfinite(post).all():
                diags.append(Diagnostic("NON_FINITE_VALUE", ploc, "NaN or Inf entry"))
                continue
            if post.shape[0] != scale.class_sample_rows():
                diags.append(
                    Diagnostic(
                        "POSTERIOR_ROW_MISMATCH",
                        ploc,
                        f"{post.shape[0]} rows vs {scale.class_sample_rows()} class-sample rows",
                    )
                )
            if post.size and (post < 0).any():
                diags.append(
                    Diagnostic("POSTERIOR_NEGATIVE", ploc, "negative probability")
                )
            if post.size:
                sums = post.sum(axis=1, dtype=np.float64)
                bad = np.abs(sums - 1.0) > POSTERIOR_ROW_SUM_TOL
                if bad.any():
                    row = int(np.argmax(bad))
                    diags.append(
                        Diagnostic(
                            "POSTERIOR_NOT_NORMALIZED",
                            f"{ploc}[{row}]",
                            f"row sums to {sums[row]:.6f}",
                        )
                    )
    return diags


def check_bundle_set(bundles: Iterable[CaseBundle]) -> list[Diagnostic]:
    """Cross-case consistency: every case must share D and per-scale channels."""
    diags: list[Diagnostic] = []
    ref = None
    for b in bundles:
        shape = tuple(s.channels for s in b.scales)
        if ref is None:
            ref = (b.case_id, shape)
            continue
        if len(shape) != len(ref[1]):
            diags.append(
                Diagnostic(
                    "SCALE_COUNT_MISMATCH",
                    b.case_id,
                    f"{len(shape)} scales vs {len(ref[1])} in case {ref[0]}",
                )
            )
        elif shape != ref[1]:
            diags.append(
                Diagnostic(
                    "CHANNELS_MISMATCH",
                    b.case_id,
                    f"per-scale channels {shape} vs {ref[1]} in case {ref[0]}",
                )
            )
    return diags


def _f32_bytes(m: np.ndarray) -> bytes:
    return np.ascontiguousarray(m, dtype="<f4").tobytes()


def write_case_bundle(bundle: CaseBundle, destination: BinaryIO) -> None:
    """Serialize a valid bundle; an invalid bundle is rejected before any
    bytes reach the destination."""
    diags = validate_bundle(bundle)
    if diags:
        raise InvalidBundleError(diags)
    out = bytearray()
    out += MAGIC
    case_id = bundle.case_id.encode("utf-8")
    out += struct.pack("<II", VERSION, len(case_id))
    out += case_id
    out += struct.pack("<II", bundle.num_classes, len(bundle.scales))
    for scale in bundle.scales:
        out += struct.pack("<II", scale.channels, len(scale.class_samples))
        for class_id in sorted(scale.class_samples):
            m = scale.class_samples[class_id]
            out += struct.pack("<II", class_id, m.shape[0])
            out += _f32_bytes(m)
        out += struct.pack("<I", scale.global_samples.shape[0])
        out += _f32_bytes(scale.global_samples)
        post = scale.source_posteriors
        if post is None:
            out += struct.pack("<I", 0)
        else:
            out += struct.pack("<III", 1, post.shape[1], post.shape[0])
            out += _f32_bytes(post)
    destination.write(bytes(out))


class _Cursor:
    """Offset-tracking reader over one byte payload."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise BundleFormatError(
                f"truncated while reading {what}: expected {n} bytes, "
                f"only {len(self.data) - self.pos} remain",
                offset=self.pos,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32_matrix(self, rows: int, cols: int, what: str) -> np.ndarray:
        start = self.pos
        raw = self.take(rows * cols * 4, what)
        m = np.frombuffer(raw, dtype="<f4").reshape(rows, cols).copy()
        if m.size and not np.isfinite(m).all():
            raise BundleFormatError(f"{what} contains NaN or Inf", offset=start)
        return m


def read_case_bundle(source: BinaryIO | bytes) -> CaseBundle:
    """Parse one XFB1 payload; rejects bad magic, unsupported versions,
    truncation, trailing bytes and invariant violations, each with its
    byte offset."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    cur = _Cursor(bytes(data))
    magic = cur.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise BundleFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    version_at = cur.pos
    version = cur.u32("version")
    if version != VERSION:
        raise BundleFormatError(
            f"unsupported version {version}, this reader handles {VERSION}",
            offset=version_at,
        )
    case_id_len = cur.u32("case_id length")
    case_id = cur.take(case_id_len, "case_id").decode("utf-8")
    num_classes_at = cur.pos
    num_classes = cur.u32("num_classes")
    if num_classes < 2:
        raise BundleFormatError(
            f"num_classes={num_classes}, need >= 2", offset=num_classes_at
        )
    n_scales_at = cur.pos
    n_scales = cur.u32("scale count")
    if n_scales == 0:
        raise BundleFormatError("bundle has no scales", offset=n_scales_at)
    scales = []
    for si in range(1, n_scales + 1):
        channels = cur.u32(f"scale {si} channels")
        n_entries = cur.u32(f"scale {si} class entry count")
        class_samples: dict[int, np.ndarray] = {}
        for _ in range(n_entries):
            entry_at = cur.pos
            class_id = cur.u32(f"scale {si} class id")
            n_rows = cur.u32(f"scale {si} class {class_id} rows")
            if class_id == 0:
                raise BundleFormatError(
                    f"scale {si}: class 0 must not carry samples", offset=entry_at
                )
            if class_id >= num_classes:
                raise BundleFormatError(
                    f"scale {si}: class_id {class_id} outside 1..{num_classes - 1}",
                    offset=entry_at,
                )
            if class_id in class_samples:
                raise BundleFormatError(
                    f"scale {si}: duplicate class entry {class_id}", offset=entry_at
                )
            if n_rows == 0:
                raise BundleFormatError(
                    f"scale {si}: class {class_id} entry has zero rows",
                    offset=entry_at,
                )
            class_samples[class_id] = cur.f32_matrix(
                n_rows, channels, f"scale {si} class {class_id} samples"
            )
        global_rows = cur.u32(f"scale {si} global rows")
        global_samples = cur.f32_matrix(
            global_rows, channels, f"scale {si} global samples"
        )
        has_post = cur.u32(f"scale {si} posterior flag")
        posteriors = None
        if has_post not in (0, 1):
            raise BundleFormatError(
                f"scale {si}: posterior flag must be 0 or 1, got {has_post}",
                offset=cur.pos - 4,
            )
        if has_post:
            source_classes = cur.u32(f"scale {si} source class count")
            p_rows = cur.u32(f"scale {si} posterior rows")
            post_at = cur.pos
            posteriors = cur.f32_matrix(
                p_rows, source_classes, f"scale {si} posteriors"
            )
            total_rows = sum(m.shape[0] for m in class_samples.values())
            if p_rows != total_rows:
                raise BundleFormatError(
                    f"scale {si}: {p_rows} posterior rows vs "
                    f"{total_rows} class-sample rows",
                    offset=post_at,
                )
            if posteriors.size:
                if (posteriors < 0).any():
                    raise BundleFormatError(
                        f"scale {si}: negative posterior entry", offset=post_at
                    )
                sums = posteriors.sum(axis=1, dtype=np.float64)
                if np.abs(sums - 1.0).max() > POSTERIOR_ROW_SUM_TOL:
                    raise BundleFormatError(
                        f"scale {si}: posterior row does not sum to 1",
                        offset=post_at,
                    )
        scales.append(
            ScaleSamples(
                channels=channels,
                class_samples=class_samples,
                global_samples=global_samples,
                source_posteriors=posteriors,
            )
        )
    if cur.pos != len(cur.data):
        raise BundleFormatError(
            f"{len(cur.data) - cur.pos} trailing bytes after declared payload",
            offset=cur.pos,
        )
    return CaseBundle(case_id=case_id, num_classes=num_classes, scales=scales)


def read_performance_table(source: TextIO) -> list[PerformanceRecord]:
    """Parse the model_id,dice CSV; duplicates and out-of-range dice are errors."""
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("performance table is empty") from None
    if [h.strip() for h in header] != ["model_id", "dice"]:
        raise FormatError(
            f"performance table header must be 'model_id,dice', got {header!r}"
        )
    records: list[PerformanceRecord] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise FormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
        model_id = row[0].strip()
        try:
            dice = float(row[1])
        except ValueError:
            raise FormatError(f"line {lineno}: dice {row[1]!r} is not a number") from None
        if not 0.0 <= dice <= 1.0:
            raise FormatError(f"line {lineno}: dice {dice} outside [0, 1]")
        if model_id in seen:
            raise FormatError(f"line {lineno}: duplicate model_id {model_id!r}")
        seen.add(model_id)
        records.append(PerformanceRecord(model_id=model_id, dice=dice))
    return records


def write_performance_table(records: Iterable[PerformanceRecord], destination: TextIO) -> None:
    destination.write("model_id,dice\n")
    for record in records:
        destination.write(f"{record.model_id},{record.dice}\n")
