"""
Streaming reader/writer for detection manifests.

A manifest is UTF-8 JSON Lines: one header object followed by one object per
detected face.

    {"version":1,"embedding_dim":512}
    {"video_id":"v1","frame":0,"face":0,"bbox":[x0,y0,x1,y1],"conf":0.97,
     "embedding":[...],"score":0.83,"label":1}

`embedding`, `score` and `label` are optional per row. Cleaned manifests add
`component` (int) and `kept` (bool). Floats are written with repr(), which
round-trips exactly.
"""

import io
import json
import logging
import math
from dataclasses import dataclass
from typing import IO, Any, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from .errors import DimensionMismatch, DuplicateRecord, ParseError, RecordId, UnsortedInput
from .model import DEFAULT_EMBEDDING_DIM, BBox, FaceRecord, VideoGroup

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1

Stream = Union[IO[str], IO[bytes]]


@dataclass(frozen=True)
class ManifestHeader:
    """First line of every manifest."""

    version: int = MANIFEST_VERSION
    embedding_dim: int = DEFAULT_EMBEDDING_DIM

    def __post_init__(self):
        if self.version != MANIFEST_VERSION:
            raise ValueError(f"Unsupported manifest version {self.version}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")


def _dumps(obj: Dict[str, Any]) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _lines(stream: Stream) -> Iterator[str]:
    """Decode lines one at a time; bad UTF-8 is a ParseError on its line."""
    iterator = iter(stream)
    line_no = 0
    while True:
        line_no += 1
        try:
            raw = next(iterator)
        except StopIteration:
            return
        except UnicodeDecodeError as e:
            raise ParseError(line_no, f"invalid UTF-8 ({e.reason})")
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ParseError(line_no, f"invalid UTF-8 at byte {e.start} ({e.reason})")
        yield raw


def _loads(line: str, line_no: int, what: str = "invalid JSON") -> Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(line_no, f"{what} ({e.msg})")
    except (ValueError, RecursionError) as e:
        # Integer literals past the digit limit, or nesting past the recursion limit.
        raise ParseError(line_no, f"{what} ({e})")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        return False
    try:
        return math.isfinite(value)
    except OverflowError:
        return False


def _parse_header(line: str) -> ManifestHeader:
    obj = _loads(line, 1, "header is not valid JSON")
    if not isinstance(obj, dict):
        raise ParseError(1, "header must be a JSON object")
    version = obj.get("version")
    dim = obj.get("embedding_dim")
    if not _is_int(version) or version != MANIFEST_VERSION:
        raise ParseError(1, f"unsupported manifest version {version!r}")
    if not _is_int(dim) or dim < 1:
        raise ParseError(1, f"embedding_dim must be a positive integer, got {dim!r}")
    return ManifestHeader(version=version, embedding_dim=dim)


def row_to_record(obj: Any, line_no: int, embedding_dim: int) -> FaceRecord:
    """
    Validate one decoded manifest row and build a FaceRecord.

    Raises:
        ParseError: On a missing/ill-typed field or a range violation
        DimensionMismatch: When the embedding length differs from the header
    """
    if not isinstance(obj, dict):
        raise ParseError(line_no, "row must be a JSON object")

    video_id = obj.get("video_id")
    if not isinstance(video_id, str) or not video_id:
        raise ParseError(line_no, "video_id must be a non-empty string")

    frame, face = obj.get("frame"), obj.get("face")
    if not _is_int(frame) or frame < 0:
        raise ParseError(line_no, f"frame must be a non-negative integer, got {frame!r}")
    if not _is_int(face) or face < 0:
        raise ParseError(line_no, f"face must be a non-negative integer, got {face!r}")

    bbox = obj.get("bbox")
    if not isinstance(bbox, list) or len(bbox) != 4 or not all(_is_number(v) for v in bbox):
        raise ParseError(line_no, "bbox must be a list of 4 numbers")
    x0, y0, x1, y1 = (float(v) for v in bbox)
    if not (x1 > x0 and y1 > y0):
        raise ParseError(line_no, f"bbox {bbox} requires x1 > x0 and y1 > y0")

    conf = obj.get("conf")
    if not _is_number(conf) or not 0.0 <= conf <= 1.0:
        raise ParseError(line_no, f"conf must be a number in [0, 1], got {conf!r}")

    embedding = None
    if obj.get("embedding") is not None:
        values = obj["embedding"]
        if not isinstance(values, list) or not all(_is_number(v) for v in values):
            raise ParseError(line_no, "embedding must be a list of numbers")
        if len(values) != embedding_dim:
            raise DimensionMismatch(embedding_dim, len(values), line_no=line_no)
        embedding = tuple(float(v) for v in values)

    score = obj.get("score")
    if score is not None:
        if not _is_number(score) or not 0.0 <= score <= 1.0:
            raise ParseError(line_no, f"score must be a number in [0, 1], got {score!r}")
        score = float(score)

    label = obj.get("label")
    if label is not None and (not _is_int(label) or label not in (0, 1)):
        raise ParseError(line_no, f"label must be 0 (real) or 1 (fake), got {label!r}")

    component = obj.get("component")
    if component is not None and (not _is_int(component) or component < 0):
        raise ParseError(line_no, f"component must be a non-negative integer, got {component!r}")

    kept = obj.get("kept")
    if kept is not None and not isinstance(kept, bool):
        raise ParseError(line_no, f"kept must be a boolean, got {kept!r}")

    return FaceRecord(
        video_id=video_id,
        frame_index=frame,
        face_index=face,
        bbox=BBox(x0, y0, x1, y1),
        detector_confidence=float(conf),
        embedding=embedding,
        score=score,
        video_label=label,
        component=component,
        kept=kept,
        line_no=line_no,
    )


def record_to_row(record: FaceRecord) -> Dict[str, Any]:
    """Serialize a FaceRecord to its manifest row (optional fields omitted)."""
    row: Dict[str, Any] = {
        "video_id": record.video_id,
        "frame": record.frame_index,
        "face": record.face_index,
        "bbox": record.bbox.as_list(),
        "conf": record.detector_confidence,
    }
    if record.embedding is not None:
        row["embedding"] = list(record.embedding)
    if record.score is not None:
        row["score"] = record.score
    if record.video_label is not None:
        row["label"] = record.video_label
    if record.component is not None:
        row["component"] = record.component
    if record.kept is not None:
        row["kept"] = record.kept
    return row


def read_manifest(stream: Stream) -> Tuple[ManifestHeader, Iterator[FaceRecord]]:
    """
    Read a manifest header eagerly and its rows lazily.

    Memory use is independent of file size: rows are decoded one line at a
    time as the returned iterator is consumed. Blank lines are skipped but
    still counted for error line numbers.

    Args:
        stream: Text or binary stream positioned at the header line

    Returns:
        Tuple of (header, iterator of FaceRecord in file order)

    Raises:
        ParseError: On a malformed header (immediately) or row (on iteration)
        DimensionMismatch: On iteration, for an embedding of the wrong length
    """
    lines = _lines(stream)
    header_line = next(lines, None)
    if header_line is None or not header_line.strip():
        raise ParseError(1, "missing manifest header")
    header = _parse_header(header_line)

    def records() -> Iterator[FaceRecord]:
        for line_no, line in enumerate(lines, start=2):
            if not line.strip():
                continue
            obj = _loads(line, line_no)
            yield row_to_record(obj, line_no, header.embedding_dim)

    return header, records()


def write_manifest(
    header: ManifestHeader, records: Iterable[FaceRecord], stream: Stream
) -> int:
    """
    Write a header line and one row per record.

    Args:
        header: Manifest header
        records: Records to write, in output order
        stream: Text or binary writable stream

    Returns:
        Number of rows written (header excluded)
    """
    binary = isinstance(stream, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(
        stream, "mode", ""
    )

    def emit(text: str) -> None:
        stream.write(text.encode("utf-8") if binary else text)

    emit(_dumps({"version": header.version, "embedding_dim": header.embedding_dim}) + "\n")
    count = 0
    for record in records:
        emit(_dumps(record_to_row(record)) + "\n")
        count += 1
    return count


def group_by_video(
    records: Iterable[FaceRecord], assume_sorted: bool = False
) -> Iterator[VideoGroup]:
    """
    Group records into one VideoGroup per video_id.

    In the default mode every record is buffered and groups are yielded in
    video_id order, so output does not depend on input order. With
    `assume_sorted=True` only the current video is buffered and groups are
    yielded in input order as soon as the video_id changes.

    Raises:
        DuplicateRecord: When a (video_id, frame, face) triple repeats
        UnsortedInput: In sorted mode, when a finished video reappears
    """
    if assume_sorted:
        yield from _group_sorted(records)
        return

    buckets: Dict[str, List[FaceRecord]] = {}
    seen: set = set()
    for record in records:
        rid = record.record_id
        if rid in seen:
            raise DuplicateRecord(rid)
        seen.add(rid)
        buckets.setdefault(record.video_id, []).append(record)

    for video_id in sorted(buckets):
        yield VideoGroup.from_records(video_id, buckets[video_id])


def _group_sorted(records: Iterable[FaceRecord]) -> Iterator[VideoGroup]:
    finished: set = set()
    current_id: Optional[str] = None
    current: List[FaceRecord] = []
    current_ids: set = set()

    for record in records:
        if record.video_id != current_id:
            if record.video_id in finished:
                raise UnsortedInput(record.video_id)
            if current_id is not None:
                finished.add(current_id)
                yield VideoGroup.from_records(current_id, current)
            current_id, current, current_ids = record.video_id, [], set()
        rid: RecordId = record.record_id
        if rid in current_ids:
            raise DuplicateRecord(rid)
        current_ids.add(rid)
        current.append(record)

    if current_id is not None:
        yield VideoGroup.from_records(current_id, current)


def filter_by_confidence(
    records: Iterable[FaceRecord], min_confidence: float
) -> Iterator[FaceRecord]:
    """Drop detections whose confidence is strictly below `min_confidence`."""
    dropped = 0
    for record in records:
        if record.detector_confidence < min_confidence:
            dropped += 1
            continue
        yield record
    if dropped:
        logger.info("Dropped %d detections below confidence %.3f", dropped, min_confidence)


def read_truth(stream: Stream) -> Dict[RecordId, str]:
    """
    Read a ground-truth sidecar: one {"video_id","frame","face","truth"} per line.

    Raises:
        ParseError: On a malformed row
        DuplicateRecord: When a record identity repeats
    """
    truth: Dict[RecordId, str] = {}
    for line_no, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        obj = _loads(line, line_no)
        if not isinstance(obj, dict):
            raise ParseError(line_no, "row must be a JSON object")
        video_id, frame, face, label = (
            obj.get("video_id"),
            obj.get("frame"),
            obj.get("face"),
            obj.get("truth"),
        )
        if not isinstance(video_id, str) or not _is_int(frame) or not _is_int(face):
            raise ParseError(line_no, "truth row needs video_id, frame and face")
        if not isinstance(label, str) or not (label == "fp" or label.startswith("identity:")):
            raise ParseError(line_no, f"truth must be 'fp' or 'identity:<k>', got {label!r}")
        rid = (video_id, frame, face)
        if rid in truth:
            raise DuplicateRecord(rid)
        truth[rid] = label
    return truth


def write_truth(truth: Dict[RecordId, str], stream: IO[str]) -> int:
    """Write a ground-truth sidecar sorted by record identity. Returns row count."""
    count = 0
    for (video_id, frame, face) in sorted(truth):
        row = {"video_id": video_id, "frame": frame, "face": face, "truth": truth[(video_id, frame, face)]}
        stream.write(_dumps(row) + "\n")
        count += 1
    return count
