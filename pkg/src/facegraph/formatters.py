"""
Tabular and JSON renderings of pipeline results.

Verdicts, component reports and per-face predictions are CSV; metrics are
JSON. Floats are written with repr() so a written file reads back to the
same values.
"""

import csv
import io
import json
from pathlib import Path
from typing import IO, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import pandas as pd
import plotly.graph_objects as go

from .errors import ParseError
from .model import AggregationScheme, ComponentSet, VideoVerdict

VERDICT_FIELDS = ["video_id", "scheme", "score", "defaulted"]
REPORT_FIELDS = ["video_id", "K", "N_F", "components", "kept", "pruned"]
FACE_FIELDS = ["video_id", "component", "size", "mean_score"]
SWEEP_FIELDS = ["theta", "size_frac", "log_loss", "accuracy", "macro_f1", "n_videos"]

TextSource = Union[str, IO[str]]


def _write_rows(fieldnames: List[str], rows: Iterable[Dict]) -> str:
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return output.getvalue()


def _reader(source: TextSource) -> csv.DictReader:
    if isinstance(source, str):
        source = io.StringIO(source)
    return csv.DictReader(source)


def _require_header(reader: csv.DictReader, expected: Sequence[str]) -> None:
    fields = reader.fieldnames or []
    missing = [f for f in expected if f not in fields]
    if missing:
        raise ParseError(1, f"CSV header is missing column(s): {', '.join(missing)}")


def verdicts_to_csv(verdicts: Iterable[VideoVerdict]) -> str:
    """Render verdicts as `video_id,scheme,score,defaulted` CSV."""
    return _write_rows(
        VERDICT_FIELDS,
        (
            {
                "video_id": v.video_id,
                "scheme": AggregationScheme(v.scheme).value,
                "score": repr(float(v.score)),
                "defaulted": "true" if v.defaulted else "false",
            }
            for v in verdicts
        ),
    )


def read_verdicts_csv(source: TextSource) -> List[VideoVerdict]:
    """
    Parse verdict CSV produced by verdicts_to_csv.

    Raises:
        ParseError: On a missing column or an invalid value (line numbers count the header as 1)
    """
    reader = _reader(source)
    _require_header(reader, VERDICT_FIELDS)
    verdicts = []
    for line_no, row in enumerate(reader, start=2):
        try:
            defaulted = row["defaulted"].strip().lower()
            if defaulted not in ("true", "false"):
                raise ValueError(f"defaulted must be true or false, got {row['defaulted']!r}")
            verdicts.append(
                VideoVerdict(
                    video_id=row["video_id"],
                    scheme=AggregationScheme.parse(row["scheme"]),
                    score=float(row["score"]),
                    defaulted=defaulted == "true",
                )
            )
        except (TypeError, ValueError) as e:
            raise ParseError(line_no, str(e)) from e
    return verdicts


def read_labels_csv(source: TextSource) -> Dict[str, int]:
    """
    Parse a `video_id,label` sidecar (label 0 = real, 1 = fake).

    Raises:
        ParseError: On a bad label or a repeated video_id
    """
    reader = _reader(source)
    _require_header(reader, ["video_id", "label"])
    labels: Dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        video_id, raw = row["video_id"], (row["label"] or "").strip()
        if raw not in ("0", "1"):
            raise ParseError(line_no, f"label must be 0 or 1, got {raw!r}")
        if video_id in labels:
            raise ParseError(line_no, f"video '{video_id}' labeled twice")
        labels[video_id] = int(raw)
    return labels


def labels_to_csv(labels: Mapping[str, int]) -> str:
    return _write_rows(
        ["video_id", "label"],
        ({"video_id": vid, "label": labels[vid]} for vid in sorted(labels)),
    )


def metrics_to_json(metrics: Mapping[str, float]) -> str:
    return json.dumps(dict(metrics), indent=2) + "\n"


def component_report_csv(component_sets: Iterable[ComponentSet]) -> str:
    """One summary row per video: K, N_F and component counts."""
    return _write_rows(
        REPORT_FIELDS,
        (
            {
                "video_id": cs.video_id,
                "K": cs.n_records,
                "N_F": cs.n_f,
                "components": len(cs.components),
                "kept": len(cs.kept_components),
                "pruned": len(cs.pruned_components),
            }
            for cs in component_sets
        ),
    )


def face_predictions_csv(rows: Iterable[Tuple[str, int, int, float]]) -> str:
    """Per-component mean scores as `video_id,component,size,mean_score`."""
    return _write_rows(
        FACE_FIELDS,
        (
            {"video_id": vid, "component": index, "size": size, "mean_score": repr(float(mean))}
            for vid, index, size, mean in rows
        ),
    )


def sweep_to_csv(frame: pd.DataFrame) -> str:
    """Long-form sweep table, one row per (theta, size_frac) cell."""
    rows = frame[SWEEP_FIELDS].to_dict(orient="records")
    return _write_rows(
        SWEEP_FIELDS,
        (
            {
                "theta": repr(float(r["theta"])),
                "size_frac": r["size_frac"],
                "log_loss": repr(float(r["log_loss"])),
                "accuracy": repr(float(r["accuracy"])),
                "macro_f1": repr(float(r["macro_f1"])),
                "n_videos": int(r["n_videos"]),
            }
            for r in rows
        ),
    )


def sweep_grid(frame: pd.DataFrame, metric: str = "log_loss") -> pd.DataFrame:
    """Pivot a sweep into rows = theta, columns = size fraction, in sweep order."""
    grid = frame.pivot(index="theta", columns="size_frac", values=metric)
    return grid.reindex(index=pd.unique(frame["theta"]), columns=pd.unique(frame["size_frac"]))


def sweep_grid_text(frame: pd.DataFrame, metric: str = "log_loss") -> str:
    grid = sweep_grid(frame, metric)
    grid.index = [f"theta={t:g}" for t in grid.index]
    grid.columns = [f"N_F*{c}" for c in grid.columns]
    return grid.to_string(float_format=lambda v: f"{v:.4f}") + "\n"


def write_sweep_heatmap(frame: pd.DataFrame, path: Path, metric: str = "log_loss") -> Path:
    """Render the sweep grid as a standalone plotly heatmap HTML file."""
    grid = sweep_grid(frame, metric)
    figure = go.Figure(
        data=go.Heatmap(
            z=grid.values,
            x=[f"N_F*{c}" for c in grid.columns],
            y=[f"theta={t:g}" for t in grid.index],
            colorscale="Viridis",
            text=[[f"{v:.4f}" for v in row] for row in grid.values],
            texttemplate="%{text}",
            colorbar={"title": metric},
        )
    )
    figure.update_layout(
        title=f"{metric} by similarity threshold and component size threshold",
        xaxis_title="size threshold",
        yaxis_title="similarity threshold",
    )
    path = Path(path)
    figure.write_html(str(path), include_plotlyjs="cdn")
    return path
