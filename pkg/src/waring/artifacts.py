"""CSV/JSON artifacts: count fields, point patterns, tables and the run report."""

import csv
import json
import logging
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from waring.errors import DomainError
from waring.geometry import CountField, FieldMeta, PointPattern, QuadratGrid
from waring.marked import MarkedCountField
from waring.utils import SCHEMA_VERSION, format_float

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
COORDINATE_NAMES = ("x", "y", "z")


def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _cell(value: Any) -> str:
    if isinstance(value, float | np.floating):
        return format_float(value)
    return str(value)


class ArtifactWriter:
    """Writes every artifact of one run under a single output directory."""

    def __init__(self, output_dir: Path):
        """
        Initialize the writer.

        Args:
            output_dir: Directory for artifacts; created on first write.
        """
        self._output_dir = output_dir
        self._outputs: list[str] = []

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    @property
    def outputs(self) -> list[str]:
        """File names written so far, in write order."""
        return list(self._outputs)

    def _path(self, name: str) -> Path:
        self._output_dir.mkdir(parents=True, exist_ok=True)
        self._outputs.append(name)
        return self._output_dir / name

    def write_json(self, name: str, data: dict[str, Any]) -> Path:
        path = self._path(name)
        payload = {"schema_version": SCHEMA_VERSION, **_jsonable(data)}
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(payload, indent=2, sort_keys=True))
            f.write("\n")
        logger.debug("Wrote %s", path)
        return path

    def write_table(
        self,
        name: str,
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
    ) -> Path:
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        logger.debug("Wrote %s", path)
        return path

    def write_count_field(self, stem: str, field: CountField) -> tuple[Path, Path]:
        """``<stem>.csv`` with one row per cell and the ``<stem>.json`` sidecar."""
        grid = field.grid
        header = ["cell_index", *[f"axis{i}" for i in range(grid.dim)], "count"]
        rows = (
            [i, *np.unravel_index(i, grid.shape), int(c)] for i, c in enumerate(field.flat)
        )
        csv_path = self.write_table(f"{stem}.csv", header, rows)
        json_path = self.write_json(f"{stem}.json", _sidecar("count_field", grid, field.meta))
        return csv_path, json_path

    def write_marked_field(self, stem: str, field: MarkedCountField) -> tuple[Path, Path]:
        grid = field.grid
        header = ["cell_index", *[f"axis{i}" for i in range(grid.dim)], "mark", "count"]
        cells = field.counts.reshape(grid.num_cells, field.num_marks)

        def rows():
            for i in range(grid.num_cells):
                index = np.unravel_index(i, grid.shape)
                for mark in range(field.num_marks):
                    yield [i, *index, mark + 1, int(cells[i, mark])]

        csv_path = self.write_table(f"{stem}.csv", header, rows())
        sidecar = _sidecar("marked_count_field", grid, field.meta)
        sidecar["num_marks"] = field.num_marks
        json_path = self.write_json(f"{stem}.json", sidecar)
        return csv_path, json_path

    def write_point_pattern(self, stem: str, pattern: PointPattern) -> Path:
        header = list(COORDINATE_NAMES[: pattern.window.dim])
        if pattern.marks is None:
            rows: Iterable[list[Any]] = (list(map(float, p)) for p in pattern.points)
        else:
            header.append("mark")
            rows = (
                [*map(float, p), int(m)] for p, m in zip(pattern.points, pattern.marks)
            )
        return self.write_table(f"{stem}.csv", header, rows)

    def write_report(
        self,
        config: dict[str, Any],
        status: str,
        error: dict[str, str] | None = None,
    ) -> Path:
        """report.json: the run's config, outcome and the files it produced."""
        outputs = list(self._outputs)
        return self.write_json(
            REPORT_FILE,
            {"config": config, "status": status, "outputs": outputs, "error": error},
        )


def _sidecar(kind: str, grid: QuadratGrid, meta: FieldMeta) -> dict[str, Any]:
    return {"kind": kind, "grid": grid.to_dict(), **meta.to_dict()}


def read_count_field(csv_path: Path) -> CountField:
    """Load a CountField from its CSV and the sidecar JSON next to it."""
    sidecar_path = csv_path.with_suffix(".json")
    if not sidecar_path.exists():
        raise FileNotFoundError(f"Sidecar not found: {sidecar_path}")
    with open(sidecar_path, encoding="utf-8") as f:
        data = json.load(f)
    if data.get("kind") != "count_field":
        raise DomainError(f"{sidecar_path} does not describe a count field")
    grid = QuadratGrid.from_dict(data["grid"])
    counts = np.zeros(grid.num_cells, dtype=np.int64)
    with open(csv_path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            counts[int(row["cell_index"])] = int(row["count"])
    return CountField(grid=grid, counts=counts.reshape(grid.shape), meta=FieldMeta.from_dict(data))


def read_count_column(csv_path: Path) -> np.ndarray:
    """The ``count`` column of a CSV, as fit input."""
    if not csv_path.exists():
        raise FileNotFoundError(f"Input not found: {csv_path}")
    with open(csv_path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "count" not in reader.fieldnames:
            raise DomainError(f"{csv_path} has no 'count' column")
        try:
            values = [int(row["count"]) for row in reader]
        except ValueError as e:
            raise DomainError(f"{csv_path} contains a non-integer count") from e
    return np.asarray(values, dtype=np.int64)
