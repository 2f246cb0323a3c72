"""CSV ingestion, normalization and splitting of wind-speed/power records."""

import csv
import logging
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..utils.errors import DataFileNotFound, DegenerateAxis, ParseError, SchemaMismatch
from .models import Dataset, NormStats, RawRecord

logger = logging.getLogger(__name__)

DEFAULT_SCHEMA = {
    "turbine_id": "turbine_id",
    "timestamp": "timestamp",
    "wind_speed": "wind_speed",
    "power": "power",
}
REQUIRED_FIELDS = ("turbine_id", "wind_speed", "power")


def _parse_timestamp(value: str, row: int) -> Optional[datetime]:
    value = value.strip()
    if not value:
        return None
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(value)
    except ValueError as exc:
        raise ParseError(f"bad timestamp '{value}'", row) from exc


def load_csv(path: Union[str, Path], schema: Optional[dict] = None) -> list[RawRecord]:
    """
    Read SCADA records from a CSV file with a header row.

    Rows whose wind speed is unparsable, non-finite or negative are skipped
    with a warning. A bad power value or timestamp is an error.

    Args:
        path: CSV file path
        schema: Mapping from field name (turbine_id, timestamp, wind_speed,
            power) to column name; timestamp may be absent from the file

    Returns:
        Parsed records in file order

    Raises:
        DataFileNotFound: the file does not exist
        SchemaMismatch: a required column is missing
        ParseError: a row has an unusable power value or timestamp
    """
    path = Path(path)
    columns = {**DEFAULT_SCHEMA, **(schema or {})}
    if not path.exists():
        raise DataFileNotFound(f"data file not found: {path}")

    records: list[RawRecord] = []
    rejected = 0
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [columns[name] for name in REQUIRED_FIELDS if columns[name] not in header]
        if missing:
            raise SchemaMismatch(f"missing columns {missing} in {path}")
        has_timestamp = columns["timestamp"] in header

        # Row numbers count the header as row 1
        for row_number, row in enumerate(reader, start=2):
            try:
                wind_speed = float(row[columns["wind_speed"]])
            except (TypeError, ValueError):
                wind_speed = float("nan")
            if not (np.isfinite(wind_speed) and wind_speed >= 0):
                rejected += 1
                logger.warning(
                    "row %d: rejected wind speed %r", row_number, row[columns["wind_speed"]]
                )
                continue

            try:
                power = float(row[columns["power"]])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad power value {row[columns['power']]!r}", row_number) from exc
            if not np.isfinite(power):
                raise ParseError(f"non-finite power value {power}", row_number)

            timestamp = (
                _parse_timestamp(row[columns["timestamp"]] or "", row_number)
                if has_timestamp
                else None
            )
            records.append(
                RawRecord(
                    turbine_id=row[columns["turbine_id"]],
                    wind_speed=wind_speed,
                    power=power,
                    timestamp=timestamp,
                )
            )

    if rejected:
        logger.warning("%d row(s) rejected from %s", rejected, path)
    logger.info("Loaded %d records from %s", len(records), path)
    return records


def normalize(records: list[RawRecord]) -> Dataset:
    """Z-score wind speed and power; the stats are kept for the way back."""
    if len(records) < 2:
        raise DegenerateAxis(f"normalization needs at least 2 records, got {len(records)}")
    wind = np.array([r.wind_speed for r in records])
    power = np.array([r.power for r in records])
    stats = NormStats(
        x_mean=float(wind.mean()),
        x_std=float(wind.std()),
        y_mean=float(power.mean()),
        y_std=float(power.std()),
    )
    if stats.x_std == 0:
        raise DegenerateAxis("wind speed has zero spread")
    if stats.y_std == 0:
        raise DegenerateAxis("power has zero spread")
    return apply_normalization(records, stats)


def apply_normalization(records: list[RawRecord], stats: NormStats) -> Dataset:
    """Map records into model coordinates with existing stats."""
    wind = np.array([r.wind_speed for r in records], dtype=float)
    power = np.array([r.power for r in records], dtype=float)
    return Dataset(
        x=(wind - stats.x_mean) / stats.x_std,
        y=(power - stats.y_mean) / stats.y_std,
        norm_stats=stats,
        turbine_ids=[r.turbine_id for r in records],
    )


def denormalize(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Wind speed and power back in physical units."""
    return ds.to_physical()


def load_dataset(path: Union[str, Path], schema: Optional[dict] = None) -> Dataset:
    """Load a CSV file and normalize it."""
    return normalize(load_csv(path, schema))


def split(ds: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """
    Seeded random train/test partition.

    The training set gets floor(train_fraction * N) points.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(ds))
    n_train = int(np.floor(train_fraction * len(ds)))
    return ds.subset(np.sort(order[:n_train])), ds.subset(np.sort(order[n_train:]))


def write_csv(ds: Dataset, path: Union[str, Path], include_labels: bool = True) -> Path:
    """
    Write a dataset in physical units using the default schema.

    Ground-truth labels, when present, go in an extra ``component`` column.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wind, power = ds.to_physical()
    with_labels = include_labels and ds.labels is not None

    fieldnames = ["turbine_id", "timestamp", "wind_speed", "power"]
    if with_labels:
        fieldnames.append("component")

    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for i in range(len(ds)):
            row = {
                "turbine_id": ds.turbine_ids[i] if ds.turbine_ids else "T1",
                "timestamp": "",
                "wind_speed": repr(float(wind[i])),
                "power": repr(float(power[i])),
            }
            if with_labels:
                row["component"] = int(ds.labels[i])
            writer.writerow(row)

    return path
