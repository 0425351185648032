"""Series ingestion, result serialization, and the shared randomness contract.

Input series are three-column CSV files (``year,yield,return``) holding one
observation per row. Filter output goes to a wider CSV whose truth columns
stay empty when no ground truth exists. All floats are written in shortest
round-trip form, so reading a file back reproduces the values exactly.

Randomness is organized as named substreams derived from one 64-bit seed.
Each (role, record) pair gets an independent generator, which keeps the
simulator, the sigma-point noise injection, and the particle flow
reproducible in isolation: consuming or skipping one role never shifts the
draws of another.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataError",
    "SeriesRow",
    "SeriesFrame",
    "ResultRow",
    "ResultFrame",
    "RESULT_COLUMNS",
    "load_series",
    "write_series",
    "write_results",
    "load_results",
    "substream",
]

SERIES_COLUMNS = ("year", "yield", "return")
RESULT_COLUMNS = (
    "step",
    "filter",
    "obs_yield",
    "obs_return",
    "est_yield",
    "est_return",
    "true_yield",
    "true_return",
)

# Role identifiers for substream(). The numbers are part of the on-disk
# reproducibility contract: changing them changes every seeded output.
_STREAM_ROLES = {
    "sim_state": 0,
    "sim_obs": 1,
    "ukf_inject": 2,
    "pff_init": 3,
    "pff_propagate": 4,
    "pff_diffusion": 5,
}


class DataError(Exception):
    """A data file violated the expected schema."""


def substream(seed: int, role: str, record: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, role, record) triple."""
    try:
        role_id = _STREAM_ROLES[role]
    except KeyError:
        raise ValueError(f"unknown stream role {role!r}") from None
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(role_id, int(record)))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class SeriesRow:
    year: int
    dividend_yield: float
    real_return: float


@dataclass(frozen=True)
class SeriesFrame:
    """Observed series ordered by strictly increasing year."""

    rows: tuple[SeriesRow, ...]

    def __post_init__(self):
        for prev, cur in zip(self.rows, self.rows[1:]):
            if cur.year <= prev.year:
                raise DataError(
                    f"years must be strictly increasing, got {cur.year} after {prev.year}"
                )
        for row in self.rows:
            if not (math.isfinite(row.dividend_yield) and math.isfinite(row.real_return)):
                raise DataError(f"non-finite value in year {row.year}")

    def __len__(self) -> int:
        return len(self.rows)

    def years(self) -> list[int]:
        return [row.year for row in self.rows]

    def values(self) -> np.ndarray:
        """(n, 2) array of (yield, return) observations."""
        return np.array([[r.dividend_yield, r.real_return] for r in self.rows], dtype=float)


def write_series(frame: SeriesFrame, path) -> None:
    """Write a SeriesFrame as CSV with shortest round-trip float formatting."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        for row in frame.rows:
            writer.writerow(
                [row.year, _format_cell(row.dividend_yield), _format_cell(row.real_return)]
            )


def load_series(path) -> SeriesFrame:
    """Read a ``year,yield,return`` CSV, reporting offending line numbers."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if [cell.strip() for cell in header] != list(SERIES_COLUMNS):
            raise DataError(
                f"{path}:1: expected header {','.join(SERIES_COLUMNS)!r}, "
                f"got {','.join(header)!r}"
            )
        rows = []
        last_year = None
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                raise DataError(f"{path}:{lineno}: blank line")
            if len(record) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(record)}")
            try:
                year = int(record[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: year {record[0]!r} is not an integer") from None
            try:
                dy = float(record[1])
                rr = float(record[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if not (math.isfinite(dy) and math.isfinite(rr)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if last_year is not None and year <= last_year:
                raise DataError(
                    f"{path}:{lineno}: year {year} does not increase past {last_year}"
                )
            last_year = year
            rows.append(SeriesRow(year, dy, rr))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return SeriesFrame(tuple(rows))


@dataclass(frozen=True)
class ResultRow:
    step: int
    filter_tag: str
    obs_yield: float
    obs_return: float
    est_yield: float
    est_return: float
    true_yield: float | None = None
    true_return: float | None = None


@dataclass(frozen=True)
class ResultFrame:
    """Per-step filter output, one row per (step, filter) pair."""

    rows: tuple[ResultRow, ...]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            key = (row.step, row.filter_tag)
            if key in seen:
                raise DataError(f"duplicate result row for step {row.step}, filter {row.filter_tag!r}")
            seen.add(key)
            for value in (row.obs_yield, row.obs_return, row.est_yield, row.est_return):
                if not math.isfinite(value):
                    raise DataError(f"non-finite value at step {row.step}, filter {row.filter_tag!r}")

    def __len__(self) -> int:
        return len(self.rows)

    def filter_tags(self) -> list[str]:
        tags = []
        for row in self.rows:
            if row.filter_tag not in tags:
                tags.append(row.filter_tag)
        return tags

    def rows_for(self, tag: str) -> list[ResultRow]:
        return [row for row in self.rows if row.filter_tag == tag]


def _format_cell(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_results(frame: ResultFrame, path) -> None:
    """Write a ResultFrame as CSV with shortest round-trip float formatting."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in frame.rows:
            writer.writerow(
                [
                    row.step,
                    row.filter_tag,
                    _format_cell(row.obs_yield),
                    _format_cell(row.obs_return),
                    _format_cell(row.est_yield),
                    _format_cell(row.est_return),
                    _format_cell(row.true_yield),
                    _format_cell(row.true_return),
                ]
            )


def load_results(path) -> ResultFrame:
    """Read back a CSV produced by write_results."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if [cell.strip() for cell in header] != list(RESULT_COLUMNS):
            raise DataError(f"{path}:1: unexpected header {','.join(header)!r}")
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(RESULT_COLUMNS):
                raise DataError(
                    f"{path}:{lineno}: expected {len(RESULT_COLUMNS)} columns, got {len(record)}"
                )
            try:
                rows.append(
                    ResultRow(
                        step=int(record[0]),
                        filter_tag=record[1],
                        obs_yield=float(record[2]),
                        obs_return=float(record[3]),
                        est_yield=float(record[4]),
                        est_return=float(record[5]),
                        true_yield=float(record[6]) if record[6] != "" else None,
                        true_return=float(record[7]) if record[7] != "" else None,
                    )
                )
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row") from None
    return ResultFrame(tuple(rows))
