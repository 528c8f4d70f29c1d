"""Crack-growth data model, CSV ingestion and a synthetic Paris-law generator.

A data file holds one or more crack-growth curves. Each row is one reading::

    series_id,R,R_ol,N,a_mm
    s1,0.1,CA,0,5.0
    s1,0.1,CA,1000,5.2

``R_ol`` is either a ratio above 1 or the token ``CA`` (constant amplitude).
Rows of a series must be contiguous and ordered by cycle count.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    DecreasingCrackLength,
    EmptyInput,
    InvalidCondition,
    InvalidPointCount,
    InvalidRecord,
    InvalidSeries,
    MalformedRow,
    MixedConditionInSeries,
    NonMonotonicCycles,
)

CSV_HEADER = ("series_id", "R", "R_ol", "N", "a_mm")
CA_TOKEN = "CA"

# Feature value used for the overload-ratio input under constant amplitude.
CA_OVERLOAD_FEATURE = 1.0


@dataclass(frozen=True)
class LoadCondition:
    """Stress ratio plus an optional single-overload ratio (``None`` means CA)."""

    stress_ratio: float
    overload_ratio: float | None = None

    def __post_init__(self):
        r = self.stress_ratio
        if not (isinstance(r, (int, float)) and math.isfinite(r) and 0.0 <= r < 1.0):
            raise InvalidCondition(f"stress ratio R must satisfy 0 <= R < 1, got {r!r}")
        ol = self.overload_ratio
        if ol is not None and not (math.isfinite(ol) and ol > 1.0):
            raise InvalidCondition(f"overload ratio must be > 1, got {ol!r}")
        object.__setattr__(self, "stress_ratio", float(r))
        if ol is not None:
            object.__setattr__(self, "overload_ratio", float(ol))

    @property
    def is_constant_amplitude(self) -> bool:
        return self.overload_ratio is None

    @property
    def label(self) -> str:
        """``CA`` or the overload ratio, as printed in reports."""
        if self.overload_ratio is None:
            return CA_TOKEN
        return f"{self.overload_ratio:.1f}"

    def sort_key(self) -> tuple[float, float]:
        return condition_features(self)


def condition_features(c: LoadCondition) -> tuple[float, float]:
    """Return the (R, R_ol) network features; CA maps to R_ol = 1.0."""
    if c.overload_ratio is None:
        return (c.stress_ratio, CA_OVERLOAD_FEATURE)
    return (c.stress_ratio, c.overload_ratio)


def parse_overload(token: str) -> float | None:
    """Parse an R_ol field: ``CA`` gives ``None``, otherwise a float."""
    token = token.strip()
    if token == CA_TOKEN:
        return None
    return float(token)


def condition_from_features(r: float, rol: float | str) -> LoadCondition:
    """Build a condition from user-facing values; ``rol`` of ``CA`` or 1.0 is CA."""
    if isinstance(rol, str):
        rol = parse_overload(rol)
    if rol is not None and rol == CA_OVERLOAD_FEATURE:
        rol = None
    return LoadCondition(r, rol)


@dataclass(frozen=True)
class CrackGrowthRecord:
    cycles: float
    condition: LoadCondition
    crack_length: float

    def __post_init__(self):
        if not (math.isfinite(self.cycles) and self.cycles >= 0):
            raise InvalidRecord(f"cycles must be finite and >= 0, got {self.cycles!r}")
        if not (math.isfinite(self.crack_length) and self.crack_length > 0):
            raise InvalidRecord(
                f"crack length must be finite and > 0, got {self.crack_length!r}"
            )


@dataclass(frozen=True)
class CrackGrowthSeries:
    """One crack-growth curve under a single loading condition."""

    id: str
    condition: LoadCondition
    records: tuple[CrackGrowthRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        recs = self.records
        if len(recs) < 2:
            raise InvalidSeries(f"series {self.id!r} needs at least 2 records, got {len(recs)}")
        for i, rec in enumerate(recs):
            if rec.condition != self.condition:
                raise InvalidSeries(f"series {self.id!r}: record {i} has a different condition")
            if i == 0:
                continue
            prev = recs[i - 1]
            if not rec.cycles > prev.cycles:
                raise InvalidSeries(f"series {self.id!r}: cycles not increasing at record {i}")
            if rec.crack_length < prev.crack_length:
                raise InvalidSeries(f"series {self.id!r}: crack length decreases at record {i}")

    @property
    def final_cycles(self) -> float:
        return self.records[-1].cycles

    def cycles(self) -> np.ndarray:
        return np.array([r.cycles for r in self.records])

    def crack_lengths(self) -> np.ndarray:
        return np.array([r.crack_length for r in self.records])

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class Dataset:
    series: tuple[CrackGrowthSeries, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        ids = [s.id for s in self.series]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise InvalidSeries(f"duplicate series ids: {dup}")

    def conditions(self) -> list[LoadCondition]:
        """Distinct conditions, sorted by (R, R_ol feature)."""
        return sorted({s.condition for s in self.series}, key=LoadCondition.sort_key)

    @property
    def n_records(self) -> int:
        return sum(len(s) for s in self.series)


# --- CSV ---------------------------------------------------------------------


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(f"column {column}: {text!r} is not a number", line) from None
    if not math.isfinite(value):
        raise MalformedRow(f"column {column}: {text!r} is not finite", line)
    return value


def parse_csv(source: TextIO | str) -> Dataset:
    """Parse crack-growth CSV text into a validated :class:`Dataset`.

    ``source`` is a text stream or a string holding the whole file. Errors
    carry the 1-based line number of the offending row.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)

    header = None
    for row in reader:
        if row:
            header = row
            break
    if header is None:
        raise EmptyInput("input is empty", 1)
    header_line = reader.line_num
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise MalformedRow(f"expected header {','.join(CSV_HEADER)!r}", header_line)

    groups: list[tuple[str, LoadCondition, list[CrackGrowthRecord], list[int]]] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise MalformedRow(f"expected {len(CSV_HEADER)} columns, got {len(row)}", line)
        sid = row[0].strip()
        if not sid:
            raise MalformedRow("empty series_id", line)
        r = _parse_float(row[1].strip(), "R", line)
        rol_text = row[2].strip()
        rol = None if rol_text == CA_TOKEN else _parse_float(rol_text, "R_ol", line)
        cycles = _parse_float(row[3].strip(), "N", line)
        a = _parse_float(row[4].strip(), "a_mm", line)
        try:
            cond = LoadCondition(r, rol)
            rec = CrackGrowthRecord(cycles, cond, a)
        except (InvalidCondition, InvalidRecord) as exc:
            raise MalformedRow(str(exc), line) from None

        if groups and groups[-1][0] == sid:
            _, series_cond, recs, lines = groups[-1]
            if cond != series_cond:
                raise MixedConditionInSeries(
                    f"series {sid!r} mixes conditions {series_cond} and {cond}", line
                )
            prev = recs[-1]
            if not cycles > prev.cycles:
                raise NonMonotonicCycles(
                    f"series {sid!r}: N={cycles!r} does not exceed previous N={prev.cycles!r}",
                    line,
                )
            if a < prev.crack_length:
                raise DecreasingCrackLength(
                    f"series {sid!r}: a={a!r} is below previous a={prev.crack_length!r}",
                    line,
                )
            recs.append(rec)
            lines.append(line)
        else:
            if sid in seen:
                raise MalformedRow(f"rows of series {sid!r} are not contiguous", line)
            seen.add(sid)
            groups.append((sid, cond, [rec], [line]))

    if not groups:
        raise EmptyInput("no data rows after header", header_line + 1)

    series = []
    for sid, cond, recs, lines in groups:
        if len(recs) < 2:
            raise MalformedRow(f"series {sid!r} has a single record; at least 2 required", lines[0])
        series.append(CrackGrowthSeries(sid, cond, tuple(recs)))
    return Dataset(tuple(series))


def read_csv(path: str | Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh)


def format_number(value: float) -> str:
    """Shortest decimal text that round-trips to the same float."""
    return repr(float(value))


def serialize_csv(d: Dataset, sink: TextIO | None = None) -> str:
    """Write ``d`` in the ingestion schema; returns the text as well."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in d.series:
        rol = CA_TOKEN if s.condition.overload_ratio is None else format_number(
            s.condition.overload_ratio
        )
        r = format_number(s.condition.stress_ratio)
        for rec in s.records:
            writer.writerow(
                (s.id, r, rol, format_number(rec.cycles), format_number(rec.crack_length))
            )
    text = buf.getvalue()
    if sink is not None:
        sink.write(text)
    return text


def write_csv(d: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        serialize_csv(d, fh)


# --- synthetic Paris-law curves ----------------------------------------------

PARIS_C = 1e-8
PARIS_M = 3.0
# Nominal stress range; crack length in mm, so Delta K is in MPa*sqrt(mm).
DELTA_SIGMA = 5.0
INITIAL_CRACK = 5.0
# CA curves are run until they reach this length; overload curves share the cycle grid.
FINAL_CRACK_CA = 25.0
OVERLOAD_AT = 0.5
RETARDATION_WINDOW = 0.15
# Relative half-width of the uniform scatter applied to every growth increment.
INCREMENT_NOISE = 0.05

STANDARD_CONDITIONS: tuple[LoadCondition, ...] = tuple(
    LoadCondition(r, ol) for r in (0.1, 0.3, 0.5, 0.7) for ol in (None, 1.5, 2.0)
)


def _growth_coefficient(stress_ratio: float) -> float:
    # da/dN = k * a**(m/2)
    return PARIS_C * (DELTA_SIGMA * (1.0 - stress_ratio) * math.sqrt(math.pi)) ** PARIS_M


def _advance(a: float, dn: float, rate: float) -> float:
    """Exact solution of da/dN = rate * a**(m/2) over ``dn`` cycles."""
    if dn <= 0:
        return a
    half_m = PARIS_M / 2.0
    if half_m == 1.0:
        return a * math.exp(rate * dn)
    p = 1.0 - half_m
    base = a**p + p * rate * dn
    if p < 0 and base <= 0:
        raise OverflowError("crack growth diverged within a step")
    return base ** (1.0 / p)


def ca_life(stress_ratio: float, a0: float | None = None, a_end: float | None = None) -> float:
    """Cycles for a noise-free CA curve to grow from ``a0`` to ``a_end``."""
    a0 = INITIAL_CRACK if a0 is None else a0
    a_end = FINAL_CRACK_CA if a_end is None else a_end
    k = _growth_coefficient(stress_ratio)
    half_m = PARIS_M / 2.0
    if half_m == 1.0:
        return math.log(a_end / a0) / k
    p = 1.0 - half_m
    return (a_end**p - a0**p) / (p * k)


def _series_id(index: int, c: LoadCondition) -> str:
    tag = "CA" if c.overload_ratio is None else f"OL{c.overload_ratio:g}"
    return f"s{index:02d}_R{c.stress_ratio:g}_{tag}"


def generate_synthetic(
    conditions: Sequence[LoadCondition] = STANDARD_CONDITIONS,
    points_per_series: int = 150,
    seed: int = 42,
) -> Dataset:
    """Integrate Paris-law curves, one series per condition.

    The cycle grid of each series runs from 0 to the CA life of its stress
    ratio. Overload series apply a single overload at mid-life, after which
    growth is slowed by ``1 / ratio**2`` for a window of
    ``RETARDATION_WINDOW`` times the series life. Every increment is scaled by
    an independent factor in ``1 +/- INCREMENT_NOISE``, so curves stay strictly
    increasing.
    """
    if isinstance(points_per_series, bool) or not isinstance(points_per_series, (int, np.integer)):
        raise InvalidPointCount(f"points_per_series must be an integer, got {points_per_series!r}")
    if points_per_series < 10:
        raise InvalidPointCount(f"points_per_series must be >= 10, got {points_per_series}")

    rng = np.random.default_rng(seed)
    series = []
    for index, cond in enumerate(conditions):
        life = float(round(ca_life(cond.stress_ratio)))
        grid = np.round(np.linspace(0.0, life, points_per_series))
        rate = _growth_coefficient(cond.stress_ratio)
        noise = rng.uniform(-INCREMENT_NOISE, INCREMENT_NOISE, size=points_per_series - 1)

        if cond.overload_ratio is None:
            slow_start = slow_end = math.inf
            slow_factor = 1.0
        else:
            slow_start = OVERLOAD_AT * life
            slow_end = slow_start + RETARDATION_WINDOW * life
            slow_factor = 1.0 / cond.overload_ratio**2

        a = INITIAL_CRACK
        lengths = [a]
        for i in range(points_per_series - 1):
            n0, n1 = grid[i], grid[i + 1]
            # split the step at the retardation window edges
            edges = sorted({n0, n1, *(b for b in (slow_start, slow_end) if n0 < b < n1)})
            nxt = a
            for lo, hi in zip(edges[:-1], edges[1:]):
                mid = 0.5 * (lo + hi)
                factor = slow_factor if slow_start <= mid < slow_end else 1.0
                nxt = _advance(nxt, hi - lo, rate * factor)
            a = a + (nxt - a) * (1.0 + noise[i])
            lengths.append(a)

        sid = _series_id(index, cond)
        recs = tuple(CrackGrowthRecord(float(n), cond, float(x)) for n, x in zip(grid, lengths))
        series.append(CrackGrowthSeries(sid, cond, recs))

    metadata = {
        "generator": "paris",
        "C": PARIS_C,
        "m": PARIS_M,
        "delta_sigma": DELTA_SIGMA,
        "a0_mm": INITIAL_CRACK,
        "a_final_ca_mm": FINAL_CRACK_CA,
        "overload_at_fraction": OVERLOAD_AT,
        "retardation_window_fraction": RETARDATION_WINDOW,
        "increment_noise": INCREMENT_NOISE,
        "points_per_series": int(points_per_series),
        "seed": seed,
    }
    return Dataset(tuple(series), metadata)


def iter_records(d: Dataset) -> Iterable[tuple[str, CrackGrowthRecord]]:
    for s in d.series:
        for rec in s.records:
            yield s.id, rec
