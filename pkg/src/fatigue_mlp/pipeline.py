"""Chronological development/extrapolation cut, random partition, scaling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .dataset import (
    CA_TOKEN,
    CrackGrowthRecord,
    Dataset,
    LoadCondition,
    condition_features,
    format_number,
)
from .errors import (
    DegenerateDimension,
    DegenerateSeries,
    EmptyDevelopmentSet,
    InvalidSplitSpec,
)

DIMENSIONS = ("cycles", "stress_ratio", "overload_ratio", "crack_length")
MANIFEST_HEADER = ("subset", "series_id", "R", "R_ol", "N", "a_mm")
SUBSETS = ("train", "validation", "dev_test", "extrapolation")


@dataclass(frozen=True)
class Sample:
    """A single (features, target) pair tied back to its series."""

    series_id: str
    condition: LoadCondition
    cycles: float
    crack_length: float

    @property
    def features(self) -> tuple[float, float, float]:
        r, rol = condition_features(self.condition)
        return (self.cycles, r, rol)

    @property
    def target(self) -> float:
        return self.crack_length

    @classmethod
    def from_record(cls, series_id: str, rec: CrackGrowthRecord) -> "Sample":
        return cls(series_id, rec.condition, rec.cycles, rec.crack_length)


def feature_matrix(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.features for s in samples], dtype=np.float64).reshape(-1, 3)


def target_vector(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.crack_length for s in samples], dtype=np.float64)


@dataclass(frozen=True)
class SplitSpec:
    dev_fraction: float = 0.8
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("dev_fraction", "train_fraction", "val_fraction", "test_fraction"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise InvalidSplitSpec(f"{name} must be a finite number, got {v!r}")
        if not 0.0 < self.dev_fraction < 1.0:
            raise InvalidSplitSpec(f"dev_fraction must lie in (0, 1), got {self.dev_fraction!r}")
        for name in ("train_fraction", "val_fraction", "test_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSplitSpec(f"{name} must lie in [0, 1], got {getattr(self, name)!r}")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-12:
            raise InvalidSplitSpec(
                "train_fraction + val_fraction + test_fraction must equal 1, "
                f"got {total!r}"
            )

    def sizes(self, n: int) -> tuple[int, int, int]:
        """(n_train, n_val, n_test); validation and test round down."""
        n_val = math.floor(self.val_fraction * n)
        n_test = math.floor(self.test_fraction * n)
        return n - n_val - n_test, n_val, n_test


@dataclass(frozen=True)
class DataSplits:
    train: tuple[Sample, ...]
    validation: tuple[Sample, ...]
    dev_test: tuple[Sample, ...]
    extrapolation: tuple[Sample, ...] = ()
    # per-series development cutoff in cycles
    cutoffs: dict = field(default_factory=dict, compare=False)

    def subset(self, name: str) -> tuple[Sample, ...]:
        if name not in SUBSETS:
            raise KeyError(name)
        return getattr(self, name)

    @property
    def development(self) -> tuple[Sample, ...]:
        return self.train + self.validation + self.dev_test


def chronological_split(d: Dataset, dev_fraction: float = 0.8) -> tuple[list[Sample], list[Sample]]:
    """Cut every series at ``dev_fraction`` of its final cycle count.

    Records with ``cycles <= cutoff`` form the development pool; later ones
    are held out for extrapolation. Order within each list follows the file.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise InvalidSplitSpec(f"dev_fraction must lie in (0, 1), got {dev_fraction!r}")
    development: list[Sample] = []
    extrapolation: list[Sample] = []
    for s in d.series:
        if len(s.records) < 2:
            raise DegenerateSeries(f"series {s.id!r} has fewer than 2 records")
        cutoff = dev_fraction * s.final_cycles
        dev = [Sample.from_record(s.id, r) for r in s.records if r.cycles <= cutoff]
        if not dev:
            raise DegenerateSeries(
                f"series {s.id!r}: no records at or below cutoff {cutoff!r} cycles"
            )
        development.extend(dev)
        extrapolation.extend(Sample.from_record(s.id, r) for r in s.records if r.cycles > cutoff)
    return development, extrapolation


def series_cutoffs(d: Dataset, dev_fraction: float) -> dict[str, float]:
    return {s.id: dev_fraction * s.final_cycles for s in d.series}


def random_partition(
    development: Sequence[Sample],
    spec: SplitSpec,
    extrapolation: Sequence[Sample] = (),
) -> DataSplits:
    """Shuffle the development pool with ``spec.seed`` and cut it into three parts."""
    n = len(development)
    if n == 0:
        raise EmptyDevelopmentSet("development pool is empty")
    n_train, n_val, n_test = spec.sizes(n)
    order = np.random.default_rng(spec.seed).permutation(n)
    pool = list(development)
    train = tuple(pool[i] for i in order[:n_train])
    val = tuple(pool[i] for i in order[n_train : n_train + n_val])
    test = tuple(pool[i] for i in order[n_train + n_val :])
    return DataSplits(train, val, test, tuple(extrapolation))


def make_splits(d: Dataset, spec: SplitSpec) -> DataSplits:
    development, extrapolation = chronological_split(d, spec.dev_fraction)
    splits = random_partition(development, spec, extrapolation)
    return DataSplits(
        splits.train,
        splits.validation,
        splits.dev_test,
        splits.extrapolation,
        series_cutoffs(d, spec.dev_fraction),
    )


# --- min-max scaling -----------------------------------------------------------


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension extrema for (N, R, R_ol, a), mapped affinely onto [-1, 1]."""

    minimum: tuple[float, float, float, float]
    maximum: tuple[float, float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.minimum)
        hi = tuple(float(v) for v in self.maximum)
        if len(lo) != 4 or len(hi) != 4:
            raise ValueError("normalizer needs 4 minima and 4 maxima")
        for name, a, b in zip(DIMENSIONS, lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"non-finite bound for {name}")
            if not b > a:
                raise DegenerateDimension(name)
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    @property
    def _lo(self) -> np.ndarray:
        return np.asarray(self.minimum)

    @property
    def _span(self) -> np.ndarray:
        return np.asarray(self.maximum) - np.asarray(self.minimum)

    def scale_features(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return 2.0 * (x - self._lo[:3]) / self._span[:3] - 1.0

    def scale_target(self, y):
        y = np.asarray(y, dtype=np.float64)
        return 2.0 * (y - self.minimum[3]) / (self.maximum[3] - self.minimum[3]) - 1.0

    def unscale_target(self, y):
        y = np.asarray(y, dtype=np.float64)
        return (y + 1.0) * 0.5 * (self.maximum[3] - self.minimum[3]) + self.minimum[3]


def fit_normalizer(train: Sequence[Sample]) -> Normalizer:
    """Record per-dimension minimum and maximum over the training samples only."""
    if len(train) == 0:
        raise EmptyDevelopmentSet("cannot fit a normalizer on an empty training set")
    data = np.column_stack([feature_matrix(train), target_vector(train)])
    lo, hi = data.min(axis=0), data.max(axis=0)
    for name, a, b in zip(DIMENSIONS, lo, hi):
        if a == b:
            raise DegenerateDimension(name)
    return Normalizer(tuple(lo.tolist()), tuple(hi.tolist()))


def normalize(x: Sample, nz: Normalizer) -> tuple[np.ndarray, float]:
    """Scaled (features, target) for one sample."""
    return nz.scale_features(np.asarray(x.features)), float(nz.scale_target(x.crack_length))


def denormalize_target(y: float, nz: Normalizer) -> float:
    return float(nz.unscale_target(y))


# --- split manifest ------------------------------------------------------------


def manifest_rows(splits: DataSplits) -> list[tuple[str, ...]]:
    rows = []
    for name in SUBSETS:
        for s in splits.subset(name):
            rol = CA_TOKEN if s.condition.overload_ratio is None else format_number(
                s.condition.overload_ratio
            )
            rows.append(
                (
                    name,
                    s.series_id,
                    format_number(s.condition.stress_ratio),
                    rol,
                    format_number(s.cycles),
                    format_number(s.crack_length),
                )
            )
    return rows


def write_manifest(splits: DataSplits, sink: TextIO) -> None:
    """Audit CSV listing every sample with the subset it landed in."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    writer.writerows(manifest_rows(splits))


def manifest_text(splits: DataSplits) -> str:
    buf = io.StringIO()
    write_manifest(splits, buf)
    return buf.getvalue()
