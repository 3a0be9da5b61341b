"""Domain types, CSV ingestion, rule-based labeling, and dataset splitting.

Measurements cover the four monitored parameters: dissolved oxygen (DO),
potential of hydrogen (pH), biochemical oxygen demand (BOD), and total
suspended solids (TSS). Pollution levels form a fixed four-color scale
ordered by severity: green < yellow < orange < red.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date as Date, timedelta
from enum import IntEnum
from typing import IO, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyDataset,
    InvalidDistribution,
    MalformedValue,
    MissingColumn,
    MissingDate,
    UnknownColumn,
    UnknownLabel,
    UnlabeledData,
)

#: Feature order used everywhere a sample is treated as a vector.
FEATURE_NAMES = ("do_mg_l", "ph", "bod_mg_l", "tss_mg_l")

_DATE_COLUMN = "date"
_LABEL_COLUMN = "pollution_level"
_ALL_COLUMNS = (_DATE_COLUMN, *FEATURE_NAMES, _LABEL_COLUMN)


class PollutionLevel(IntEnum):
    """Four-level river condition scale; the integer value is the severity."""

    GREEN = 0
    YELLOW = 1
    ORANGE = 2
    RED = 3

    @property
    def label(self) -> str:
        """Lowercase wire name ("green", "yellow", "orange", "red")."""
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "PollutionLevel":
        """Case-insensitive lookup; raises UnknownLabel for anything else."""
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise UnknownLabel(f"unknown pollution level {text.strip()!r}") from None


LEVELS = tuple(PollutionLevel)


@dataclass(frozen=True)
class QualityStandards:
    """Regulatory thresholds for a class-C river body.

    A measurement exactly equal to its threshold is compliant; DO violates
    below its minimum, BOD/TSS above their maxima, pH outside its range.
    """

    bod_max: float = 5.0
    ph_min: float = 6.5
    ph_max: float = 8.5
    tss_max: float = 65.0
    do_min: float = 5.0

    def __post_init__(self) -> None:
        for name in ("bod_max", "ph_min", "ph_max", "tss_max", "do_min"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number")
            object.__setattr__(self, name, value)
        if self.ph_min >= self.ph_max:
            raise ValueError("ph_min must be less than ph_max")

    @classmethod
    def from_dict(cls, overrides: Mapping[str, float]) -> "QualityStandards":
        """Build standards from a partial mapping, keeping defaults elsewhere."""
        known = {"bod_max", "ph_min", "ph_max", "tss_max", "do_min"}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown standards field(s): {sorted(unknown)}")
        try:
            values = {key: float(val) for key, val in overrides.items()}
        except (TypeError, ValueError):
            raise ValueError("standards values must be numbers") from None
        return cls(**values)


@dataclass(frozen=True)
class WaterSample:
    """One monitoring observation of the four water-quality parameters."""

    do_mg_l: float
    ph: float
    bod_mg_l: float
    tss_mg_l: float
    date: Optional[Date] = None

    def __post_init__(self) -> None:
        for name in FEATURE_NAMES:
            raw = getattr(self, name)
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ValueError(f"{name} must be a number, got {raw!r}")
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {raw!r}")
            object.__setattr__(self, name, value)
        if not 0.0 <= self.ph <= 14.0:
            raise ValueError(f"ph must be within [0, 14], got {self.ph!r}")
        for name in ("do_mg_l", "bod_mg_l", "tss_mg_l"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.date is not None and not isinstance(self.date, Date):
            raise ValueError(f"date must be a calendar date, got {self.date!r}")

    def features(self) -> tuple[float, float, float, float]:
        """Measurements in canonical feature order (DO, pH, BOD, TSS)."""
        return (self.do_mg_l, self.ph, self.bod_mg_l, self.tss_mg_l)


@dataclass(frozen=True)
class LabeledSample:
    """A water sample with its pollution level; level is None for unlabeled rows."""

    sample: WaterSample
    level: Optional[PollutionLevel] = None


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of (sample, level) rows."""

    samples: tuple[LabeledSample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[LabeledSample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> LabeledSample:
        return self.samples[index]

    @property
    def class_list(self) -> tuple[PollutionLevel, ...]:
        """Distinct levels present, in severity order."""
        present = {row.level for row in self.samples if row.level is not None}
        return tuple(sorted(present))

    def is_labeled(self) -> bool:
        return all(row.level is not None for row in self.samples)

    def require_labels(self) -> None:
        if not self.samples:
            raise EmptyDataset("dataset has no rows")
        if not self.is_labeled():
            raise UnlabeledData("operation requires a fully labeled dataset")

    def levels(self) -> tuple[Optional[PollutionLevel], ...]:
        return tuple(row.level for row in self.samples)

    def feature_matrix(self) -> np.ndarray:
        """(n, 4) float64 matrix in FEATURE_NAMES order."""
        return np.array([row.sample.features() for row in self.samples], dtype=np.float64)

    def label_codes(self) -> np.ndarray:
        """(n,) int64 severity codes; requires every row labeled."""
        self.require_labels()
        return np.fromiter((int(row.level) for row in self.samples), dtype=np.int64, count=len(self.samples))

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """New dataset with rows at `indices`, in the given order (repeats allowed)."""
        return Dataset(tuple(self.samples[i] for i in indices))


# -- rule-based labeling -------------------------------------------------------

def violation_count(sample: WaterSample, standards: QualityStandards = QualityStandards()) -> int:
    """Number of standards the sample violates, in [0, 4].

    Boundary-equal measurements are compliant.
    """
    violations = 0
    if sample.do_mg_l < standards.do_min:
        violations += 1
    if sample.bod_mg_l > standards.bod_max:
        violations += 1
    if sample.tss_mg_l > standards.tss_max:
        violations += 1
    if not standards.ph_min <= sample.ph <= standards.ph_max:
        violations += 1
    return violations


def rule_label(sample: WaterSample, standards: QualityStandards = QualityStandards()) -> PollutionLevel:
    """Map violation count to a level: 0 green, 1 yellow, 2 orange, 3+ red."""
    violations = violation_count(sample, standards)
    if violations == 0:
        return PollutionLevel.GREEN
    if violations == 1:
        return PollutionLevel.YELLOW
    if violations == 2:
        return PollutionLevel.ORANGE
    return PollutionLevel.RED


# -- CSV ingestion and serialization -------------------------------------------

def _as_text(source: Union[str, bytes, IO[str], IO[bytes]]) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def parse_csv(source: Union[str, bytes, IO[str], IO[bytes]], require_label: bool = True) -> Dataset:
    """Parse a water-quality CSV into a Dataset.

    The header must contain do_mg_l, ph, bod_mg_l and tss_mg_l; date and
    pollution_level are optional (pollution_level becomes required when
    `require_label` is true). Column order is free; unknown or duplicated
    columns are rejected. Rows are returned in file order.

    Raises MissingColumn, UnknownColumn, MalformedValue (naming the row and
    column), UnknownLabel, or EmptyDataset.
    """
    reader = csv.reader(io.StringIO(_as_text(source)))
    header = next(reader, None)
    if header is None:
        raise EmptyDataset("input has no header row")

    names = [cell.strip() for cell in header]
    unknown = [name for name in names if name not in _ALL_COLUMNS]
    if unknown:
        raise UnknownColumn(f"unknown column(s): {', '.join(sorted(set(unknown)))}")
    duplicates = {name for name in names if names.count(name) > 1}
    if duplicates:
        raise UnknownColumn(f"duplicated column(s): {', '.join(sorted(duplicates))}")
    column = {name: idx for idx, name in enumerate(names)}

    for required in FEATURE_NAMES:
        if required not in column:
            raise MissingColumn(f"header lacks required column {required!r}")
    has_label = _LABEL_COLUMN in column
    if require_label and not has_label:
        raise MissingColumn(f"header lacks required column {_LABEL_COLUMN!r}")
    has_date = _DATE_COLUMN in column

    rows: list[LabeledSample] = []
    for rownum, record in enumerate(reader, start=1):
        if len(record) != len(names):
            raise MalformedValue(
                f"row {rownum}: expected {len(names)} fields, found {len(record)}"
            )
        values = {}
        for name in FEATURE_NAMES:
            cell = record[column[name]].strip()
            try:
                values[name] = float(cell)
            except ValueError:
                raise MalformedValue(
                    f"row {rownum}, column {name}: not a number: {cell!r}"
                ) from None

        sample_date = None
        if has_date:
            cell = record[column[_DATE_COLUMN]].strip()
            if cell:
                try:
                    sample_date = Date.fromisoformat(cell)
                except ValueError:
                    raise MalformedValue(
                        f"row {rownum}, column date: not an ISO date: {cell!r}"
                    ) from None

        level = None
        if has_label:
            cell = record[column[_LABEL_COLUMN]].strip()
            if cell:
                try:
                    level = PollutionLevel.parse(cell)
                except UnknownLabel as exc:
                    raise UnknownLabel(f"row {rownum}: {exc}") from None
            elif require_label:
                raise UnknownLabel(f"row {rownum}: empty pollution_level")

        try:
            sample = WaterSample(
                do_mg_l=values["do_mg_l"],
                ph=values["ph"],
                bod_mg_l=values["bod_mg_l"],
                tss_mg_l=values["tss_mg_l"],
                date=sample_date,
            )
        except ValueError as exc:
            raise MalformedValue(f"row {rownum}: {exc}") from None
        rows.append(LabeledSample(sample, level))

    if not rows:
        raise EmptyDataset("input has a header but no data rows")
    return Dataset(tuple(rows))


def format_number(value: float) -> str:
    """Shortest decimal text that parses back to the same float."""
    return repr(float(value))


def write_csv(dataset: Dataset) -> str:
    """Serialize a dataset back to CSV text.

    The date column appears when any row carries a date; pollution_level
    appears when any row is labeled. Numbers use shortest round-trip form,
    so parse -> write -> parse is lossless and write is a fixed point.
    """
    include_date = any(row.sample.date is not None for row in dataset)
    include_label = any(row.level is not None for row in dataset)

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    header = []
    if include_date:
        header.append(_DATE_COLUMN)
    header.extend(FEATURE_NAMES)
    if include_label:
        header.append(_LABEL_COLUMN)
    writer.writerow(header)

    for row in dataset:
        record = []
        if include_date:
            record.append(row.sample.date.isoformat() if row.sample.date else "")
        record.extend(format_number(v) for v in row.sample.features())
        if include_label:
            record.append(row.level.label if row.level is not None else "")
        writer.writerow(record)
    return buffer.getvalue()


# -- synthetic data ------------------------------------------------------------

#: Default class mix: confusion-fixture marginals rescaled to leave 5% green.
DEFAULT_CLASS_MIX: Mapping[PollutionLevel, float] = {
    PollutionLevel.RED: 0.67,
    PollutionLevel.YELLOW: 0.12,
    PollutionLevel.ORANGE: 0.16,
    PollutionLevel.GREEN: 0.05,
}

_MASK64 = (1 << 64) - 1

_SYNTH_START = Date(2013, 1, 1)
_SYNTH_END = Date(2017, 11, 30)

# Severity-graded value bands as multiples of each standard (pH bands are
# offsets in units of the compliant pH width). Compliant bands overlap across
# classes, but each class's violating band is disjoint from the others': the
# worse the class, the more extreme the excursion, as in real contamination.
# Every band keeps a clear gap around the threshold, so rounding a generated
# value to 2 decimals can never flip a violation.
_G, _Y, _O, _R = PollutionLevel
_DO_COMPLIANT = {_G: (1.40, 2.20), _Y: (1.06, 1.44), _O: (1.06, 1.44), _R: (1.06, 1.44)}
_DO_VIOLATING = {_Y: (0.70, 0.94), _O: (0.40, 0.68), _R: (0.06, 0.38)}
_BOD_COMPLIANT = {_G: (0.10, 0.50), _Y: (0.60, 0.94), _O: (0.60, 0.94), _R: (0.60, 0.94)}
_BOD_VIOLATING = {_Y: (1.06, 1.70), _O: (1.90, 3.40), _R: (3.80, 12.00)}
_TSS_COMPLIANT = {_G: (0.08, 0.77), _Y: (0.15, 0.92), _O: (0.15, 0.92), _R: (0.15, 0.92)}
_TSS_VIOLATING = {_Y: (1.08, 1.60), _O: (1.75, 2.60), _R: (2.80, 4.90)}
_PH_COMPLIANT = {_G: (0.15, 0.85), _Y: (0.05, 0.95), _O: (0.05, 0.95), _R: (0.05, 0.95)}
_PH_BELOW = {_Y: (0.35, 0.15), _O: (0.80, 0.45), _R: (1.60, 0.90)}
_PH_ABOVE = {_Y: (0.15, 0.35), _O: (0.45, 0.80), _R: (0.90, 1.60)}


def _value_ranges(standards: QualityStandards):
    """ranges[level][parameter] -> (compliant span, tuple of violating spans)."""
    width = standards.ph_max - standards.ph_min
    ranges: dict[PollutionLevel, dict[str, tuple]] = {}
    for level in LEVELS:
        lo_c, hi_c = _PH_COMPLIANT[level]
        spans = {
            "do_mg_l": (
                (standards.do_min * _DO_COMPLIANT[level][0], standards.do_min * _DO_COMPLIANT[level][1]),
                (),
            ),
            "ph": (
                (standards.ph_min + lo_c * width, standards.ph_min + hi_c * width),
                (),
            ),
            "bod_mg_l": (
                (standards.bod_max * _BOD_COMPLIANT[level][0], standards.bod_max * _BOD_COMPLIANT[level][1]),
                (),
            ),
            "tss_mg_l": (
                (standards.tss_max * _TSS_COMPLIANT[level][0], standards.tss_max * _TSS_COMPLIANT[level][1]),
                (),
            ),
        }
        if level is not PollutionLevel.GREEN:
            below = _PH_BELOW[level]
            above = _PH_ABOVE[level]
            spans["do_mg_l"] = (
                spans["do_mg_l"][0],
                ((standards.do_min * _DO_VIOLATING[level][0], standards.do_min * _DO_VIOLATING[level][1]),),
            )
            spans["ph"] = (
                spans["ph"][0],
                (
                    (max(0.1, standards.ph_min - below[0] * width), standards.ph_min - below[1] * width),
                    (standards.ph_max + above[0] * width, min(13.9, standards.ph_max + above[1] * width)),
                ),
            )
            spans["bod_mg_l"] = (
                spans["bod_mg_l"][0],
                ((standards.bod_max * _BOD_VIOLATING[level][0], standards.bod_max * _BOD_VIOLATING[level][1]),),
            )
            spans["tss_mg_l"] = (
                spans["tss_mg_l"][0],
                ((standards.tss_max * _TSS_VIOLATING[level][0], standards.tss_max * _TSS_VIOLATING[level][1]),),
            )
        for name, (compliant, violating) in spans.items():
            if any(lo >= hi for lo, hi in (compliant, *violating)):
                raise ValueError(f"standards leave no room to synthesize {name} values")
        ranges[level] = spans
    return ranges


def _normalize_mix(class_mix: Optional[Mapping[PollutionLevel, float]]) -> np.ndarray:
    mix = DEFAULT_CLASS_MIX if class_mix is None else class_mix
    unknown = [key for key in mix if not isinstance(key, PollutionLevel)]
    if unknown:
        raise InvalidDistribution(f"class mix keys must be pollution levels: {unknown!r}")
    probs = np.array([float(mix.get(level, 0.0)) for level in LEVELS], dtype=np.float64)
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise InvalidDistribution("class mix entries must be finite and non-negative")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise InvalidDistribution(f"class mix must sum to 1, got {float(probs.sum())!r}")
    return probs


def _draw(rng: np.random.Generator, lo: float, hi: float) -> float:
    return round(float(rng.uniform(lo, hi)), 2)


def generate_synthetic(
    n: int,
    seed: int,
    standards: QualityStandards = QualityStandards(),
    noise_rate: float = 0.0,
    class_mix: Optional[Mapping[PollutionLevel, float]] = None,
) -> Dataset:
    """Generate n labeled samples whose labels follow the violation rule.

    Each sample targets a class drawn from `class_mix`, picks which standards
    to violate, and draws measurements from ranges that keep a small guard
    band around every threshold, so with noise_rate=0 the label always equals
    rule_label(sample). With probability `noise_rate` the label is reassigned
    uniformly among the other three classes. Fully deterministic given
    (n, seed, standards, noise_rate, class_mix). Rows carry evenly spaced
    dates over a multi-year monitoring window.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError("noise_rate must be within [0, 1]")
    probs = _normalize_mix(class_mix)
    cdf = np.cumsum(probs)
    ranges = _value_ranges(standards)
    rng = np.random.Generator(np.random.PCG64(seed & _MASK64))

    span_days = (_SYNTH_END - _SYNTH_START).days
    rows: list[LabeledSample] = []
    for i in range(n):
        target_idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(LEVELS) - 1)
        target = LEVELS[target_idx]
        if target is PollutionLevel.RED:
            n_violations = int(rng.integers(3, 5))
        else:
            n_violations = int(target)
        violated = set(int(j) for j in rng.choice(len(FEATURE_NAMES), size=n_violations, replace=False))

        values = {}
        for j, name in enumerate(FEATURE_NAMES):
            compliant, violating = ranges[target][name]
            if j in violated:
                span = violating[int(rng.integers(0, len(violating)))] if len(violating) > 1 else violating[0]
            else:
                span = compliant
            values[name] = _draw(rng, *span)

        level = target
        if noise_rate > 0 and rng.random() < noise_rate:
            others = [lvl for lvl in LEVELS if lvl is not target]
            level = others[int(rng.integers(0, len(others)))]

        offset = int(round(i * span_days / (n - 1))) if n > 1 else 0
        sample = WaterSample(
            do_mg_l=values["do_mg_l"],
            ph=values["ph"],
            bod_mg_l=values["bod_mg_l"],
            tss_mg_l=values["tss_mg_l"],
            date=_SYNTH_START + timedelta(days=offset),
        )
        rows.append(LabeledSample(sample, level))
    return Dataset(tuple(rows))


# -- splitting -----------------------------------------------------------------

def split_chronological(dataset: Dataset, cutoff: Date) -> tuple[Dataset, Dataset]:
    """Split into (date <= cutoff, date > cutoff), preserving row order."""
    for i, row in enumerate(dataset):
        if row.sample.date is None:
            raise MissingDate(f"row {i} has no date; chronological split needs one")
    before = tuple(row for row in dataset if row.sample.date <= cutoff)
    after = tuple(row for row in dataset if row.sample.date > cutoff)
    return Dataset(before), Dataset(after)


def split_random(
    dataset: Dataset,
    test_fraction: float,
    seed: int,
    stratified: bool = False,
) -> tuple[Dataset, Dataset]:
    """Deterministic random partition into (train, test).

    |test| = round(n * test_fraction). Stratified mode allocates per-class
    test counts by largest remainder, so each class's share deviates from
    its proportion by at most one sample. Row order is preserved within
    each side.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be strictly between 0 and 1")
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise DegenerateSplit(
            f"test_fraction {test_fraction!r} on {n} rows leaves one side empty"
        )

    rng = np.random.Generator(np.random.PCG64(seed & _MASK64))
    if stratified:
        dataset.require_labels()
        by_class: dict[PollutionLevel, list[int]] = {}
        for i, row in enumerate(dataset):
            by_class.setdefault(row.level, []).append(i)
        classes = sorted(by_class)
        quotas = [n_test * len(by_class[c]) / n for c in classes]
        counts = [int(math.floor(q)) for q in quotas]
        leftover = n_test - sum(counts)
        remainder_order = sorted(
            range(len(classes)), key=lambda k: (-(quotas[k] - counts[k]), classes[k])
        )
        for k in remainder_order[:leftover]:
            counts[k] += 1
        test_idx: list[int] = []
        for c, take in zip(classes, counts):
            members = by_class[c]
            perm = rng.permutation(len(members))
            test_idx.extend(members[j] for j in perm[:take])
    else:
        perm = rng.permutation(n)
        test_idx = [int(j) for j in perm[:n_test]]

    test_set = set(test_idx)
    train = [i for i in range(n) if i not in test_set]
    test = sorted(test_set)
    return dataset.subset(train), dataset.subset(test)
