"""Consumption-weighted uncertainty indexes.

Aggregates per-firm filtered recessionary probabilities into an ECU series
(economy-wide, per sector, per district) where each firm's daily kWh is its
weight, plus the simplified resumption power index (total consumption and
its smoothed gap to the reference year).

Sums use ``math.fsum`` so aggregation is exact to the last bit and therefore
independent of record order and safe to partition across groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .preprocess import trailing_mean
from .sectors import DEFAULT_DISTRICTS, DEFAULT_SECTORS

GROUP_AGGREGATE = "aggregate"
GROUP_SECTOR = "sector"
GROUP_DISTRICT = "district"
AGGREGATE_KEY = "all"


class ZeroWeightError(ValueError):
    """Every supplied record has zero consumption, so the weighted mean is undefined."""


@dataclass(frozen=True)
class FirmDay:
    """One firm-day: consumption weight and filtered recessionary probability."""

    firm_id: str
    offset: int
    ele: float
    mu_r: float
    sector_code: str
    district_code: str

    def __post_init__(self):
        if not (math.isfinite(self.ele) and self.ele >= 0.0):
            raise ValueError(f"ele must be finite and >= 0, got {self.ele}")
        if not (0.0 <= self.mu_r <= 1.0):
            raise ValueError(f"mu_r must lie in [0, 1], got {self.mu_r}")


@dataclass(frozen=True)
class FirmDayPanel:
    """Columnar firm-day records; the unit the aggregations operate on."""

    firm_id: np.ndarray
    offset: np.ndarray
    ele: np.ndarray
    mu_r: np.ndarray
    sector_code: np.ndarray
    district_code: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "firm_id", np.asarray(self.firm_id, dtype=object))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=int))
        object.__setattr__(self, "ele", np.asarray(self.ele, dtype=float))
        object.__setattr__(self, "mu_r", np.asarray(self.mu_r, dtype=float))
        object.__setattr__(self, "sector_code", np.asarray(self.sector_code, dtype=object))
        object.__setattr__(self, "district_code", np.asarray(self.district_code, dtype=object))
        n = len(self.firm_id)
        for name in ("offset", "ele", "mu_r", "sector_code", "district_code"):
            if len(getattr(self, name)) != n:
                raise ValueError("panel columns must have equal length")
        if n:
            if not np.isfinite(self.ele).all() or self.ele.min() < 0.0:
                raise ValueError("ele must be finite and >= 0")
            if self.mu_r.min() < 0.0 or self.mu_r.max() > 1.0:
                raise ValueError("mu_r must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.firm_id)

    @classmethod
    def from_records(cls, records: Iterable[FirmDay]) -> "FirmDayPanel":
        rows = list(records)
        return cls(
            firm_id=np.array([r.firm_id for r in rows], dtype=object),
            offset=np.array([r.offset for r in rows], dtype=int),
            ele=np.array([r.ele for r in rows], dtype=float),
            mu_r=np.array([r.mu_r for r in rows], dtype=float),
            sector_code=np.array([r.sector_code for r in rows], dtype=object),
            district_code=np.array([r.district_code for r in rows], dtype=object),
        )


def _as_panel(panel) -> FirmDayPanel:
    if isinstance(panel, FirmDayPanel):
        return panel
    return FirmDayPanel.from_records(panel)


@dataclass(frozen=True)
class EcuSeries:
    """Per-offset index values for one group; NaN marks offsets with no consuming firms."""

    group_type: str
    group_key: str
    offsets: np.ndarray
    ecu: np.ndarray
    total_weight: np.ndarray
    firm_count: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=int))
        object.__setattr__(self, "ecu", np.asarray(self.ecu, dtype=float))
        object.__setattr__(self, "total_weight", np.asarray(self.total_weight, dtype=float))
        object.__setattr__(self, "firm_count", np.asarray(self.firm_count, dtype=int))
        n = len(self.offsets)
        if any(len(a) != n for a in (self.ecu, self.total_weight, self.firm_count)):
            raise ValueError("series columns must have equal length")
        if n == 0:
            raise ValueError("series must cover at least one offset")
        if not np.array_equal(self.offsets, np.arange(self.offsets[0], self.offsets[0] + n)):
            raise ValueError("offsets must be contiguous")
        vals = self.ecu[~np.isnan(self.ecu)]
        if len(vals) and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("ECU values must lie in [0, 1]")


@dataclass(frozen=True)
class SrpiSeries:
    """Total consumption per offset and the smoothed gap to the reference year."""

    offsets: np.ndarray
    srpi: np.ndarray
    delta_srpi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=int))
        object.__setattr__(self, "srpi", np.asarray(self.srpi, dtype=float))
        object.__setattr__(self, "delta_srpi", np.asarray(self.delta_srpi, dtype=float))
        if not (len(self.offsets) == len(self.srpi) == len(self.delta_srpi)):
            raise ValueError("series columns must have equal length")


def ecu_at(records: Iterable[FirmDay]) -> float:
    """Consumption-weighted mean recessionary probability for one offset's records."""
    rows = list(records)
    if not rows:
        raise ValueError("no records supplied")
    offsets = {r.offset for r in rows}
    if len(offsets) > 1:
        raise ValueError(f"records span multiple offsets: {sorted(offsets)}")
    den = math.fsum(r.ele for r in rows)
    if den <= 0.0:
        raise ZeroWeightError(f"no consuming firms at offset {rows[0].offset}")
    num = math.fsum(r.ele * r.mu_r for r in rows)
    return num / den


def ecu_grouped(panel, group_by: str = "none", known_codes=None) -> list[EcuSeries]:
    """ECU series per group over the panel's full offset span.

    ``group_by`` is "none" (one aggregate series), "sector" or "district".
    When grouping, codes are validated against ``known_codes`` (defaults to
    the built-in taxonomy).  Offsets where a group has no positive-weight
    record come out as NaN with a zero total weight; ``firm_count`` counts
    the consuming (positive-weight) records, so zero-weight firms leave
    every column untouched.
    """
    p = _as_panel(panel)
    if len(p) == 0:
        raise ValueError("panel is empty")

    if group_by == "none":
        keys = None
        group_type = GROUP_AGGREGATE
    elif group_by in (GROUP_SECTOR, GROUP_DISTRICT):
        keys = p.sector_code if group_by == GROUP_SECTOR else p.district_code
        group_type = group_by
        known = known_codes
        if known is None:
            known = DEFAULT_SECTORS.keys() if group_by == GROUP_SECTOR else DEFAULT_DISTRICTS
        unknown = sorted(set(keys) - set(known))
        if unknown:
            raise ValueError(f"unknown {group_by} code {unknown[0]!r}")
    else:
        raise ValueError(f"group_by must be 'none', 'sector' or 'district', got {group_by!r}")

    lo, hi = int(p.offset.min()), int(p.offset.max())
    span = np.arange(lo, hi + 1)

    weights: dict[tuple, list] = {}
    products: dict[tuple, list] = {}
    counts: dict[tuple, int] = {}
    for i in range(len(p)):
        key = AGGREGATE_KEY if keys is None else keys[i]
        ele = float(p.ele[i])
        if ele <= 0.0:
            continue
        bucket = (key, int(p.offset[i]))
        weights.setdefault(bucket, []).append(ele)
        products.setdefault(bucket, []).append(ele * float(p.mu_r[i]))
        counts[bucket] = counts.get(bucket, 0) + 1

    group_keys = [AGGREGATE_KEY] if keys is None else sorted(set(keys))
    out = []
    for key in group_keys:
        ecu = np.full(len(span), np.nan)
        tot = np.zeros(len(span))
        cnt = np.zeros(len(span), dtype=int)
        for j, off in enumerate(span):
            bucket = (key, int(off))
            if bucket not in weights:
                continue
            den = math.fsum(weights[bucket])
            tot[j] = den
            cnt[j] = counts[bucket]
            if den > 0.0:
                ecu[j] = math.fsum(products[bucket]) / den
        out.append(EcuSeries(group_type, key, span.copy(), ecu, tot, cnt))
    return out


def srpi(panel, reference_totals: Mapping[int, float], window_days: int = 7) -> SrpiSeries:
    """Total test-window consumption per offset and the smoothed year-over-year gap.

    ``reference_totals`` maps each offset of the panel's span to the same
    firms' total consumption at the aligned reference-window day; a missing
    offset is an alignment error.  The gap is smoothed with the same
    trailing mean the preprocessing uses.
    """
    p = _as_panel(panel)
    if len(p) == 0:
        raise ValueError("panel is empty")
    lo, hi = int(p.offset.min()), int(p.offset.max())
    span = np.arange(lo, hi + 1)

    sums: dict[int, list] = {}
    for i in range(len(p)):
        sums.setdefault(int(p.offset[i]), []).append(float(p.ele[i]))
    totals = np.array([math.fsum(sums.get(int(off), [])) for off in span])

    missing = [int(off) for off in span if int(off) not in reference_totals]
    if missing:
        raise ValueError(f"reference totals missing offset {missing[0]}")
    ref = np.array([float(reference_totals[int(off)]) for off in span])

    delta = trailing_mean(totals - ref, window_days)
    return SrpiSeries(span, totals, delta)
