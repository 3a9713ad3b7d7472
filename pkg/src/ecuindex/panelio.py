"""CSV interchange for every pipeline stage.

All files are UTF-8 with a header row and ISO-8601 dates.  Lines starting
with ``#`` before the header carry run metadata (the root seed) and are
skipped on read.  Floats are written with ``repr`` so values round-trip
exactly and reruns are byte-identical; empty fields mean missing (a NaN
gap or an unmetered day).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ecu import EcuSeries, SrpiSeries
from .hmm import RegimeModel, RegimeParams
from .preprocess import DeviationSeries, RawSeries

PANEL_HEADER = ["firm_id", "date", "kwh", "sector_code", "district_code"]
DEVIATIONS_HEADER = ["firm_id", "offset", "y"]
MODELS_HEADER = ["firm_id", "alpha_p", "beta_p", "sigma_p", "alpha_r", "beta_r", "sigma_r",
                 "q_pp", "q_rr", "pi0_p", "loglik", "converged", "degenerate"]
PROBS_HEADER = ["firm_id", "offset", "mu_p", "mu_r"]
WEIGHTS_HEADER = ["firm_id", "offset", "ele_test", "ele_ref", "sector_code", "district_code"]
ECU_HEADER = ["group_type", "group_key", "offset", "date", "ecu", "total_weight", "firm_count"]
SRPI_HEADER = ["offset", "date", "srpi", "delta_srpi"]

DAY = np.timedelta64(1, "D")


@dataclass(frozen=True)
class FirmRecord:
    """One firm's raw series plus its sector and district assignment."""

    firm_id: str
    sector_code: str
    district_code: str
    series: RawSeries


@dataclass(frozen=True)
class ModelRow:
    """One fitted firm as stored in the models file."""

    firm_id: str
    model: RegimeModel
    loglik: float
    converged: bool
    degenerate: bool


def _fmt(x) -> str:
    x = float(x)
    return "" if np.isnan(x) else repr(x)


def _parse_float(field: str) -> float:
    return np.nan if field == "" else float(field)


def _fmt_bool(b) -> str:
    return "true" if b else "false"


def _parse_bool(field: str) -> bool:
    if field not in ("true", "false"):
        raise ValueError(f"expected 'true' or 'false', got {field!r}")
    return field == "true"


def _open_writer(path, comments):
    fh = open(path, "w", encoding="utf-8", newline="")
    for line in comments:
        fh.write(f"# {line}\n")
    return fh, csv.writer(fh)


def _read_rows(path, expected_header):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows:
        raise ValueError(f"{path} is empty")
    if rows[0] != expected_header:
        raise ValueError(f"{path} header {rows[0]} does not match {expected_header}")
    return rows[1:]


def seed_comment(seed) -> str:
    return f"root_seed={seed}"


def read_seed_comment(path) -> int | None:
    """Root seed recorded in a file's comment header, if any."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                return None
            text = line[1:].strip()
            if text.startswith("root_seed="):
                return int(text.split("=", 1)[1])
    return None


# ---------------------------------------------------------------------------
# panel
# ---------------------------------------------------------------------------


def write_panel(path, records: list[FirmRecord], comments=()) -> None:
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(PANEL_HEADER)
        for rec in sorted(records, key=lambda r: r.firm_id):
            s = rec.series
            for date, kwh in zip(s.dates, s.values):
                w.writerow([rec.firm_id, str(date), _fmt(kwh),
                            rec.sector_code, rec.district_code])


def read_panel(path) -> list[FirmRecord]:
    """Read a panel file back into per-firm records, sorted by firm id."""
    grouped: dict[str, list] = {}
    meta: dict[str, tuple[str, str]] = {}
    for firm_id, date, kwh, sector, district in _read_rows(path, PANEL_HEADER):
        grouped.setdefault(firm_id, []).append((np.datetime64(date), _parse_float(kwh)))
        prev = meta.setdefault(firm_id, (sector, district))
        if prev != (sector, district):
            raise ValueError(f"firm {firm_id} has inconsistent sector/district codes")
    out = []
    for firm_id in sorted(grouped):
        rows = sorted(grouped[firm_id])
        dates = np.array([d for d, _ in rows], dtype="datetime64[D]")
        values = np.array([v for _, v in rows], dtype=float)
        sector, district = meta[firm_id]
        out.append(FirmRecord(firm_id, sector, district, RawSeries(firm_id, dates, values)))
    return out


# ---------------------------------------------------------------------------
# deviations
# ---------------------------------------------------------------------------


def write_deviations(path, deviations: list[DeviationSeries], comments=()) -> None:
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(DEVIATIONS_HEADER)
        for dev in sorted(deviations, key=lambda d: d.firm_id):
            for off, y in zip(dev.offsets, dev.y):
                w.writerow([dev.firm_id, int(off), _fmt(y)])


def read_deviations(path) -> list[DeviationSeries]:
    grouped: dict[str, list] = {}
    for firm_id, off, y in _read_rows(path, DEVIATIONS_HEADER):
        grouped.setdefault(firm_id, []).append((int(off), float(y)))
    out = []
    for firm_id in sorted(grouped):
        rows = sorted(grouped[firm_id])
        out.append(DeviationSeries(firm_id,
                                   np.array([o for o, _ in rows], dtype=int),
                                   np.array([v for _, v in rows], dtype=float)))
    return out


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def write_models(path, rows: list[ModelRow], comments=()) -> None:
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(MODELS_HEADER)
        for row in sorted(rows, key=lambda r: r.firm_id):
            p, r = row.model.prosperous, row.model.recessionary
            w.writerow([row.firm_id,
                        _fmt(p.alpha), _fmt(p.beta), _fmt(p.sigma),
                        _fmt(r.alpha), _fmt(r.beta), _fmt(r.sigma),
                        _fmt(row.model.q[0, 0]), _fmt(row.model.q[1, 1]),
                        _fmt(row.model.pi0[0]), _fmt(row.loglik),
                        _fmt_bool(row.converged), _fmt_bool(row.degenerate)])


def read_models(path) -> dict[str, ModelRow]:
    out = {}
    for fields in _read_rows(path, MODELS_HEADER):
        firm_id = fields[0]
        a_p, b_p, s_p, a_r, b_r, s_r, q_pp, q_rr, pi0_p, loglik = map(float, fields[1:11])
        model = RegimeModel(
            np.array([[q_pp, 1.0 - q_pp], [1.0 - q_rr, q_rr]]),
            (RegimeParams(a_p, b_p, s_p), RegimeParams(a_r, b_r, s_r)),
            np.array([pi0_p, 1.0 - pi0_p]),
        )
        out[firm_id] = ModelRow(firm_id, model, loglik,
                                _parse_bool(fields[11]), _parse_bool(fields[12]))
    return out


# ---------------------------------------------------------------------------
# filtered probabilities
# ---------------------------------------------------------------------------


def write_probs(path, probs: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]],
                comments=()) -> None:
    """``probs`` maps firm_id to (offsets, mu_p, mu_r)."""
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(PROBS_HEADER)
        for firm_id in sorted(probs):
            offsets, mu_p, mu_r = probs[firm_id]
            for off, p, r in zip(offsets, mu_p, mu_r):
                w.writerow([firm_id, int(off), _fmt(p), _fmt(r)])


def read_probs(path) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    grouped: dict[str, list] = {}
    for firm_id, off, mu_p, mu_r in _read_rows(path, PROBS_HEADER):
        grouped.setdefault(firm_id, []).append((int(off), float(mu_p), float(mu_r)))
    out = {}
    for firm_id, rows in grouped.items():
        rows.sort()
        out[firm_id] = (np.array([o for o, _, _ in rows], dtype=int),
                        np.array([p for _, p, _ in rows], dtype=float),
                        np.array([r for _, _, r in rows], dtype=float))
    return out


# ---------------------------------------------------------------------------
# weights (cleaned consumption used by the index stage)
# ---------------------------------------------------------------------------


def write_weights(path, rows: list[tuple], comments=()) -> None:
    """``rows``: (firm_id, offset, ele_test, ele_ref, sector_code, district_code)."""
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(WEIGHTS_HEADER)
        for firm_id, off, ele_t, ele_r, sector, district in sorted(rows, key=lambda r: (r[0], r[1])):
            w.writerow([firm_id, int(off), _fmt(ele_t), _fmt(ele_r), sector, district])


def read_weights(path) -> list[tuple]:
    out = []
    for firm_id, off, ele_t, ele_r, sector, district in _read_rows(path, WEIGHTS_HEADER):
        out.append((firm_id, int(off), float(ele_t), float(ele_r), sector, district))
    return out


# ---------------------------------------------------------------------------
# indexes
# ---------------------------------------------------------------------------


def write_ecu(path, series_list: list[EcuSeries], base_date, comments=()) -> None:
    """``base_date``: calendar day at offset 0 in the test window."""
    base = np.datetime64(base_date)
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(ECU_HEADER)
        for s in sorted(series_list, key=lambda s: (s.group_type, s.group_key)):
            for off, val, tw, fc in zip(s.offsets, s.ecu, s.total_weight, s.firm_count):
                w.writerow([s.group_type, s.group_key, int(off), str(base + int(off) * DAY),
                            _fmt(val), _fmt(tw), int(fc)])


def write_srpi(path, series: SrpiSeries, base_date, comments=()) -> None:
    base = np.datetime64(base_date)
    fh, w = _open_writer(path, comments)
    with fh:
        w.writerow(SRPI_HEADER)
        for off, total, delta in zip(series.offsets, series.srpi, series.delta_srpi):
            w.writerow([int(off), str(base + int(off) * DAY), _fmt(total), _fmt(delta)])
