"""Flat key=value run configuration shared by all pipeline commands.

One file configures every stage; each stage reads the keys it needs.
Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Mappings (sector mix, shock depths) use ``code:value,code:value``.
Shock depths also accept the level names ``primary``/``secondary``/
``tertiary``, expanded over all sector codes of that level.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .sectors import LEVEL_NAMES, sector_level
from .simgen import PanelConfig

# every key any stage understands; unknown keys are configuration mistakes
KNOWN_KEYS = frozenset({
    # shared
    "seed", "out", "ref_base", "test_base", "span",
    # simulate
    "n_firms", "sector_mix", "district_mix", "base_lo", "base_hi",
    "weekly_amplitude", "annual_amplitude",
    "holiday_ref", "holiday_ref_days", "holiday_test", "holiday_test_days",
    "holiday_depth", "shock_start", "shock_duration", "shock_depth",
    "shock_half_life", "shock_onset_jitter", "shock_depth_jitter",
    "noise_frac", "missing_rate", "outlier_rate",
    # fit / index / report
    "panel", "code_map", "smooth_window", "outlier_window", "outlier_k",
    "interp_window", "em_tol", "em_max_iter", "multi_start", "workers",
    "group_by", "firm",
})


def parse_kv(text: str) -> dict[str, str]:
    """Parse key=value lines; rejects malformed lines, duplicates and unknown keys."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno} is not key=value: {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ValueError(f"unknown config key {key!r} (line {lineno})")
        if key in out:
            raise ValueError(f"duplicate config key {key!r} (line {lineno})")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def _get(raw, key, default, convert, kind):
    if key not in raw:
        return default
    try:
        return convert(raw[key])
    except (TypeError, ValueError):
        raise ValueError(f"config field {key} must be {kind}, got {raw[key]!r}") from None


def get_int(raw, key, default):
    return _get(raw, key, default, int, "an integer")


def get_float(raw, key, default):
    return _get(raw, key, default, float, "a number")


def get_str(raw, key, default):
    return raw.get(key, default)


def parse_mapping(value: str, field: str) -> dict[str, float]:
    out = {}
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ValueError(f"config field {field} entries must be code:value, got {item!r}")
        code, _, num = item.partition(":")
        try:
            out[code.strip()] = float(num)
        except ValueError:
            raise ValueError(f"config field {field} has non-numeric value in {item!r}") from None
    if not out:
        raise ValueError(f"config field {field} is empty")
    return out


def _expand_depths(depths: dict[str, float], sector_codes) -> dict[str, float]:
    """Resolve a depth mapping that may mix sector codes and level names."""
    by_level = {name: v for name, v in depths.items() if name in LEVEL_NAMES.values()}
    by_code = {code: v for code, v in depths.items() if code not in by_level}
    out = {}
    for code in sector_codes:
        if code in by_code:
            out[code] = by_code[code]
        else:
            out[code] = by_level.get(LEVEL_NAMES[sector_level(code)], 0.0)
    unknown = set(by_code) - set(sector_codes)
    if unknown:
        raise ValueError(f"shock_depth names unknown sector code {sorted(unknown)[0]!r}")
    return out


def build_panel_config(raw: dict[str, str]) -> PanelConfig:
    """PanelConfig from raw config strings; validation happens in generate()."""
    kwargs = dict(
        n_firms=get_int(raw, "n_firms", 100),
        seed=get_int(raw, "seed", 0),
        base_range=(get_float(raw, "base_lo", 50.0), get_float(raw, "base_hi", 5000.0)),
        weekly_amplitude=get_float(raw, "weekly_amplitude", 0.15),
        annual_amplitude=get_float(raw, "annual_amplitude", 0.10),
        ref_base=get_str(raw, "ref_base", "2019-02-04"),
        test_base=get_str(raw, "test_base", "2020-01-24"),
        span=get_int(raw, "span", 95),
        holiday_ref=(get_str(raw, "holiday_ref", "2019-02-04"),
                     get_int(raw, "holiday_ref_days", 10)),
        holiday_test=(get_str(raw, "holiday_test", "2020-01-24"),
                      get_int(raw, "holiday_test_days", 10)),
        holiday_depth=get_float(raw, "holiday_depth", 0.35),
        shock_start=get_int(raw, "shock_start", 10),
        shock_duration=get_int(raw, "shock_duration", 0),
        shock_half_life=get_float(raw, "shock_half_life", 12.0),
        shock_onset_jitter=get_int(raw, "shock_onset_jitter", 0),
        shock_depth_jitter=get_float(raw, "shock_depth_jitter", 0.0),
        noise_frac=get_float(raw, "noise_frac", 0.05),
        missing_rate=get_float(raw, "missing_rate", 0.0),
        outlier_rate=get_float(raw, "outlier_rate", 0.0),
    )
    if "sector_mix" in raw:
        kwargs["sector_mix"] = parse_mapping(raw["sector_mix"], "sector_mix")
    if "district_mix" in raw:
        kwargs["district_mix"] = parse_mapping(raw["district_mix"], "district_mix")
    cfg = PanelConfig(**kwargs)
    if "shock_depth" in raw:
        depths = parse_mapping(raw["shock_depth"], "shock_depth")
        cfg = PanelConfig(**{**kwargs, "shock_depth": _expand_depths(depths, cfg.sector_mix)})
    return cfg


@dataclass(frozen=True)
class RunConfig:
    """Settings for the fit, index and report stages."""

    panel: str = "panel.csv"
    code_map: str | None = None
    out: str = "out"
    ref_base: str = "2019-02-04"
    test_base: str = "2020-01-24"
    span: int = 95
    smooth_window: int = 7
    outlier_window: int = 15
    outlier_k: float = 2.0
    interp_window: int = 14
    em_tol: float = 1e-6
    em_max_iter: int = 500
    multi_start: int = 0
    seed: int = 0
    workers: int = 1
    group_by: tuple[str, ...] = ("sector", "district")

    def validate(self) -> None:
        if self.span < 1:
            raise ValueError(f"span must be >= 1, got {self.span}")
        if self.em_tol <= 0:
            raise ValueError(f"em_tol must be > 0, got {self.em_tol}")
        if self.em_max_iter < 1:
            raise ValueError(f"em_max_iter must be >= 1, got {self.em_max_iter}")
        if self.multi_start < 0:
            raise ValueError(f"multi_start must be >= 0, got {self.multi_start}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.smooth_window < 1:
            raise ValueError(f"smooth_window must be >= 1, got {self.smooth_window}")
        if self.outlier_window < 3 or self.outlier_window % 2 == 0:
            raise ValueError(f"outlier_window must be odd and >= 3, got {self.outlier_window}")
        if self.outlier_k <= 0:
            raise ValueError(f"outlier_k must be > 0, got {self.outlier_k}")
        if self.interp_window < 1:
            raise ValueError(f"interp_window must be >= 1, got {self.interp_window}")
        for g in self.group_by:
            if g not in ("sector", "district"):
                raise ValueError(f"group_by entries must be sector or district, got {g!r}")


def build_run_config(raw: dict[str, str]) -> RunConfig:
    group_raw = get_str(raw, "group_by", "sector,district")
    groups = tuple(g.strip() for g in group_raw.split(",") if g.strip())
    cfg = RunConfig(
        panel=get_str(raw, "panel", "panel.csv"),
        code_map=get_str(raw, "code_map", None),
        out=get_str(raw, "out", "out"),
        ref_base=get_str(raw, "ref_base", "2019-02-04"),
        test_base=get_str(raw, "test_base", "2020-01-24"),
        span=get_int(raw, "span", 95),
        smooth_window=get_int(raw, "smooth_window", 7),
        outlier_window=get_int(raw, "outlier_window", 15),
        outlier_k=get_float(raw, "outlier_k", 2.0),
        interp_window=get_int(raw, "interp_window", 14),
        em_tol=get_float(raw, "em_tol", 1e-6),
        em_max_iter=get_int(raw, "em_max_iter", 500),
        multi_start=get_int(raw, "multi_start", 0),
        seed=get_int(raw, "seed", 0),
        workers=get_int(raw, "workers", 1),
        group_by=groups,
    )
    cfg.validate()
    return cfg
