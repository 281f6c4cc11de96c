"""Configuration, stage orchestration and report emission for the full protocol.

Stages run in a fixed order. Each stage reads artifacts only from the stages it
declares in ``STAGE_DEPS``; the artifact store enforces this at run time. A
failing stage is recorded and every stage depending on it is skipped.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import math
import traceback
from collections import OrderedDict
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (Direction, QuietMode, QuietSpec, acf_summary, episode_bootstrap, field_stripped_residual,
                          granger, pooled_quiet_acf, quiet_segments)
from .errors import ConfigError, FieldAttrError
from .field_decomp import DecompRecipe, Freeze, Weights, recipe_grid, sign_invariance
from .market_data import (ObservableSeries, align, align_many, block_observables, load_field,
                          load_returns, psi1_series, rolling_correlation, weekly_disjoint_observables)
from .oos_eval import anchored_oos, window_sweep
from .ou_core import (Family, ModelSpec, attribution, bare_spec, field_spec, fit, mu_eff, pit_ks, pit_series)
from .regime import fit_rs, lrt
from .residual_state import Quadrant, horizon_test, orthogonal_residual, quadrant_labels
from .surrogate import Comparison, placebo_gate
from .twod import compare_structures, thin

STAGES = (
    "observables",
    "models",
    "placebo",
    "granger",
    "decomposition",
    "diagnostics",
    "window_sweep",
    "reconstructions",
    "oos",
    "twod",
    "residual_state",
)

STAGE_DEPS = {
    "observables": (),
    "models": ("observables",),
    "placebo": ("observables",),
    "granger": ("observables",),
    "decomposition": ("observables",),
    "diagnostics": ("observables", "models"),
    "window_sweep": ("observables",),
    "reconstructions": ("observables",),
    "oos": ("observables",),
    "twod": ("observables",),
    "residual_state": ("observables",),
}

DEFAULT_RECIPES = ("full_median/equal", "full_mean/equal", "pre_split_median/equal",
                   "full_median/inverse_vol", "full_median/vol_share")

DEFAULT_QUIET = (
    {"mode": "strict_daily", "low": 15.0, "high": 18.0, "min_len": 120},
    {"mode": "rolling_median", "low": 15.0, "high": 18.0, "min_len": 120},
    {"mode": "rolling_median", "low": 14.0, "high": 19.0, "min_len": 120},
)


# ---------------------------------------------------------------------------
# Configuration


@dataclasses.dataclass
class ProtocolConfig:
    prices: str
    vix: str
    move: str | None = None
    ted: str | None = None
    window: int = 60
    seed: int = 0
    placebo_count: int = 100
    placebo_seed: int = 0
    regime: bool = True
    pin_stress: float | None = None
    quiet_bands: list = dataclasses.field(default_factory=lambda: [dict(b) for b in DEFAULT_QUIET])
    acf_max_lag: int = 120
    bootstrap_draws: int = 5000
    granger_max_lag: int = 10
    split_dates: list = dataclasses.field(default_factory=lambda: [
        "2010-01-01", "2012-01-01", "2014-01-01", "2016-01-01", "2018-01-01", "2020-01-01"])
    exclusion: list | None = None
    recipes: list = dataclasses.field(default_factory=lambda: list(DEFAULT_RECIPES))
    recipe_split_date: str | None = None
    horizons: list = dataclasses.field(default_factory=lambda: [30, 60, 90])
    windows: list = dataclasses.field(default_factory=lambda: [30, 45, 60, 90, 120])
    block: int = 60
    thin_step: int = 5
    stages: list = dataclasses.field(default_factory=lambda: list(STAGES))
    output: str = "report"

    def __post_init__(self):
        self.validate()

    def validate(self, check_files: bool = True):
        for name in ("prices", "vix"):
            if not isinstance(getattr(self, name), str):
                raise ConfigError(f"{name} must be a path string")
        for name in ("window", "seed", "placebo_count", "placebo_seed", "acf_max_lag", "bootstrap_draws",
                     "granger_max_lag", "block", "thin_step"):
            val = getattr(self, name)
            if not isinstance(val, int) or isinstance(val, bool) or val < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {val!r}")
        if self.window < 2:
            raise ConfigError("window must be at least 2")
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stage(s): {unknown}")
        for b in self.quiet_bands:
            _quiet_spec(b)
        for r in self.recipes:
            _parse_recipe(r, self.recipe_split_date or "2000-01-01")
        if self.exclusion is not None and len(self.exclusion) != 2:
            raise ConfigError("exclusion must be [start, end]")
        for d in list(self.split_dates) + list(self.exclusion or []) + [self.recipe_split_date or "2000-01-01"]:
            try:
                np.datetime64(d, "D")
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad date {d!r}") from exc
        if check_files:
            for name in ("prices", "vix", "move", "ted"):
                path = getattr(self, name)
                if path is not None and not Path(path).is_file():
                    raise ConfigError(f"{name} file not found: {path}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _quiet_spec(band: dict) -> QuietSpec:
    allowed = {"mode", "low", "high", "min_len", "window"}
    if not isinstance(band, dict) or set(band) - allowed:
        raise ConfigError(f"quiet band {band!r}: allowed keys are {sorted(allowed)}")
    try:
        mode = QuietMode(band.get("mode", "strict_daily"))
        return QuietSpec(mode, float(band["low"]), float(band["high"]), int(band.get("min_len", 120)),
                         int(band.get("window", 20)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"quiet band {band!r}: {exc}") from exc


def _parse_recipe(name: str, split_date) -> DecompRecipe:
    try:
        freeze, weights = name.split("/")
        fz = Freeze(freeze)
        return DecompRecipe(fz, Weights(weights), split_date if fz is Freeze.PRE_SPLIT_MEDIAN else None)
    except ValueError as exc:
        raise ConfigError(f"bad recipe {name!r}; expected '<freeze>/<weights>'") from exc


CONFIG_KEYS = {f.name for f in dataclasses.fields(ProtocolConfig)}
PATH_KEYS = ("prices", "vix", "move", "ted", "output")


def load_config(path, overrides: dict | None = None) -> ProtocolConfig:
    """Read a JSON config; relative paths resolve against the config file's directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(raw, path.parent)


def config_from_dict(raw: dict, base_dir=".") -> ProtocolConfig:
    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {unknown}")
    missing = [k for k in ("prices", "vix") if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {missing}")
    raw = dict(raw)
    for k in PATH_KEYS:
        if raw.get(k) is not None:
            p = Path(raw[k])
            raw[k] = str(p if p.is_absolute() else Path(base_dir) / p)
    try:
        return ProtocolConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Artifacts and report


class ArtifactStore:
    """Stage outputs keyed by name; reads are checked against the dependency graph."""

    def __init__(self):
        self._items = {}
        self._owner = {}
        self.stage = None

    def put(self, key, value):
        self._items[key] = value
        self._owner[key] = self.stage

    def get(self, key):
        owner = self._owner.get(key)
        if owner is None:
            raise KeyError(key)
        if owner != self.stage and owner not in STAGE_DEPS[self.stage]:
            raise RuntimeError(f"stage {self.stage!r} read {key!r} from undeclared dependency {owner!r}")
        return self._items[key]


@dataclasses.dataclass
class ProtocolReport:
    tables: OrderedDict = dataclasses.field(default_factory=OrderedDict)
    summary: OrderedDict = dataclasses.field(default_factory=OrderedDict)
    status: OrderedDict = dataclasses.field(default_factory=OrderedDict)
    manifest: dict = dataclasses.field(default_factory=dict)

    @property
    def failed(self) -> list:
        return [s for s, st in self.status.items() if st.startswith("failed")]

    def body(self) -> dict:
        return {"status": dict(self.status), "summary": dict(self.summary)}


def _clean(obj):
    """Plain JSON-able values (numpy scalars, dates, enums, tuples)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.datetime64):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    return obj


# ---------------------------------------------------------------------------
# Stages


def _fit_row(name, f):
    return {"model": name, "k": f.k, "loglik": f.loglik, "aic": f.aic, "bic": f.bic, "error": ""}


def stage_observables(cfg: ProtocolConfig, art: ArtifactStore):
    panel = load_returns(cfg.prices)
    vix = load_field(cfg.vix, "vix")
    psi_raw = psi1_series(panel, cfg.window)
    log_vix_full = vix.log("log_vix")
    psi, log_vix = align_many(psi_raw, log_vix_full)
    art.put("panel", panel)
    art.put("vix", vix)
    art.put("psi_raw", psi_raw)
    art.put("psi", psi)
    art.put("log_vix", log_vix)
    art.put("log_vix_full", log_vix_full)
    for name in ("move", "ted"):
        path = getattr(cfg, name)
        art.put(name, load_field(path, name).log(f"log_{name}") if path else None)
    rows = [{"date": str(d), "psi1": p, "log_vix": v} for d, p, v in zip(psi.dates, psi.values, log_vix.values)]
    summary = {"n_stocks": panel.n_stocks, "n_return_days": panel.n_days, "window": cfg.window,
               "n_obs": len(psi), "start": str(psi.dates[0]), "end": str(psi.dates[-1])}
    return {"observables": rows}, summary


def stage_models(cfg: ProtocolConfig, art: ArtifactStore):
    psi, v = art.get("psi"), art.get("log_vix")
    seed = cfg.seed
    specs = [("M0", bare_spec()), ("M1", ModelSpec(Family.QUARTIC)), ("M2", field_spec(v)),
             ("M2'", ModelSpec(Family.OU_FIELD_HETERO, (v,))), ("M3", ModelSpec(Family.QUARTIC_FIELD, (v,)))]
    fits, rows, params = {}, [], []
    for name, spec in specs:
        try:
            fits[name] = fit(spec, psi, seed)
        except (FieldAttrError, RuntimeError, ValueError) as exc:
            rows.append({"model": name, "k": spec.n_params, "loglik": math.nan, "aic": math.nan,
                         "bic": math.nan, "error": f"{type(exc).__name__}: {exc}"})
            continue
        rows.append(_fit_row(name, fits[name]))
    if cfg.regime:
        for name, with_field in (("M_RS,c", False), ("M_RS,c+VIX", True)):
            try:
                fits[name] = fit_rs(with_field, psi, v if with_field else None, seed, cfg.pin_stress)
                rows.append(_fit_row(name, fits[name]))
            except (FieldAttrError, RuntimeError, ValueError) as exc:
                rows.append({"model": name, "k": math.nan, "loglik": math.nan, "aic": math.nan, "bic": math.nan,
                             "error": f"{type(exc).__name__}: {exc}"})
    if "M0" not in fits or "M2" not in fits:
        raise RuntimeError("baseline M0/M2 fits failed")
    bic2 = fits["M2"].bic
    for r in rows:
        r["dbic_vs_m2"] = r["bic"] - bic2
    for name, f in fits.items():
        for k, val in f.params.items():
            params.append({"model": name, "param": k, "value": val})
    tables = {"model_comparison": rows, "model_params": params}

    lrt_rows = []
    for nested, full in (("M0", "M_RS,c"), ("M2", "M_RS,c+VIX")):
        if nested in fits and full in fits:
            t = lrt(fits[nested], fits[full])
            lrt_rows.append({"nested": nested, "full": full, "chi2": t.chi2, "df": t.df, "p": t.p})
    if lrt_rows:
        tables["lrt"] = lrt_rows
    attr = attribution(fits["M0"], fits["M2"])
    summary = {"tau_auto": attr.tau_auto, "tau_cond": attr.tau_cond, "chi": attr.chi, "scpa": attr.scpa,
               "dbic_m2_vs_m0": fits["M0"].bic - bic2,
               "mu_eff_log20": mu_eff(fits["M2"], math.log(20.0))}
    for name in ("M_RS,c", "M_RS,c+VIX"):
        if name in fits:
            summary[f"regime_stats[{name}]"] = dataclasses.asdict(fits[name].stats())

    aux_rows = []
    for aux_name in ("move", "ted"):
        aux = art.get(aux_name)
        if aux is None:
            continue
        y, vv, a = align_many(psi, v, aux)
        m0 = fit(bare_spec(), y, seed)
        cands = {"M2[VIX]": field_spec(vv), f"M2[{aux_name}]": field_spec(a),
                 f"two-field[VIX,{aux_name}]": ModelSpec(Family.OU_MULTIFIELD, (vv, a))}
        for label, spec in cands.items():
            f = fit(spec, y, seed)
            aux_rows.append({"field": aux_name, "model": label, "n_obs": len(y), "bic": f.bic,
                             "dbic_vs_m0": m0.bic - f.bic})
    if aux_rows:
        tables["aux_fields"] = aux_rows
    art.put("m0", fits["M0"])
    art.put("m2", fits["M2"])
    return tables, summary


def stage_placebo(cfg: ProtocolConfig, art: ArtifactStore):
    rep = placebo_gate(art.get("psi"), art.get("log_vix"), cfg.placebo_count, cfg.placebo_seed, Comparison.ONE_D)
    return {"placebo": rep.rows()}, rep.summary()


GRANGER_NAMES = {Direction.X_TO_Y: "vix->psi1", Direction.Y_TO_X: "psi1->vix"}


def stage_granger(cfg: ProtocolConfig, art: ArtifactStore):
    rows = []
    for diff in (False, True):
        res = granger(art.get("log_vix"), art.get("psi"), cfg.granger_max_lag, diff)
        for r in res.values():
            rows.append({"differenced": diff, "direction": GRANGER_NAMES[r.direction],
                         "lag": r.lag, "F": r.F, "p": r.p, "df_num": r.df_num, "df_den": r.df_den})
    return {"granger": rows}, {"n_tests": len(rows)}


def _recipe_split(cfg, psi: ObservableSeries):
    if cfg.recipe_split_date is not None:
        return cfg.recipe_split_date
    return str(psi.dates[len(psi) // 2])


def stage_decomposition(cfg: ProtocolConfig, art: ArtifactStore):
    panel, psi = art.get("panel"), art.get("psi")
    split = _recipe_split(cfg, psi)
    recipes = [_parse_recipe(r, split) for r in cfg.recipes]
    rows = recipe_grid(panel, rolling_correlation(panel, cfg.window), art.get("log_vix_full"), psi, recipes,
                       cfg.seed)
    summary = sign_invariance(rows)
    summary["recipe_split_date"] = split
    if rows[0].result is not None:
        summary.update({"f_mech": rows[0].result.mech_fraction, "f_info": rows[0].result.info_fraction})
    return {"decomposition": [r.record() for r in rows]}, summary


def stage_diagnostics(cfg: ProtocolConfig, art: ArtifactStore):
    psi, v, m0, m2 = art.get("psi"), art.get("log_vix"), art.get("m0"), art.get("m2")
    L = min(cfg.acf_max_lag, len(psi) - 2)
    raw = acf_summary(psi, L)
    stripped = acf_summary(field_stripped_residual(m2, psi, v), L)
    acf_rows = [{"lag": k, "raw": float(a), "field_stripped": float(b)}
                for k, (a, b) in enumerate(zip(raw.acf, stripped.acf))]
    quiet_rows = []
    vix = art.get("vix")
    for i, band in enumerate(cfg.quiet_bands):
        spec = _quiet_spec(band)
        segs = quiet_segments(vix, spec)
        row = {"band": i, "mode": spec.mode.value, "low": spec.low, "high": spec.high, "min_len": spec.min_len,
               "n_segments": len(segs), "days": sum(s.length for s in segs), "efolding_lag": math.nan,
               "ci_low": math.nan, "ci_high": math.nan, "integrated_60": math.nan}
        if segs:
            pooled = pooled_quiet_acf(psi, segs, cfg.acf_max_lag)
            row["integrated_60"] = pooled.integrated_60
            if pooled.efolding_lag is not None:
                row["efolding_lag"] = pooled.efolding_lag
                try:
                    ci = episode_bootstrap(psi, segs, cfg.bootstrap_draws, cfg.seed, cfg.acf_max_lag)
                    row["ci_low"], row["ci_high"] = ci.low, ci.high
                except (FieldAttrError, RuntimeError):
                    pass
        quiet_rows.append(row)
    pit_rows = []
    for name, f, fields in (("M0", m0, None), ("M2", m2, None)):
        s = pit_ks(pit_series(f, psi, fields))
        pit_rows.append({"model": name, "ks": s.ks, "critical_5pct": s.critical_5pct, "n": s.n,
                         "rejects": s.rejects})
    summary = {"efolding_raw": raw.efolding_lag, "efolding_stripped": stripped.efolding_lag,
               "integrated_60_raw": raw.integrated_60, "integrated_60_stripped": stripped.integrated_60}
    return {"acf": acf_rows, "quiet": quiet_rows, "pit": pit_rows}, summary


def stage_window_sweep(cfg: ProtocolConfig, art: ArtifactStore):
    rows = window_sweep(art.get("panel"), art.get("vix"), cfg.windows, cfg.seed)
    identity = None
    base = art.get("psi_raw")
    for r in rows:
        if r.W == cfg.window:
            identity = bool(np.array_equal(r.psi1.values, base.values) and np.array_equal(r.psi1.dates, base.dates))
    return {"window_sweep": [r.record() for r in rows]}, {"baseline_identity": identity}


def _pair_fit(name, y: ObservableSeries, v: ObservableSeries, seed):
    y, v = align_many(y, v)
    m0 = fit(bare_spec(), y, seed)
    m2 = fit(field_spec(v), y, seed)
    a = attribution(m0, m2)
    return {"series": name, "n_obs": len(y), "theta0": m0.params["theta"], "theta": m2.params["theta"],
            "beta": m2.params["beta"], "scpa": a.scpa, "dbic": m0.bic - m2.bic}


def stage_reconstructions(cfg: ProtocolConfig, art: ArtifactStore):
    panel, vix, log_vix = art.get("panel"), art.get("vix"), art.get("log_vix_full")
    weekly = weekly_disjoint_observables(panel)
    rows = [_pair_fit("weekly_psi1", weekly.psi1, log_vix, cfg.seed),
            _pair_fit("weekly_meancorr", weekly.meancorr, log_vix, cfg.seed)]
    blocks = block_observables(panel, vix, cfg.block)
    psi_b = ObservableSeries(blocks.end_dates, blocks.psi1, f"psi1_block{cfg.block}")
    for tag, vals in (("end", blocks.vix_end), ("mean", blocks.vix_mean)):
        v = ObservableSeries(blocks.end_dates, np.log(vals), f"log_vix_{tag}")
        try:
            rows.append(_pair_fit(f"block{cfg.block}_vix_{tag}", psi_b, v, cfg.seed))
        except (FieldAttrError, RuntimeError, ValueError) as exc:
            rows.append({"series": f"block{cfg.block}_vix_{tag}", "n_obs": len(blocks), "theta0": math.nan,
                         "theta": math.nan, "beta": math.nan, "scpa": math.nan, "dbic": math.nan,
                         "error": str(exc)})
    for r in rows:
        r.setdefault("error", "")
    return {"reconstructions": rows}, {"n_weekly": len(weekly.psi1), "n_blocks": len(blocks),
                                       "skipped_weekly": len(weekly.skipped)}


def stage_oos(cfg: ProtocolConfig, art: ArtifactStore):
    psi, v = art.get("psi"), art.get("log_vix")
    rows = [dict(r.record(), variant="baseline") for r in anchored_oos(psi, v, cfg.split_dates, cfg.seed)]
    if cfg.exclusion is not None:
        rows += [dict(r.record(), variant="exclusion")
                 for r in anchored_oos(psi, v, cfg.split_dates, cfg.seed, cfg.exclusion)]
    gaps = [r["gap"] for r in rows if r["variant"] == "baseline"]
    return {"oos": rows}, {"min_gap": min(gaps), "max_gap": max(gaps), "all_positive": all(g > 0 for g in gaps)}


def stage_twod(cfg: ProtocolConfig, art: ArtifactStore):
    psi, v = art.get("psi"), art.get("log_vix")
    daily = align(psi, v)
    weekly = weekly_disjoint_observables(art.get("panel"))
    log_vix = art.get("log_vix_full")
    datasets = [("daily", daily), (f"thinned_{cfg.thin_step}", thin(daily, cfg.thin_step)),
                ("weekly_psi1", align(weekly.psi1, log_vix)), ("weekly_meancorr", align(weekly.meancorr, log_vix))]
    rows = []
    for name, pair in datasets:
        try:
            rows.append(compare_structures(pair, cfg.seed, name).row())
        except (FieldAttrError, RuntimeError, ValueError) as exc:
            rows.append({"dataset": name, "winner": "", "dbic_vs_next": math.nan, "dbic_vs_decoupled": math.nan,
                         "kernel_timescale": math.nan, "kernel_amplitude": math.nan,
                         "error": f"{type(exc).__name__}: {exc}"})
    for r in rows:
        r.setdefault("error", "")
    rep = placebo_gate(psi, v, cfg.placebo_count, cfg.placebo_seed, Comparison.TWO_D)
    return {"twod": rows, "twod_placebo": rep.rows()}, rep.summary()


def stage_residual_state(cfg: ProtocolConfig, art: ArtifactStore):
    psi, v = art.get("psi"), art.get("log_vix")
    ortho = orthogonal_residual(psi, v)
    dates, labels = quadrant_labels(v, ortho.residual)
    tests = horizon_test(dates, labels, v, cfg.horizons)
    occupancy = {q.value: int(np.sum(labels == q)) for q in Quadrant}
    summary = {"a": ortho.a, "b": ortho.b, "occupancy": occupancy, "overlapping_windows": True}
    return {"residual_state": [t.record() for t in tests]}, summary


STAGE_FUNCS = {name: globals()[f"stage_{name}"] for name in STAGES}


# ---------------------------------------------------------------------------
# Runner


def _versions() -> dict:
    import numba
    import pandas
    import scipy
    return {"fieldattr": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pandas.__version__, "numba": numba.__version__}


def run_protocol(cfg: ProtocolConfig, log=None) -> ProtocolReport:
    """Run the enabled stages in order; failures are recorded and dependents skipped."""
    report = ProtocolReport()
    art = ArtifactStore()
    enabled = set(cfg.stages)
    for stage in STAGES:
        if stage not in enabled:
            report.status[stage] = "disabled"
            continue
        blocked = [d for d in STAGE_DEPS[stage] if report.status.get(d) != "ok"]
        if blocked:
            report.status[stage] = f"skipped: needs {', '.join(blocked)}"
            continue
        art.stage = stage
        if log:
            log(f"stage {stage} ...")
        try:
            tables, summary = STAGE_FUNCS[stage](cfg, art)
        except Exception as exc:  # noqa: BLE001 - any stage error is recorded, not raised
            report.status[stage] = f"failed: {type(exc).__name__}: {exc}"
            report.summary[stage] = {"traceback": traceback.format_exc(limit=3).splitlines()[-1]}
            continue
        report.status[stage] = "ok"
        for name, rows in tables.items():
            report.tables[name] = [_clean(r) for r in rows]
        report.summary[stage] = _clean(summary)
    report.manifest = {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "versions": _versions(),
        "seeds": {"seed": cfg.seed, "placebo_seed": cfg.placebo_seed},
        "random_generator": "numpy Philox (counter-based)",
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "tables": list(report.tables),
    }
    return report


# ---------------------------------------------------------------------------
# Emission


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _parse_cell(s: str):
    if s == "":
        return ""
    if s in ("True", "False"):
        return s == "True"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _columns(rows: list) -> list:
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def emit(report: ProtocolReport, directory) -> list:
    """Write one CSV per table, ``summary.json`` for the body and ``manifest.json``.

    An empty report writes the manifest only. Floats are written with ``repr``
    so tables parse back to identical values.
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FieldAttrError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for name, rows in report.tables.items():
        path = out / f"{name}.csv"
        cols = _columns(rows)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_cell(r.get(c)) for c in cols])
        written.append(path)
    if report.tables or report.summary:
        path = out / "summary.json"
        path.write_text(json.dumps(report.body(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    path = out / "manifest.json"
    path.write_text(json.dumps(_clean(report.manifest), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def read_table(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        return [{c: _parse_cell(v) for c, v in zip(cols, row)} for row in reader]


def read_report(directory) -> ProtocolReport:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    report = ProtocolReport(manifest=manifest)
    for name in manifest.get("tables", []):
        report.tables[name] = read_table(d / f"{name}.csv")
    if (d / "summary.json").exists():
        body = json.loads((d / "summary.json").read_text())
        report.status.update(body["status"])
        report.summary.update(body["summary"])
    return report


def body_files(directory) -> dict:
    """Raw bytes of every emitted file except the manifest (which carries timestamps)."""
    d = Path(directory)
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}
