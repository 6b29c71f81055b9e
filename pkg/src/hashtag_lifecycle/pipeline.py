"""End-to-end pipeline: detection through model tables, persisted as flat files."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .episodes import EpisodeConfig, detect_all, build_episode
from .events import EventStream, read_events
from .growth import ArmaErrorRegression, DesignError, build_design, diagnostics
from .report import cox_table, curve_table, growth_table, render_frame
from .survival import KaplanMeier, build_records, fit_cox
from .synth import ScenarioSpec, gen_debate_scenario, standard_scenario
from .taxonomy import ALSO_RAN, WINNER, label_classes
from .trajectory import TrajectoryAnalyzer
from .vibrancy import VibrancyExtractor

log = logging.getLogger(__name__)

__all__ = ["STAGES", "ConfigError", "PipelineConfig", "ReportBundle", "run_pipeline", "emit_tables", "emit_plotdata", "load_config"]

STAGES = ["detect", "features", "curves", "classify", "fit-growth", "fit-survival"]
_REQUIRES = {
    "detect": [],
    "features": ["detect"],
    "curves": ["features"],
    "classify": ["curves"],
    "fit-growth": ["classify"],
    "fit-survival": ["classify"],
}
CLASSES = (WINNER, ALSO_RAN)
_FLOAT = "%.10g"


class ConfigError(ValueError):
    pass


def stage_closure(stage: str) -> list:
    """``stage`` plus everything it depends on, in run order."""
    need = {stage}
    frontier = [stage]
    while frontier:
        for dep in _REQUIRES[frontier.pop()]:
            if dep not in need:
                need.add(dep)
                frontier.append(dep)
    return [s for s in STAGES if s in need]


@dataclass
class PipelineConfig:
    """Run settings.

    Either ``inputs`` (event files) or ``scenario`` (a synthetic scenario
    dict; ``{"standard": true}`` selects the built-in one) supplies the stream.
    """

    episodes: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    scenario: Optional[dict] = None
    keywords: Optional[list] = None
    out: str = "out"
    stages: list = field(default_factory=lambda: list(STAGES))
    with_env: bool = False
    seed: int = 0
    top_n: int = 5
    input_format: Optional[str] = None
    final_sizes: Optional[dict] = None

    def __post_init__(self):
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stages {unknown}; choose from {STAGES}")
        if not self.stages:
            raise ConfigError("at least one stage must be enabled")
        for s in self.stages:
            missing = [d for d in _REQUIRES[s] if d not in self.stages]
            if missing:
                raise ConfigError(f"stage {s!r} needs {missing}")
        if not self.inputs and self.scenario is None:
            raise ConfigError("config needs input files or a scenario")
        if self.top_n < 1:
            raise ConfigError("top_n must be positive")
        self.stages = [s for s in STAGES if s in self.stages]
        self.episodes = [e if isinstance(e, EpisodeConfig) else EpisodeConfig.from_dict(e) for e in self.episodes]
        if self.keywords is not None:
            kws = tuple(self.keywords)
            self.episodes = [EpisodeConfig(**{**e.__dict__, "keywords": kws}) for e in self.episodes]

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "episodes": [e.to_dict() for e in self.episodes],
            "inputs": [str(p) for p in self.inputs],
            "scenario": self.scenario,
            "keywords": self.keywords,
            "stages": list(self.stages),
            "with_env": self.with_env,
            "seed": self.seed,
            "top_n": self.top_n,
            "input_format": self.input_format,
            "final_sizes": self.final_sizes,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def load_config(path) -> dict:
    """Read a JSON or YAML config file into a dict."""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return data


@dataclass
class ReportBundle:
    config: PipelineConfig
    detected: Optional[pd.DataFrame] = None
    frames: Optional[pd.DataFrame] = None
    summaries: Optional[pd.DataFrame] = None
    assignments: Optional[pd.DataFrame] = None
    growth: dict = field(default_factory=dict)
    survival: dict = field(default_factory=dict)
    km: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    stages_run: list = field(default_factory=list)
    failure: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return not self.errors


# -- stream acquisition --------------------------------------------------------------------


def _load_stream(cfg: PipelineConfig) -> tuple:
    if cfg.scenario is not None:
        sc = dict(cfg.scenario)
        if sc.get("standard", False):
            spec = standard_scenario(int(sc.get("seed", cfg.seed)), zero_noise=bool(sc.get("zero_noise", False)))
        else:
            spec = ScenarioSpec.from_dict(sc)
        stream, truth = gen_debate_scenario(spec)
        episodes = cfg.episodes or spec.episodes
        if cfg.keywords is not None:
            episodes = [EpisodeConfig(**{**e.__dict__, "keywords": tuple(cfg.keywords)}) for e in episodes]
        digest = hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest()
        return stream, episodes, digest
    h = hashlib.sha256()
    streams = []
    for p in cfg.inputs:
        data = Path(p).read_bytes()
        h.update(data)
        streams.append(read_events(p, format=cfg.input_format))
    if len(streams) == 1:
        stream = streams[0]
    else:
        stream = EventStream.from_events([e for s in streams for e in s.events])
    if not cfg.episodes:
        raise ConfigError("input files need at least one episode config")
    return stream, cfg.episodes, h.hexdigest()


# -- stages -----------------------------------------------------------------------------------


class _Run:
    def __init__(self, cfg: PipelineConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.bundle = ReportBundle(config=cfg)
        self.episodes = []
        self.analyzers = {}
        self.summary_objs = {}
        self.class_of = {}

    def write(self, rel: str, text: str) -> None:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.bundle.files.append(rel)

    def write_csv(self, rel: str, df: pd.DataFrame) -> None:
        self.write(rel, df.to_csv(index=False, float_format=_FLOAT, lineterminator="\n"))

    # detect
    def detect(self, stream, configs):
        dets = detect_all(stream, configs)
        tables = [d.table(stream) for d in dets]
        detected = pd.concat(tables, ignore_index=True) if tables else pd.DataFrame(columns=["tag", "episode_id", "t0", "user_count"])
        self.bundle.detected = detected
        self.write_csv("detected_tags.csv", detected)
        by_id = {c.episode_id: c for c in configs}
        for row in detected.itertuples():
            self.episodes.append(build_episode(stream, by_id[row.episode_id], row.tag))

    def features(self):
        frames = VibrancyExtractor(with_env=True).transform(self.episodes)
        self.bundle.frames = frames
        self.write_csv("frames.csv", frames)

    def curves(self):
        rows, diag = [], []
        frames = self.bundle.frames
        for ep in self.episodes:
            fr = frames[(frames["episode_id"] == ep.episode_id) & (frames["tag"] == ep.tag)]
            an = TrajectoryAnalyzer().fit(fr["minute"].to_numpy(), np.cumsum(fr["y"].to_numpy()))
            s = an.summary_
            self.analyzers[ep.tag] = an
            self.summary_objs[ep.tag] = s
            rows.append({"episode_id": ep.episode_id, "tag": ep.tag, **s.as_row()})
            diag.append(
                {
                    "episode_id": ep.episode_id,
                    "tag": ep.tag,
                    "method": s.method,
                    "lam": s.lam,
                    "t_m": s.t_m,
                    **{f"t_star_delta_{d:g}": v for d, v in sorted(s.t_star_sensitivity.items())},
                }
            )
        cols = ["episode_id", "tag", "total", "growth_tpm", "persistence_min", "t0", "t_star", "t_e"]
        self.bundle.summaries = pd.DataFrame(rows, columns=cols)
        self.write_csv("curve_summaries.csv", self.bundle.summaries)
        self.write_csv("curve_diagnostics.csv", pd.DataFrame(diag))

    def classify(self):
        s = self.bundle.summaries
        feats = pd.DataFrame(
            {"tag": s["tag"], "final_size": s["total"], "growth": s["growth_tpm"], "persistence": s["persistence_min"]}
        )
        if len(feats) < 2:
            raise DesignError(f"classification needs at least 2 hashtags, got {len(feats)}")
        assignments, model = label_classes(feats, random_state=self.cfg.seed)
        cls = {a.tag: a.cls for a in assignments}
        self.class_of = cls
        df = feats.assign(**{"class": feats["tag"].map(cls)})[["tag", "class", "growth", "persistence", "final_size"]]
        df = df.sort_values("tag", kind="mergesort").reset_index(drop=True)
        self.bundle.assignments = df
        self.write_csv("assignments.csv", df)
        if model.degenerate_:
            self.bundle.errors.append({"stage": "classify", "type": "warning", "message": "degenerate clustering: identical trajectories"})
        for c in CLASSES:
            sub = s[s["tag"].map(cls) == c].sort_values("total", ascending=False, kind="mergesort")
            txt = curve_table(sub)
            self.write_csv(f"tables/hashtags_{c}.csv", txt)
            self.write(f"tables/hashtags_{c}.txt", render_frame(txt, f"{c} hashtags"))

    def fit_growth(self):
        variants = [("growth_models", False)] + ([("growth_models_env", True)] if self.cfg.with_env else [])
        for name, env in variants:
            fits, notes, diags = {}, [], []
            for c in CLASSES:
                try:
                    design = build_design(self.bundle.frames, self.summary_objs, self.class_of, c, with_env=env)
                    model = ArmaErrorRegression(order=(2, 1)).fit(design.X, design.y, groups=design.groups, feature_names=design.columns)
                except DesignError as exc:
                    fits[c] = None
                    notes.append(f"{c}: {exc}")
                    continue
                fits[c] = model.result_
                rep = diagnostics(model, design)
                diags.append(rep.frame().assign(**{"class": c, "ljung_box": rep.ljung_box, "ljung_box_df": rep.ljung_box_df, "ljung_box_p": rep.ljung_box_p}))
                for tag, why in design.excluded.items():
                    notes.append(f"{c}: excluded {tag} ({why})")
            title = "Growth models with co-occurring hashtags" if env else "Growth models"
            table = growth_table(fits, title=title)
            table.notes.extend(notes)
            self.bundle.growth[name] = fits
            self.bundle.tables[name] = table
            self.write(f"tables/{name}.csv", table.to_csv())
            self.write(f"tables/{name}.txt", table.render())
            if diags:
                self.write_csv(f"tables/{name}_residuals.csv", pd.concat(diags, ignore_index=True))

    def fit_survival(self):
        frames = self.bundle.frames
        variants = [("persistence_models", False)] + ([("persistence_models_env", True)] if self.cfg.with_env else [])
        records = {c: build_records(frames, self.summary_objs, self.class_of, c, final_sizes=self.cfg.final_sizes) for c in CLASSES}
        for name, env in variants:
            fits, notes = {}, []
            for c in CLASSES:
                try:
                    fits[c] = fit_cox(records[c], frames, with_env=env)
                except ValueError as exc:
                    fits[c] = None
                    notes.append(f"{c}: {exc}")
            title = "Persistence models with co-occurring hashtags" if env else "Persistence models"
            table = cox_table(fits, title=title)
            table.notes.extend(notes)
            self.bundle.survival[name] = fits
            self.bundle.tables[name] = table
            self.write(f"tables/{name}.csv", table.to_csv())
            self.write(f"tables/{name}.txt", table.render())
        for c in CLASSES:
            if not records[c]:
                continue
            km = KaplanMeier().fit([r.duration for r in records[c]], [r.event for r in records[c]])
            self.bundle.km[c] = km.curve_
            self.write_csv(f"km_{c}.csv", km.curve_.frame()[["t", "S", "lower", "upper", "at_risk"]])


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> dict:
    import scipy
    import sklearn

    return {
        "hashtag_lifecycle": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
    }


def run_pipeline(config: PipelineConfig, out: Optional[str] = None) -> ReportBundle:
    """Run the enabled stages in order, persisting each stage's files.

    A failing stage stops the run; the files written so far stay in place and
    ``errors.json`` describes the failure.  Wall-clock timings are kept on the
    bundle only, so reruns produce byte-identical trees.
    """
    out_dir = Path(out or config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = _Run(config, out_dir)
    b = run.bundle
    stream, configs, input_hash = _load_stream(config)
    steps = {
        "detect": lambda: run.detect(stream, configs),
        "features": run.features,
        "curves": run.curves,
        "classify": run.classify,
        "fit-growth": run.fit_growth,
        "fit-survival": run.fit_survival,
    }
    failure = None
    for stage in config.stages:
        t = time.perf_counter()
        try:
            steps[stage]()
        except Exception as exc:  # recorded, then re-raised after the manifest is written
            failure = exc
            b.errors.append({"stage": stage, "type": type(exc).__name__, "message": str(exc)})
            log.error("stage %s failed: %s", stage, exc)
            break
        finally:
            b.timings[stage] = time.perf_counter() - t
        b.stages_run.append(stage)

    if b.frames is not None and "curves" in b.stages_run:
        emit_plotdata(b, out_dir, run=run)

    err_path = out_dir / "errors.json"
    if b.errors:
        err_path.write_text(json.dumps(b.errors, indent=2, sort_keys=True) + "\n")
        b.files.append("errors.json")
    elif err_path.exists():
        err_path.unlink()

    b.manifest = {
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "input_sha256": input_hash,
        "seed": config.seed,
        "stages": b.stages_run,
        "versions": _versions(),
        "outputs": {f: _sha(out_dir / f) for f in sorted(set(b.files))},
    }
    (out_dir / "manifest.json").write_text(json.dumps(b.manifest, indent=2, sort_keys=True) + "\n")
    b.failure = failure
    return b


def emit_tables(bundle: ReportBundle, directory) -> list:
    """Write every model table of ``bundle`` as CSV and aligned text."""
    d = Path(directory)
    (d / "tables").mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in sorted(bundle.tables.items()):
        for ext, text in (("csv", table.to_csv()), ("txt", table.render())):
            p = d / "tables" / f"{name}.{ext}"
            p.write_text(text)
            written.append(p)
    return written


def emit_plotdata(bundle: ReportBundle, directory, run: Optional[_Run] = None, top_n: Optional[int] = None) -> list:
    """Per-tag observed/fitted/tangent CSVs, a top-N cumulative overlay and KM curves."""
    d = Path(directory)
    top_n = top_n or bundle.config.top_n
    written = []

    def put(rel, df):
        p = d / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(df.to_csv(index=False, float_format=_FLOAT, lineterminator="\n"))
        bundle.files.append(rel)
        written.append(p)

    analyzers = run.analyzers if run is not None else {}
    summaries = bundle.summaries
    for row in summaries.itertuples():
        an = analyzers.get(row.tag)
        if an is None:
            fr = bundle.frames[bundle.frames["tag"] == row.tag]
            an = TrajectoryAnalyzer().fit(fr["minute"].to_numpy(), np.cumsum(fr["y"].to_numpy()))
        put(f"plots/curves/{row.episode_id}_{row.tag}.csv", an.plot_frame())
        bundle.plots[row.tag] = f"plots/curves/{row.episode_id}_{row.tag}.csv"
    top = summaries.sort_values(["total", "tag"], ascending=[False, True], kind="mergesort").head(top_n)
    parts = []
    for tag in top["tag"]:
        fr = bundle.frames[bundle.frames["tag"] == tag]
        parts.append(pd.DataFrame({"tag": tag, "minute": fr["minute"].to_numpy(), "cumulative": np.cumsum(fr["y"].to_numpy())}))
    overlay = pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(columns=["tag", "minute", "cumulative"])
    put(f"plots/overlay_top{top_n}.csv", overlay)
    for c, curve in sorted(bundle.km.items()):
        put(f"plots/km_{c}.csv", curve.frame()[["t", "S", "lower", "upper", "at_risk"]])
    return written
