"""Pipeline configuration: one INI file with a section per stage."""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from brennan.errors import ConfigError

OUTPUT_ENV = "BRENNAN_OUTPUT_DIR"


@dataclass(frozen=True)
class PolygonConfig:
    n: int = 300
    max_word_length: int = 12
    sep_min: float = 1e-4
    cluster_size: int = 10
    cluster_n: int = 100


@dataclass(frozen=True)
class ConformalConfig:
    tol_vertex: float = 1e-6
    tol_inv: float = 1e-9
    quadrature_nodes: int = 8
    max_iters: int = 200
    center: str = "origin"  # or "centroid"
    drop_crowded: bool = True


@dataclass(frozen=True)
class FitConfig:
    samples: int = 500
    max_radius: float = 0.9
    multistarts: int = 8


@dataclass(frozen=True)
class SeriesConfig:
    max_n: int = 14
    n_min: int = 6
    p_list: tuple[float, ...] = (4.0,)
    bracket: tuple[float, float] = (5.0, 6.0)
    tol: float = 0.02
    homomorphism: str = "fitted"  # or "trivial"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    polygon: PolygonConfig = field(default_factory=PolygonConfig)
    conformal: ConformalConfig = field(default_factory=ConformalConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    series: SeriesConfig = field(default_factory=SeriesConfig)
    output_dir: str = "brennan-output"

    def validate(self) -> PipelineConfig:
        p, c, f, s = self.polygon, self.conformal, self.fit, self.series
        checks = [
            (p.n >= 3, "polygon.n must be at least 3"),
            (p.max_word_length >= 1, "polygon.max_word_length must be at least 1"),
            (p.sep_min > 0, "polygon.sep_min must be positive"),
            (p.cluster_size >= 5, "polygon.cluster_size must be at least 5"),
            (p.cluster_n >= 3, "polygon.cluster_n must be at least 3"),
            (c.tol_vertex > 0 and c.tol_inv > 0, "conformal tolerances must be positive"),
            (c.quadrature_nodes >= 2, "conformal.quadrature_nodes must be at least 2"),
            (c.max_iters >= 1, "conformal.max_iters must be positive"),
            (c.center in ("origin", "centroid"), "conformal.center must be origin or centroid"),
            (f.samples >= 8, "fit.samples must be at least 8"),
            (0 < f.max_radius <= 1, "fit.max_radius must lie in (0, 1]"),
            (f.multistarts >= 1, "fit.multistarts must be positive"),
            (s.max_n >= 1, "series.max_n must be at least 1"),
            (s.max_n - s.n_min >= 2, "series.max_n - series.n_min must be at least 2"),
            (len(s.p_list) >= 1, "series.p_list must not be empty"),
            (s.bracket[0] < s.bracket[1], "series.bracket needs lo < hi"),
            (s.tol > 0, "series.tol must be positive"),
            (s.homomorphism in ("fitted", "trivial"), "series.homomorphism must be fitted or trivial"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["series"]["p_list"] = list(self.series.p_list)
        d["series"]["bracket"] = list(self.series.bracket)
        return d

    def digest(self) -> str:
        """Hash of everything that affects artifacts (the output location does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> PipelineConfig:
        """Override by ``section__field`` or top-level name; ``None`` values are ignored."""
        cfg = self
        for key, val in kw.items():
            if val is None:
                continue
            if "__" in key:
                sec, name = key.split("__", 1)
                cfg = replace(cfg, **{sec: replace(getattr(cfg, sec), **{name: val})})
            else:
                cfg = replace(cfg, **{key: val})
        return cfg


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _convert(cls, name: str, text: str):
    default = getattr(cls(), name)
    if isinstance(default, bool):
        return configparser.ConfigParser.BOOLEAN_STATES[text.strip().lower()]
    if isinstance(default, tuple):
        return _floats(text)
    return type(default)(text.strip())


_SECTIONS = {
    "polygon": PolygonConfig,
    "conformal": ConformalConfig,
    "fit": FitConfig,
    "series": SeriesConfig,
}


def load_config(path=None) -> PipelineConfig:
    """Read an INI file; missing keys keep their defaults."""
    cfg = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        cp = configparser.ConfigParser()
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        unknown = set(cp.sections()) - set(_SECTIONS) - {"run"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        try:
            if cp.has_section("run"):
                run = cp["run"]
                for key in run:
                    if key == "seed":
                        kw["seed"] = int(run[key])
                    elif key == "output_dir":
                        kw["output_dir"] = run[key]
                    else:
                        raise ConfigError(f"unknown key run.{key}")
            for sec, cls in _SECTIONS.items():
                if not cp.has_section(sec):
                    continue
                names = {f.name for f in fields(cls)}
                for key, text in cp[sec].items():
                    if key not in names:
                        raise ConfigError(f"unknown key {sec}.{key}")
                    kw[f"{sec}__{key}"] = _convert(cls, key, text)
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from exc
        cfg = cfg.with_overrides(**kw)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        cfg = replace(cfg, output_dir=env)
    return cfg


def write_config(cfg: PipelineConfig, path) -> None:
    cp = configparser.ConfigParser()
    cp["run"] = {"seed": str(cfg.seed), "output_dir": cfg.output_dir}
    d = cfg.to_dict()
    for sec in _SECTIONS:
        cp[sec] = {
            k: ", ".join(repr(x) for x in v) if isinstance(v, list) else str(v) for k, v in d[sec].items()
        }
    with open(path, "w") as fh:
        cp.write(fh)
