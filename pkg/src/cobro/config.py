"""INI-style experiment configuration (see the bundled ``default.cfg``)."""
import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .ctmc import Generator, RegimeConfig
from .fourier import FourierGrid, MarketParams


class ConfigError(ValueError):
    """Missing, malformed or inconsistent configuration."""


def default_path():
    return resources.files("cobro").joinpath("default.cfg")


def parse_vector(text):
    try:
        return np.array([float(v) for v in text.split()])
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def parse_rows(text):
    return [parse_vector(row) for row in text.split(";") if row.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketParams
    regime: RegimeConfig
    fourier: FourierGrid
    seed: int
    paths: int
    output_dir: Path
    parser: configparser.ConfigParser = field(repr=False, compare=False)

    def get(self, section, key, fallback=None):
        try:
            return self.parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is None:
                raise ConfigError(f"missing [{section}] {key}") from None
            return fallback

    def get_float(self, section, key, fallback=None):
        raw = self.get(section, key, None if fallback is None else str(fallback))
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} is not a number: {raw!r}") from exc

    def get_int(self, section, key, fallback=None):
        value = self.get_float(section, key, fallback)
        if value != int(value):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(value)

    def regime_named(self, name, q0=None):
        """Regime from section ``name``; missing entries are taken from ``[regime]``."""
        if not self.parser.has_section(name):
            raise ConfigError(f"no section [{name}]")
        sec = self.parser[name]
        base = self.parser["regime"]
        try:
            gen = Generator(np.array(parse_rows(sec.get("generator", base["generator"]))))
            return RegimeConfig(gen, q0 if q0 is not None else parse_vector(sec.get("q0", base["q0"])),
                                parse_vector(sec.get("alpha", base["alpha"])))
        except ConfigError:
            raise
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"[{name}]: {exc}") from exc


def load(path=None, seed=None, output_dir=None):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    source = Path(path) if path is not None else default_path()
    try:
        text = source.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for name in ("market", "regime", "fourier", "run"):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    try:
        m = parser["market"]
        market = MarketParams(m.getfloat("r"), m.getfloat("s0_1"), m.getfloat("s0_2"),
                              m.getfloat("sigma1"), m.getfloat("sigma2"))
        f = parser["fourier"]
        grid = FourierGrid(f.getint("n1"), f.getint("n"), f.getfloat("eta1"), f.getfloat("eta"),
                           f.getfloat("lam1_im"), f.getfloat("lam_im"))
        run = parser["run"]
        cfg_seed = int(seed if seed is not None else run.getint("seed"))
        paths = run.getint("paths")
        out = Path(output_dir if output_dir is not None else run.get("output_dir", "out"))
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not 0 <= cfg_seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    cfg = ExperimentConfig(market, None, grid, cfg_seed, paths, out, parser)
    object.__setattr__(cfg, "regime", cfg.regime_named("regime"))
    return cfg
