"""Line-oriented ``section.key = value`` run configuration."""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..biasing import SimulationConfig
from ..errors import ConfigError
from ..model.config import ModelConfig, _coerce
from ..synth import SynthConfig
from ..training import TrainConfig

PRESETS = ("toy", "full")


@dataclass
class PathsConfig:
    vocab: str = ""
    train_manifest: str = ""
    eval_manifest: str = ""
    checkpoint_dir: str = "checkpoints"
    out_dir: str = "corpus"


@dataclass
class DecodeConfig:
    max_len: int = 50
    seed: int = 0


@dataclass
class RunConfig:
    preset: str = "toy"
    model: ModelConfig = field(default_factory=ModelConfig.toy)
    sim: SimulationConfig = field(default_factory=SimulationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    base_dir: Path = field(default=Path("."), compare=False)

    def path(self, key):
        """A ``paths`` entry resolved against the config file's directory."""
        value = getattr(self.paths, key)
        if not value:
            raise ConfigError(f"paths.{key} is not set")
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self, need_vocab_size=False):
        m = self.model
        if not need_vocab_size and m.vocab_size == 0:
            m = replace(m, vocab_size=1)
        m.validate()
        self.train.validate()
        self.synth.validate()
        if self.decode.max_len < 0:
            raise ConfigError("decode.max_len must be >= 0")
        return self

    def items(self):
        """Every setting as ``(section.key, value)``, in a stable order."""
        yield "run.preset", self.preset
        for key, value in self.model.to_flat().items():
            yield f"model.{key}", value
        for name in ("sim", "train", "synth", "decode", "paths"):
            section = getattr(self, name)
            for f in fields(section):
                yield f"{name}.{f.name}", getattr(section, f.name)

    def dumps(self):
        return "".join(f"{k} = {v}\n" for k, v in self.items())


def _section_from(cls, base, values, section):
    kwargs = {}
    known = {f.name for f in fields(cls)}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown setting {section}.{key}")
        kwargs[key] = _coerce(raw, getattr(base, key))
    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text, base_dir=".", overrides=()):
    """Build a RunConfig from config text plus ``section.key=value`` overrides."""
    sections = {}
    lines = [(n, line) for n, line in enumerate(text.splitlines(), 1)]
    lines += [(f"override {i + 1}", o) for i, o in enumerate(overrides)]
    for n, line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or "." not in key:
            raise ConfigError(f"line {n}: expected 'section.key = value', got {line!r}")
        section, name = key.split(".", 1)
        sections.setdefault(section, {})[name] = value.strip()
    unknown = set(sections) - {"run", "model", "sim", "train", "synth", "decode", "paths"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    preset = sections.get("run", {}).pop("preset", "toy")
    if sections.get("run"):
        raise ConfigError(f"unknown setting run.{next(iter(sections['run']))}")
    if preset not in PRESETS:
        raise ConfigError(f"run.preset must be one of {PRESETS}, got {preset!r}")
    model = ModelConfig.toy() if preset == "toy" else ModelConfig()
    if "model" in sections:
        model = ModelConfig.from_flat({**model.to_flat(), **sections["model"]})
    cfg = RunConfig(
        preset=preset,
        model=model,
        sim=_section_from(SimulationConfig, SimulationConfig(), sections.get("sim", {}), "sim"),
        train=_section_from(TrainConfig, TrainConfig(), sections.get("train", {}), "train"),
        synth=_section_from(SynthConfig, SynthConfig(), sections.get("synth", {}), "synth"),
        decode=_section_from(DecodeConfig, DecodeConfig(), sections.get("decode", {}), "decode"),
        paths=_section_from(PathsConfig, PathsConfig(), sections.get("paths", {}), "paths"),
        base_dir=Path(base_dir),
    )
    return cfg.validate()


def load_config(path=None, overrides=()):
    if path is None:
        return parse_config("", ".", overrides)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, Path(path).parent, overrides)
