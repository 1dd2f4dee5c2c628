from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError


@dataclass
class LossWeights:
    ctc: float = 0.3
    ce: float = 0.7
    bce: float = 1.0


@dataclass
class ModelConfig:
    """Network sizes. Defaults are the full-scale settings; see ``toy()``."""

    d_model: int = 256
    n_heads: int = 4
    d_ffn: int = 2048
    audio_layers: int = 12
    context_layers: int = 12
    decoder_layers: int = 6
    conv_window: int = 2          # half-span of the biasing conv: span = 2 * window + 1
    vocab_size: int = 0
    feature_dim: int = 80
    loss_weights: LossWeights = field(default_factory=LossWeights)
    use_conformer_conv: bool = True
    conformer_kernel: int = 15
    context_positions: bool = True
    label_smoothing: float = 0.1
    dropout: float = 0.1          # only active inside a dropout_scope (training)
    ln_eps: float = 1e-5

    @classmethod
    def toy(cls, **overrides):
        base = dict(d_model=32, n_heads=2, d_ffn=64, audio_layers=2, context_layers=2, decoder_layers=1,
                    use_conformer_conv=False, dropout=0.05)
        base.update(overrides)
        return cls(**base)

    @property
    def conv_span(self):
        return 2 * self.conv_window + 1

    def validate(self):
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(f"d_model={self.d_model} must be a positive multiple of n_heads={self.n_heads}")
        for name in ("d_ffn", "audio_layers", "context_layers", "decoder_layers", "feature_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if self.vocab_size < 1:
            raise ConfigError("model.vocab_size must be set")
        if self.conv_window < 0:
            raise ConfigError(f"model.conv_window must be >= 0, got {self.conv_window}")
        if self.conformer_kernel < 1 or self.conformer_kernel % 2 == 0:
            raise ConfigError(f"model.conformer_kernel must be odd, got {self.conformer_kernel}")
        w = self.loss_weights
        if min(w.ctc, w.ce, w.bce) < 0 or (w.ctc == 0 and w.ce == 0 and w.bce == 0):
            raise ConfigError(f"loss weights must be >= 0 and not all zero, got {w}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"model.dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"model.label_smoothing must lie in [0, 1), got {self.label_smoothing}")
        return self

    def to_flat(self):
        """``{"d_model": 256, ..., "loss_weights.ctc": 0.3, ...}``."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, LossWeights):
                out.update({f"loss_weights.{k}": v for k, v in asdict(value).items()})
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_flat(cls, flat):
        kwargs, weights = {}, {}
        types = {f.name: f.type for f in fields(cls)}
        for key, value in flat.items():
            if key.startswith("loss_weights."):
                weights[key.split(".", 1)[1]] = float(value)
            elif key in types:
                kwargs[key] = _coerce(value, getattr(cls(), key))
            else:
                raise ConfigError(f"unknown model setting {key!r}")
        if weights:
            kwargs["loss_weights"] = LossWeights(**weights)
        return cls(**kwargs)


def _coerce(value, like):
    if not isinstance(value, str):
        return value
    if isinstance(like, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    try:
        return type(like)(value)
    except ValueError as exc:
        raise ConfigError(f"expected {type(like).__name__}, got {value!r}") from exc
