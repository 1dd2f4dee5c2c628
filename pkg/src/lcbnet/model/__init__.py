from .config import LossWeights, ModelConfig
from .losses import CTC_INFEASIBLE, bce_loss, ce_loss, ctc_loss
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .network import MIN_FRAMES, ForwardTrace, LCBNet, export_attention, receptive_field, subsampled_length

__all__ = [
    "LossWeights", "ModelConfig", "CTC_INFEASIBLE", "bce_loss", "ce_loss", "ctc_loss",
    "MIN_FRAMES", "ForwardTrace", "LCBNet", "export_attention", "receptive_field", "subsampled_length",
    "load_checkpoint", "read_checkpoint", "save_checkpoint",
]
