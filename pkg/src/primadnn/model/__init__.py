from .config import ModelConfig
from .network import ModelParams, init_params, model_forward, model_backward
from .checkpoint import save_checkpoint, load_checkpoint, Checkpoint
from .gradcheck import grad_check, tiny_config

__all__ = [
    "ModelConfig",
    "ModelParams",
    "init_params",
    "model_forward",
    "model_backward",
    "save_checkpoint",
    "load_checkpoint",
    "Checkpoint",
    "grad_check",
    "tiny_config",
]
