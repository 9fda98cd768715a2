"""Singing-technique detection toolkit.

Multi-resolution log-mel + pitchgram features, an SE/instance-norm CRNN
with hand-derived gradients, focal-loss training with RAdam, and
segment-based multi-label event-detection evaluation.
"""

from .labels import TECHNIQUE_LABELS, N_CLASSES
from .audio import AudioClip, read_wav, write_wav
from .frontend import (
    FrontendConfig,
    FeatureStack,
    MelFilterbank,
    ChannelStats,
    build_mel_filterbank,
    mel_spectrogram,
    multi_res_stack,
    standardize,
    stft,
)
from .pitch import PitchContour, load_pitch_csv, estimate_pitch_fallback, contour_to_pitchgram
from .model import ModelConfig, ModelParams, init_params, model_forward, model_backward
from .losses import FocalLossParams, focal_loss, bce_loss
from .optim import RAdam
from .training import TrainConfig, FoldPlan, make_fold_plan, train
from .events import Event, load_annotations, save_annotations, events_to_roll, roll_to_events
from .metrics import binarize, segment_metrics, SegmentMetrics
from .synth import SynthSpec, synth_technique, synth_corpus
from .estimator import SingingTechniqueDetector

__version__ = "0.1.0"
