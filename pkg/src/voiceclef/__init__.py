"""Voice-disorder classification from MFCC features with a single-convolution network."""

__version__ = "0.1.0"

from .audio import AudioClip, read_wav, resample, write_wav
from .classifier import (ArchConfig, Model, TrainConfig, TrainReport, build_model, forward,
                         load_model, predict, save_model, train)
from .features import FeatureConfig, MfccTensor, extract_mfcc, log_mel_spectrogram
from .metrics import (EvalReport, class_metrics, confusion_matrix, evaluate, patient_vote,
                      roc_curve, split_dataset)
from .vad import Segment, VadConfig, detect_voice_activity, segment_clip

__all__ = [
    "AudioClip", "read_wav", "write_wav", "resample",
    "VadConfig", "Segment", "detect_voice_activity", "segment_clip",
    "FeatureConfig", "MfccTensor", "extract_mfcc", "log_mel_spectrogram",
    "ArchConfig", "TrainConfig", "TrainReport", "Model",
    "build_model", "forward", "train", "predict", "save_model", "load_model",
    "EvalReport", "split_dataset", "confusion_matrix", "class_metrics", "roc_curve",
    "patient_vote", "evaluate",
]
