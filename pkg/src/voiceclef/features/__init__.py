from .archive import read_archive, read_matrix_csv, write_archive, write_matrix_csv
from .dsp import (apply_window, dct2, dct_cepstrum, delta_coefficients, fft, fft_power_spectrum,
                  frame_count, frame_signal, hamming_window, idct2, pre_emphasize)
from .mel import MelFilterBank, apply_filterbank, build_mel_filterbank, hz_to_mel, mel_to_hz
from .mfcc import FeatureConfig, MfccTensor, extract_mfcc, log_mel_spectrogram

__all__ = [
    "FeatureConfig", "MfccTensor", "MelFilterBank",
    "pre_emphasize", "frame_count", "frame_signal", "hamming_window", "apply_window",
    "fft", "fft_power_spectrum", "build_mel_filterbank", "apply_filterbank",
    "hz_to_mel", "mel_to_hz", "dct2", "idct2", "dct_cepstrum", "delta_coefficients",
    "log_mel_spectrogram", "extract_mfcc",
    "write_archive", "read_archive", "write_matrix_csv", "read_matrix_csv",
]
