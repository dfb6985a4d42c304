# Copyright 2026 The melwave Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

"""Mel analysis, Griffin-Lim reconstruction, SI-SDR losses, and a joint
time-frequency trainer, backed by the C++ core."""

from ._core import (
    Corpus,
    MelFilterbank,
    MelwaveError,
    TrainerState,
    denormalize,
    griffin_lim,
    istft,
    joint_loss,
    loss_f,
    loss_t,
    make_corpus,
    make_window,
    mel_filterbank,
    normalize,
    read_mel,
    read_wav,
    reconstruct,
    si_sdr,
    stft,
    synthesize,
    time_loss_grad,
    train,
    write_mel,
    write_wav,
)

__all__ = [
    "Corpus",
    "MelFilterbank",
    "MelwaveError",
    "TrainerState",
    "denormalize",
    "griffin_lim",
    "istft",
    "joint_loss",
    "loss_f",
    "loss_t",
    "make_corpus",
    "make_window",
    "mel_filterbank",
    "normalize",
    "read_mel",
    "read_wav",
    "reconstruct",
    "si_sdr",
    "stft",
    "synthesize",
    "time_loss_grad",
    "train",
    "write_mel",
    "write_wav",
]
