"""Amplitude-ranked curriculum adaptation with a Hopfield feature memory."""

from ._core import (
    Error,
    HopfieldMemory,
    InvalidInput,
    IoError,
    NumericError,
    ParameterError,
    SourceAmplitudeProfile,
    StateError,
    amplitude_crop,
    build_curriculum,
    crop_extent,
    domain_distance,
    fake_source_count,
    fft2,
    generate_benchmark,
    make_memory,
    mchn_iterate,
    retrieve,
    selfcheck,
    similarity,
    source_profile,
    total_loss,
)

__all__ = [
    "Error",
    "HopfieldMemory",
    "InvalidInput",
    "IoError",
    "NumericError",
    "ParameterError",
    "SourceAmplitudeProfile",
    "StateError",
    "amplitude_crop",
    "build_curriculum",
    "crop_extent",
    "domain_distance",
    "fake_source_count",
    "fft2",
    "generate_benchmark",
    "make_memory",
    "mchn_iterate",
    "retrieve",
    "selfcheck",
    "similarity",
    "source_profile",
    "total_loss",
]
