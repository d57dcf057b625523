"""Prosodic similarity of conversational feedback: pitch features,
similarity metrics, triad agreement and triplet-loss projections."""

from ._core import (
    Error,
    EmbeddingStack,
    LegendreCoeffs,
    PitchStats,
    __version__,
    consensus_filter,
    cosine_similarity,
    decode_stack,
    encode_stack,
    evaluate_agreement,
    fit_legendre,
    load_wav,
    mel_spectrogram,
    pitch_stats,
    read_consensus,
    read_manifest,
    read_stack,
    read_triads,
    run_protocol,
    sample_triads,
    spectral_convergence,
    spectrogram_similarity,
    synthetic_dataset,
    track_pitch,
    triplet_loss,
    write_stack,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
