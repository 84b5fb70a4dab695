"""Collision-prone vehicle trajectory detection.

Thin re-export of the compiled core: track I/O and resampling, interaction
features, collision-energy fitting and labeling, recurrent encoders, kNN
retrieval and the command-line pipeline.
"""

from ._silstm import (
    EncoderModel,
    FitResult,
    InteractionTrajectory,
    SilstmError,
    TrackDataset,
    VehicleTrack,
    architectures,
    build_interactions,
    collision_energy,
    encode,
    evaluate,
    fit_energy,
    knn_classify,
    label_fits,
    load_model,
    make_encoder,
    read_tracks,
    resample,
    run_cli,
    save_model,
    simulate,
    triplet_loss,
    write_tracks_csv,
)

__all__ = [
    "EncoderModel",
    "FitResult",
    "InteractionTrajectory",
    "SilstmError",
    "TrackDataset",
    "VehicleTrack",
    "architectures",
    "build_interactions",
    "collision_energy",
    "encode",
    "evaluate",
    "fit_energy",
    "knn_classify",
    "label_fits",
    "load_model",
    "make_encoder",
    "read_tracks",
    "resample",
    "run_cli",
    "save_model",
    "simulate",
    "triplet_loss",
    "write_tracks_csv",
]
