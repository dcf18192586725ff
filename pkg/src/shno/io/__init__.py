"""Binary containers, checkpoints and CSV exports."""

from shno.io.checkpoint import (
    Checkpoint,
    load_checkpoint,
    load_trajectories,
    save_checkpoint,
    save_trajectories,
)
from shno.io.container import (
    DType,
    SectionInfo,
    decode_container,
    encode_container,
    list_sections,
    read_container,
    write_container,
)
from shno.io.export import (
    dataset_frame,
    history_frame,
    metrics_frame,
    spectra_frame,
    trajectory_spectra_frame,
    write_dataset_csv,
    write_history_csv,
    write_metrics_csv,
    write_spectra_csv,
)

__all__ = [
    "Checkpoint",
    "DType",
    "SectionInfo",
    "dataset_frame",
    "decode_container",
    "encode_container",
    "history_frame",
    "list_sections",
    "load_checkpoint",
    "load_trajectories",
    "metrics_frame",
    "read_container",
    "save_checkpoint",
    "save_trajectories",
    "spectra_frame",
    "trajectory_spectra_frame",
    "write_container",
    "write_dataset_csv",
    "write_history_csv",
    "write_metrics_csv",
    "write_spectra_csv",
]
