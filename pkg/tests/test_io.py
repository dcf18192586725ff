"""Tests for the binary container, checkpoints and CSV exports."""

import struct
import zlib

import numpy as np
import pandas as pd
import pytest

from shno.errors import (
    BadMagicError,
    ChecksumError,
    ContainerError,
    DuplicateSectionError,
    NonFiniteError,
    TruncatedFileError,
    UnknownDtypeError,
)
from shno.io import (
    DType,
    decode_container,
    encode_container,
    history_frame,
    list_sections,
    load_checkpoint,
    load_trajectories,
    metrics_frame,
    read_container,
    save_checkpoint,
    save_trajectories,
    spectra_frame,
    trajectory_spectra_frame,
    write_container,
    write_dataset_csv,
    write_history_csv,
)
from shno.model import ShnoConfig, ShnoModel
from shno.model.params import ChannelStats
from shno.models.run import TrainSection
from shno.sht import SphericalGrid, Truncation
from shno.swe import TrajectoryDataset
from shno.training import EpochRecord, evaluate_rollout, fit
from tests.conftest import random_field

GRID = SphericalGrid(8, 16, radius=1.0)
TRUNC = Truncation(5)


def _dataset(times: int = 5) -> TrajectoryDataset:
    """Two members of a field advected one cell east per hour."""
    snaps = np.empty((2, times, 3, *GRID.shape))
    for m in range(2):
        x0 = random_field(GRID, TRUNC, channels=3, seed=m).values + np.array([5.0, 0.0, 0.0])[:, None, None]
        for t in range(times):
            snaps[m, t] = np.roll(x0, t, axis=-1)
    return TrajectoryDataset(GRID, TRUNC, snaps, interval_seconds=3600.0, seed=3)


def _model() -> ShnoModel:
    return ShnoModel(ShnoConfig(embed_dim=8, layers=1, heads=2, registers=2, n_max=5, nlat=8, nlon=16))


# --- Container format ---


class TestContainerRoundTrip:
    @pytest.mark.parametrize(
        "value",
        [
            np.random.default_rng(0).standard_normal((3, 4, 5)),
            np.random.default_rng(1).standard_normal(7).astype(np.float32),
            np.random.default_rng(2).standard_normal((2, 3)) + 1j * np.random.default_rng(3).standard_normal((2, 3)),
            np.arange(10, dtype=np.uint8),
            np.array(2.5),
            np.zeros((0, 4)),
        ],
        ids=["f64", "f32", "c128", "u8", "scalar", "empty"],
    )
    def test_bitwise(self, tmp_path, value) -> None:
        path = write_container(tmp_path / "x.shnc", {"x": value})
        back = read_container(path)["x"]
        assert back.dtype == value.dtype
        assert back.shape == value.shape
        assert back.tobytes() == value.tobytes()

    def test_text_section(self) -> None:
        back = decode_container(encode_container({"note": "grüße\n[run]"}))
        assert back["note"] == "grüße\n[run]"

    def test_empty_container(self, tmp_path) -> None:
        path = write_container(tmp_path / "empty.shnc", {})
        assert read_container(path) == {}
        assert path.stat().st_size == 4 + 4 + 4 + 8 + 4

    def test_header_layout(self) -> None:
        data = encode_container({"a": np.ones(2)})
        magic, version, count = struct.unpack_from("<4sII", data)
        assert (magic, version, count) == (b"SHNC", 1, 1)

    def test_section_order_preserved(self) -> None:
        data = encode_container([("b", np.ones(1)), ("a", np.zeros(1))])
        assert list(decode_container(data)) == ["b", "a"]

    def test_partial_read(self, tmp_path) -> None:
        path = write_container(tmp_path / "x.shnc", {"a": np.ones(3), "b": np.zeros(2), "c": "text"})
        assert list(read_container(path, ["c", "a"])) == ["c", "a"]
        with pytest.raises(KeyError, match="missing"):
            read_container(path, ["missing"])

    def test_list_sections(self, tmp_path) -> None:
        path = write_container(tmp_path / "x.shnc", {"a": np.ones((2, 3)), "t": "abc"})
        infos = list_sections(path)
        assert [(i.name, i.dtype, i.shape) for i in infos] == [("a", DType.F64, (2, 3)), ("t", DType.STR, (3,))]

    def test_identical_bytes_for_identical_sections(self) -> None:
        sections = {"a": np.linspace(0, 1, 11), "b": "x"}
        assert encode_container(sections) == encode_container(dict(sections))


class TestContainerErrors:
    def test_flipped_payload_byte(self, tmp_path) -> None:
        path = write_container(tmp_path / "x.shnc", {"x": np.arange(8, dtype=np.float64)})
        data = bytearray(path.read_bytes())
        data[-10] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(ChecksumError):
            read_container(path)

    def test_flipped_dtype_tag_is_caught_by_checksum(self) -> None:
        data = bytearray(encode_container({"x": np.ones(2)}))
        data[20 + 4 + 1] = 99
        with pytest.raises(ChecksumError):
            decode_container(bytes(data))

    def test_bad_magic(self) -> None:
        data = b"NOPE" + encode_container({})[4:]
        with pytest.raises(BadMagicError):
            decode_container(data)

    def test_truncated(self) -> None:
        data = encode_container({"x": np.ones(16)})
        with pytest.raises(TruncatedFileError):
            decode_container(data[:-9])
        with pytest.raises(TruncatedFileError):
            decode_container(data[:10])

    def test_unknown_dtype_on_write(self) -> None:
        with pytest.raises(UnknownDtypeError):
            encode_container({"x": np.arange(3, dtype=np.int64)})

    def test_unknown_dtype_tag_on_read(self) -> None:
        data = bytearray(encode_container({"x": np.ones(2)}))
        data[20 + 4 + 1] = 99
        body = bytes(data[:-4])
        patched = body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(UnknownDtypeError):
            decode_container(patched)

    def test_duplicate_names(self) -> None:
        with pytest.raises(DuplicateSectionError):
            encode_container([("x", np.ones(1)), ("x", np.zeros(1))])

    def test_nonfinite_data_refused(self) -> None:
        with pytest.raises(NonFiniteError):
            encode_container({"x": np.array([1.0, np.nan])})

    def test_errors_share_a_base(self) -> None:
        for cls in (BadMagicError, ChecksumError, TruncatedFileError, UnknownDtypeError, DuplicateSectionError):
            assert issubclass(cls, ContainerError)

    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(FileNotFoundError):
            read_container(tmp_path / "nope.shnc")


# --- Checkpoints and trajectories ---


class TestCheckpoint:
    def test_round_trip_with_optimizer(self, tmp_path) -> None:
        model = _model()
        result = fit(model, _dataset(), TrainSection(epochs=1, batch_size=4, val_fraction=0.0))
        path = save_checkpoint(tmp_path / "ckpt.shnc", model, result.optim, result.history, "[run]\nseed = 1\n")
        back = load_checkpoint(path)
        assert back.model.config == model.config
        for name, t in model.store.items():
            assert np.array_equal(back.model.store[name].data, t.data)
        assert np.array_equal(back.model.stats.mean, model.stats.mean)
        assert back.optim is not None
        assert back.optim.hyperparameters() == result.optim.hyperparameters()
        for name in model.store:
            assert back.optim.m[name].tobytes() == result.optim.m[name].tobytes()
            assert back.optim.v[name].tobytes() == result.optim.v[name].tobytes()
        assert [r.model_dump() for r in back.history] == [r.model_dump() for r in result.history]
        assert back.config_echo == "[run]\nseed = 1\n"

    def test_predictions_survive_reload(self, tmp_path) -> None:
        model = _model()
        model.stats = ChannelStats(np.array([5.0, 0.0, 0.0]), np.array([1.0, 2.0, 3.0]))
        back = load_checkpoint(save_checkpoint(tmp_path / "c.shnc", model)).model
        x = _dataset().snapshots[0, 0]
        assert np.array_equal(back.predict(x), model.predict(x))

    def test_not_a_checkpoint(self, tmp_path) -> None:
        path = save_trajectories(tmp_path / "d.shnc", _dataset())
        with pytest.raises(ContainerError):
            load_checkpoint(path)

    def test_trajectories_round_trip(self, tmp_path) -> None:
        data = _dataset()
        path = save_trajectories(tmp_path / "d.shnc", data, config_echo="[run]\n")
        back = load_trajectories(path)
        assert np.array_equal(back.snapshots, data.snapshots)
        assert (back.grid, back.trunc, back.seed) == (data.grid, data.trunc, data.seed)
        assert read_container(path, ["config.echo"])["config.echo"] == "[run]\n"

    def test_trajectories_from_checkpoint_fail(self, tmp_path) -> None:
        path = save_checkpoint(tmp_path / "c.shnc", _model())
        with pytest.raises(ContainerError, match="no snapshots"):
            load_trajectories(path)


# --- CSV exports ---


class TestExport:
    def test_metrics_and_spectra_frames(self) -> None:
        report = evaluate_rollout(lambda x: np.roll(x, 1, axis=-1), _dataset(), max_steps=2)
        metrics = metrics_frame(report)
        assert list(metrics.columns)[:4] == ["source", "variable", "lead", "lead_hours"]
        assert len(metrics) == 2 * 3 * 2
        spectra = spectra_frame(report)
        assert list(spectra.columns) == ["source", "variable", "lead", "n", "energy"]
        assert len(spectra) == 3 * 2 * 4 * (TRUNC.n_max + 1)
        truth = spectra[(spectra.source == "truth") & (spectra.variable == "KE") & (spectra.lead == 2)]
        np.testing.assert_allclose(truth.energy.to_numpy(), report.spectrum("truth", 2)[3])

    def test_history_csv(self, tmp_path) -> None:
        history = [EpochRecord(epoch=0, lr=0.0, train_loss=1.0), EpochRecord(epoch=1, lr=1e-3, train_loss=0.5, steps=2)]
        path = write_history_csv(history, tmp_path / "loss_history.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["epoch", "lr", "train_loss", "val_loss", "steps", "skipped_steps"]
        assert frame.train_loss.tolist() == [1.0, 0.5]
        assert history_frame(history).shape == (2, 6)

    def test_trajectory_spectra_frame(self) -> None:
        frame = trajectory_spectra_frame(_dataset(times=3))
        assert set(frame.source) == {"train"}
        assert sorted(set(frame.lead)) == [0, 1, 2]
        assert set(frame.variable) == {"Z", "U", "V", "KE"}

    def test_dataset_csv(self, tmp_path) -> None:
        data = _dataset(times=2)
        frame = pd.read_csv(write_dataset_csv(data, tmp_path / "d.csv"))
        assert len(frame) == data.snapshots.size
        first = frame.iloc[0]
        assert (first.member, first.time_hours, first.variable) == (0, 0.0, "Z")
        assert first.value == pytest.approx(data.snapshots[0, 0, 0, 0, 0])

    def test_csv_is_reproducible(self, tmp_path) -> None:
        history = [EpochRecord(epoch=0, lr=0.0, train_loss=0.123456789012345)]
        a = write_history_csv(history, tmp_path / "a.csv").read_bytes()
        b = write_history_csv(history, tmp_path / "b.csv").read_bytes()
        assert a == b
