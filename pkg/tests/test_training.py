"""Tests for metrics, the optimizer and schedule, the training loop and rollout evaluation."""

import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from shno.autodiff import ParameterStore, Tensor
from shno.errors import GridCompatibilityError, NonFiniteError, ShapeError
from shno.io import load_checkpoint, save_checkpoint
from shno.model import ModelKind, ShnoConfig, ShnoModel
from shno.models.run import LossKind, NonFinitePolicy, TrainSection
from shno.sht import SphericalGrid, Truncation, transform_plan
from shno.sht.spectra import degree_spectrum_array
from shno.swe import TrajectoryDataset
from shno.training import (
    EpochRecord,
    EvalReport,
    LeadMetrics,
    MetricWeights,
    OptimState,
    Trainer,
    acc,
    climatology,
    evaluate_rollout,
    fit,
    forecast_starts,
    geometric_relative_loss,
    latitude_weighted_l2,
    latitude_weights,
    lr_schedule,
    optimizer_step,
    per_channel_relative_loss,
    relative_loss_tensor,
    rmse,
    split_pairs,
    trajectory_spectra,
    weighted_l2_tensor,
)
from tests.conftest import random_field

GRID = SphericalGrid(8, 16, radius=1.0)
TRUNC = Truncation(5)


def _tiny_model(seed: int = 0, **overrides) -> ShnoModel:
    """SHNO on the 8x16 grid with C=8, two heads and two registers."""
    values = dict(embed_dim=8, layers=1, heads=2, registers=2, n_max=5, nlat=8, nlon=16, seed=seed)
    values.update(overrides)
    return ShnoModel(ShnoConfig(**values))


def _rolling_dataset(members: int = 1, times: int = 9, seed: int = 0) -> TrajectoryDataset:
    """Band-limited (Z, U, V) fields advected one grid cell east per snapshot."""
    snaps = np.empty((members, times, 3, *GRID.shape))
    scale = np.array([900.0, 12.0, 8.0])[:, None, None]
    offset = np.array([9.8e3, 0.0, 0.0])[:, None, None]
    for m in range(members):
        x0 = offset + scale * random_field(GRID, TRUNC, channels=3, seed=seed + m).values
        for t in range(times):
            snaps[m, t] = np.roll(x0, t, axis=-1)
    return TrajectoryDataset(GRID, TRUNC, snaps, interval_seconds=3600.0)


def _steady_dataset(times: int = 6) -> TrajectoryDataset:
    x0 = random_field(GRID, TRUNC, channels=3, seed=5).values
    snaps = np.broadcast_to(x0, (1, times, *x0.shape)).copy()
    return TrajectoryDataset(GRID, TRUNC, snaps, interval_seconds=3600.0)


def _advect(x: np.ndarray) -> np.ndarray:
    return np.roll(x, 1, axis=-1)


# --- Latitude weights ---


class TestLatitudeWeights:
    def test_symmetric_pair_is_flat(self) -> None:
        w = latitude_weights(SphericalGrid.equiangular(2, 4, radius=1.0)).w
        np.testing.assert_allclose(w, [1.0, 1.0], atol=1e-12)

    def test_sixty_zero_minus_sixty(self) -> None:
        w = latitude_weights(SphericalGrid.equiangular(3, 4, radius=1.0)).w
        np.testing.assert_allclose(w, [0.75, 1.5, 0.75], atol=1e-12)

    @pytest.mark.parametrize("nlat", [1, 5, 32, 91])
    def test_mean_is_one(self, nlat: int) -> None:
        w = latitude_weights(SphericalGrid(nlat, 8)).w
        assert abs(w.mean() - 1.0) < 1e-12
        assert np.all(w > 0)

    def test_rejects_mismatched_arrays(self) -> None:
        with pytest.raises(ShapeError):
            MetricWeights(np.ones(3), np.ones(4))


# --- Losses and scores ---


class TestLosses:
    weights = latitude_weights(GRID)

    def _truth(self, seed: int = 1) -> np.ndarray:
        return random_field(GRID, TRUNC, channels=3, seed=seed).values

    def test_relative_loss_examples(self) -> None:
        t = self._truth()
        assert geometric_relative_loss(t, t, self.weights) == 0.0
        assert geometric_relative_loss(np.zeros_like(t), t, self.weights) == pytest.approx(1.0, abs=1e-14)
        assert geometric_relative_loss(2 * t, t, self.weights) == pytest.approx(1.0, abs=1e-14)

    def test_relative_loss_per_channel(self) -> None:
        t = self._truth()
        pred = t.copy()
        pred[1] = 0.0
        np.testing.assert_allclose(per_channel_relative_loss(pred, t, self.weights), [0.0, 1.0, 0.0], atol=1e-14)
        assert geometric_relative_loss(pred, t, self.weights) == pytest.approx(1.0 / 3.0)

    def test_relative_loss_zero_truth(self) -> None:
        t = self._truth()
        t[2] = 0.0
        with pytest.raises(ValueError, match="zero truth"):
            geometric_relative_loss(t + 1.0, t, self.weights)

    def test_l2_examples(self) -> None:
        t = self._truth()
        assert latitude_weighted_l2(t, t, self.weights) == 0.0
        assert latitude_weighted_l2(t + 1.0, t, self.weights) == pytest.approx(1.0, abs=1e-12)

    def test_l2_single_cell(self) -> None:
        t = self._truth()
        pred = t.copy()
        pred[1, 3, 7] += 0.5
        expected = self.weights.w[3] * 0.25 / t.size
        assert latitude_weighted_l2(pred, t, self.weights) == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch(self) -> None:
        t = self._truth()
        with pytest.raises(ShapeError):
            latitude_weighted_l2(t[:2], t, self.weights)

    def test_tensor_losses_match(self) -> None:
        t = self._truth()[None]
        pred = t + 0.1 * random_field(GRID, TRUNC, channels=3, seed=9).values[None]
        rel = relative_loss_tensor(Tensor(pred), t, self.weights).item()
        l2 = weighted_l2_tensor(Tensor(pred), t, self.weights).item()
        assert rel == pytest.approx(geometric_relative_loss(pred, t, self.weights), rel=1e-13)
        assert l2 == pytest.approx(latitude_weighted_l2(pred, t, self.weights), rel=1e-13)


class TestScores:
    weights = latitude_weights(GRID)

    def _truths(self, n: int = 4) -> np.ndarray:
        return np.stack([random_field(GRID, TRUNC, channels=3, seed=s).values for s in range(n)])

    def test_rmse_examples(self) -> None:
        t = self._truths()
        np.testing.assert_array_equal(rmse(t, t, self.weights), np.zeros(3))
        np.testing.assert_allclose(rmse(t + 1.0, t, self.weights), np.ones(3), atol=1e-12)

    def test_rmse_sqrt_inside_forecast_mean(self) -> None:
        t = self._truths(2)
        f = t.copy()
        f[0] += 1.0
        f[1] += 3.0
        np.testing.assert_allclose(rmse(f, t, self.weights), np.full(3, 2.0), atol=1e-12)

    def test_rmse_longitude_rotation(self) -> None:
        t = self._truths()
        f = t + 0.3 * self._truths()[::-1]
        base = rmse(f, t, self.weights)
        rolled = rmse(np.roll(f, 5, axis=-1), np.roll(t, 5, axis=-1), self.weights)
        np.testing.assert_allclose(rolled, base, rtol=1e-13)

    def test_acc_examples(self) -> None:
        t = self._truths()
        clim = climatology(t)
        anomaly = t - clim
        np.testing.assert_allclose(acc(t, t, clim, self.weights), np.ones(3), atol=1e-12)
        np.testing.assert_allclose(acc(clim - anomaly, t, clim, self.weights), -np.ones(3), atol=1e-12)
        np.testing.assert_allclose(acc(clim + 2 * anomaly, t, clim, self.weights), np.ones(3), atol=1e-12)

    @pytest.mark.parametrize("scale", [0.01, 0.5, 7.0])
    def test_acc_scale_invariant(self, scale: float) -> None:
        t = self._truths()
        clim = climatology(t)
        f = t + 0.4 * self._truths()[::-1]
        base = acc(f, t, clim, self.weights)
        scaled = acc(clim + scale * (f - clim), t, clim, self.weights)
        np.testing.assert_allclose(scaled, base, rtol=1e-12)

    def test_acc_zero_variance(self) -> None:
        t = self._truths(1)
        with pytest.raises(ValueError, match="zero variance"):
            acc(t, t, climatology(t), self.weights)

    def test_acc_climatology_shape(self) -> None:
        t = self._truths()
        with pytest.raises(ShapeError):
            acc(t, t, np.zeros((3, 4, 4)), self.weights)


# --- Optimizer ---


def _scalar_store(value: float = 0.5) -> ParameterStore:
    store = ParameterStore()
    store.add("w", np.array(value))
    return store


class TestOptimizer:
    def test_zero_gradient_no_decay_is_noop(self) -> None:
        store = _scalar_store()
        state = OptimState.for_store(store, weight_decay=0.0)
        assert optimizer_step(store, {"w": np.array(0.0)}, state, lr=0.1)
        assert store["w"].data == 0.5
        assert state.step == 1

    def test_first_step(self) -> None:
        store = _scalar_store(0.5)
        state = OptimState.for_store(store, weight_decay=0.01)
        optimizer_step(store, {"w": np.array(2.0)}, state, lr=0.1)
        expected = 0.5 - 0.1 * 2.0 / (2.0 + 1e-8) - 0.1 * 0.01 * 0.5
        assert float(store["w"].data) == pytest.approx(expected, abs=1e-12)

    def test_decay_only(self) -> None:
        store = _scalar_store(0.5)
        state = OptimState.for_store(store, weight_decay=1e-5)
        optimizer_step(store, {}, state, lr=1e-3)
        assert float(store["w"].data) == pytest.approx(0.5 - 1e-3 * 1e-5 * 0.5, abs=1e-15)

    def test_moments_follow_betas(self) -> None:
        store = _scalar_store(0.0)
        state = OptimState.for_store(store, weight_decay=0.0)
        optimizer_step(store, {"w": np.array(1.0)}, state, lr=0.01)
        optimizer_step(store, {"w": np.array(-1.0)}, state, lr=0.01)
        assert float(state.m["w"]) == pytest.approx(0.9 * 0.1 - 0.1)
        assert float(state.v["w"]) == pytest.approx(0.99 * 0.01 + 0.01)

    def test_snapshot_is_independent(self) -> None:
        store = _scalar_store(0.0)
        state = OptimState.for_store(store, weight_decay=0.0)
        optimizer_step(store, {"w": np.array(1.0)}, state, lr=0.01)
        saved = state.snapshot()
        optimizer_step(store, {"w": np.array(-1.0)}, state, lr=0.01)
        assert saved.step == 1 and state.step == 2
        assert float(saved.m["w"]) == pytest.approx(0.1)
        assert saved.beta2 == state.beta2 and saved.weight_decay == state.weight_decay

    def test_nonfinite_skip(self) -> None:
        store = _scalar_store()
        state = OptimState.for_store(store)
        assert not optimizer_step(store, {"w": np.array(np.nan)}, state, lr=0.1)
        assert store["w"].data == 0.5
        assert (state.step, state.skipped) == (0, 1)

    def test_nonfinite_fail(self) -> None:
        store = _scalar_store()
        state = OptimState.for_store(store)
        with pytest.raises(NonFiniteError) as info:
            optimizer_step(store, {"w": np.array(np.inf)}, state, lr=0.1, policy=NonFinitePolicy.FAIL)
        assert info.value.stage == "optimizer"

    def test_unknown_and_misshapen_gradients(self) -> None:
        store = _scalar_store()
        state = OptimState.for_store(store)
        with pytest.raises(KeyError):
            optimizer_step(store, {"b": np.array(1.0)}, state, lr=0.1)
        with pytest.raises(ShapeError):
            optimizer_step(store, {"w": np.ones(2)}, state, lr=0.1)

    def test_rejects_bad_hyperparameters(self) -> None:
        with pytest.raises(ValueError):
            OptimState(beta1=1.0)


class TestSchedule:
    def test_warmup_reaches_peak(self) -> None:
        assert lr_schedule(0, 20, 6, 2e-4, 0.0) == pytest.approx(2e-4 / 6)
        assert lr_schedule(5, 20, 6, 2e-4, 0.0) == pytest.approx(2e-4)
        assert lr_schedule(6, 20, 6, 2e-4, 0.0) == pytest.approx(2e-4)

    def test_final_epoch_is_min(self) -> None:
        assert lr_schedule(49, 50, 0, 1e-3, 2e-5) == pytest.approx(2e-5, abs=1e-15)

    def test_cosine_midpoint(self) -> None:
        assert abs(lr_schedule(5, 11, 0, 1e-3, 2e-5) - (1e-3 + 2e-5) / 2) < 1e-12

    def test_monotone_after_warmup(self) -> None:
        lrs = [lr_schedule(e, 30, 4, 1e-3, 1e-5) for e in range(4, 30)]
        assert all(a >= b for a, b in zip(lrs, lrs[1:], strict=False))

    def test_single_epoch(self) -> None:
        assert lr_schedule(0, 1, 0, 1e-3, 2e-5) == 1e-3

    def test_rejects_bad_arguments(self) -> None:
        with pytest.raises(ValueError):
            lr_schedule(0, 5, 5, 1e-3, 0.0)
        with pytest.raises(ValueError):
            lr_schedule(5, 5, 0, 1e-3, 0.0)


# --- Training loop ---


class TestSplit:
    def test_sizes_and_cover(self) -> None:
        split = split_pairs(10, 0.2, seed=3)
        assert (len(split.train), len(split.val)) == (8, 2)
        assert sorted(np.concatenate([split.train, split.val]).tolist()) == list(range(10))

    def test_deterministic(self) -> None:
        a, b = split_pairs(17, 0.3, seed=1), split_pairs(17, 0.3, seed=1)
        assert np.array_equal(a.val, b.val)

    def test_rejects_empty_training_split(self) -> None:
        with pytest.raises(ValueError):
            split_pairs(1, 0.99, seed=0)
        with pytest.raises(ValueError):
            split_pairs(0, 0.2, seed=0)


class TestFit:
    def test_counts_optimizer_steps(self) -> None:
        model = _tiny_model()
        cfg = TrainSection(epochs=1, batch_size=4, val_fraction=0.0)
        result = fit(model, _rolling_dataset(times=9), cfg)
        assert [r.epoch for r in result.history] == [0, 1]
        assert result.history[1].steps == 2
        assert result.optim.step == 2
        assert result.train_pairs == 8 and result.val_pairs == 0

    def test_partial_last_batch(self) -> None:
        cfg = TrainSection(epochs=1, batch_size=3, val_fraction=0.0)
        result = fit(_tiny_model(), _rolling_dataset(times=9), cfg)
        assert result.history[1].steps == 3

    def test_identical_seeds_identical_histories(self) -> None:
        cfg = TrainSection(epochs=2, batch_size=4, val_fraction=0.25)
        data = _rolling_dataset(members=2, times=5)
        a = _tiny_model(seed=4)
        b = _tiny_model(seed=4)
        ha = fit(a, data, cfg, seed=4).history
        hb = fit(b, data, cfg, seed=4).history
        assert [r.model_dump() for r in ha] == [r.model_dump() for r in hb]
        for name, value in a.store.state_dict().items():
            assert np.array_equal(value, b.store[name].data)

    def test_best_validation_weights_are_loaded(self) -> None:
        cfg = TrainSection(epochs=3, batch_size=4, val_fraction=0.25, peak_lr=5e-3)
        model = _tiny_model()
        result = fit(model, _rolling_dataset(members=2, times=5), cfg, seed=1)
        val = [r.val_loss for r in result.history]
        assert result.best_epoch == int(np.argmin(val))
        for name, value in result.best_state.items():
            assert np.array_equal(model.store[name].data, value)

    def test_optimizer_state_matches_best_epoch(self, monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
        # train loss at epoch 0, then validation losses of epochs 0..3; epoch 1 is best
        losses = iter([2.0, 1.0, 0.5, 0.9, 0.8])
        monkeypatch.setattr(Trainer, "evaluate", lambda self, inputs, targets: next(losses))
        model = _tiny_model()
        trainer = Trainer(model, TrainSection(epochs=3, batch_size=4, val_fraction=0.25), seed=1)
        steps_at: dict[int, int] = {}
        moments_at: dict[int, dict[str, np.ndarray]] = {}

        def record(r: EpochRecord) -> None:
            steps_at[r.epoch] = trainer.optim.step
            moments_at[r.epoch] = {k: a.copy() for k, a in trainer.optim.m.items()}

        result = trainer.fit(_rolling_dataset(members=2, times=5), on_epoch=record)

        assert result.best_epoch == 1
        assert steps_at == {0: 0, 1: 2, 2: 4, 3: 6}
        assert result.optim.step == 2
        assert trainer.optim is result.optim
        for name, m in moments_at[1].items():
            assert np.array_equal(result.optim.m[name], m)

        back = load_checkpoint(save_checkpoint(tmp_path / "best.shnc", model, result.optim, result.history))
        assert back.optim is not None
        assert back.optim.step == steps_at[result.best_epoch]

    def test_standardization_uses_training_inputs(self) -> None:
        model = _tiny_model()
        result = fit(model, _rolling_dataset(), TrainSection(epochs=1, batch_size=8, val_fraction=0.0))
        assert model.stats is result.stats
        assert result.stats.mean[0] == pytest.approx(9.8e3, rel=0.1)

    def test_epoch_callback(self) -> None:
        seen = []
        fit(_tiny_model(), _rolling_dataset(), TrainSection(epochs=2, batch_size=8), on_epoch=seen.append)
        assert [r.epoch for r in seen] == [0, 1, 2]
        assert seen[0].lr == 0.0

    def test_weighted_l2_loss(self) -> None:
        cfg = TrainSection(epochs=1, batch_size=8, val_fraction=0.0, loss=LossKind.WEIGHTED_L2)
        result = fit(_tiny_model(), _rolling_dataset(), cfg)
        assert math.isfinite(result.history[1].train_loss)

    def test_rejects_persistence(self) -> None:
        with pytest.raises(ValueError, match="persistence"):
            Trainer(_tiny_model(kind=ModelKind.PERSISTENCE), TrainSection())

    def test_rejects_short_or_mismatched_data(self) -> None:
        trainer = Trainer(_tiny_model(), TrainSection())
        with pytest.raises(ValueError, match="at least 2"):
            trainer.fit(_rolling_dataset(times=1))
        other = SphericalGrid(6, 12, radius=1.0)
        data = TrajectoryDataset(other, Truncation(4), np.zeros((1, 3, 3, 6, 12)), interval_seconds=3600.0)
        with pytest.raises(GridCompatibilityError):
            trainer.fit(data)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_loss_decreases(self, seed: int) -> None:
        cfg = TrainSection(epochs=10, batch_size=4, val_fraction=0.0, peak_lr=5e-3, min_lr=1e-4)
        result = fit(_tiny_model(seed=seed), _rolling_dataset(members=2, seed=seed), cfg, seed=seed)
        assert result.history[-1].train_loss < result.history[0].train_loss


# --- Rollout evaluation ---


class TestForecastStarts:
    def test_windows_fit_inside(self) -> None:
        assert forecast_starts(10, 3) == [0, 1, 2, 3, 4, 5, 6]
        assert forecast_starts(10, 3, stride=3) == [0, 3, 6]
        assert forecast_starts(10, 3, max_starts=2) == [0, 1]

    def test_too_short(self) -> None:
        with pytest.raises(ValueError, match="needs 4"):
            forecast_starts(3, 3)


class TestEvaluateRollout:
    def test_perfect_model(self) -> None:
        report = evaluate_rollout(_advect, _rolling_dataset(members=2, times=8), max_steps=4)
        for lead in range(1, 5):
            for var in ("Z", "U", "V"):
                row = report.metric("model", var, lead)
                assert row.relative_loss == 0.0
                assert row.rmse == 0.0
                assert row.acc == pytest.approx(1.0, abs=1e-12)
        assert report.failures == []

    def test_persistence_on_steady_state(self) -> None:
        report = evaluate_rollout(_tiny_model(kind=ModelKind.PERSISTENCE), _steady_dataset(), max_steps=3)
        for source in ("model", "persistence"):
            assert np.all(report.series(source, "Z", "relative_loss") == 0.0)
            assert np.all(report.series(source, "V", "rmse") == 0.0)

    def test_persistence_spectra_equal_initial_state(self) -> None:
        data = _rolling_dataset(times=6)
        report = evaluate_rollout(_advect, data, max_steps=5, max_starts=1)
        plan = transform_plan(GRID, TRUNC)
        initial = degree_spectrum_array(plan.analyze(data.snapshots[0, 0]), TRUNC)
        for lead in range(1, 6):
            np.testing.assert_array_equal(report.spectrum("persistence", lead)[:3], initial)

    def test_kinetic_energy_spectrum(self) -> None:
        report = evaluate_rollout(_advect, _rolling_dataset(times=4), max_steps=2)
        assert report.spectrum_variables == ["Z", "U", "V", "KE"]
        spec = report.spectrum("truth", 1)
        np.testing.assert_allclose(spec[3], spec[1] + spec[2], rtol=1e-14)

    def test_metrics_per_variable_and_lead(self) -> None:
        report = evaluate_rollout(_advect, _rolling_dataset(members=2, times=6), max_steps=3, start_stride=2)
        assert report.starts == [0, 2]
        assert report.sources == ["model", "persistence"]
        assert len(report.metrics) == 2 * 3 * 3
        assert report.metric("persistence", "U", 2).forecasts == 4
        assert report.metric("model", "Z", 3).lead_hours == 3.0
        assert np.all(report.series("persistence", "Z", "relative_loss") > 0)

    def test_nonfinite_forecasts_are_recorded(self) -> None:
        def unstable(x: np.ndarray) -> np.ndarray:
            return x * np.inf if np.abs(x).max() > 1e3 else x * 10.0

        data = _rolling_dataset(members=2, times=5)
        report = evaluate_rollout(unstable, data, max_steps=3, max_starts=1)
        assert len(report.failures) == 2
        assert all(f.step == 1 for f in report.failures)
        assert [f.member for f in report.failures] == [0, 1]
        with pytest.raises(KeyError):
            report.metric("model", "Z", 1)
        assert report.metric("persistence", "Z", 3).forecasts == 2

    def test_grid_mismatch(self) -> None:
        model = _tiny_model(nlat=6, nlon=12, n_max=4)
        with pytest.raises(GridCompatibilityError):
            evaluate_rollout(model, _rolling_dataset(), max_steps=2)

    def test_report_rejects_unordered_leads(self) -> None:
        row = dict(source="model", variable="Z", rmse=0.0, acc=1.0, relative_loss=0.0, lead_hours=1.0)
        with pytest.raises(ValidationError):
            EvalReport(
                variables=["Z"],
                spectrum_variables=["Z"],
                max_steps=2,
                interval_hours=1.0,
                members=1,
                starts=[0],
                metrics=[LeadMetrics(lead=2, **row), LeadMetrics(lead=1, **row)],
            )

    def test_trajectory_spectra_of_steady_state(self) -> None:
        data = _steady_dataset(times=3)
        spectra = trajectory_spectra(data)
        assert spectra.shape == (3, 4, TRUNC.n_max + 1)
        np.testing.assert_allclose(spectra[0], spectra[2], rtol=1e-13)
        np.testing.assert_allclose(spectra[0, 3], spectra[0, 1] + spectra[0, 2], rtol=1e-14)
