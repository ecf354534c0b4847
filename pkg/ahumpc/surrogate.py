"""
Neural surrogate of the building's thermal response.

A multilayer perceptron with five hidden layers learns the temperature change over an interval from the eight
inputs of a :class:`~ahumpc.dataset.TrainingSample`. One model is trained per direction with k-fold
cross-validation, and the trained models generate day-ahead Environmental Dynamic Function (EDF) curves by feeding
their own predictions back as the next start temperature. The first-order parameters read off those curves become
the MPC's internal model for the day.

This module provides:

- :class:`SurrogateConfig`: architecture and training hyperparameters
- :class:`MlpModel`: weights, normalization statistics, forward pass, backpropagation and checkpoint files
- :class:`AdamOptimizer`: adaptive mini-batch updates
- :class:`MetricsReport` and :func:`metrics`: the regression metric suite
- :func:`train`, :func:`predict`, :func:`generate_edf` and :func:`edf_to_fos`

Example:
    ::

        model, report = train(splits[Direction.INCREASING], SurrogateConfig(seed=42))
        curve = generate_edf(model, Direction.INCREASING, t_init=18.5, max_gain=1.0, disturbances=forecast)
        fos_inc = edf_to_fos(curve, delay=13.0)
"""

import json
import math
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
from sklearn.metrics import (
    explained_variance_score,
    mean_absolute_error,
    mean_squared_error,
    r2_score,
)
from sklearn.model_selection import KFold

from .ahu_data import (
    DEFAULT_DELAY,
    Direction,
    FEATURE_NAMES,
    FosParams,
    SENSOR_PERIOD,
    TemperatureTrace,
    ValidationError,
    WEATHER_FEATURES,
)
from .dataset import DatasetSplit, SampleSet
from .fos import extract_params

#: Number of hidden layers of every surrogate.
HIDDEN_LAYERS = 5

#: Version of the checkpoint file layout.
CHECKPOINT_VERSION = 1

_INPUTS = len(FEATURE_NAMES)


@dataclass(frozen=True)
class SurrogateConfig:
    """
    Architecture and training settings of the surrogate.

    Attributes:
        hidden_widths: Widths of the five hidden layers.
        k_folds: Number of cross-validation folds, at least 2.
        learning_rate: Adam step size.
        batch_size: Mini-batch size.
        max_epochs: Epoch cap per fold.
        patience: Epochs without validation improvement before a fold stops.
        max_train_samples: Training samples used at most. Larger training splits are truncated (they are shuffled).
        seed: Seed of the weight initialization, the fold assignment and the batch order.
        edf_step: Rollout step of EDF curves in minutes.
        edf_horizon: EDF horizon in minutes.
    """

    hidden_widths: tuple[int, ...] = (64, 64, 32, 32, 16)
    k_folds: int = 5
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 10
    max_train_samples: int = 8000
    seed: int = 0
    edf_step: int = 15
    edf_horizon: int = 1440

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if len(self.hidden_widths) != HIDDEN_LAYERS or min(self.hidden_widths) < 1:
            raise ValidationError(f"Expected {HIDDEN_LAYERS} positive hidden widths, got {self.hidden_widths}")
        if self.k_folds < 2:
            raise ValidationError(f"k_folds must be at least 2, got {self.k_folds}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValidationError("learning_rate, batch_size, max_epochs and patience must be positive")
        if self.max_train_samples < self.k_folds:
            raise ValidationError("max_train_samples must cover every fold")
        if self.edf_step < SENSOR_PERIOD or not 0 < self.edf_horizon <= 1440:
            raise ValidationError("edf_step must be at least 5 minutes and edf_horizon within 24 hours")


@dataclass(eq=False)
class MlpModel:
    """
    A fully connected network with tanh hidden layers and a linear output.

    Inputs are standardized with the training statistics before the first layer and the output is scaled back to °C,
    so :meth:`predict` works in physical units.

    Attributes:
        widths: Layer widths, input (8) and output (1) included.
        weights: Weight matrices, ``weights[l]`` of shape ``(widths[l], widths[l + 1])``.
        biases: Bias vectors, ``biases[l]`` of shape ``(widths[l + 1],)``.
        direction: Direction of the samples the model was trained on.
        x_mean: Per-input mean of the training split.
        x_std: Per-input standard deviation of the training split (1 for constant inputs).
        y_mean: Target mean of the training split.
        y_std: Target standard deviation of the training split.
        activation: Hidden activation. Only ``"tanh"`` is implemented.
        seed: Initialization seed.
        window: First and last day of the training window, if known.

    Raises:
        ValidationError: If the layer layout is not 8 → five hidden layers → 1, a shape is inconsistent or a
            weight is non-finite.
    """

    widths: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    direction: Direction
    x_mean: np.ndarray = field(default_factory=lambda: np.zeros(_INPUTS))
    x_std: np.ndarray = field(default_factory=lambda: np.ones(_INPUTS))
    y_mean: float = 0.0
    y_std: float = 1.0
    activation: str = "tanh"
    seed: int = 0
    window: tuple[str, str] | None = None

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.direction = Direction(self.direction)
        if len(self.widths) != HIDDEN_LAYERS + 2 or self.widths[0] != _INPUTS or self.widths[-1] != 1:
            raise ValidationError(f"Expected {_INPUTS} inputs, {HIDDEN_LAYERS} hidden layers and 1 output")
        if self.activation != "tanh":
            raise ValidationError(f"Unsupported activation {self.activation!r}")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float).reshape(-1) for b in self.biases]
        self.x_mean = np.asarray(self.x_mean, dtype=float)
        self.x_std = np.asarray(self.x_std, dtype=float)
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[layer], self.widths[layer + 1]) or b.shape != (self.widths[layer + 1],):
                raise ValidationError(f"Layer {layer} does not match widths {self.widths}")
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ValidationError("One weight matrix and bias vector is needed per layer")
        if not all(np.all(np.isfinite(p)) for p in self.parameters()):
            raise ValidationError("Model weights must be finite")
        if self.x_mean.shape != (_INPUTS,) or self.x_std.shape != (_INPUTS,) or np.any(self.x_std <= 0):
            raise ValidationError("Invalid input normalization statistics")
        if not self.y_std > 0:
            raise ValidationError("Target scale must be positive")

    @classmethod
    def initialize(
        cls,
        direction: Direction,
        hidden_widths: tuple[int, ...],
        seed: int,
        **normalization: Any,
    ) -> "MlpModel":
        """Fresh model with weights drawn uniformly from ±1/sqrt(fan_in) and zero biases."""
        widths = (_INPUTS, *hidden_widths, 1)
        rng = np.random.default_rng(seed)
        weights = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases = [np.zeros(w) for w in widths[1:]]
        return cls(widths, weights, biases, direction, seed=seed, **normalization)

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpModel":
        return MlpModel.from_dict(self.to_dict())

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean) / self.x_std

    def forward(self, X_norm: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """
        Forward pass on standardized inputs.

        Returns:
            tuple[np.ndarray, list[np.ndarray]]: Standardized outputs of shape ``(n,)`` and the activations of every
            layer (input included) for backpropagation.
        """
        activations = [X_norm]
        a = X_norm
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if layer == last else np.tanh(z)
            activations.append(a)
        return a[:, 0], activations

    def loss_and_gradients(
        self, X_norm: np.ndarray, y_norm: np.ndarray
    ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """
        Mean squared error on standardized data and its gradients by backpropagation.

        Returns:
            tuple: ``(loss, weight gradients, bias gradients)`` with gradients shaped like the parameters.
        """
        out, activations = self.forward(X_norm)
        n = X_norm.shape[0]
        error = out - y_norm
        loss = float(np.mean(error**2))
        delta = (2.0 / n) * error[:, None]
        grad_w: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        grad_b: list[np.ndarray] = [np.empty(0)] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = activations[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - activations[layer] ** 2)
        return loss, grad_w, grad_b

    def predict(self, X: np.ndarray) -> np.ndarray:
        out, _ = self.forward(self.normalize(X))
        return self.y_mean + self.y_std * out

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": CHECKPOINT_VERSION,
            "direction": str(self.direction),
            "widths": list(self.widths),
            "activation": self.activation,
            "seed": self.seed,
            "window": list(self.window) if self.window else None,
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MlpModel":
        if data.get("format_version") != CHECKPOINT_VERSION:
            raise ValidationError(f"Unsupported checkpoint version {data.get('format_version')!r}")
        window = data.get("window")
        return cls(
            widths=tuple(data["widths"]),
            weights=[np.array(w, dtype=float) for w in data["weights"]],
            biases=[np.array(b, dtype=float) for b in data["biases"]],
            direction=Direction(data["direction"]),
            x_mean=np.array(data["x_mean"], dtype=float),
            x_std=np.array(data["x_std"], dtype=float),
            y_mean=float(data["y_mean"]),
            y_std=float(data["y_std"]),
            activation=data.get("activation", "tanh"),
            seed=int(data.get("seed", 0)),
            window=tuple(window) if window else None,
        )

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "MlpModel":
        """
        Read a checkpoint written by :meth:`save`.

        Raises:
            ValidationError: If the file is not a checkpoint of a supported version.
        """
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except ValueError:
            raise ValidationError(f"{path} is not a model checkpoint") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path} is not a model checkpoint")
        return cls.from_dict(data)


class AdamOptimizer:
    """
    Adam updates applied in place to a list of parameter arrays.

    Args:
        parameters: Arrays to update. Their identity must not change between steps.
        learning_rate: Step size.
        beta1: Decay of the first moment estimate.
        beta2: Decay of the second moment estimate.
        eps: Denominator guard.
    """

    def __init__(
        self,
        parameters: list[np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self._parameters = parameters
        self._lr = learning_rate
        self._beta1 = beta1
        self._beta2 = beta2
        self._eps = eps
        self._m = [np.zeros_like(p) for p in parameters]
        self._v = [np.zeros_like(p) for p in parameters]
        self._t = 0

    def step(self, gradients: list[np.ndarray]) -> None:
        self._t += 1
        correction1 = 1.0 - self._beta1**self._t
        correction2 = 1.0 - self._beta2**self._t
        for p, g, m, v in zip(self._parameters, gradients, self._m, self._v):
            m *= self._beta1
            m += (1.0 - self._beta1) * g
            v *= self._beta2
            v += (1.0 - self._beta2) * g * g
            p -= self._lr * (m / correction1) / (np.sqrt(v / correction2) + self._eps)


@dataclass(frozen=True)
class MetricsReport:
    """
    Regression metrics of a model on held-out data.

    Attributes:
        mse: Mean squared error in °C².
        scaled_mae: Mean absolute error divided by the target range.
        explained_variance: One minus the error variance over the target variance.
        r_squared: Coefficient of determination.
        sizes: Sample counts per split.
        direction: Direction of the model, if known.
        cv_mse: Mean held-out-fold MSE over the cross-validation folds, if computed.
    """

    mse: float
    scaled_mae: float
    explained_variance: float
    r_squared: float
    sizes: dict[str, int] = field(default_factory=dict)
    direction: Direction | None = None
    cv_mse: float | None = None

    @property
    def dataset_size(self) -> int:
        return sum(self.sizes.values())

    def to_record(self, date: str) -> dict[str, Any]:
        return {
            "date": date,
            "direction": str(self.direction) if self.direction else None,
            "mse": self.mse,
            "scaled_mae": self.scaled_mae,
            "explained_variance": self.explained_variance,
            "r_squared": self.r_squared,
            "cv_mse": self.cv_mse,
            "train": self.sizes.get("train", 0),
            "val": self.sizes.get("val", 0),
            "test": self.sizes.get("test", 0),
        }


def metrics(
    predictions: np.ndarray,
    targets: np.ndarray,
    direction: Direction | None = None,
    sizes: dict[str, int] | None = None,
    cv_mse: float | None = None,
) -> MetricsReport:
    """
    Compute MSE, range-scaled MAE, explained variance and R².

    Raises:
        ValidationError: If the lengths differ, fewer than two targets are given or the targets are constant.

    Example::

        metrics(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0])).r_squared  # 1.0
    """
    predictions = np.asarray(predictions, dtype=float).reshape(-1)
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if predictions.shape != targets.shape:
        raise ValidationError(f"{predictions.size} predictions for {targets.size} targets")
    if targets.size < 2:
        raise ValidationError("At least two targets are needed")
    target_range = float(np.max(targets) - np.min(targets))
    if target_range == 0:
        raise ValidationError("Targets have zero variance")
    return MetricsReport(
        mse=float(mean_squared_error(targets, predictions)),
        scaled_mae=float(mean_absolute_error(targets, predictions)) / target_range,
        explained_variance=float(explained_variance_score(targets, predictions)),
        r_squared=float(r2_score(targets, predictions)),
        sizes=dict(sizes or {}),
        direction=direction,
        cv_mse=cv_mse,
    )


def predict(model: MlpModel, inputs: np.ndarray) -> float | np.ndarray:
    """
    Predict the temperature change for one sample or a batch.

    Args:
        model: Trained model.
        inputs: Shape ``(8,)`` for one sample or ``(n, 8)`` for a batch, in ``FEATURE_NAMES`` order.

    Returns:
        float | np.ndarray: Temperature change in °C, a float for one sample.

    Raises:
        ValidationError: On a shape mismatch or non-finite inputs.
    """
    X = np.asarray(inputs, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != _INPUTS:
        raise ValidationError(f"Expected inputs of shape (8,) or (n, 8), got {np.shape(inputs)}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("Inputs must be finite")
    out = model.predict(X)
    return float(out[0]) if single else out


def _fit_fold(
    model: MlpModel,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    config: SurrogateConfig,
    rng: np.random.Generator,
) -> tuple[MlpModel, float, int]:
    """Mini-batch Adam with early stopping. Returns the best model, its validation loss and the epochs run."""
    optimizer = AdamOptimizer(model.parameters(), config.learning_rate)
    best, best_loss, stale, epoch = model.copy(), math.inf, 0, 0
    n = X_train.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grad_w, grad_b = model.loss_and_gradients(X_train[batch], y_train[batch])
            optimizer.step([*grad_w, *grad_b])
        val_out, _ = model.forward(X_val)
        val_loss = float(np.mean((val_out - y_val) ** 2))
        if val_loss < best_loss - 1e-12:
            best, best_loss, stale = model.copy(), val_loss, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, best_loss, epoch


def train(
    split: DatasetSplit,
    config: SurrogateConfig | None = None,
    logger_name: str = "",
    window: tuple[str, str] | None = None,
) -> tuple[MlpModel, MetricsReport]:
    """
    Train one direction's surrogate with k-fold cross-validation.

    The training split is cut into ``k`` folds. Each fold trains a fresh network on the other folds, stopping early on
    the validation split, and is scored on its own held-out fold. The network with the lowest validation loss is kept
    and evaluated on the test split.

    Args:
        split: Train, validation and test sets of one direction.
        config: Hyperparameters. Defaults to :class:`SurrogateConfig` ().
        logger_name: Name of the logger to use. Use empty string for root logger.
        window: First and last day of the training window, stored in the model.

    Returns:
        tuple[MlpModel, MetricsReport]: The selected model and its test metrics (with ``cv_mse``). The reported
        ``train`` size counts the samples actually used after ``max_train_samples``.

    Raises:
        ValidationError: If the training split is smaller than ``k``, its targets are constant or the test split has
            fewer than two samples.
    """
    config = config or SurrogateConfig()
    log = getLogger(logger_name)
    train_set = split.train
    if len(train_set) > config.max_train_samples:
        log.info(f"Using {config.max_train_samples} of {len(train_set)} {split.direction} training samples")
        train_set = train_set.subset(np.arange(config.max_train_samples))
    if len(train_set) < config.k_folds:
        raise ValidationError(f"{len(train_set)} training samples cannot fill {config.k_folds} folds")
    if len(split.test) < 2:
        raise ValidationError("The test split needs at least two samples")
    y_std = float(np.std(train_set.y))
    if y_std == 0:
        raise ValidationError("Training targets are constant")
    x_std = np.std(train_set.X, axis=0)
    normalization = {
        "x_mean": np.mean(train_set.X, axis=0),
        "x_std": np.where(x_std > 0, x_std, 1.0),
        "y_mean": float(np.mean(train_set.y)),
        "y_std": y_std,
    }

    def standardize(samples: SampleSet) -> tuple[np.ndarray, np.ndarray]:
        X = (samples.X - normalization["x_mean"]) / normalization["x_std"]
        y = (samples.y - normalization["y_mean"]) / normalization["y_std"]
        return X, y

    X_all, y_all = standardize(train_set)
    X_val, y_val = standardize(split.val) if len(split.val) else (None, None)
    folds = KFold(n_splits=config.k_folds, shuffle=True, random_state=config.seed)
    rng = np.random.default_rng(config.seed)

    best_model, best_loss, fold_mse = None, math.inf, []
    for fold, (fit_idx, held_idx) in enumerate(folds.split(X_all)):
        model = MlpModel.initialize(
            split.direction, config.hidden_widths, config.seed + fold, window=window, **normalization
        )
        stop_X, stop_y = (X_val, y_val) if X_val is not None else (X_all[held_idx], y_all[held_idx])
        model, val_loss, epochs = _fit_fold(
            model, X_all[fit_idx], y_all[fit_idx], stop_X, stop_y, config, rng
        )
        held_out = model.predict(train_set.X[held_idx])
        fold_mse.append(float(np.mean((held_out - train_set.y[held_idx]) ** 2)))
        log.debug(
            f"{split.direction} fold {fold + 1}/{config.k_folds}: {epochs} epochs, "
            f"val loss {val_loss:.5f}, held-out MSE {fold_mse[-1]:.5f}"
        )
        if val_loss < best_loss:
            best_model, best_loss = model, val_loss

    report = metrics(
        best_model.predict(split.test.X),
        split.test.y,
        split.direction,
        split.sizes | {"train": len(train_set)},
        float(np.mean(fold_mse)),
    )
    log.info(
        f"Trained {split.direction} surrogate on {len(train_set)} samples: "
        f"test MSE {report.mse:.4f}, scaled MAE {report.scaled_mae:.4f}, R² {report.r_squared:.4f}"
    )
    return best_model, report


@dataclass(frozen=True, eq=False)
class EdfCurve:
    """
    A predicted day-ahead AIT trajectory.

    Attributes:
        trace: Predicted AIT, times in minutes from the generation time.
        direction: Increasing (AHU at ``max_gain``) or decreasing (AHU off).
        t_init: AIT at generation time, equal to the first sample.
        max_gain: Gain of the increasing rollout.
        disturbances: Weather forecast used for the rollout, 5-minute grid.
    """

    trace: TemperatureTrace
    direction: Direction
    t_init: float
    max_gain: float
    disturbances: np.ndarray


def generate_edf(
    model: MlpModel,
    direction: Direction,
    t_init: float,
    max_gain: float,
    disturbances: np.ndarray,
    horizon: int = 1440,
    step: int = 15,
) -> EdfCurve:
    """
    Roll a surrogate forward from ``t_init`` by repeated one-step predictions.

    Each step predicts the change over ``step`` minutes from the previous predicted AIT, with the AHU at ``max_gain``
    (increasing) or off (decreasing) and the forecast weather at the step's start.

    Args:
        model: Surrogate of the requested direction.
        direction: Direction of the curve. Must match the model's direction.
        t_init: AIT at the start of the curve.
        max_gain: AHU gain of an increasing curve, within (0, 1].
        disturbances: Forecast on the 5-minute grid from the start of the curve, shape ``(m, 5)``. The last row holds
            beyond its end.
        horizon: Curve length in minutes, at most 24 hours and a multiple of ``step``.
        step: Rollout step in minutes, at least 5.

    Returns:
        EdfCurve: ``horizon / step + 1`` samples, the first one equal to ``t_init``.

    Raises:
        ValidationError: On a direction mismatch or an invalid horizon, step or forecast.
    """
    direction = Direction(direction)
    if model.direction != direction:
        raise ValidationError(f"A {model.direction} model cannot generate a {direction} curve")
    if step < SENSOR_PERIOD or not 0 < horizon <= 1440 or horizon % step:
        raise ValidationError(f"Invalid EDF horizon {horizon} / step {step}")
    if direction == Direction.INCREASING and not 0.0 < max_gain <= 1.0:
        raise ValidationError(f"max_gain must be within (0, 1], got {max_gain}")
    forecast = np.asarray(disturbances, dtype=float)
    if forecast.ndim != 2 or forecast.shape[1] != len(WEATHER_FEATURES) or forecast.shape[0] == 0:
        raise ValidationError(f"Expected a forecast of shape (m, 5), got {forecast.shape}")
    gain = max_gain if direction == Direction.INCREASING else 0.0

    temps = [float(t_init)]
    for k in range(horizon // step):
        row = forecast[min(k * step // SENSOR_PERIOD, forecast.shape[0] - 1)]
        inputs = np.concatenate([[temps[-1], step, gain], row])
        temps.append(temps[-1] + predict(model, inputs))
    times = np.arange(len(temps)) * step
    return EdfCurve(TemperatureTrace(times, np.array(temps), step), direction, float(t_init), max_gain, forecast)


def edf_to_fos(curve: EdfCurve, delay: float = DEFAULT_DELAY) -> FosParams:
    """
    First-order parameters of an EDF curve.

    Raises:
        ValidationError: Propagated from :func:`~ahumpc.fos.extract_params`, including ``UnsettledCurveError``.
    """
    return extract_params(curve.trace, curve.direction, delay)
