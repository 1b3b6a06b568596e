'''
Module: calibration.py
Description: Photometric calibration; ball-press dataset + (R, G, B, u, v) -> (g_u, g_v) MLP

Usage:
[Ball presses]
- ball_cap_height(): analytic spherical-cap indentation (px)
- ball_cap_gradients(): analytic cap gradients (px/px)
- generate_ball_press_dataset(): rendered presses with per-pixel labels

[Network]
- CalibrationNet: tanh MLP weights with a numpy forward pass and weight gradients
- train_calibration(): mini-batch SGD with momentum via scikit-learn
- angular_error_deg(): angle between normals implied by two gradient sets
'''
# Import packages
from __future__ import annotations
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.neural_network import MLPRegressor

from ..errors import TacSlamError
from ..geometry import TransformSE3
from ..surface import SensorSpec, GradientMap, normals_from_gradients
from .objects import Sphere
from .photometric import PhotometricModel
from .render import RenderParams, render_frame

log = logging.getLogger(__name__)

BALL_DIAMETER = 6.31  # mm
INPUT_DIM = 5
OUTPUT_DIM = 2


class CalibrationDiverged(TacSlamError):
    """Raised when the calibration loss or weights become non-finite."""


@dataclass(frozen=True)
class TrainParams:
    epochs: int = 200
    learning_rate: float = 1e-2
    momentum: float = 0.9
    batch_size: int = 1024
    hidden: tuple[int, ...] = (32, 32, 32)
    alpha: float = 0.0
    holdout_fraction: float = 0.2
    seed: int = 0


# Ball presses
def ball_cap_height(u: np.ndarray, v: np.ndarray, center: Sequence[float], radius_px: float, depth_px: float) -> np.ndarray:
    '''
    ball_cap_height(): indentation (px) of a ball of radius_px pressed depth_px into the gel
    '''
    r2 = (np.asarray(u) - center[0]) ** 2 + (np.asarray(v) - center[1]) ** 2
    cap = np.sqrt(np.maximum(radius_px**2 - r2, 0.0)) - (radius_px - depth_px)
    return np.maximum(cap, 0.0)


def ball_cap_gradients(u: np.ndarray, v: np.ndarray, center: Sequence[float], radius_px: float, depth_px: float) -> tuple[np.ndarray, np.ndarray]:
    '''
    ball_cap_gradients(): analytic (dH/du, dH/dv); zero outside the contact disc
    '''
    du = np.asarray(u, dtype=float) - center[0]
    dv = np.asarray(v, dtype=float) - center[1]
    r2 = du**2 + dv**2
    contact_r2 = 2 * radius_px * depth_px - depth_px**2
    inside = r2 < contact_r2
    root = np.sqrt(np.maximum(radius_px**2 - r2, 1e-12))
    return np.where(inside, -du / root, 0.0), np.where(inside, -dv / root, 0.0)


@dataclass(eq=False)
class BallPressDataset:
    inputs: np.ndarray = field(default_factory=lambda: np.zeros((0, INPUT_DIM)))
    targets: np.ndarray = field(default_factory=lambda: np.zeros((0, OUTPUT_DIM)))
    image_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    n_images: int = 0

    def __len__(self) -> int:
        return len(self.inputs)

    def subset(self, images: np.ndarray) -> "BallPressDataset":
        sel = np.isin(self.image_ids, images)
        return BallPressDataset(self.inputs[sel], self.targets[sel], self.image_ids[sel], len(images))

    def split(self, holdout_fraction: float, seed: int) -> tuple["BallPressDataset", "BallPressDataset"]:
        """Split by whole images; a single image is used for both parts."""
        ids = np.unique(self.image_ids)
        if len(ids) < 2 or holdout_fraction <= 0:
            return self, self
        n_hold = min(max(1, int(round(holdout_fraction * len(ids)))), len(ids) - 1)
        hold = np.random.default_rng(seed).permutation(ids)[:n_hold]
        return self.subset(np.setdiff1d(ids, hold)), self.subset(np.sort(hold))


def pixel_inputs(rgb: np.ndarray, u: np.ndarray, v: np.ndarray, spec: SensorSpec) -> np.ndarray:
    """(R, G, B, u, v) rows with coordinates normalized to [0, 1]."""
    return np.column_stack([rgb[v, u], u / (spec.width - 1), v / (spec.height - 1)])


def generate_ball_press_dataset(spec: SensorSpec, ball_diameter: float = BALL_DIAMETER, n_images: int = 50,
                                seed: int = 0, depth_range: tuple[float, float] = (0.3, 1.2),
                                render_params: RenderParams = RenderParams(noise_deg=0.0),
                                model: PhotometricModel = PhotometricModel(),
                                edge_margin_px: float = 2.0) -> BallPressDataset:
    '''
    generate_ball_press_dataset(): render n_images ball presses and label pixels analytically

    Parameters:
    spec (SensorSpec): sensor geometry
    ball_diameter (float, optional): mm (Default: 6.31)
    n_images (int, optional): number of presses (Default: 50)
    seed (int, optional): positions/depths/noise stream (Default: 0)
    depth_range (tuple, optional): press depth range in mm (Default: (0.3, 1.2))
    render_params (RenderParams, optional): renderer settings (Default: zero noise)
    model (PhotometricModel, optional): illumination (Default: PhotometricModel())
    edge_margin_px (float, optional): contact pixels closer than this to the rim are not labeled (Default: 2.0)
    '''
    if ball_diameter <= 0:
        raise ValueError(f"ball diameter must be positive, got {ball_diameter}")
    radius = 0.5 * ball_diameter
    ball = Sphere(radius)
    rng = np.random.default_rng(seed)
    uu, vv = spec.pixel_grid()
    cu0, cv0 = spec.center
    inputs, targets, ids = [], [], []

    for k in range(n_images):
        depth = min(rng.uniform(*depth_range), radius, spec.max_indentation)
        a_px = np.sqrt(2 * radius * depth - depth**2) / spec.pitch
        margin = a_px + 4.0
        cu = rng.uniform(margin, max(margin, spec.width - 1 - margin))
        cv = rng.uniform(margin, max(margin, spec.height - 1 - margin))
        center_s = np.array([(cu - cu0) * spec.pitch, (cv - cv0) * spec.pitch, depth - radius])
        res = render_frame(ball, TransformSE3(np.eye(3), -center_s), spec, render_params, rng, model)

        r = np.hypot(uu - cu, vv - cv)
        contact = r < a_px - edge_margin_px
        background = np.flatnonzero((r > a_px + 3.0).ravel())
        n_bg = min(len(background), int(contact.sum()))
        picked = np.zeros(contact.size, dtype=bool)
        picked[contact.ravel()] = True
        picked[rng.choice(background, size=n_bg, replace=False)] = True
        v_idx, u_idx = np.unravel_index(np.flatnonzero(picked), spec.shape)

        gu, gv = ball_cap_gradients(u_idx, v_idx, (cu, cv), radius / spec.pitch, depth / spec.pitch)
        inputs.append(pixel_inputs(res.rgb, u_idx, v_idx, spec))
        targets.append(np.column_stack([gu, gv]))
        ids.append(np.full(len(u_idx), k))

    if n_images == 0:
        return BallPressDataset()
    return BallPressDataset(np.concatenate(inputs), np.concatenate(targets), np.concatenate(ids), n_images)


# Network
@dataclass(eq=False)
class CalibrationNet:
    weights: list[np.ndarray]   # (fan_in, fan_out) per layer
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty and paired")
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise ValueError(f"layer shape mismatch {w.shape} vs {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise CalibrationDiverged("non-finite calibration weights")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @classmethod
    def from_regressor(cls, mlp: MLPRegressor) -> "CalibrationNet":
        return cls([np.asarray(w, dtype=np.float32) for w in mlp.coefs_],
                   [np.asarray(b, dtype=np.float32) for b in mlp.intercepts_])

    def _activations(self, X: np.ndarray) -> list[np.ndarray]:
        acts = [np.asarray(X, dtype=float)]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w.astype(float) + b.astype(float)
            acts.append(z if i == len(self.weights) - 1 else np.tanh(z))
        return acts

    def forward(self, X: np.ndarray) -> np.ndarray:
        return self._activations(X)[-1]

    def weight_gradient(self, X: np.ndarray, upstream: Optional[np.ndarray] = None
                        ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        '''
        weight_gradient(): backpropagate sum(upstream * forward(X)) to every weight and bias

        Parameters:
        X (N x 5 array): network inputs
        upstream (N x 2 array, optional): output weighting; all ones sums the outputs (Default: None)

        Returns (weight gradients, bias gradients), shaped like self.weights and self.biases.
        '''
        acts = self._activations(X)
        delta = np.ones_like(acts[-1]) if upstream is None else np.broadcast_to(
            np.asarray(upstream, dtype=float), acts[-1].shape)
        grad_w: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        grad_b: list[np.ndarray] = [np.empty(0)] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grad_w[i] = acts[i].T @ delta
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                # acts[i] is a tanh output
                delta = (delta @ self.weights[i].astype(float).T) * (1.0 - acts[i] ** 2)
        return grad_w, grad_b

    def predict_gradients(self, rgb: np.ndarray, spec: SensorSpec) -> GradientMap:
        uu, vv = spec.pixel_grid()
        u = uu.astype(int).ravel()
        v = vv.astype(int).ravel()
        out = self.forward(pixel_inputs(np.asarray(rgb, dtype=float), u, v, spec))
        return GradientMap(out[:, 0].reshape(spec.shape), out[:, 1].reshape(spec.shape))

    def predict_normals(self, rgb: np.ndarray, spec: SensorSpec) -> np.ndarray:
        return normals_from_gradients(self.predict_gradients(rgb, spec))


@dataclass
class TrainReport:
    holdout_mse: float
    holdout_angle_deg: float
    final_loss: float
    epochs: int
    n_train: int
    n_holdout: int


def angular_error_deg(g_pred: np.ndarray, g_true: np.ndarray) -> np.ndarray:
    '''
    angular_error_deg(): per-row angle (deg) between normals of gradient pairs (N x 2)
    '''
    def _n(g):
        n = np.column_stack([g[:, 0], g[:, 1], -np.ones(len(g))])
        return n / np.linalg.norm(n, axis=1, keepdims=True)
    cos = np.clip(np.sum(_n(g_pred) * _n(g_true), axis=1), -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def train_calibration(dataset: BallPressDataset, params: TrainParams = TrainParams()) -> tuple[CalibrationNet, TrainReport]:
    '''
    train_calibration(): fit the 5-32-32-32-2 MLP by mini-batch SGD with momentum

    Parameters:
    dataset (BallPressDataset): labeled pixels
    params (TrainParams, optional): recipe (Default: TrainParams())

    Dependencies: sklearn.neural_network.MLPRegressor
    '''
    if len(dataset) == 0:
        raise ValueError("calibration dataset is empty")
    train, hold = dataset.split(params.holdout_fraction, params.seed)
    mlp = MLPRegressor(hidden_layer_sizes=params.hidden, activation="tanh", solver="sgd",
                       learning_rate_init=params.learning_rate, momentum=params.momentum,
                       nesterovs_momentum=False, batch_size=min(params.batch_size, len(train)),
                       max_iter=params.epochs, shuffle=True, random_state=params.seed,
                       alpha=params.alpha, tol=0.0, n_iter_no_change=params.epochs + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                mlp.fit(train.inputs, train.targets)
            except ValueError as e:
                raise CalibrationDiverged(f"calibration training diverged: {e}", epoch=None) from e
    curve = np.asarray(mlp.loss_curve_)
    if not np.all(np.isfinite(curve)):
        raise CalibrationDiverged("calibration loss became non-finite",
                                  epoch=int(np.argmin(np.isfinite(curve))))
    for epoch in range(0, len(curve), max(1, len(curve) // 10)):
        log.debug("calibration epoch %d loss %.6g", epoch + 1, curve[epoch])

    net = CalibrationNet.from_regressor(mlp)
    pred = net.forward(hold.inputs)
    report = TrainReport(
        holdout_mse=float(np.mean((pred - hold.targets) ** 2)),
        holdout_angle_deg=float(np.mean(angular_error_deg(pred, hold.targets))),
        final_loss=float(curve[-1]),
        epochs=len(curve),
        n_train=len(train),
        n_holdout=len(hold),
    )
    log.info("calibration holdout: mse %.3g, mean angular error %.3f deg", report.holdout_mse, report.holdout_angle_deg)
    return net, report
