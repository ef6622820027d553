"""Bayes-by-backprop training of the LSTM: diagonal Gaussian posterior per
weight, Gaussian scale-mixture prior, reparameterized single-sample cost,
and the shuffled mini-batch loop.

Posterior scales are parameterized as sigma = softplus(rho) so they stay
positive under unconstrained updates; gradients reach rho through
d sigma / d rho = sigmoid(rho).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import NormalizationSpec, WindowedDataset
from .errors import (
    CacheMismatchError,
    ConfigInvalidError,
    DivergedLossError,
    EmptyBatchError,
    EmptyDatasetError,
    SchemaMismatchError,
)
from .lstm import TENSOR_NAMES, LstmWeights, SequenceCache, batch_backward, batch_forward, tensor_shapes
from .numerics import MixturePrior, RngStream, gaussian_logpdf, mixture_logpdf, mixture_logpdf_grad, sigmoid, softplus

log = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1

# Posterior initialization: small random means, sigma ~= 6.7e-3.
MU_INIT_STD = 0.05
RHO_INIT = -5.0

# Stream ids carved out of each farm seed's stream space.
STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_NOISE = 2


@dataclass
class VariationalParams:
    """Posterior mean and unconstrained scale for every weight tensor."""

    mu: dict[str, np.ndarray]
    rho: dict[str, np.ndarray]

    def __post_init__(self):
        for name in TENSOR_NAMES:
            if name not in self.mu or name not in self.rho:
                raise CacheMismatchError(f"posterior is missing tensor {name}")
            if self.mu[name].shape != self.rho[name].shape:
                raise CacheMismatchError(f"mu/rho shape mismatch for {name}")

    @property
    def hidden(self) -> int:
        return self.mu["W_f"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.mu["W_f"].shape[1] - self.hidden

    def sigma(self) -> dict[str, np.ndarray]:
        return {name: softplus(self.rho[name]) for name in TENSOR_NAMES}

    def n_params(self) -> int:
        return sum(arr.size for arr in self.mu.values())

    def copy(self) -> "VariationalParams":
        return VariationalParams(
            mu={k: v.copy() for k, v in self.mu.items()},
            rho={k: v.copy() for k, v in self.rho.items()},
        )

    @classmethod
    def init(cls, hidden: int, input_dim: int, rng: RngStream) -> "VariationalParams":
        shapes = tensor_shapes(hidden, input_dim)
        mu = {}
        rho = {}
        for name in TENSOR_NAMES:
            mu[name] = MU_INIT_STD * rng.standard_normal(int(np.prod(shapes[name]))).reshape(shapes[name])
            rho[name] = np.full(shapes[name], RHO_INIT)
        return cls(mu=mu, rho=rho)


@dataclass
class TrainConfig:
    """Hyperparameters of the mini-batch trainer."""

    hidden: int = 64
    input_dim: int = 1
    epochs: int = 30
    batch_size: int = 800
    learning_rate: float = 0.001
    prior: MixturePrior = field(default_factory=MixturePrior)
    kl_weight: float | None = None  # None -> 1 / batches-per-epoch
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigInvalidError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigInvalidError("learning_rate must be positive")
        if self.kl_weight is not None and self.kl_weight < 0:
            raise ConfigInvalidError("kl_weight must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigInvalidError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class SampledWeights:
    """One reparameterized draw: theta = mu + softplus(rho) * eps."""

    weights: LstmWeights
    eps: dict[str, np.ndarray]


def sample_weights(vp: VariationalParams, rng: RngStream) -> SampledWeights:
    """Draw network weights from the posterior, keeping eps for gradients."""
    sigma = vp.sigma()
    eps = {}
    theta = {}
    for name in TENSOR_NAMES:
        e = rng.normal_like(vp.mu[name])
        eps[name] = e
        theta[name] = vp.mu[name] + sigma[name] * e
    return SampledWeights(weights=LstmWeights.from_tensors(theta), eps=eps)


@dataclass
class CostResult:
    loss: float
    mse: float
    logq: float
    logp: float
    preds: np.ndarray
    cache: SequenceCache


def variational_cost(
    vp: VariationalParams,
    sampled: SampledWeights,
    features: np.ndarray,
    labels: np.ndarray,
    prior: MixturePrior,
    kl_weight: float,
) -> CostResult:
    """Single-sample cost: mean squared error plus the weighted divergence
    estimate log q(theta) - log p(theta) at the sampled weights."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if labels.size == 0:
        raise EmptyBatchError("batch is empty")
    preds, cache = batch_forward(features, sampled.weights)
    err = preds - labels
    mse = float(np.mean(err * err))
    sigma = vp.sigma()
    logq = 0.0
    logp = 0.0
    for name in TENSOR_NAMES:
        theta = sampled.weights.tensors()[name]
        logq += float(np.sum(gaussian_logpdf(theta, vp.mu[name], sigma[name])))
        logp += float(np.sum(mixture_logpdf(theta, prior)))
    loss = mse + kl_weight * (logq - logp)
    return CostResult(loss=loss, mse=mse, logq=logq, logp=logp, preds=preds, cache=cache)


@dataclass
class Gradients:
    mu: dict[str, np.ndarray]
    rho: dict[str, np.ndarray]


def cost_gradients(
    vp: VariationalParams,
    sampled: SampledWeights,
    cost: CostResult,
    labels: np.ndarray,
    prior: MixturePrior,
    kl_weight: float,
) -> Gradients:
    """Pathwise gradients of the cost w.r.t. every (mu, rho) entry.

    With theta = mu + sigma * eps held at the frozen eps:
      d/dmu  = g_data + kl * (dF/dtheta + dF/dmu)
      d/dsig = (g_data + kl * dF/dtheta) * eps + kl * dF/dsigma
    where F = log q(theta; mu, sigma) - log p(theta) and g_data is the BPTT
    gradient of the mean squared error at theta. The sigma gradient is
    chained onto rho via sigmoid(rho).
    """
    labels = np.asarray(labels, dtype=float)
    batch = labels.shape[0]
    if cost.preds.shape[0] != batch:
        raise CacheMismatchError("cost result does not match the label batch")
    grad_pred = 2.0 * (cost.preds - labels) / batch
    data_grads = batch_backward(cost.cache, grad_pred, sampled.weights)

    sigma = vp.sigma()
    grad_mu = {}
    grad_rho = {}
    for name in TENSOR_NAMES:
        theta = sampled.weights.tensors()[name]
        mu = vp.mu[name]
        sig = sigma[name]
        centered = theta - mu
        dq_dtheta = -centered / (sig * sig)
        dp_dtheta = mixture_logpdf_grad(theta, prior)
        dF_dtheta = dq_dtheta - dp_dtheta
        dF_dmu = centered / (sig * sig)
        dF_dsigma = -1.0 / sig + (centered * centered) / (sig * sig * sig)

        dtheta_total = data_grads[name] + kl_weight * dF_dtheta
        grad_mu[name] = dtheta_total + kl_weight * dF_dmu
        dsigma_total = dtheta_total * sampled.eps[name] + kl_weight * dF_dsigma
        grad_rho[name] = dsigma_total * sigmoid(vp.rho[name])
    return Gradients(mu=grad_mu, rho=grad_rho)


class Adam:
    """Adam over a flat dict of parameter arrays (beta1=0.9, beta2=0.999)."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for key, g in grads.items():
            if key not in self.m:
                self.m[key] = np.zeros_like(g)
                self.v[key] = np.zeros_like(g)
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / (1.0 - self.beta1**self.t)
            v_hat = self.v[key] / (1.0 - self.beta2**self.t)
            params[key] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Sgd:
    """Plain gradient descent, kept for the literal update-rule tests."""

    def __init__(self, learning_rate: float):
        self.lr = learning_rate

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for key, g in grads.items():
            params[key] -= self.lr * g


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return Sgd(config.learning_rate)
    return Adam(config.learning_rate)


@dataclass
class TrainResult:
    params: VariationalParams
    epoch_loss: list[float]
    epoch_mse: list[float]


def _flatten(vp: VariationalParams) -> dict[str, np.ndarray]:
    flat = {}
    for name in TENSOR_NAMES:
        flat[f"mu.{name}"] = vp.mu[name]
        flat[f"rho.{name}"] = vp.rho[name]
    return flat


def train(dataset: WindowedDataset, config: TrainConfig) -> TrainResult:
    """Run the shuffled mini-batch loop: one weight sample per batch,
    reparameterized gradients, configured optimizer.

    The final partial batch is kept; its data term is averaged over its
    true size. Deterministic for a fixed (dataset, config).
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("training dataset is empty")
    n_batches = math.ceil(n / config.batch_size)
    kl_weight = config.kl_weight if config.kl_weight is not None else 1.0 / n_batches

    vp = VariationalParams.init(config.hidden, config.input_dim, RngStream(config.seed, STREAM_INIT))
    shuffle_rng = RngStream(config.seed, STREAM_SHUFFLE)
    noise_rng = RngStream(config.seed, STREAM_NOISE)
    opt = make_optimizer(config)
    flat = _flatten(vp)

    epoch_loss: list[float] = []
    epoch_mse: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        mses = []
        for b in range(n_batches):
            idx = order[b * config.batch_size : (b + 1) * config.batch_size]
            sampled = sample_weights(vp, noise_rng)
            cost = variational_cost(
                vp, sampled, dataset.features[idx], dataset.labels[idx], config.prior, kl_weight
            )
            if not np.isfinite(cost.loss):
                raise DivergedLossError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = cost_gradients(vp, sampled, cost, dataset.labels[idx], config.prior, kl_weight)
            flat_grads = {}
            for name in TENSOR_NAMES:
                flat_grads[f"mu.{name}"] = grads.mu[name]
                flat_grads[f"rho.{name}"] = grads.rho[name]
            opt.step(flat, flat_grads)
            losses.append(cost.loss)
            mses.append(cost.mse)
        epoch_loss.append(float(np.mean(losses)))
        epoch_mse.append(float(np.mean(mses)))
        log.info("epoch %d/%d loss=%.6g mse=%.6g", epoch + 1, config.epochs, epoch_loss[-1], epoch_mse[-1])
    return TrainResult(params=vp, epoch_loss=epoch_loss, epoch_mse=epoch_mse)


def save_model(
    path,
    vp: VariationalParams,
    norm: NormalizationSpec,
    config: TrainConfig,
    meta: dict | None = None,
) -> None:
    """Persist posterior tensors plus the normalization and config echo.

    Floats serialize via repr, which round-trips doubles exactly.
    """
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "meta": dict(meta or {}),
        "config": {
            "hidden": config.hidden,
            "input_dim": config.input_dim,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "prior": {"pi": config.prior.pi, "sigma1": config.prior.sigma1, "sigma2": config.prior.sigma2},
            "kl_weight": config.kl_weight,
            "seed": config.seed,
            "optimizer": config.optimizer,
        },
        "normalization": {
            "farm_id": norm.farm_id,
            "min_val": norm.min_val,
            "max_val": norm.max_val,
        },
        "tensors": {
            kind: {
                name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
                for name, arr in getattr(vp, kind).items()
            }
            for kind in ("mu", "rho")
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> tuple[VariationalParams, NormalizationSpec, dict]:
    """Load a model file; returns (posterior, normalization, full document)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise SchemaMismatchError(f"{path}: unsupported model schema {doc.get('schema_version')}")
    tensors = {}
    for kind in ("mu", "rho"):
        tensors[kind] = {
            name: np.array(entry["data"], dtype=float).reshape(entry["shape"])
            for name, entry in doc["tensors"][kind].items()
        }
    vp = VariationalParams(mu=tensors["mu"], rho=tensors["rho"])
    norm_doc = doc["normalization"]
    norm = NormalizationSpec(
        farm_id=int(norm_doc["farm_id"]),
        min_val=float(norm_doc["min_val"]),
        max_val=float(norm_doc["max_val"]),
    )
    return vp, norm, doc
