"""
Neural latent map

One hidden sigmoid layer mapping normalized (alpha_2in, alpha_2out, Pe) to
normalized (alpha_1out, alpha_3in). Training runs in torch (float64, CPU,
single thread, seeded); the trained weights are kept as numpy arrays so
evaluation and persistence need no torch.
"""

import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import torch
from scipy.special import expit
from torch import nn

from hub.errors import ConfigurationError, DimensionError, TrainingError
from hub.logger import get_logger


logger = get_logger("latent_map")

# torch's thread count is process-wide; trainings hold this while they pin it to 1
_TORCH_THREADS_LOCK = threading.Lock()


class LatentNet(nn.Module):
    """Linear -> sigmoid -> linear"""

    def __init__(self, n_in: int, n_hidden: int, n_out: int):
        super().__init__()
        self.hidden = nn.Linear(n_in, n_hidden, dtype=torch.float64)
        self.output = nn.Linear(n_hidden, n_out, dtype=torch.float64)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.output(torch.sigmoid(self.hidden(x)))


# JSON has no NaN; undefined losses are stored as null
def finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def none_to_nan(value: Optional[float]) -> float:
    return float('nan') if value is None else float(value)


@dataclass(frozen=True, eq=False)
class LatentMap:
    """Trained network with its affine input/output normalizers"""
    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    in_mean: np.ndarray
    in_scale: np.ndarray
    out_mean: np.ndarray
    out_scale: np.ndarray
    seed: int = 0
    activation: str = "sigmoid"
    loss_history: List[float] = field(default_factory=list)
    train_loss: float = float('nan')
    val_loss: float = float('nan')
    recipe: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_in(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def n_out(self) -> int:
        return self.w_out.shape[0]

    def evaluate_normalized(self, z: np.ndarray) -> np.ndarray:
        return expit(z @ self.w_hidden.T + self.b_hidden) @ self.w_out.T + self.b_out

    def __call__(self, inputs: np.ndarray) -> np.ndarray:
        x = np.asarray(inputs, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n_in:
            raise DimensionError(f"latent map expects {self.n_in} inputs, got {x.shape[1]}")
        y = self.evaluate_normalized((x - self.in_mean) / self.in_scale) * self.out_scale + self.out_mean
        return y[0] if single else y

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dims': [self.n_in, self.n_hidden, self.n_out],
            'activation': self.activation,
            'weights': {
                'w_hidden': self.w_hidden.tolist(),
                'b_hidden': self.b_hidden.tolist(),
                'w_out': self.w_out.tolist(),
                'b_out': self.b_out.tolist(),
            },
            'normalizers': {
                'in_mean': self.in_mean.tolist(),
                'in_scale': self.in_scale.tolist(),
                'out_mean': self.out_mean.tolist(),
                'out_scale': self.out_scale.tolist(),
            },
            'seed': self.seed,
            'loss_history': list(self.loss_history),
            'train_loss': finite_or_none(self.train_loss),
            'val_loss': finite_or_none(self.val_loss),
            'recipe': dict(self.recipe),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LatentMap":
        w, n = data['weights'], data['normalizers']
        return cls(
            w_hidden=np.array(w['w_hidden'], dtype=float).reshape(data['dims'][1], data['dims'][0]),
            b_hidden=np.array(w['b_hidden'], dtype=float),
            w_out=np.array(w['w_out'], dtype=float).reshape(data['dims'][2], data['dims'][1]),
            b_out=np.array(w['b_out'], dtype=float),
            in_mean=np.array(n['in_mean'], dtype=float),
            in_scale=np.array(n['in_scale'], dtype=float),
            out_mean=np.array(n['out_mean'], dtype=float),
            out_scale=np.array(n['out_scale'], dtype=float),
            seed=int(data['seed']),
            activation=data['activation'],
            loss_history=[float(v) for v in data['loss_history']],
            train_loss=none_to_nan(data['train_loss']),
            val_loss=none_to_nan(data['val_loss']),
            recipe=dict(data['recipe']),
        )


def _normalizer(values: np.ndarray):
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    # constant columns keep unit scale
    scale = np.where(scale > 1e-14 * np.maximum(1.0, np.abs(mean)), scale, 1.0)
    return mean, scale


def train_latent_map(inputs: np.ndarray, targets: np.ndarray, n_hidden: int = 10,
                     seed: int = 0, max_iter: int = 1000, val_fraction: float = 0.1) -> LatentMap:
    """
    Full-batch L-BFGS on the mean squared error in normalized space.

    Initial weights are uniform in [-0.5, 0.5]; a seeded 90/10 split gives
    the validation loss. Identical data, seed and settings give identical
    weights.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionError(f"inputs {X.shape} and targets {Y.shape} do not pair up")
    if X.shape[0] == 0:
        raise ConfigurationError("cannot train a latent map on an empty dataset")
    if n_hidden < 1:
        raise ConfigurationError(f"n_hidden must be >= 1, got {n_hidden}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise TrainingError("dataset contains non-finite entries")

    in_mean, in_scale = _normalizer(X)
    out_mean, out_scale = _normalizer(Y)
    Z = (X - in_mean) / in_scale
    T = (Y - out_mean) / out_scale

    rng = np.random.default_rng(seed)
    order = rng.permutation(X.shape[0])
    n_val = int(np.floor(val_fraction * X.shape[0])) if X.shape[0] >= 10 else 0
    val_idx, train_idx = np.sort(order[:n_val]), np.sort(order[n_val:])

    with _TORCH_THREADS_LOCK:
        threads = torch.get_num_threads()
        torch.set_num_threads(1)
        try:
            net, history, train_loss, val_loss = _fit(Z, T, train_idx, val_idx, n_hidden, seed, max_iter)
        finally:
            torch.set_num_threads(threads)

    latent = LatentMap(
        w_hidden=net.hidden.weight.detach().numpy().copy(),
        b_hidden=net.hidden.bias.detach().numpy().copy(),
        w_out=net.output.weight.detach().numpy().copy(),
        b_out=net.output.bias.detach().numpy().copy(),
        in_mean=in_mean, in_scale=in_scale, out_mean=out_mean, out_scale=out_scale,
        seed=int(seed), loss_history=history, train_loss=train_loss, val_loss=val_loss,
        recipe={
            'optimizer': 'lbfgs',
            'line_search': 'strong_wolfe',
            'max_iter': int(max_iter),
            'init': 'uniform(-0.5,0.5)',
            'val_fraction': float(val_fraction),
            'n_train': int(train_idx.size),
            'n_val': int(n_val),
        },
    )
    logger.info("latent map trained", rows=X.shape[0], hidden=n_hidden, evaluations=len(history),
                train_loss=train_loss, val_loss=val_loss)
    return latent


def _fit(Z: np.ndarray, T: np.ndarray, train_idx: np.ndarray, val_idx: np.ndarray,
         n_hidden: int, seed: int, max_iter: int):
    generator = torch.Generator().manual_seed(int(seed))
    net = LatentNet(Z.shape[1], n_hidden, T.shape[1])
    with torch.no_grad():
        for param in net.parameters():
            param.uniform_(-0.5, 0.5, generator=generator)

    z_train = torch.from_numpy(Z[train_idx])
    t_train = torch.from_numpy(T[train_idx])
    optimizer = torch.optim.LBFGS(net.parameters(), lr=1.0, max_iter=max_iter,
                                  tolerance_grad=1e-12, tolerance_change=1e-16,
                                  history_size=50, line_search_fn="strong_wolfe")
    loss_fn = nn.MSELoss()
    history: List[float] = []

    def closure():
        optimizer.zero_grad()
        loss = loss_fn(net(z_train), t_train)
        loss.backward()
        history.append(float(loss.item()))
        return loss

    optimizer.step(closure)
    if not history or not np.isfinite(history[-1]):
        raise TrainingError(f"latent map training diverged (last loss {history[-1] if history else None})")

    with torch.no_grad():
        train_loss = float(loss_fn(net(z_train), t_train).item())
        if val_idx.size:
            val_loss = float(loss_fn(net(torch.from_numpy(Z[val_idx])),
                                     torch.from_numpy(T[val_idx])).item())
        else:
            val_loss = float('nan')
    if not np.isfinite(train_loss):
        raise TrainingError("latent map training produced a non-finite loss")
    return net, history, train_loss, val_loss
