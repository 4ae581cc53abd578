"""Adam optimizer over named numpy parameter dicts.

Written out rather than delegated so the update rule is pinned by unit tests
and carries no framework defaults (weight decay, amsgrad, ...).
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 2000
    tol: float = 1e-5  # plateau: no improvement beyond tol for `patience` iters
    patience: int = 100
    divergence_patience: int = 50  # consecutive rising-loss iterations
    frozen_sampling: bool = True  # False reseeds the sample plans every iteration
    spp: int = 64
    seed: int = 0

    def validate(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        for b in (self.beta1, self.beta2):
            if not (0.0 <= b < 1.0):
                raise ValueError("betas must lie in [0, 1)")
        if self.max_iters <= 0 or self.spp <= 0:
            raise ValueError("max_iters and spp must be positive")
        return self


class DivergenceError(RuntimeError):
    """Raised when a fit's loss rises for `divergence_patience` straight iterations."""


class DescentTracker:
    """Best-so-far tracking plus plateau / divergence stopping.

    Shared by the fitting loops so the stopping rules are testable with
    synthetic loss sequences. update() returns True when the loop should
    stop (no improvement beyond tol for `patience` iterations) and raises
    DivergenceError after `divergence_patience` consecutive strict rises.
    """

    def __init__(self, cfg: OptimConfig):
        self.tol = cfg.tol
        self.patience = cfg.patience
        self.divergence_patience = cfg.divergence_patience
        self.best_loss = np.inf
        self.best_state = None
        self.history = []
        self._best_iter = 0
        self._rising = 0
        self._prev = np.inf

    def reset_patience(self):
        """Restart the plateau clock, e.g. when a descent changes phase."""
        self._best_iter = len(self.history)

    def update(self, loss: float, state=None) -> bool:
        it = len(self.history)
        self.history.append(float(loss))
        if loss < self.best_loss:
            if loss < self.best_loss - self.tol:
                self._best_iter = it
            self.best_loss = float(loss)
            self.best_state = state
        self._rising = self._rising + 1 if loss > self._prev else 0
        self._prev = float(loss)
        if self._rising >= self.divergence_patience:
            raise DivergenceError(
                f"loss rose for {self._rising} consecutive iterations (iteration {it})"
            )
        return it - self._best_iter >= self.patience


@dataclass
class Adam:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: dict = field(default_factory=dict)
    _v: dict = field(default_factory=dict)
    _t: int = 0

    @staticmethod
    def from_config(cfg: OptimConfig, lr=None) -> "Adam":
        return Adam(lr=cfg.lr if lr is None else lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)

    def step(self, params: dict, grads: dict) -> dict:
        """One bias-corrected update; returns new arrays, inputs untouched."""
        self._t += 1
        t = self._t
        out = {}
        for k, p in params.items():
            g = np.asarray(grads[k], dtype=np.float64)
            m = self._m.get(k, np.zeros_like(g))
            v = self._v.get(k, np.zeros_like(g))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self._m[k], self._v[k] = m, v
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            out[k] = np.asarray(p, dtype=np.float64) - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out
