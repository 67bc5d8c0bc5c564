"""Memoryless per-symbol models feeding the constrained samplers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SourceModel:
    """``table[j, y, x] = mu_{X_j|Y_j}(x | y)``.

    A source without side information has a single observation symbol
    (``n_obs == 1``) and ``y`` may be omitted.
    """

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 3:
            raise ValueError("table must have shape (n, n_obs, q)")
        if np.any(t < 0) or np.any(np.abs(t.sum(axis=2) - 1.0) > 1e-9):
            raise ValueError("every table[j, y] must be a probability vector")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n(self) -> int:
        return self.table.shape[0]

    @property
    def q(self) -> int:
        return self.table.shape[2]

    @property
    def n_obs(self) -> int:
        return self.table.shape[1]

    @classmethod
    def iid(cls, probs, n: int) -> "SourceModel":
        p = np.asarray(probs, dtype=float)
        return cls(np.broadcast_to(p, (n, 1, p.size)))

    @classmethod
    def from_channel(cls, prior, channel, n: int) -> "SourceModel":
        """Posterior tables from an input prior ``prior[x]`` and a memoryless
        channel ``channel[x, y] = W(y|x)``."""
        prior = np.asarray(prior, dtype=float)
        W = np.asarray(channel, dtype=float)
        joint = prior[:, None] * W  # (q, n_obs)
        py = joint.sum(axis=0)
        if np.any(py <= 0):
            raise ValueError("every output symbol needs positive probability")
        cond = (joint / py).T  # (n_obs, q)
        return cls(np.broadcast_to(cond, (n,) + cond.shape))

    def weights(self, y=None) -> np.ndarray:
        """Per-position likelihood rows for one observation vector, ``(n, q)``."""
        if y is None:
            if self.n_obs != 1:
                raise ValueError("this model needs side information y")
            y = np.zeros(self.n, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if y.shape[-1] != self.n:
            raise ValueError(f"side information must have length {self.n}")
        return self.table[np.arange(self.n), y]

    def log_prob(self, x, y=None) -> float:
        w = self.weights(y)
        with np.errstate(divide="ignore"):
            return float(np.log(w[np.arange(self.n), np.asarray(x)]).sum())


def bsc(flip: float) -> np.ndarray:
    """Binary symmetric channel matrix ``W[x, y]``."""
    return np.array([[1 - flip, flip], [flip, 1 - flip]])


def qary_symmetric(q: int, error: float) -> np.ndarray:
    """``q``-ary symmetric channel: correct w.p. ``1 - error``, otherwise uniform
    over the other symbols."""
    W = np.full((q, q), error / (q - 1))
    np.fill_diagonal(W, 1 - error)
    return W
