"""Finite-alphabet probability primitives.

Conventions used across the package:

* a joint law is stored as an ``(n_states, n_obs)`` matrix, entry ``[x, y]``;
* a conditional law of the state given the observation (and every decision
  rule) is stored row-per-observation, shape ``(n_obs, n_states)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VALIDATION_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.size}")


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability vector over the symbols ``0..size-1``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty 1-d array")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > VALIDATION_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.probs.size)

    def __len__(self):
        return self.probs.size

    def __getitem__(self, i):
        return self.probs[i]


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint law ``p_XY`` as an ``(n_states, n_obs)`` matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.size == 0:
            raise ValueError("joint matrix must be a non-empty 2-d array")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("joint entries must be finite and nonnegative")
        if abs(m.sum() - 1.0) > VALIDATION_TOL:
            raise ValueError(f"joint entries sum to {m.sum()!r}, not 1")
        object.__setattr__(self, "matrix", m)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_obs(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def random(cls, n_states: int, n_obs: int, rng: np.random.Generator,
               concentration: float = 1.0) -> "JointDistribution":
        """Dirichlet-distributed joint, handy for property sweeps."""
        m = rng.dirichlet(np.full(n_states * n_obs, concentration))
        return cls(m.reshape(n_states, n_obs))


@dataclass(frozen=True, eq=False)
class ConditionalDistribution:
    """Rows ``q(.|y)``; rows with ``defined[y] == False`` hold a uniform filler.

    Filler rows are only there so that every row is a valid distribution;
    every expectation in the package weights them by ``p_Y(y) = 0``.
    """

    rows: np.ndarray
    defined: np.ndarray = field(default=None)

    def __post_init__(self):
        r = np.array(self.rows, dtype=float)
        if r.ndim != 2 or r.size == 0:
            raise ValueError("rows must be a non-empty 2-d array")
        d = (np.ones(r.shape[0], dtype=bool) if self.defined is None
             else np.array(self.defined, dtype=bool))
        if d.shape != (r.shape[0],):
            raise ValueError("defined mask must have one entry per row")
        r[~d] = 1.0 / r.shape[1]
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("conditional entries must be finite and nonnegative")
        bad = np.abs(r.sum(axis=1) - 1.0) > VALIDATION_TOL
        if np.any(bad):
            raise ValueError(f"rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        r.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "defined", d)

    @property
    def n_obs(self) -> int:
        return self.rows.shape[0]

    @property
    def n_states(self) -> int:
        return self.rows.shape[1]

    def row(self, y: int) -> FiniteDistribution:
        if not self.defined[y]:
            raise ValueError(f"conditional row {y} is undefined (zero-mass observation)")
        return FiniteDistribution(self.rows[y])


def decompose(joint: JointDistribution):
    """Split ``p_XY`` into ``(p_Y, p_{X|Y})``.

    Rows of the conditional whose observation has zero mass are marked
    undefined.
    """
    m = joint.matrix
    p_y = m.sum(axis=0)
    defined = p_y > 0
    rows = np.zeros((joint.n_obs, joint.n_states))
    rows[defined] = (m[:, defined] / p_y[defined]).T
    # exact renormalisation keeps rows within float noise of 1
    p_y = p_y / p_y.sum()
    return FiniteDistribution(p_y), ConditionalDistribution(rows, defined)


def variational_distance(q: FiniteDistribution, q2: FiniteDistribution) -> float:
    """Half the L1 distance between two distributions on one alphabet."""
    a = np.asarray(getattr(q, "probs", q), dtype=float)
    b = np.asarray(getattr(q2, "probs", q2), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"alphabet mismatch: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def joint_variational_distance(q: ConditionalDistribution, q2: ConditionalDistribution,
                               p_y: FiniteDistribution) -> float:
    """Distance between ``q(x|y)p_Y(y)`` and ``q2(x|y)p_Y(y)``."""
    a = np.asarray(getattr(q, "rows", q), dtype=float)
    b = np.asarray(getattr(q2, "rows", q2), dtype=float)
    w = np.asarray(getattr(p_y, "probs", p_y), dtype=float)
    if a.shape != b.shape or a.shape[-2] != w.size:
        raise ValueError(f"alphabet mismatch: {a.shape}, {b.shape}, p_Y of size {w.size}")
    return 0.5 * np.einsum("y,...yx->...", w, np.abs(a - b))


def sample(dist: FiniteDistribution, rng: np.random.Generator) -> int:
    """Draw one symbol by inverting the CDF with a single uniform."""
    p = np.asarray(getattr(dist, "probs", dist), dtype=float)
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if i >= p.size:
        # u landed on the rounding slack above the last positive entry
        i = int(np.flatnonzero(p > 0)[-1])
    return i


def sample_rows(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Vectorised inverse-CDF draw: one symbol per row of ``probs``."""
    cdf = np.cumsum(probs, axis=-1)
    u = uniforms[..., None] * cdf[..., -1:]
    idx = (cdf <= u).sum(axis=-1)
    last = probs.shape[-1] - 1 - np.argmax((probs > 0)[..., ::-1], axis=-1)
    return np.minimum(idx, last)
