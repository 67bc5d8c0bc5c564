"""Syndrome-based source and channel codes with stochastic decoders.

Every decoder draws from ``mu(x|y) restricted to {x : Ax = c}`` through one of
three backends:

``"sumproduct"``
    sequential sampler driven by message passing (exact on loop-free graphs)
``"gibbs"``
    single-site Gibbs chain on the systematic form (approximate)
``"exact"``
    enumerate the coset through its free coordinates (small cosets only)

With ``t_bar > 1`` the decoder draws ``t_bar`` independent candidates and
keeps the most probable one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gf import (InfeasibleSystem, SparseCheckMatrix, coset_members, rank, syndrome,
                 to_systematic)
from .gibbs import gibbs_run
from .models import SourceModel
from .prob import sample as draw
from .prob import sample_rows
from .sumproduct import EmptyCosetError, ScheduleConfig, sample_constrained

BACKENDS = ("sumproduct", "gibbs", "exact")


class EncodingError(EmptyCosetError):
    """No positive-mass channel input satisfies both ``Ax = c`` and ``Bx = m``."""


@dataclass
class DecoderOptions:
    backend: str = "sumproduct"
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    kappa: int = 200
    gibbs_mode: str = "raw"
    t_bar: int = 1

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.t_bar < 1:
            raise ValueError("t_bar must be >= 1")


def _options(backend, opts: dict) -> DecoderOptions:
    if isinstance(backend, DecoderOptions):
        return backend
    return DecoderOptions(backend=backend, **opts)


def _log_mass(w: np.ndarray, x: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(w[np.arange(w.shape[0]), x]).sum())


def _draw_one(A, c, w, opts: DecoderOptions, rng, sys=None) -> np.ndarray:
    if opts.backend == "sumproduct":
        X, info = sample_constrained(A, c, w, rng.random((1, A.n)), opts.schedule)
        if not info.feasible[0]:
            raise EmptyCosetError("no positive-mass member in the coset")
        return X[0]
    sys = sys if sys is not None else to_systematic(A)
    if not sys.is_consistent(c):
        raise EmptyCosetError("Ax = c has no solution")
    if opts.backend == "gibbs":
        x, state = gibbs_run(sys, c, None, w, opts.kappa, rng, opts.gibbs_mode, return_state=True)
        if not np.isfinite(_log_mass(w, x)):
            raise EmptyCosetError("chain never reached a positive-mass coset member")
        return x
    members = coset_members(sys, c)
    mass = np.prod(w[np.arange(A.n), members], axis=1)
    if mass.sum() <= 0:
        raise EmptyCosetError("coset carries no mass")
    return members[draw(mass / mass.sum(), rng)]


def constrained_decode(A: SparseCheckMatrix, c, weights, backend="sumproduct",
                       rng: np.random.Generator | None = None, **opts) -> np.ndarray:
    """Draw ``x`` with probability proportional to ``prod_j weights[j, x_j]``
    among the solutions of ``Ax = c``."""
    opts = _options(backend, opts)
    rng = rng if rng is not None else np.random.default_rng()
    w = np.asarray(weights, dtype=float)
    sys = None if opts.backend == "sumproduct" else to_systematic(A)
    best, best_lm = None, -np.inf
    for _ in range(opts.t_bar):
        x = _draw_one(A, c, w, opts, rng, sys)
        lm = _log_mass(w, x)
        if best is None or lm > best_lm:
            best, best_lm = x, lm
    return best


def decode_batch(A: SparseCheckMatrix, C, W, uniforms, schedule: ScheduleConfig | None = None):
    """Sum-product decoding of many independent problems at once.

    ``C`` is ``(B, l)``, ``W`` is ``(B, n, q)`` and ``uniforms`` ``(B, n)``.
    Returns ``(X_hat, feasible)``.
    """
    X, info = sample_constrained(A, C, W, uniforms, schedule)
    return X, info.feasible


def compress(x, A: SparseCheckMatrix) -> np.ndarray:
    """The codeword of ``x`` is its syndrome."""
    return syndrome(A, x)


def decompress_stochastic(c, A: SparseCheckMatrix, mu_x: SourceModel, backend="sumproduct",
                          rng: np.random.Generator | None = None, **opts) -> np.ndarray:
    """Reproduce a source block from its codeword alone."""
    return constrained_decode(A, c, mu_x.weights(), backend, rng, **opts)


def sw_decode(c, y, A: SparseCheckMatrix, mu_xy: SourceModel, backend="sumproduct",
              rng: np.random.Generator | None = None, **opts) -> np.ndarray:
    """Reproduce a source block from its codeword and decoder side information."""
    return constrained_decode(A, c, mu_xy.weights(y), backend, rng, **opts)


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """Channel code: input prior, memoryless channel, coset map ``A`` with fixed
    target ``c`` and message map ``B``."""

    A: SparseCheckMatrix
    prior: np.ndarray
    channel: np.ndarray | None = None
    B: SparseCheckMatrix | None = None
    c: np.ndarray | None = None

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=float)
        object.__setattr__(self, "prior", prior)
        if prior.size != self.A.q:
            raise ValueError("prior must cover the field alphabet")
        if self.B is not None and (self.B.n != self.A.n or self.B.q != self.A.q):
            raise ValueError("A and B must share n and q")
        if self.c is not None:
            c = np.asarray(self.c, dtype=np.int64) % self.A.q
            if c.shape != (self.A.l,):
                raise ValueError(f"c must have length {self.A.l}")
            object.__setattr__(self, "c", c)
        if self.channel is not None:
            W = np.asarray(self.channel, dtype=float)
            if W.shape[0] != self.A.q:
                raise ValueError("channel rows must be indexed by the input alphabet")
            object.__setattr__(self, "channel", W)

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def q(self) -> int:
        return self.A.q

    @property
    def rate_A(self) -> float:
        """``(1/n) log |Im A|`` in nats."""
        return rank(self.A) * np.log(self.q) / self.n

    @property
    def rate_B(self) -> float:
        return 0.0 if self.B is None else rank(self.B) * np.log(self.q) / self.n

    def input_model(self) -> SourceModel:
        return SourceModel.iid(self.prior, self.n)

    def side_info_model(self) -> SourceModel:
        if self.channel is None:
            raise ValueError("code spec has no channel")
        return SourceModel.from_channel(self.prior, self.channel, self.n)


@dataclass
class TrialOutcome:
    success: bool
    x: np.ndarray
    x_hat: np.ndarray | None
    m: np.ndarray | None = None
    m_hat: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def channel_encode(m, spec: CodeSpec, backend="exact", rng: np.random.Generator | None = None,
                   **opts) -> np.ndarray:
    """Draw a channel input from the prior restricted to ``Ax = c, Bx = m``.

    Raises :class:`EncodingError` when that set carries no prior mass.
    """
    if spec.B is None or spec.c is None:
        raise ValueError("channel encoding needs both B and c")
    m = np.asarray(m, dtype=np.int64) % spec.q
    if m.shape != (spec.B.l,):
        raise ValueError(f"message must have length {spec.B.l}")
    stacked = spec.A.vstack(spec.B)
    target = np.concatenate([spec.c, m])
    try:
        x = constrained_decode(stacked, target, spec.input_model().weights(), backend, rng, **opts)
    except (EmptyCosetError, InfeasibleSystem) as exc:
        raise EncodingError(str(exc)) from exc
    assert np.array_equal(syndrome(spec.A, x), spec.c) and np.array_equal(syndrome(spec.B, x), m)
    return x


def channel_decode(y, spec: CodeSpec, backend="sumproduct",
                   rng: np.random.Generator | None = None, **opts) -> np.ndarray:
    """Recover the channel input with the side-information decoder, then the
    message as ``B x_hat``."""
    if spec.B is None or spec.c is None:
        raise ValueError("channel decoding needs both B and c")
    x_hat = sw_decode(spec.c, y, spec.A, spec.side_info_model(), backend, rng, **opts)
    return syndrome(spec.B, x_hat)


def channel_trial(m, spec: CodeSpec, rng: np.random.Generator, encoder_backend="exact",
                  decoder_backend="sumproduct", **opts) -> TrialOutcome:
    """Encode, pass through the channel, decode. An encoding error is a failed
    trial with ``x_hat = None``."""
    try:
        x = channel_encode(m, spec, encoder_backend, rng)
    except EncodingError:
        return TrialOutcome(False, None, None, np.asarray(m), None, {"encoding_error": True})
    y = sample_rows(spec.channel[x], rng.random(spec.n))
    x_hat = sw_decode(spec.c, y, spec.A, spec.side_info_model(), decoder_backend, rng, **opts)
    m_hat = syndrome(spec.B, x_hat)
    return TrialOutcome(bool(np.array_equal(m_hat, m)), x, x_hat, np.asarray(m), m_hat,
                        {"encoding_error": False, "x_error": not np.array_equal(x, x_hat)})


@dataclass
class Roundtrip:
    y: np.ndarray
    x_hat: np.ndarray
    z_hat: np.ndarray
    noise: np.ndarray

    @property
    def success(self) -> bool:
        return bool(np.array_equal(self.x_hat, self.noise))


def additive_noise_roundtrip(z, noise_model: SourceModel, A: SparseCheckMatrix,
                             backend="sumproduct", rng: np.random.Generator | None = None,
                             noise=None, **opts) -> Roundtrip:
    """Send codeword ``z`` (``Az = 0``) over an additive-noise channel and
    recover it by stochastically decoding the noise from the syndrome of ``y``.

    ``noise`` may be supplied; otherwise it is drawn from ``noise_model``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    z = np.asarray(z, dtype=np.int64) % A.q
    if np.any(syndrome(A, z) != 0):
        raise ValueError("z is not a codeword (Az != 0)")
    w = noise_model.weights()
    x = (sample_rows(w, rng.random(A.n)) if noise is None
         else np.asarray(noise, dtype=np.int64) % A.q)
    y = (z + x) % A.q
    c = syndrome(A, y)
    x_hat = decompress_stochastic(c, A, noise_model, backend, rng, **opts)
    return Roundtrip(y, x_hat, (y - x_hat) % A.q, x)
