"""Kuramoto phase-oscillator dynamics on a biased graph.

Phases are simulated in the rotating frame of the network: only the offsets
``epsilon_i`` from the mean natural frequency enter the flow, and the mean
frequency is used to convert "periods" into time units.

All integration routines accept either a single state (phases of shape
``(n,)``) or a batch of independent realizations (shape ``(m, n)``); each
realization evolves independently of the others in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.special import i0e, i1e

from .errors import ContractError, NumericDivergenceError, NumericError, ParameterError
from .graph import BiasedGraph

TWO_PI = 2.0 * np.pi
CouplingSign = Literal["attractive", "paper_literal"]
UNIFORM = "uniform"


@dataclass(frozen=True)
class OscillatorParams:
    """Coupling and frequency parameters.

    ``coupling_sign="attractive"`` gives the synchronizing flow
    ``eps_i + (K/N) sum_j a_ij sin(theta_j - theta_i)``; ``"paper_literal"``
    keeps the printed ``-K/N`` prefactor, which repels neighbours.
    ``normalization`` defaults to the oscillator count.
    """

    K: float
    sigma_nu: float = 1.0
    mean_freq: float = 100.0
    coupling_sign: CouplingSign = "attractive"
    normalization: float | None = None

    def __post_init__(self):
        if self.K < 0:
            raise ParameterError(f"K must be >= 0, got {self.K}")
        if self.sigma_nu < 0:
            raise ParameterError(f"sigma_nu must be >= 0, got {self.sigma_nu}")
        if not self.mean_freq > 0:
            raise ParameterError(f"mean_freq must be > 0, got {self.mean_freq}")
        if self.coupling_sign not in ("attractive", "paper_literal"):
            raise ParameterError(f"unknown coupling_sign {self.coupling_sign!r}")
        if self.normalization is not None and not self.normalization > 0:
            raise ParameterError("normalization must be positive")

    @property
    def sign(self) -> float:
        return 1.0 if self.coupling_sign == "attractive" else -1.0

    @property
    def period(self) -> float:
        return TWO_PI / self.mean_freq

    def prefactor(self, n: int) -> float:
        """Signed K/N."""
        return self.sign * self.K / (self.normalization or n)


@dataclass(frozen=True)
class PhaseState:
    theta: np.ndarray
    epsilon: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        eps = np.asarray(self.epsilon, dtype=float)
        if th.shape != eps.shape:
            raise ContractError(f"theta shape {th.shape} != epsilon shape {eps.shape}")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "epsilon", eps)

    @property
    def n(self) -> int:
        return self.theta.shape[-1]

    def wrapped(self) -> np.ndarray:
        return np.mod(self.theta, TWO_PI)


# -- sampling ---------------------------------------------------------------


def sample_frequencies(n: int, sigma_nu: float, seed=None) -> np.ndarray:
    """Normal offsets with std ``sigma_nu``, recentred to an exactly zero sum."""
    if sigma_nu < 0:
        raise ParameterError(f"sigma_nu must be >= 0, got {sigma_nu}")
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, 1.0, size=n) * sigma_nu
    if sigma_nu == 0:
        return np.zeros(n)
    return eps - eps.mean()


def mean_resultant_length(kappa: float) -> float:
    """A(kappa) = I1(kappa) / I0(kappa) for the von Mises distribution."""
    return float(i1e(kappa) / i0e(kappa))


def circular_std(phases: np.ndarray) -> float:
    r = np.abs(np.mean(np.exp(1j * np.asarray(phases))))
    return float(np.sqrt(-2.0 * np.log(r))) if r > 0 else np.inf


def kappa_from_circular_std(circ_std: float) -> float:
    """Concentration whose population circular std ``sqrt(-2 ln A(kappa))`` equals ``circ_std``."""
    if not circ_std > 0:
        raise ParameterError(f"circular std must be > 0, got {circ_std}")
    target = -0.5 * circ_std**2  # ln A(kappa)
    if target < -700:
        return 0.0
    f = lambda lk: np.log(mean_resultant_length(np.exp(lk))) - target
    lo, hi = -60.0, 60.0
    if f(lo) > 0:
        return 0.0
    if f(hi) < 0:
        raise NumericError(f"circular std {circ_std} is too small to resolve")
    try:
        return float(np.exp(brentq(f, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=500)))
    except (RuntimeError, ValueError) as exc:
        raise NumericError(f"kappa solver did not converge for circ_std={circ_std}: {exc}") from exc


def sample_initial_phases(n: int, circ_std: float | str = UNIFORM, mu: float = 0.0, seed=None) -> np.ndarray:
    """Von Mises initial phases with the given circular std about ``mu``.

    ``circ_std="uniform"`` (or None) draws uniformly on [0, 2pi); ``0`` puts
    every phase exactly at ``mu``.
    """
    rng = np.random.default_rng(seed)
    if circ_std is None or circ_std == UNIFORM:
        return rng.uniform(0.0, TWO_PI, size=n)
    circ_std = float(circ_std)
    if circ_std == 0:
        return np.full(n, float(mu))
    kappa = kappa_from_circular_std(circ_std)
    if kappa == 0.0:
        return rng.uniform(0.0, TWO_PI, size=n)
    return rng.vonmises(mu, kappa, size=n)


# -- flow -------------------------------------------------------------------


def coupling_operator(g: BiasedGraph) -> sp.csr_matrix:
    return sp.csr_matrix(g.coupling)


def _coupling_sum(theta_cols: np.ndarray, w: sp.csr_matrix) -> np.ndarray:
    # sum_j a_ij sin(theta_j - theta_i) = cos(theta_i) (A sin)_i - sin(theta_i) (A cos)_i
    s = np.sin(theta_cols)
    c = np.cos(theta_cols)
    return c * (w @ s) - s * (w @ c)


def kuramoto_rhs(state: PhaseState, params: OscillatorParams, g: BiasedGraph) -> np.ndarray:
    """dtheta/dt = eps_i + s (K/N) sum_j a_ij sin(theta_j - theta_i)."""
    if state.n != g.n:
        raise ContractError(f"state has {state.n} oscillators, graph has {g.n} vertices")
    w = coupling_operator(g)
    cols = np.atleast_2d(state.theta).T
    out = state.epsilon + params.prefactor(g.n) * _coupling_sum(cols, w).T
    return out.reshape(state.theta.shape)


def default_dt(mean_freq: float = 100.0, steps_per_period: int = 100) -> float:
    return TWO_PI / mean_freq / steps_per_period


def run_length(periods: float = 80.0, mean_freq: float = 100.0) -> float:
    return periods * TWO_PI / mean_freq


Observer = Callable[[float, np.ndarray], None]


def integrate(
    state0: PhaseState,
    params: OscillatorParams,
    g: BiasedGraph,
    dt: float,
    n_steps: int,
    observer: Observer | None = None,
    sample_steps: Iterable[int] | None = None,
    realization_offset: int | None = None,
) -> PhaseState:
    """Classical fixed-step RK4 integration of the Kuramoto flow.

    ``observer(t, theta)`` is called at each step index in ``sample_steps``
    (every step, including 0, when omitted). ``theta`` handed to the observer
    has the same shape as ``state0.theta`` and must not be kept by reference.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    if n_steps < 1:
        raise ParameterError(f"n_steps must be >= 1, got {n_steps}")
    if state0.n != g.n:
        raise ContractError(f"state has {state0.n} oscillators, graph has {g.n} vertices")
    shape = state0.theta.shape
    w = coupling_operator(g)
    kn = params.prefactor(g.n)
    # column layout: (n, m) so sparse products act per realization column
    th = np.atleast_2d(state0.theta).T.copy()
    eps = np.atleast_2d(state0.epsilon).T.copy()

    def f(x):
        return eps + kn * _coupling_sum(x, w)

    if sample_steps is None:
        wanted = set(range(n_steps + 1)) if observer else set()
    else:
        wanted = {int(s) for s in sample_steps}
        if any(s < 0 or s > n_steps for s in wanted):
            raise ParameterError("sample steps must lie in [0, n_steps]")
    t0 = state0.t

    def emit(step):
        if observer is not None and step in wanted:
            observer(t0 + step * dt, th.T.reshape(shape))

    emit(0)
    half = 0.5 * dt
    for step in range(1, n_steps + 1):
        k1 = f(th)
        k2 = f(th + half * k1)
        k3 = f(th + half * k2)
        k4 = f(th + dt * k3)
        th += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(th)):
            bad = int(np.argmax(~np.all(np.isfinite(th), axis=0)))
            real = None if len(shape) == 1 else bad + (realization_offset or 0)
            raise NumericDivergenceError(step, real)
        emit(step)
    return PhaseState(th.T.reshape(shape).copy(), state0.epsilon, t0 + n_steps * dt)


def order_parameter(theta: np.ndarray) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
    """(Re, |.|) of the mean phasor (1/N) sum_i exp(i theta_i); batched along axis -1."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] < 1:
        raise ParameterError("order parameter needs at least one phase")
    z = np.mean(np.exp(1j * theta), axis=-1)
    if np.ndim(z) == 0:
        return float(z.real), float(abs(z))
    return z.real, np.abs(z)
