"""Lohe non-Abelian oscillators for two-level systems, and a QL-bit emulation.

Each oscillator is a unit 4-vector ``x_i = (x, y, z, w)`` on S^3, the real
form of the SU(2) matrix ``[[w + iz, y + ix], [-y + ix, w - iz]]``, i.e. the
two-level state ``alpha = w + iz``, ``beta = -(y + ix)``. The flow is

    dx_i/dt = Omega_i x_i + s (K/N) sum_j a_ij [x_j - x_i (x_j . x_i)]

with ``Omega_i = omega_i^1 L1 + omega_i^2 L2 + omega_i^3 L3`` and ``s = +1``
(attractive, default) or ``s = -1`` (the printed minus sign).

The emulation runs the Kuramoto network of several QL bits joined by weak
cross edges, projects each QL bit's emergent two-state onto S^3, and compares
its synchronization with a Lohe run of matched frequencies and couplings.
"""

from __future__ import annotations

import csv
import logging
import math
import string
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigWarning, ContractError, NumericDivergenceError, ParameterError
from .graph import BiasedGraph, disjoint_union_coupled, indicator_matrix, ql_bit, spawn_seeds
from .kuramoto import (
    OscillatorParams,
    PhaseState,
    integrate,
    sample_frequencies,
    sample_initial_phases,
)
from .qlstate import emergent_eigenvector, project_coefficients

log = logging.getLogger(__name__)

L1 = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float)
L2 = np.array([[0, 0, 1, 0], [0, 0, 0, -1], [-1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
L3 = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
for _L in (L1, L2, L3):
    _L.flags.writeable = False


@dataclass(frozen=True)
class SkewGenerators:
    L1: np.ndarray = L1
    L2: np.ndarray = L2
    L3: np.ndarray = L3

    def stack(self) -> np.ndarray:
        return np.stack([self.L1, self.L2, self.L3])


GENERATORS = SkewGenerators()


@dataclass(frozen=True)
class OmegaTriple:
    omega1: float = 0.0
    omega2: float = 0.0
    omega3: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(w) for w in (self.omega1, self.omega2, self.omega3)):
            raise ParameterError("angular frequencies must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.omega1, self.omega2, self.omega3])


@dataclass(frozen=True)
class LoheState:
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or x.shape[1] != 4:
            raise ContractError(f"Lohe state must have shape (N, 4), got {x.shape}")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def normalized(cls, x, t: float = 0.0) -> "LoheState":
        x = np.asarray(x, dtype=float)
        return cls(x / np.linalg.norm(x, axis=1, keepdims=True), t)


def _omega_array(omegas, n: int | None = None) -> np.ndarray:
    if isinstance(omegas, OmegaTriple):
        arr = omegas.as_array()[None, :]
    elif len(omegas) and isinstance(omegas[0], OmegaTriple):
        arr = np.stack([w.as_array() for w in omegas])
    else:
        arr = np.atleast_2d(np.asarray(omegas, dtype=float))
    if arr.shape[-1] != 3:
        raise ContractError(f"omega triples must have 3 components, got shape {arr.shape}")
    if n is not None:
        if arr.shape[0] == 1 and n != 1:
            arr = np.repeat(arr, n, axis=0)
        if arr.shape[0] != n:
            raise ContractError(f"need {n} omega triples, got {arr.shape[0]}")
    return arr


def build_omega(w) -> np.ndarray:
    """Omega = w1 L1 + w2 L2 + w3 L3 for one triple (4x4) or many (N x 4 x 4)."""
    single = isinstance(w, OmegaTriple) or (
        not (len(w) and isinstance(w[0], OmegaTriple)) and np.ndim(w) == 1
    )
    om = np.einsum("nk,kij->nij", _omega_array(w), GENERATORS.stack())
    return om[0] if single else om


def _sign(coupling_sign: str) -> float:
    if coupling_sign == "attractive":
        return 1.0
    if coupling_sign == "paper_literal":
        return -1.0
    raise ParameterError(f"unknown coupling_sign {coupling_sign!r}")


def _lohe_flow(x, omega_mats, a, kn):
    s = a @ x
    dots = np.sum(s * x, axis=1)
    return np.einsum("nij,nj->ni", omega_mats, x) + kn * (s - x * dots[:, None])


def lohe_rhs(state: LoheState, omegas, K: float, g: BiasedGraph, coupling_sign: str = "attractive") -> np.ndarray:
    if state.n != g.n:
        raise ContractError(f"state has {state.n} oscillators, graph has {g.n} vertices")
    om = build_omega(_omega_array(omegas, state.n))
    return _lohe_flow(state.x, om, g.coupling, _sign(coupling_sign) * K / g.n)


@dataclass(frozen=True)
class LoheTrajectory:
    times: np.ndarray
    states: np.ndarray  # (S, N, 4)
    max_norm_drift: float  # largest | |x_i| - 1 | seen before any renormalization

    @property
    def final(self) -> LoheState:
        return LoheState(self.states[-1], float(self.times[-1]))


def integrate_lohe(
    state0: LoheState,
    omegas,
    K: float,
    g: BiasedGraph,
    dt: float,
    n_steps: int,
    sample_steps: Sequence[int] | None = None,
    coupling_sign: str = "attractive",
) -> LoheTrajectory:
    """RK4 with each x_i projected back onto S^3 after every step.

    Samples are taken at ``sample_steps`` (default: first and last step).
    """
    if not dt > 0 or n_steps < 1:
        raise ParameterError("need dt > 0 and n_steps >= 1")
    if state0.n != g.n:
        raise ContractError(f"state has {state0.n} oscillators, graph has {g.n} vertices")
    om = build_omega(_omega_array(omegas, state0.n))
    if om.ndim == 2:
        om = om[None]
    a = g.coupling
    kn = _sign(coupling_sign) * K / g.n
    steps = sorted({0, n_steps} if sample_steps is None else {int(s) for s in sample_steps})
    wanted = set(steps)
    x = state0.x.copy()
    drift = float(np.max(np.abs(np.linalg.norm(x, axis=1) - 1.0)))
    samples, times = [], []
    if 0 in wanted:
        samples.append(x.copy())
        times.append(state0.t)
    f = lambda y: _lohe_flow(y, om, a, kn)
    for step in range(1, n_steps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norms = np.linalg.norm(x, axis=1)
        if not np.all(np.isfinite(norms)):
            raise NumericDivergenceError(step)
        drift = max(drift, float(np.max(np.abs(norms - 1.0))))
        x /= norms[:, None]
        if step in wanted:
            samples.append(x.copy())
            times.append(state0.t + step * dt)
    log.debug("Lohe run: %d steps, max renormalization correction %.3g", n_steps, drift)
    return LoheTrajectory(np.array(times), np.stack(samples), drift)


def lohe_sync_metric(x) -> float:
    """Mean pairwise dot product (2 / (N (N-1))) sum_{i<j} x_i . x_j."""
    x = x.x if isinstance(x, LoheState) else np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ParameterError("sync metric needs at least two oscillators")
    gram = x @ x.T
    return float((gram.sum() - np.trace(gram)) / (n * (n - 1)))


def qlbit_to_vector(alpha, beta) -> np.ndarray:
    """Unit 4-vector (x, y, z, w) with alpha = w + iz and beta = -(y + ix); batched."""
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    v = np.stack([-beta.imag, -beta.real, alpha.imag, alpha.real], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def vector_to_qlbit(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    x, y, z, w = np.moveaxis(v, -1, 0)
    return w + 1j * z, -(y + 1j * x)


# -- QL-bit emulation -------------------------------------------------------


@dataclass
class LoheEmulationConfig:
    """Several QL bits (strong intra coupling) joined by weak weighted cross edges.

    Each QL bit starts internally in phase (von Mises with ``circ_std``) about
    its own uniformly random mean phase.
    """

    n_qlbits: int = 3
    n0: int = 8
    d: int = 5
    p_connect: float = 0.2
    bias: complex = 1.0 + 0j
    inter_p: float = 0.1
    inter_weight: float = 0.2
    K: float = 50.0
    sigma_nu: float = 1.0
    mean_freq: float = 100.0
    circ_std: float = 0.001
    periods: float = 80.0
    steps_per_period: int = 100
    n_samples: int = 40
    seed: int = 0
    coupling_sign: str = "attractive"

    def __post_init__(self):
        if self.n_qlbits < 2:
            raise ParameterError("need at least two QL bits")
        if self.inter_weight < 0 or not 0 <= self.inter_p <= 1:
            raise ParameterError("inter_weight must be >= 0 and inter_p in [0, 1]")
        if self.n_samples < 2:
            raise ParameterError("need at least two samples")
        if self.inter_weight >= 1.0:
            warnings.warn(
                f"inter-QL-bit weight {self.inter_weight} is not weaker than the intra coupling (1)",
                ConfigWarning,
                stacklevel=3,
            )

    @property
    def dt(self) -> float:
        return 2.0 * math.pi / self.mean_freq / self.steps_per_period

    @property
    def n_steps(self) -> int:
        return int(round(self.periods * self.steps_per_period))

    def sample_steps(self) -> np.ndarray:
        return np.unique(np.rint(np.linspace(0, self.n_steps, self.n_samples)).astype(int))


def qlbit_labels(q: int) -> tuple[str, str]:
    ch = string.ascii_lowercase[q] if q < 26 else f"q{q}_"
    return f"{ch}1", f"{ch}2"


@dataclass(frozen=True)
class LoheComparison:
    times: np.ndarray  # units of mean periods
    ql_metric: np.ndarray
    lohe_metric: np.ndarray
    ql_vectors: np.ndarray = field(repr=False)  # (S, Q, 4)
    lohe_vectors: np.ndarray = field(repr=False)
    qlbit_frequencies: np.ndarray = field(repr=False)


def build_emulation_graph(cfg: LoheEmulationConfig) -> tuple[BiasedGraph, list[BiasedGraph]]:
    seeds = spawn_seeds(cfg.seed, cfg.n_qlbits + 1)
    bits = [ql_bit(cfg.n0, cfg.d, cfg.p_connect, cfg.bias, seeds[q], qlbit_labels(q)) for q in range(cfg.n_qlbits)]
    inter = None if cfg.inter_p == 0 or cfg.inter_weight == 0 else (cfg.inter_p, 1.0, cfg.inter_weight)
    return disjoint_union_coupled(bits, inter, seeds[-1]), bits


def qlbit_coupling_graph(g: BiasedGraph, bits: Sequence[BiasedGraph]) -> BiasedGraph:
    """QL-bit level graph with a_qr = (total cross-edge weight between q and r) / n_q."""
    offsets = np.cumsum([0] + [b.n for b in bits])
    w = g.coupling
    q = len(bits)
    a = np.zeros((q, q))
    for i in range(q):
        for j in range(q):
            if i != j:
                a[i, j] = w[offsets[i] : offsets[i + 1], offsets[j] : offsets[j + 1]].sum() / bits[i].n
    a = 0.5 * (a + a.T)
    labels = tuple(qlbit_labels(i)[0][:-1] for i in range(q))
    return BiasedGraph((a > 0).astype(complex), labels, np.where(a > 0, a, 0.0))


def run_lohe_emulation(cfg: LoheEmulationConfig) -> LoheComparison:
    """Kuramoto network of QL bits versus a Lohe run with matched parameters.

    Lohe oscillator q gets ``Omega_q = eps_q L3`` with ``eps_q`` the mean
    frequency offset of QL bit q (a common phase rotation ``exp(-i eps t)`` of
    the two-state is generated by L3), coupling ``K * Q / N`` on the QL-bit
    graph from :func:`qlbit_coupling_graph`, and starts from the projected
    QL-bit vectors at t = 0.
    """
    g, bits = build_emulation_graph(cfg)
    n, Q = g.n, cfg.n_qlbits
    offsets = np.cumsum([0] + [b.n for b in bits])
    rng = np.random.default_rng(cfg.seed)
    eps = sample_frequencies(n, cfg.sigma_nu, rng)
    mus = rng.uniform(0.0, 2.0 * np.pi, size=Q)
    theta0 = np.concatenate([sample_initial_phases(b.n, cfg.circ_std, mu, rng) for b, mu in zip(bits, mus)])

    tops = [emergent_eigenvector(b.matrix, warn=False).vector for b in bits]
    inds = [indicator_matrix(b, qlbit_labels(q)) for q, b in enumerate(bits)]
    steps = cfg.sample_steps()
    slot = {int(s): k for k, s in enumerate(steps)}
    ql_vecs = np.empty((len(steps), Q, 4))

    def observe(t, theta):
        k = slot[int(round(t / cfg.dt))]
        for q in range(Q):
            th = theta[offsets[q] : offsets[q + 1]]
            c, _ = project_coefficients(np.exp(-1j * th) * tops[q], inds[q])
            ql_vecs[k, q] = qlbit_to_vector(c[0], c[1])

    params = OscillatorParams(cfg.K, cfg.sigma_nu, cfg.mean_freq, cfg.coupling_sign)
    integrate(PhaseState(theta0, eps), params, g, cfg.dt, cfg.n_steps, observer=observe, sample_steps=steps)

    freqs = np.array([eps[offsets[q] : offsets[q + 1]].mean() for q in range(Q)])
    omegas = np.stack([np.zeros(Q), np.zeros(Q), freqs], axis=1)
    qg = qlbit_coupling_graph(g, bits)
    traj = integrate_lohe(
        LoheState.normalized(ql_vecs[0]),
        omegas,
        cfg.K * Q / n,
        qg,
        cfg.dt,
        cfg.n_steps,
        sample_steps=steps,
        coupling_sign=cfg.coupling_sign,
    )
    times = steps / cfg.steps_per_period
    return LoheComparison(
        times,
        np.array([lohe_sync_metric(v) for v in ql_vecs]),
        np.array([lohe_sync_metric(v) for v in traj.states]),
        ql_vecs,
        traj.states,
        freqs,
    )


def emit_comparison_csv(result: LoheComparison, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "ql_metric", "lohe_metric"])
        for row in zip(result.times, result.ql_metric, result.lohe_metric):
            w.writerow([f"{float(v):.12g}" for v in row])
    return path
