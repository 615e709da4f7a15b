"""Emergent QL states of a phase-dressed graph and their ensemble density matrix.

Oscillator phases enter the adjacency matrix through the diagonal unitary
``Phi = diag(exp(i theta))``: ``A' = Phi^-1 A Phi``. The eigenvector of the
largest eigenvalue of ``A'`` is projected onto the normalized block indicators
(basis ``a1b1, a2b1, a1b2, a2b2`` for two QL bits) and the projections are
averaged over state preparations into a 4x4 density matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ContractError, DegenerateStateWarning, ParameterError
from .graph import BiasedGraph, check_hermitian, fix_phase, indicator_matrix

PRODUCT_BASIS = ("a1b1", "a2b1", "a1b2", "a2b2")
QL_BIT_BASIS = ("a1", "a2")
DEGENERACY_GAP = 1e-8


@dataclass(frozen=True)
class PhaseUnitary:
    diag: np.ndarray

    @classmethod
    def from_phases(cls, theta) -> "PhaseUnitary":
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)


@dataclass(frozen=True)
class EmergentState:
    vector: np.ndarray
    eigenvalue: float
    gap: float

    @property
    def degenerate(self) -> bool:
        return self.gap < DEGENERACY_GAP


@dataclass(frozen=True)
class EffectiveState:
    """Block projections ``c`` (unit norm) and the weight ``residual`` left outside the blocks."""

    c: np.ndarray
    residual: float
    t: float = 0.0


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ContractError(f"density matrix must be square, got {r.shape}")
        object.__setattr__(self, "rho", r)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def purity(self) -> float:
        return purity(self)

    def to_json(self) -> list:
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.rho]

    @classmethod
    def from_json(cls, data) -> "DensityMatrix":
        return cls(np.array([[complex(re, im) for re, im in row] for row in data]))


def transform_adjacency(g: BiasedGraph, theta) -> np.ndarray:
    """``Phi^-1 A Phi``: edge (j, k) is multiplied by ``exp(-i (theta_j - theta_k))``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (g.n,):
        raise ContractError(f"need {g.n} phases, got shape {theta.shape}")
    phi = np.exp(1j * theta)
    return phi.conj()[:, None] * g.matrix * phi[None, :]


def emergent_eigenvector(a: np.ndarray, warn: bool = True) -> EmergentState:
    """Top eigenpair of a Hermitian matrix, phase-fixed, with the gap to the next eigenvalue."""
    a = check_hermitian(np.asarray(a))
    n = a.shape[0]
    if n == 1:
        return EmergentState(np.ones(1, dtype=complex), float(a[0, 0].real), np.inf)
    vals, vecs = sla.eigh(a, subset_by_index=[n - 2, n - 1])
    v = fix_phase(np.asarray(vecs[:, 1], dtype=complex))
    state = EmergentState(v, float(vals[1]), float(vals[1] - vals[0]))
    if warn and state.degenerate:
        warnings.warn(f"top eigenvalue is degenerate (gap {state.gap:.3g})", DegenerateStateWarning, stacklevel=2)
    return state


def default_basis(g: BiasedGraph) -> tuple[str, ...]:
    have = set(g.blocks)
    if have == set(PRODUCT_BASIS):
        return PRODUCT_BASIS
    if have == set(QL_BIT_BASIS):
        return QL_BIT_BASIS
    raise ContractError(f"cannot infer effective basis from blocks {sorted(have)}; pass labels explicitly")


def project_coefficients(vectors: np.ndarray, indicators: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched projection: ``vectors`` (..., n) against indicator columns (n, k).

    Returns renormalized coefficients (..., k) and pre-normalization residuals.
    """
    raw = vectors @ indicators  # indicators are real, so this is <J_k, v>
    weight = np.sum(np.abs(raw) ** 2, axis=-1)
    norm2 = np.sum(np.abs(vectors) ** 2, axis=-1)
    residual = np.clip(norm2 - weight, 0.0, None)
    c = raw / np.sqrt(weight)[..., None]
    return c, residual


def project_effective(v: np.ndarray, g: BiasedGraph, labels: Sequence[str] | None = None, t: float = 0.0) -> EffectiveState:
    labels = tuple(labels) if labels is not None else default_basis(g)
    missing = [lab for lab in labels if lab not in g.blocks]
    if missing:
        raise ContractError(f"graph lacks blocks {missing}")
    v = np.asarray(v, dtype=complex)
    if v.shape != (g.n,):
        raise ContractError(f"vector must have length {g.n}")
    c, residual = project_coefficients(v, indicator_matrix(g, labels))
    return EffectiveState(c, float(residual), t)


def _fsum_complex(values: np.ndarray) -> complex:
    return complex(math.fsum(values.real), math.fsum(values.imag))


def density_from_coefficients(c: np.ndarray) -> np.ndarray:
    """rho_mn = (1/M) sum_prep c_m conj(c_n) for ``c`` of shape (M, k) or (M, S, k).

    Entries are correctly-rounded sums (``math.fsum``), so the result does not
    depend on the order of preparations.
    """
    c = np.asarray(c, dtype=complex)
    if c.shape[0] == 0:
        raise ParameterError("need at least one preparation")
    m, k = c.shape[0], c.shape[-1]
    outer = c[..., :, None] * c[..., None, :].conj()  # (M, [S,] k, k)
    outer = np.moveaxis(outer, 0, -1)  # ([S,] k, k, M)
    flat = outer.reshape(-1, m)
    summed = np.array([_fsum_complex(row) for row in flat]).reshape(outer.shape[:-1]) / m
    tr = np.trace(summed, axis1=-2, axis2=-1).real
    rho = summed / tr[..., None, None]
    return 0.5 * (rho + np.swapaxes(rho.conj(), -1, -2))


def accumulate_density(states: Iterable[EffectiveState]) -> DensityMatrix:
    states = list(states)
    if not states:
        raise ParameterError("need at least one effective state")
    t0 = states[0].t
    if any(s.t != t0 for s in states):
        raise ParameterError("all states must share the same time")
    return DensityMatrix(density_from_coefficients(np.stack([s.c for s in states])))


def purity(rho) -> float:
    """Tr(rho^2)."""
    r = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", r, r)))


def purities(rhos: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...ij,...ji->...", rhos, rhos))


OFFDIAG_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def offdiag_series(rhos) -> dict[str, np.ndarray]:
    """Six |rho_mn| (m<n) series keyed ``absmn`` and four diagonal series keyed ``rhomm``."""
    arr = np.stack([r.rho if isinstance(r, DensityMatrix) else np.asarray(r) for r in rhos])
    if arr.shape[0] == 0:
        raise ParameterError("need at least one density matrix")
    out = {f"rho{m}{m}": arr[:, m, m].real.copy() for m in range(arr.shape[-1])}
    for m, n in OFFDIAG_PAIRS:
        out[f"abs{m}{n}"] = np.abs(arr[:, m, n])
    return out


def bootstrap_purity_se(c: np.ndarray, n_boot: int = 200, seed=0) -> float:
    """Bootstrap standard error of the ensemble purity from per-preparation coefficients (M, k)."""
    c = np.asarray(c, dtype=complex)
    rng = np.random.default_rng(seed)
    m = c.shape[0]
    vals = np.empty(n_boot)
    for b in range(n_boot):
        cb = c[rng.integers(0, m, size=m)]
        rho = cb.T @ cb.conj() / m
        vals[b] = purity(rho)
    return float(np.std(vals, ddof=1))
