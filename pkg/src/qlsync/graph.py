"""Biased graphs for quantum-like (QL) state spaces.

A :class:`BiasedGraph` is an undirected graph whose edges carry unit-modulus
complex biases, together with a labelling of every vertex by the subgraph
("block") it belongs to. QL bits are two d-regular random subgraphs joined by
random cross edges; two-QL-bit state spaces are Cartesian products of QL bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, NumericError, ParameterError

HERMITIAN_TOL = 1e-12
UNIT_TOL = 1e-12
MAX_PAIRING_ATTEMPTS = 10_000


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class BiasedGraph:
    """Undirected graph with unit-modulus edge biases and a block partition.

    ``adjacency[i, j]`` is the bias of edge (i, j) (zero if absent). Edges may
    additionally carry a positive real ``weights[i, j]`` (used for the weaker
    inter-QL-bit edges); the effective complex entry is weight times bias.
    ``labels[i]`` is the block label of vertex i.
    """

    adjacency: np.ndarray
    labels: tuple[str, ...]
    weights: np.ndarray | None = None
    _blocks: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=complex) + 0j  # clears signed zeros
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ContractError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        n = a.shape[0]
        if np.max(np.abs(a - a.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ContractError("adjacency is not Hermitian")
        if np.any(np.diag(a) != 0):
            raise ContractError("adjacency has a nonzero diagonal")
        mod = np.abs(a)
        nz = mod != 0
        if np.any(np.abs(mod[nz] - 1.0) > UNIT_TOL):
            raise ContractError("edge biases must have unit modulus")
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != n:
            raise ContractError(f"need one block label per vertex ({n}), got {len(labels)}")
        w = None
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != a.shape:
                raise ContractError("weights must match adjacency shape")
            if np.any(w != w.T):
                raise ContractError("weights must be symmetric")
            if np.any(w[nz] <= 0) or np.any(w[~nz] != 0):
                raise ContractError("weights must be positive exactly on edges")
            if np.all(w[nz] == 1.0):
                w = None
        object.__setattr__(self, "adjacency", _frozen(a))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", None if w is None else _frozen(w))
        blocks: dict[str, list[int]] = {}
        for i, lab in enumerate(labels):
            blocks.setdefault(lab, []).append(i)
        object.__setattr__(self, "_blocks", {k: _frozen(np.array(v, dtype=int)) for k, v in blocks.items()})

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def blocks(self) -> dict[str, np.ndarray]:
        """Block label -> sorted vertex indices, in order of first appearance."""
        return dict(self._blocks)

    @property
    def matrix(self) -> np.ndarray:
        """Effective complex adjacency (weight times bias)."""
        if self.weights is None:
            return self.adjacency
        return self.adjacency * self.weights

    @property
    def coupling(self) -> np.ndarray:
        """Real coupling strengths a_ij used by the oscillator dynamics."""
        mod = (self.adjacency != 0).astype(float)
        return mod if self.weights is None else mod * self.weights

    def degrees(self) -> np.ndarray:
        return np.count_nonzero(self.adjacency, axis=1)

    def relabel(self, mapping: Mapping[str, str] | str) -> "BiasedGraph":
        """Rename blocks; a plain string renames every vertex to that single label."""
        if isinstance(mapping, str):
            labels = (mapping,) * self.n
        else:
            labels = tuple(mapping.get(s, s) for s in self.labels)
        return BiasedGraph(self.adjacency, labels, self.weights)

    def __eq__(self, other):
        if not isinstance(other, BiasedGraph):
            return NotImplemented
        wa = self.weights if self.weights is not None else np.zeros(0)
        wb = other.weights if other.weights is not None else np.zeros(0)
        return (
            self.labels == other.labels
            and self.adjacency.shape == other.adjacency.shape
            and np.array_equal(self.adjacency, other.adjacency)
            and np.array_equal(wa, wb)
        )

    __hash__ = None

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        iu, ju = np.nonzero(np.triu(self.adjacency != 0, k=1))
        edges = [[int(i), int(j), float(self.adjacency[i, j].real), float(self.adjacency[i, j].imag)] for i, j in zip(iu, ju)]
        out = {
            "n": self.n,
            "edges": edges,
            "blocks": {k: [int(i) for i in v] for k, v in self._blocks.items()},
        }
        if self.weights is not None:
            out["weights"] = [
                [int(i), int(j), float(self.weights[i, j])]
                for i, j in zip(iu, ju)
                if self.weights[i, j] != 1.0
            ]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "BiasedGraph":
        try:
            n = int(data["n"])
            edges = data["edges"]
            blocks = data["blocks"]
        except KeyError as exc:
            raise ParameterError(f"graph JSON missing key {exc}") from None
        a = np.zeros((n, n), dtype=complex)
        for i, j, re, im in edges:
            if not 0 <= i < j < n:
                raise ParameterError(f"edge ({i}, {j}) must satisfy 0 <= i < j < n")
            a[i, j] = complex(re, im)
            a[j, i] = complex(re, -im)
        labels: list[str | None] = [None] * n
        for lab, idx in blocks.items():
            for i in idx:
                if labels[i] is not None:
                    raise ParameterError(f"vertex {i} assigned to more than one block")
                labels[i] = lab
        if any(lab is None for lab in labels):
            raise ParameterError("blocks must cover every vertex")
        w = None
        if data.get("weights"):
            w = (a != 0).astype(float)
            for i, j, wij in data["weights"]:
                w[i, j] = w[j, i] = float(wij)
        return cls(a, tuple(labels), w)

    @classmethod
    def from_json(cls, text: str) -> "BiasedGraph":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues; ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def top(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[-1]), self.eigenvectors[:, -1]


@dataclass(frozen=True)
class BlockIndicator:
    vector: np.ndarray
    block: str


# -- constructors -----------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def spawn_seeds(seed, k: int) -> list:
    """Split ``seed`` into ``k`` independent child seeds (a Generator is shared)."""
    if isinstance(seed, np.random.Generator):
        return [seed] * k
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(k)


def graph_from_edges(n: int, edges, label: str = "g") -> BiasedGraph:
    a = np.zeros((n, n), dtype=complex)
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    return BiasedGraph(a, (label,) * n)


def cycle_graph(n: int, label: str = "g") -> BiasedGraph:
    if n < 3:
        raise ParameterError("cycle needs at least 3 vertices")
    return graph_from_edges(n, [(i, (i + 1) % n) for i in range(n)], label)


def complete_graph(n: int, label: str = "g") -> BiasedGraph:
    if n == 1:
        return BiasedGraph(np.zeros((1, 1)), (label,))
    return graph_from_edges(n, combinations(range(n), 2), label)


def _pairing_attempt(n: int, k: int, rng: np.random.Generator) -> np.ndarray | None:
    stubs = rng.permutation(np.repeat(np.arange(n), k)).reshape(-1, 2)
    lo = stubs.min(axis=1)
    hi = stubs.max(axis=1)
    if np.any(lo == hi):
        return None
    keys = lo * n + hi
    if np.unique(keys).size != keys.size:
        return None
    return np.stack([lo, hi], axis=1)


def gen_d_regular_random(n: int, d: int, seed=None, label: str = "g") -> BiasedGraph:
    """Uniform random simple d-regular graph on n vertices (all biases +1).

    Uses the pairing (configuration) model with rejection of loops and
    multi-edges. For d > (n-1)/2 the complement, which is (n-1-d)-regular, is
    sampled instead; complementation is a bijection, so uniformity is kept.
    """
    if n <= 0 or not 0 < d < n:
        raise ParameterError(f"need 0 < d < n, got n={n}, d={d}")
    if (n * d) % 2:
        raise ParameterError(f"n*d must be even, got n={n}, d={d}")
    rng = _rng(seed)
    k = min(d, n - 1 - d)
    a = np.zeros((n, n), dtype=complex)
    if k > 0:
        for _ in range(MAX_PAIRING_ATTEMPTS):
            pairs = _pairing_attempt(n, k, rng)
            if pairs is not None:
                break
        else:
            raise NumericError(f"pairing model failed {MAX_PAIRING_ATTEMPTS} times for n={n}, k={k}")
        a[pairs[:, 0], pairs[:, 1]] = 1.0
        a[pairs[:, 1], pairs[:, 0]] = 1.0
    if k != d:
        a = 1.0 - a
        np.fill_diagonal(a, 0.0)
    return BiasedGraph(a, (label,) * n)


def _check_bias(bias) -> complex:
    b = complex(bias)
    if abs(abs(b) - 1.0) > 1e-9:
        raise ParameterError(f"bias must have unit modulus, got |{b}| = {abs(b)}")
    return b / abs(b)


def _normalize_inter_spec(m: int, inter_spec) -> dict[tuple[int, int], tuple[float, complex, float]]:
    if inter_spec is None:
        return {}
    if isinstance(inter_spec, Mapping):
        items = inter_spec.items()
    elif isinstance(inter_spec, tuple) and len(inter_spec) == 3 and not isinstance(inter_spec[0], tuple):
        items = [((a, b), inter_spec) for a, b in combinations(range(m), 2)]
    else:
        items = [((a, b), rest) for a, b, *rest in inter_spec]
    out = {}
    for (a, b), (p, bias, weight) in items:
        if not (0 <= a < m and 0 <= b < m) or a == b:
            raise ParameterError(f"invalid graph pair ({a}, {b})")
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"edge probability must lie in [0, 1], got {p}")
        if not weight > 0:
            raise ParameterError(f"cross-edge weight must be positive, got {weight}")
        bias = _check_bias(bias)
        if a > b:
            a, b, bias = b, a, bias.conjugate()
        out[(a, b)] = (float(p), bias, float(weight))
    return dict(sorted(out.items()))


def disjoint_union_coupled(graphs: Sequence[BiasedGraph], inter_spec=None, seed=None) -> BiasedGraph:
    """Block-diagonal union of ``graphs`` plus random cross edges.

    ``inter_spec`` maps a graph pair ``(a, b)`` with ``a < b`` to
    ``(p, bias, weight)``; it may also be a single ``(p, bias, weight)`` tuple
    applied to every pair. Each vertex pair across the two graphs is joined
    independently with probability p; the bias sits in the (a-row, b-column)
    entry and its conjugate opposite, the weight is stored separately.
    Pairs are processed in sorted order from a single RNG stream.
    """
    if not graphs:
        raise ParameterError("need at least one graph")
    spec = _normalize_inter_spec(len(graphs), inter_spec)
    if len(graphs) == 1 and not spec:
        return graphs[0]
    labels = [lab for g in graphs for lab in g.labels]
    if len(graphs) > 1:
        seen: set[str] = set()
        for g in graphs:
            own = set(g.labels)
            if own & seen:
                raise ParameterError(f"duplicate block labels across graphs: {sorted(own & seen)}")
            seen |= own
    offsets = np.cumsum([0] + [g.n for g in graphs])
    n = int(offsets[-1])
    a = np.zeros((n, n), dtype=complex)
    w = np.zeros((n, n))
    for g, o in zip(graphs, offsets):
        a[o : o + g.n, o : o + g.n] = g.adjacency
        w[o : o + g.n, o : o + g.n] = g.coupling
    rng = _rng(seed)
    for (ia, ib), (p, bias, weight) in spec.items():
        ga, gb = graphs[ia], graphs[ib]
        mask = rng.random((ga.n, gb.n)) < p
        oa, ob = offsets[ia], offsets[ib]
        block = np.where(mask, bias, 0.0)
        a[oa : oa + ga.n, ob : ob + gb.n] = block
        a[ob : ob + gb.n, oa : oa + ga.n] = block.conj().T
        w[oa : oa + ga.n, ob : ob + gb.n] = mask * weight
        w[ob : ob + gb.n, oa : oa + ga.n] = (mask * weight).T
    return BiasedGraph(a, tuple(labels), w)


def connect_subgraphs(g1: BiasedGraph, g2: BiasedGraph, p: float, bias=1.0, seed=None) -> BiasedGraph:
    """Hybridize two graphs by random cross edges carrying ``bias``.

    Same RNG stream as :func:`disjoint_union_coupled` with unit weight.
    """
    return disjoint_union_coupled([g1, g2], {(0, 1): (p, bias, 1.0)}, seed)


def cartesian_product(g: BiasedGraph, h: BiasedGraph) -> BiasedGraph:
    """Cartesian product G □ H.

    Vertex (u, x) has index ``u * h.n + x`` and label ``g.labels[u] + h.labels[x]``;
    the adjacency is ``A_G ⊗ I + I ⊗ A_H`` so eigenvectors are ``np.kron(X_i, Y_j)``.
    """
    ig, ih = np.eye(g.n), np.eye(h.n)
    a = np.kron(g.adjacency, ih) + np.kron(ig, h.adjacency)
    w = None
    if g.weights is not None or h.weights is not None:
        w = np.kron(g.coupling, ih) + np.kron(ig, h.coupling)
    labels = tuple(lu + lx for lu in g.labels for lx in h.labels)
    return BiasedGraph(a, labels, w)


def ql_bit(n0: int, d: int, p: float, bias=1.0, seed=None, labels: tuple[str, str] = ("a1", "a2")) -> BiasedGraph:
    """Two d-regular random subgraphs of n0 vertices joined with probability p."""
    s1, s2, s3 = spawn_seeds(seed, 3)
    g1 = gen_d_regular_random(n0, d, s1, labels[0])
    g2 = gen_d_regular_random(n0, d, s2, labels[1])
    return connect_subgraphs(g1, g2, p, bias, s3)


def ql_product(n0: int, d: int, p: float, bias_a=1.0, bias_b=1.0, seed=None) -> BiasedGraph:
    """Cartesian product of two QL bits with blocks a1b1, a2b1, a1b2, a2b2."""
    sa, sb = spawn_seeds(seed, 2)
    ga = ql_bit(n0, d, p, bias_a, sa, ("a1", "a2"))
    gb = ql_bit(n0, d, p, bias_b, sb, ("b1", "b2"))
    return cartesian_product(ga, gb)


# -- spectra ----------------------------------------------------------------


def fix_phase(v: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Rotate ``v`` so its largest-modulus entry (lowest index on ties) is real positive."""
    mod = np.abs(v)
    k = int(np.argmax(mod >= mod.max() * (1.0 - rtol)))
    if mod[k] == 0:
        return v
    return v * (np.conj(v[k]) / mod[k])


def _anchor(v: np.ndarray, rtol: float = 1e-9) -> int:
    mod = np.abs(v)
    return int(np.argmax(mod >= mod.max() * (1.0 - rtol)))


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if np.max(np.abs(a - a.conj().T), initial=0.0) > tol * scale:
        raise ContractError("matrix is not Hermitian")
    return a


def spectrum_of_matrix(a: np.ndarray, degenerate_tol: float = 1e-9) -> Spectrum:
    a = check_hermitian(a)
    vals, vecs = np.linalg.eigh(a)
    vecs = np.array(vecs, dtype=complex)
    for k in range(vecs.shape[1]):
        vecs[:, k] = fix_phase(vecs[:, k])
    # within a degenerate cluster, order by anchor vertex index
    scale = degenerate_tol * max(1.0, float(np.max(np.abs(vals), initial=0.0)))
    order = np.arange(len(vals))
    start = 0
    while start < len(vals):
        stop = start + 1
        while stop < len(vals) and vals[stop] - vals[stop - 1] <= scale:
            stop += 1
        if stop - start > 1:
            idx = order[start:stop]
            order[start:stop] = idx[np.argsort([_anchor(vecs[:, k]) for k in idx], kind="stable")]
        start = stop
    vals = vals[order]
    vecs = vecs[:, order]
    vals.flags.writeable = False
    vecs.flags.writeable = False
    return Spectrum(vals, vecs)


def spectrum(g: BiasedGraph) -> Spectrum:
    """Full spectrum of the graph's effective adjacency, ascending, phase-fixed."""
    return spectrum_of_matrix(g.matrix)


def spectral_gap(s: Spectrum) -> float:
    if len(s.eigenvalues) < 2:
        raise ParameterError("spectral gap needs at least two eigenvalues")
    return float(s.eigenvalues[-1] - s.eigenvalues[-2])


def block_indicator(g: BiasedGraph, label: str) -> BlockIndicator:
    try:
        idx = g._blocks[label]
    except KeyError:
        raise ParameterError(f"unknown block label {label!r}; have {list(g._blocks)}") from None
    v = np.zeros(g.n, dtype=complex)
    v[idx] = 1.0 / np.sqrt(len(idx))
    return BlockIndicator(v, label)


def indicator_matrix(g: BiasedGraph, labels: Sequence[str]) -> np.ndarray:
    """Columns are the normalized indicators of ``labels`` (real, n x len(labels))."""
    return np.stack([block_indicator(g, lab).vector.real for lab in labels], axis=1)
