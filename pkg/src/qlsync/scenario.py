"""Configuration-driven ensemble experiments.

A scenario builds the Cartesian product of two QL bits, runs ``M`` state
preparations of the Kuramoto network on it, and at evenly spaced sample times
records the order parameter and the ensemble density matrix of the emergent
state in the product basis ``a1b1, a2b1, a1b2, a2b2``.

Realization ``r`` draws its frequencies and initial phases from
``default_rng(base_seed + r)``. Realizations are integrated in fixed-size
batches, so results are bitwise identical for any worker count.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError, DegenerateStateWarning, NumericDivergenceError
from .graph import BiasedGraph, indicator_matrix, ql_product
from .kuramoto import (
    UNIFORM,
    OscillatorParams,
    PhaseState,
    integrate,
    order_parameter,
    sample_frequencies,
    sample_initial_phases,
)
from .qlstate import (
    OFFDIAG_PAIRS,
    PRODUCT_BASIS,
    density_from_coefficients,
    emergent_eigenvector,
    project_coefficients,
    purities,
    transform_adjacency,
)

log = logging.getLogger(__name__)

CHUNK_SIZE = 50
EIGEN_ROUTES = ("similarity", "diagonalize")

# Full-scale network: four 20-vertex 15-regular subgraphs, cross-edge probability 0.2.
PAPER_GRAPH = {"n0": 20, "d": 15, "p_connect": 0.2}
DESK_GRAPH = {"n0": 8, "d": 5, "p_connect": 0.2}
PAPER_COUPLING = {"sync": 250.0, "dephasing": 30.0}


def expected_mean_degree(n0: int, d: int, p: float) -> float:
    """Mean vertex degree of a two-QL-bit product graph."""
    return 2.0 * (d + p * n0)


def scale_coupling(K: float, src: Mapping = PAPER_GRAPH, dst: Mapping = DESK_GRAPH) -> float:
    """Rescale K so the mean coupling per oscillator, K <deg> / N, is unchanged.

    For all-to-all coupling <deg>/N -> 1, so this keeps the network's effective
    K / sigma_nu ratio when moving between graph sizes.
    """

    def per_node(gr):
        n = (2 * gr["n0"]) ** 2
        return expected_mean_degree(gr["n0"], gr["d"], gr["p_connect"]) / n

    return K * per_node(src) / per_node(dst)


# -- configuration ----------------------------------------------------------


@dataclass
class InitConfig:
    circ_std: float | str = UNIFORM
    mu: float = 0.0


@dataclass
class GraphConfig:
    n0: int = DESK_GRAPH["n0"]
    d: int = DESK_GRAPH["d"]
    p_connect: float = DESK_GRAPH["p_connect"]
    bias_a: complex = 1.0 + 0j
    bias_b: complex = 1.0 + 0j
    seed: int | None = None


@dataclass
class DynamicsConfig:
    K: float = round(scale_coupling(PAPER_COUPLING["sync"]), 6)
    sigma_nu: float = 1.0
    mean_freq: float = 100.0
    init: InitConfig = field(default_factory=InitConfig)
    periods: float = 80.0
    steps_per_period: int = 100
    coupling_sign: str = "attractive"


@dataclass
class EnsembleConfig:
    M: int = 100
    base_seed: int = 0
    graph_resample: bool = False


@dataclass
class SamplingConfig:
    n_samples: int = 40
    eigen_route: str = "similarity"


@dataclass
class OutputConfig:
    csv: str | None = None
    json: str | None = None
    svg: bool = False


@dataclass
class ScenarioConfig:
    name: str = "custom"
    graph: GraphConfig = field(default_factory=GraphConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        validate(self)

    @property
    def oscillator_params(self) -> OscillatorParams:
        d = self.dynamics
        return OscillatorParams(d.K, d.sigma_nu, d.mean_freq, d.coupling_sign)

    @property
    def n_oscillators(self) -> int:
        return (2 * self.graph.n0) ** 2

    @property
    def dt(self) -> float:
        return 2.0 * math.pi / self.dynamics.mean_freq / self.dynamics.steps_per_period

    @property
    def n_steps(self) -> int:
        return int(round(self.dynamics.periods * self.dynamics.steps_per_period))

    def sample_steps(self) -> np.ndarray:
        return np.rint(np.linspace(0, self.n_steps, self.sampling.n_samples)).astype(int)

    def graph_seed(self, realization: int | None = None):
        base = self.graph.seed if self.graph.seed is not None else self.ensemble.base_seed
        if realization is None:
            return base
        return self.ensemble.base_seed + realization

    def replace(self, **sections) -> "ScenarioConfig":
        """Copy with dotted overrides, e.g. ``replace(**{"dynamics.K": 50})``."""
        data = self.to_dict()
        for key, value in sections.items():
            node = data
            *path, leaf = key.split(".")
            for p in path:
                node = node[p]
            node[leaf] = value
        return ScenarioConfig.from_dict(data)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        for k in ("bias_a", "bias_b"):
            z = complex(data["graph"][k])
            data["graph"][k] = [z.real, z.imag]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        """Build a config; ``scenario`` and ``profile`` keys select presets that explicit fields override."""
        data = dict(data)
        scenario = data.pop("scenario", None)
        profile = data.pop("profile", None)
        base = preset(scenario or "sync", profile or "desk").to_dict() if (scenario or profile) else cls._defaults()
        if scenario is None and profile is None:
            base["name"] = "custom"
        merged = _merge(base, data, "")
        return _build(merged)

    @classmethod
    def _defaults(cls) -> dict:
        data = dataclasses.asdict(_raw_default())
        for k in ("bias_a", "bias_b"):
            z = complex(data["graph"][k])
            data["graph"][k] = [z.real, z.imag]
        return data


def _raw_default() -> ScenarioConfig:
    obj = object.__new__(ScenarioConfig)
    for f in dataclasses.fields(ScenarioConfig):
        setattr(obj, f.name, f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default)
    return obj


def _merge(base: dict, over: Mapping, prefix: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        path = f"{prefix}{k}"
        if k not in out:
            raise ConfigError(path, "unknown field")
        if isinstance(out[k], dict):
            if not isinstance(v, Mapping):
                raise ConfigError(path, "expected an object")
            out[k] = _merge(out[k], v, path + ".")
        else:
            out[k] = v
    return out


def _complex(value, path: str) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float, complex)):
        return complex(value)
    raise ConfigError(path, f"expected [re, im], got {value!r}")


def _build(d: Mapping) -> ScenarioConfig:
    try:
        g = dict(d["graph"])
        g["bias_a"] = _complex(g["bias_a"], "graph.bias_a")
        g["bias_b"] = _complex(g["bias_b"], "graph.bias_b")
        dyn = dict(d["dynamics"])
        dyn["init"] = InitConfig(**dyn["init"])
        return ScenarioConfig(
            name=str(d["name"]),
            graph=GraphConfig(**g),
            dynamics=DynamicsConfig(**dyn),
            ensemble=EnsembleConfig(**d["ensemble"]),
            sampling=SamplingConfig(**d["sampling"]),
            outputs=OutputConfig(**d["outputs"]),
        )
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(path, msg)


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate(cfg: ScenarioConfig) -> None:
    g, dyn, ens, smp = cfg.graph, cfg.dynamics, cfg.ensemble, cfg.sampling
    _require(_is_int(g.n0) and g.n0 >= 2, "graph.n0", f"must be an integer >= 2, got {g.n0!r}")
    _require(_is_int(g.d) and 0 < g.d < g.n0, "graph.d", f"need 0 < d < n0, got {g.d!r}")
    _require((g.n0 * g.d) % 2 == 0, "graph.d", "n0 * d must be even")
    _require(0.0 <= g.p_connect <= 1.0, "graph.p_connect", "must lie in [0, 1]")
    for k in ("bias_a", "bias_b"):
        _require(abs(abs(complex(getattr(g, k))) - 1.0) < 1e-9, f"graph.{k}", "must have unit modulus")
    _require(g.seed is None or _is_int(g.seed), "graph.seed", "must be an integer or null")
    _require(dyn.K >= 0, "dynamics.K", "must be >= 0")
    _require(dyn.sigma_nu >= 0, "dynamics.sigma_nu", "must be >= 0")
    _require(dyn.mean_freq > 0, "dynamics.mean_freq", "must be > 0")
    _require(dyn.periods > 0, "dynamics.periods", "must be > 0")
    _require(_is_int(dyn.steps_per_period) and dyn.steps_per_period >= 1, "dynamics.steps_per_period", "must be an integer >= 1")
    _require(dyn.coupling_sign in ("attractive", "paper_literal"), "dynamics.coupling_sign", "must be 'attractive' or 'paper_literal'")
    cs = dyn.init.circ_std
    _require(cs == UNIFORM or (isinstance(cs, (int, float)) and not isinstance(cs, bool) and cs >= 0), "dynamics.init.circ_std", "must be 'uniform' or a number >= 0")
    _require(_is_int(ens.M) and ens.M >= 1, "ensemble.M", "must be an integer >= 1")
    _require(_is_int(ens.base_seed) and ens.base_seed >= 0, "ensemble.base_seed", "must be a non-negative integer")
    _require(isinstance(ens.graph_resample, bool), "ensemble.graph_resample", "must be a boolean")
    _require(_is_int(smp.n_samples) and smp.n_samples >= 2, "sampling.n_samples", "must be an integer >= 2")
    _require(smp.eigen_route in EIGEN_ROUTES, "sampling.eigen_route", f"must be one of {EIGEN_ROUTES}")
    n_steps = int(round(dyn.periods * dyn.steps_per_period))
    _require(n_steps >= smp.n_samples - 1, "sampling.n_samples", f"more samples than integration steps ({n_steps})")


def preset(scenario: str = "sync", profile: str = "desk") -> ScenarioConfig:
    """Named experiment presets.

    ``sync``: near-uniform initial phases with strong coupling.
    ``dephasing``: in-phase start (circular std 0.001) with weak coupling.
    The ``desk`` profile uses 8-vertex 5-regular subgraphs (N = 256) with K
    rescaled by :func:`scale_coupling`; ``paper`` uses the full N = 1600 network.
    """
    if scenario not in PAPER_COUPLING:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}; choose from {sorted(PAPER_COUPLING)}")
    if profile not in ("desk", "paper"):
        raise ConfigError("profile", f"unknown profile {profile!r}; choose 'desk' or 'paper'")
    gr = DESK_GRAPH if profile == "desk" else PAPER_GRAPH
    K = PAPER_COUPLING[scenario]
    if profile == "desk":
        K = round(scale_coupling(K), 6)
    if scenario == "sync":
        init, M = InitConfig(UNIFORM, 0.0), 100
    else:
        init, M = InitConfig(0.001, 0.0), 500
    return ScenarioConfig(
        name=f"{scenario}-{profile}",
        graph=GraphConfig(**gr),
        dynamics=DynamicsConfig(K=K, init=init),
        ensemble=EnsembleConfig(M=M),
    )


def load_config(path: str | os.PathLike, env: Mapping[str, str] | None = None) -> ScenarioConfig:
    """Read a JSON config; ``QLSYNC_SEED`` in ``env`` overrides ``ensemble.base_seed``."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    cfg = ScenarioConfig.from_dict(data)
    env = os.environ if env is None else env
    if env.get("QLSYNC_SEED"):
        try:
            seed = int(env["QLSYNC_SEED"])
        except ValueError:
            raise ConfigError("QLSYNC_SEED", f"not an integer: {env['QLSYNC_SEED']!r}") from None
        cfg = cfg.replace(**{"ensemble.base_seed": seed})
    return cfg


# -- simulation -------------------------------------------------------------


def build_graph(cfg: ScenarioConfig, realization: int | None = None) -> BiasedGraph:
    g = cfg.graph
    return ql_product(g.n0, g.d, g.p_connect, g.bias_a, g.bias_b, seed=cfg.graph_seed(realization))


@dataclass
class EnsembleRun:
    """Per-realization observables at each sample time.

    ``coefficients`` has shape (M, S, 4); ``order_re``, ``order_mod`` and
    ``residual`` have shape (M, S).
    """

    config: ScenarioConfig
    times: np.ndarray  # units of mean periods
    order_re: np.ndarray
    order_mod: np.ndarray
    coefficients: np.ndarray
    residual: np.ndarray
    top_gap: float

    def density_matrices(self) -> np.ndarray:
        return density_from_coefficients(self.coefficients)


@dataclass(frozen=True)
class RunRecord:
    t: float
    order_re: float
    order_mod: float
    purity: float
    rho: np.ndarray
    residual_mean: float


def _sample_realization(cfg: ScenarioConfig, r: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(cfg.ensemble.base_seed + r)
    eps = sample_frequencies(n, cfg.dynamics.sigma_nu, rng)
    theta0 = sample_initial_phases(n, cfg.dynamics.init.circ_std, cfg.dynamics.init.mu, rng)
    return theta0, eps


def _run_batch(cfg: ScenarioConfig, g: BiasedGraph, indices: Sequence[int]):
    n = g.n
    steps = cfg.sample_steps()
    slot = {int(s): k for k, s in enumerate(steps)}
    m, S = len(indices), len(steps)
    J = indicator_matrix(g, PRODUCT_BASIS)
    route = cfg.sampling.eigen_route
    top = emergent_eigenvector(g.matrix, warn=False)
    if top.degenerate:
        warnings.warn(f"emergent state is degenerate (gap {top.gap:.3g}); using a single eigenvector", DegenerateStateWarning, stacklevel=3)
    order_re = np.empty((m, S))
    order_mod = np.empty((m, S))
    coeff = np.empty((m, S, J.shape[1]), dtype=complex)
    resid = np.empty((m, S))

    samples = [_sample_realization(cfg, r, n) for r in indices]
    theta0 = np.stack([s[0] for s in samples])
    eps = np.stack([s[1] for s in samples])

    def observe(t, theta):
        k = slot[int(round((t) / cfg.dt))]
        order_re[:, k], order_mod[:, k] = order_parameter(theta)
        if route == "similarity":
            # eigenvectors of Phi^-1 A Phi are Phi^-1 v for eigenvectors v of A
            vecs = np.exp(-1j * theta) * top.vector
        else:
            vecs = np.stack([emergent_eigenvector(transform_adjacency(g, th), warn=False).vector for th in theta])
        coeff[:, k], resid[:, k] = project_coefficients(vecs, J)

    integrate(
        PhaseState(theta0, eps),
        cfg.oscillator_params,
        g,
        cfg.dt,
        cfg.n_steps,
        observer=observe,
        sample_steps=steps,
        realization_offset=indices[0],
    )
    return order_re, order_mod, coeff, resid, top.gap


def _run_chunk(args):
    cfg, g, indices = args
    if g is not None:
        return _run_batch(cfg, g, indices)
    parts = [_run_batch(cfg, build_graph(cfg, r), [r]) for r in indices]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4)) + (min(p[4] for p in parts),)


def simulate_ensemble(cfg: ScenarioConfig, workers: int = 1) -> EnsembleRun:
    """Integrate all ``M`` preparations and collect per-realization observables."""
    M = cfg.ensemble.M
    g = None if cfg.ensemble.graph_resample else build_graph(cfg)
    chunks = [list(range(i, min(i + CHUNK_SIZE, M))) for i in range(0, M, CHUNK_SIZE)]
    tasks = [(cfg, g, idx) for idx in chunks]
    log.info("scenario %s: N=%d, M=%d, %d steps, %d chunks", cfg.name, cfg.n_oscillators, M, cfg.n_steps, len(chunks))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(t) for t in tasks]
    order_re, order_mod, coeff, resid = (np.concatenate([r[i] for r in results]) for i in range(4))
    times = cfg.sample_steps() / cfg.dynamics.steps_per_period
    return EnsembleRun(cfg, times, order_re, order_mod, coeff, resid, min(r[4] for r in results))


def records_from_run(run: EnsembleRun) -> list[RunRecord]:
    rhos = run.density_matrices()
    pur = purities(rhos)
    return [
        RunRecord(
            t=float(run.times[k]),
            order_re=math.fsum(run.order_re[:, k]) / run.order_re.shape[0],
            order_mod=math.fsum(run.order_mod[:, k]) / run.order_mod.shape[0],
            purity=float(pur[k]),
            rho=rhos[k],
            residual_mean=math.fsum(run.residual[:, k]) / run.residual.shape[0],
        )
        for k in range(len(run.times))
    ]


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> list[RunRecord]:
    return records_from_run(simulate_ensemble(cfg, workers))


@dataclass(frozen=True)
class SweepRow:
    K: float
    final_order_mod: float
    final_purity: float
    records: list[RunRecord] = field(repr=False, compare=False)


def sweep_coupling(base: ScenarioConfig, K_list: Sequence[float], workers: int = 1) -> list[SweepRow]:
    if len(K_list) == 0:
        raise ConfigError("K", "need at least one coupling value")
    rows = []
    for K in K_list:
        recs = run_scenario(base.replace(**{"dynamics.K": float(K)}), workers)
        rows.append(SweepRow(float(K), recs[-1].order_mod, recs[-1].purity, recs))
    return rows


# -- output -----------------------------------------------------------------

CSV_HEADER = (
    ["t", "order_re", "order_mod", "purity"]
    + [f"rho{m}{m}" for m in range(4)]
    + [f"abs{m}{n}" for m, n in OFFDIAG_PAIRS]
    + ["residual"]
)


def _g12(x: float) -> str:
    return f"{x:.12g}"


def record_row(rec: RunRecord) -> list[float]:
    rho = rec.rho
    return (
        [rec.t, rec.order_re, rec.order_mod, rec.purity]
        + [float(rho[m, m].real) for m in range(4)]
        + [float(abs(rho[m, n])) for m, n in OFFDIAG_PAIRS]
        + [rec.residual_mean]
    )


def emit_csv(records: Sequence[RunRecord], path: str | os.PathLike) -> Path:
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow([_g12(x) for x in record_row(rec)])
    return path


def read_csv(path: str | os.PathLike) -> list[dict[str, float]]:
    with open(path, encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def emit_json(records: Sequence[RunRecord], cfg: ScenarioConfig, path: str | os.PathLike, extra: Mapping | None = None) -> Path:
    """Resolved config plus records; density matrices as 4x4 arrays of [re, im]."""
    payload = {
        "config": cfg.to_dict(),
        "records": [
            {
                "t": r.t,
                "order_re": r.order_re,
                "order_mod": r.order_mod,
                "purity": r.purity,
                "residual_mean": r.residual_mean,
                "rho": [[[float(z.real), float(z.imag)] for z in row] for row in r.rho],
            }
            for r in records
        ],
    }
    if extra:
        payload.update(extra)
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
    return path


SVG_SERIES = [("order_re", "#1f77b4"), ("purity", "#d62728")] + [
    (f"abs{m}{n}", c) for (m, n), c in zip(OFFDIAG_PAIRS, ["#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"])
]


def emit_svg(records: Sequence[RunRecord], path: str | os.PathLike, title: str = "") -> Path:
    """Line plot of order_re, purity and the six |rho_mn| against time in mean periods."""
    if not records:
        raise ValueError("no records to write")
    width, height = 720, 440
    left, right, top, bottom = 60, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    rows = [dict(zip(CSV_HEADER, record_row(r))) for r in records]
    ts = [r["t"] for r in rows]
    t0, t1 = min(ts), max(ts)
    if t1 == t0:
        t1 = t0 + 1.0
    ymin = min(0.0, min(r[name] for r in rows for name, _ in SVG_SERIES))
    ymax = max(1.0, max(r[name] for r in rows for name, _ in SVG_SERIES))

    def x(t):
        return left + (t - t0) / (t1 - t0) * pw

    def y(v):
        return top + (ymax - v) / (ymax - ymin) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="{top - 10}" font-size="14">{escape(title)}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        tv = t0 + frac * (t1 - t0)
        out.append(f'<text x="{x(tv):.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{tv:.4g}</text>')
        yv = ymin + frac * (ymax - ymin)
        out.append(f'<text x="{left - 6}" y="{y(yv) + 4:.2f}" font-size="11" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" font-size="12" text-anchor="middle">t (mean periods)</text>')
    for k, (name, color) in enumerate(SVG_SERIES):
        pts = " ".join(f"{x(r['t']):.3f},{y(r[name]):.3f}" for r in rows)
        out.append(f'<polyline data-series="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}" font-size="11">{name}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
