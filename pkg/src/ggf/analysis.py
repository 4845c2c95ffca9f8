"""Spectral diagnostics, smoothness measures, and runtime benchmarking.

Provides full symmetric eigendecompositions of the item graphs (with a hard
size cap; no approximate fallback), histogram + KL-divergence comparison of
eigenvalue distributions across views, the Laplacian quadratic-form smoothness
of a signal, a numerical check that the filtered scores approximate the
smoothness-regularized least-squares solution, and wall-clock benchmarking of
the full pipeline phases.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import Dataset
from .errors import DimensionError, ParameterError, ProtocolError, ResourceError
from .graphs import SimilarityGraph
from .metrics import EvalReport, evaluate
from .recommender import GraphFilterRecommender, ModelConfig, effective_weights
from .sparse import row_sums, to_dense
from .validation import as_csr, as_signal

DEFAULT_EIG_CAP = 5_000
DEFAULT_BINS = 50
KL_EPS = 1e-10

__all__ = [
    "DEFAULT_EIG_CAP",
    "DEFAULT_BINS",
    "Spectrum",
    "RegularizationCheck",
    "BenchReport",
    "spectrum",
    "kl_divergence",
    "smoothness",
    "verify_regularization_equivalence",
    "bench",
]


def _graph_matrix(graph) -> sp.csr_matrix:
    return as_csr(graph.matrix if isinstance(graph, SimilarityGraph) else graph)


@dataclass
class Spectrum:
    """Eigenvalues of one view's graph plus their normalized histogram."""

    view: str
    eigenvalues: np.ndarray  # ascending
    bin_edges: np.ndarray
    densities: np.ndarray  # sums to 1


def spectrum(graph, bins: int = DEFAULT_BINS, cap: int = DEFAULT_EIG_CAP,
             bin_range: tuple[float, float] | None = None) -> Spectrum:
    """Full symmetric eigendecomposition plus a density histogram.

    Default binning: *bins* uniform bins over [0, max eigenvalue]. Values are
    clipped into the bin range before counting (numerically tiny negatives
    land in the first bin) so densities always sum to 1.
    """
    m = _graph_matrix(graph)
    view = graph.view if isinstance(graph, SimilarityGraph) else "graph"
    n = m.shape[0]
    if n != m.shape[1]:
        raise DimensionError(f"graph matrix must be square, got {m.shape}")
    if n > cap:
        raise ResourceError(f"{n} nodes exceeds the dense eigensolver cap {cap}")
    eigs = np.sort(np.linalg.eigvalsh(to_dense(m)))
    if bin_range is None:
        top = float(eigs[-1]) if n and eigs[-1] > 0 else 1.0
        bin_range = (0.0, top)
    lo, hi = bin_range
    if not hi > lo:
        raise ParameterError(f"empty bin range {bin_range}")
    edges = np.linspace(lo, hi, int(bins) + 1)
    counts, _ = np.histogram(np.clip(eigs, lo, hi), bins=edges)
    return Spectrum(view, eigs, edges, counts / counts.sum())


def kl_divergence(p: Spectrum, q: Spectrum, eps: float = KL_EPS) -> float:
    """KL(p || q) between binned eigenvalue densities with additive smoothing."""
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(p.bin_edges, q.bin_edges):
        raise ParameterError("spectra use different bin edges")
    ps = p.densities + eps
    qs = q.densities + eps
    ps = ps / ps.sum()
    qs = qs / qs.sum()
    return float(np.sum(ps * np.log(ps / qs)))


def smoothness(x, graph) -> float:
    """Laplacian quadratic form x^T (D - A) x; 0 for constant signals."""
    m = _graph_matrix(graph)
    v = as_signal(x, m.shape[0])
    degrees = row_sums(m)
    lap_x = degrees * v - m @ v
    return float(v @ lap_x)


@dataclass
class RegularizationCheck:
    """Filtered scores vs the exact smoothness-regularized solve for one group."""

    lam: float
    alpha: float
    beta: float
    exact_solution: np.ndarray
    filtered_scores: np.ndarray
    relative_error: float
    residual: float


def verify_regularization_equivalence(ds: Dataset, cfg: ModelConfig, lam: float,
                                      group: int = 0, max_items: int = 500,
                                      graphs: dict | None = None) -> RegularizationCheck:
    """Compare filtered scores against solving (I + lam * L_mix) s = r_g densely.

    L_mix is the weight-mixed Laplacian (I - P) over the enabled views. The
    filtered side is weight-matched as (1-lam) * r_g + lam * (aggregated
    linear-filter scores) = r_g (I - lam L_mix), the first-order approximant
    of the exact solve; requires all-linear filter presets.
    """
    cfg = cfg.validate()
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    specs = cfg.specs()
    for view in cfg.enabled_views:
        if specs[view].coefficients != (1.0,):
            raise ParameterError(
                f"{view} filter must be the linear preset for this check")
    if ds.n_items > max_items:
        raise ResourceError(f"{ds.n_items} items exceeds the dense-solve cap {max_items}")
    if not (0 <= group < ds.n_groups):
        raise IndexError(f"group {group} out of range")

    est = GraphFilterRecommender.from_config(cfg).set_params(mask_seen=False)
    est.fit(ds, graphs=graphs)

    r_g = np.asarray(ds.r_g_train[group, :].todense(), dtype=np.float64).ravel()
    weights = effective_weights(cfg.alpha, cfg.beta, cfg.enabled_views)
    eye = np.eye(ds.n_items)
    l_mix = np.zeros((ds.n_items, ds.n_items))
    for view in cfg.enabled_views:
        l_mix += weights[view] * (eye - to_dense(est.graphs_[view].matrix))

    if lam == 0:
        exact = r_g.copy()
        residual = 0.0
    else:
        system = eye + lam * l_mix
        exact = np.linalg.solve(system, r_g)
        residual = float(np.linalg.norm(system @ exact - r_g))

    aggregated = est.score_rows([group], "group")[0].scores
    filtered = (1.0 - lam) * r_g + lam * aggregated
    denom = np.linalg.norm(exact)
    rel_err = float(np.linalg.norm(filtered - exact) / denom) if denom else 0.0
    return RegularizationCheck(lam, cfg.alpha, cfg.beta, exact, filtered, rel_err, residual)


@dataclass
class BenchReport:
    """Per-phase wall-clock samples with min/median summaries."""

    repetitions: int
    samples: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    last_report: EvalReport | None = None

    def to_dict(self) -> dict:
        return {"repetitions": self.repetitions, "samples": self.samples,
                "summary": self.summary}

    def to_tsv(self) -> str:
        lines = ["phase\tmin_ms\tmedian_ms"]
        for phase, agg in self.summary.items():
            lines.append(f"{phase}\t{agg['min']:.3f}\t{agg['median']:.3f}")
        return "\n".join(lines) + "\n"


_BENCH_PHASES = ("graph_build", "filter_materialization", "scoring", "metrics", "total")


def bench(ds: Dataset, cfg: ModelConfig, repetitions: int = 3, k_list=(10,),
          strategy: str = "auto") -> BenchReport:
    """Time the full pipeline phases over *repetitions* runs on the test split."""
    if repetitions < 1:
        raise ParameterError(f"repetitions must be >= 1, got {repetitions}")
    if not ds.test_instances:
        raise ProtocolError("dataset has no test instances to benchmark")
    cfg = cfg.validate()
    report = BenchReport(repetitions)
    last = None
    for _ in range(repetitions):
        est = GraphFilterRecommender.from_config(cfg, strategy=strategy)
        t0 = time.perf_counter()
        est.fit(ds)
        last = evaluate(est.scorer("group"), ds.test_instances, k_list)
        total = (time.perf_counter() - t0) * 1e3
        sample = dict(est.fit_timings_ms_)
        sample["scoring"] = last.wall_clock_ms["scoring"]
        sample["metrics"] = last.wall_clock_ms["metrics"]
        sample["total"] = total
        report.samples.append(sample)
    report.summary = {
        phase: {"min": min(s[phase] for s in report.samples),
                "median": statistics.median(s[phase] for s in report.samples)}
        for phase in _BENCH_PHASES
    }
    report.last_report = last
    return report


def view_spectra(graphs: dict, bins: int = DEFAULT_BINS,
                 cap: int = DEFAULT_EIG_CAP) -> dict[str, Spectrum]:
    """Spectra for several views on shared bin edges (over the global max)."""
    mats = {view: _graph_matrix(g) for view, g in graphs.items()}
    top = 0.0
    eigs = {}
    for view, m in mats.items():
        if m.shape[0] > cap:
            raise ResourceError(f"{view}: {m.shape[0]} nodes exceeds eigensolver cap {cap}")
        eigs[view] = np.sort(np.linalg.eigvalsh(to_dense(m)))
        top = max(top, float(eigs[view][-1]))
    top = top if top > 0 else 1.0
    edges = np.linspace(0.0, top, int(bins) + 1)
    out = {}
    for view, vals in eigs.items():
        counts, _ = np.histogram(np.clip(vals, 0.0, top), bins=edges)
        out[view] = Spectrum(view, vals, edges, counts / counts.sum())
    return out
