"""Spectral diagnostics, KL divergence, smoothness, and the solve equivalence."""

import math

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from ggf.analysis import (BenchReport, Spectrum, bench, kl_divergence, smoothness,
                          spectrum, verify_regularization_equivalence, view_spectra)
from ggf.data import Dataset
from ggf.errors import DimensionError, ParameterError, ProtocolError, ResourceError
from ggf.graphs import SimilarityGraph, build_views
from ggf.recommender import ModelConfig
from ggf.sparse import gram, to_dense
from helpers import fixture_dataset, random_dataset

LINEAR_CFG = ModelConfig(alpha=0.3, beta=0.3, s=1.0, filter_u="linear",
                         filter_g="linear", filter_uni="linear", mask_seen=False)


# -- spectrum --------------------------------------------------------------------


def test_spectrum_identity_graph():
    g = SimilarityGraph("member", sp.eye(8, format="csr"), 1.0, True)
    spx = spectrum(g, bins=4)
    assert np.allclose(spx.eigenvalues, 1.0)
    assert spx.densities.sum() == pytest.approx(1.0, abs=1e-9)
    assert spx.densities[-1] == pytest.approx(1.0)


def test_spectrum_s1_views_within_unit_band():
    rng = np.random.default_rng(81)
    ds = random_dataset(rng, n_items=30)
    for graph in build_views(ds, 1.0).values():
        spx = spectrum(graph)
        assert spx.eigenvalues.min() >= -1e-9
        assert spx.eigenvalues.max() <= 1 + 1e-9
        assert np.all(np.diff(spx.eigenvalues) >= 0)


def test_spectrum_matches_independent_solver():
    rng = np.random.default_rng(82)
    m = gram(sp.csr_matrix(rng.random((50, 50)) * (rng.random((50, 50)) < 0.4)))
    spx = spectrum(SimilarityGraph("member", m, 1.0, True))
    oracle = np.sort(scipy.linalg.eigh(to_dense(m), eigvals_only=True, driver="ev"))
    assert np.max(np.abs(spx.eigenvalues - oracle)) < 1e-8


def test_spectrum_cap():
    g = SimilarityGraph("member", sp.eye(30, format="csr"), 1.0, True)
    with pytest.raises(ResourceError):
        spectrum(g, cap=10)


def test_spectrum_nonsquare_rejected():
    with pytest.raises(DimensionError):
        spectrum(sp.csr_matrix((3, 4)))


# -- KL divergence ------------------------------------------------------------------


def edges(n=2, hi=1.0):
    return np.linspace(0.0, hi, n + 1)


def test_kl_self_is_zero():
    p = Spectrum("a", np.array([0.1]), edges(), np.array([0.5, 0.5]))
    assert kl_divergence(p, p) == 0.0


def test_kl_hand_computed():
    p = Spectrum("a", np.array([]), edges(), np.array([0.5, 0.5]))
    q = Spectrum("b", np.array([]), edges(), np.array([0.9, 0.1]))
    want = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert kl_divergence(p, q) == pytest.approx(want, abs=1e-8)
    assert want == pytest.approx(0.5108256237659907, abs=1e-12)


def test_kl_smoothing_handles_zero_bins():
    p = Spectrum("a", np.array([]), edges(), np.array([1.0, 0.0]))
    q = Spectrum("b", np.array([]), edges(), np.array([0.0, 1.0]))
    value = kl_divergence(p, q)
    assert np.isfinite(value) and value > 0


def test_kl_nonnegative():
    rng = np.random.default_rng(83)
    for _ in range(20):
        a = rng.random(10)
        b = rng.random(10)
        p = Spectrum("a", np.array([]), edges(10), a / a.sum())
        q = Spectrum("b", np.array([]), edges(10), b / b.sum())
        assert kl_divergence(p, q) >= -1e-8


def test_kl_bin_mismatch():
    p = Spectrum("a", np.array([]), edges(), np.array([0.5, 0.5]))
    q = Spectrum("b", np.array([]), edges(hi=2.0), np.array([0.5, 0.5]))
    with pytest.raises(ParameterError):
        kl_divergence(p, q)


def test_view_spectra_shared_edges_and_positive_kl():
    rng = np.random.default_rng(84)
    ds = random_dataset(rng, n_members=15, n_items=40, n_groups=5)
    spectra = view_spectra(build_views(ds, 1.0))
    views = list(spectra)
    assert len(views) == 3
    for a in views:
        for b in views:
            if a != b:
                assert np.array_equal(spectra[a].bin_edges, spectra[b].bin_edges)
                assert kl_divergence(spectra[a], spectra[b]) > 0


# -- smoothness -----------------------------------------------------------------------


def test_smoothness_constant_vector_is_zero():
    rng = np.random.default_rng(85)
    ds = random_dataset(rng)
    graph = build_views(ds, 1.0)["member"]
    assert smoothness(np.ones(ds.n_items), graph) == pytest.approx(0.0, abs=1e-9)


def test_smoothness_two_node_closed_form():
    w = 0.37
    m = sp.csr_matrix(np.array([[0.0, w], [w, 0.0]]))
    assert smoothness(np.array([0.0, 1.0]), m) == pytest.approx(w, abs=1e-15)


def test_smoothness_pairwise_sum_oracle():
    rng = np.random.default_rng(86)
    half = rng.random((20, 20)) * (rng.random((20, 20)) < 0.3)
    a = half + half.T
    np.fill_diagonal(a, 0.0)
    x = rng.standard_normal(20)
    want = 0.5 * sum(a[i, j] * (x[i] - x[j]) ** 2
                     for i in range(20) for j in range(20))
    got = smoothness(x, sp.csr_matrix(a))
    assert got == pytest.approx(want, abs=1e-10)
    assert got >= -1e-9


def test_smoothness_dimension_mismatch():
    with pytest.raises(DimensionError):
        smoothness(np.ones(3), sp.eye(4, format="csr"))


# -- regularization equivalence ----------------------------------------------------------


def test_equivalence_lambda_zero_returns_signal_exactly():
    ds = fixture_dataset()
    check = verify_regularization_equivalence(ds, LINEAR_CFG, 0.0)
    assert np.array_equal(check.exact_solution, ds.r_g_train[0].toarray().ravel())
    assert check.residual == 0.0


def test_equivalence_error_shrinks_with_lambda():
    rng = np.random.default_rng(87)
    for seed in range(3):
        ds = random_dataset(np.random.default_rng(seed), n_items=25)
        errors = []
        for lam in (1e-1, 1e-2, 1e-3):
            check = verify_regularization_equivalence(ds, LINEAR_CFG, lam)
            assert check.residual <= 1e-10
            errors.append(check.relative_error)
        assert errors[0] >= errors[1] >= errors[2]


def test_equivalence_alpha_one_uses_group_laplacian_only():
    ds = fixture_dataset()
    cfg = ModelConfig(alpha=1.0, beta=0.0, s=1.0, filter_u="linear",
                      filter_g="linear", filter_uni="linear", mask_seen=False)
    check = verify_regularization_equivalence(ds, cfg, 0.05)
    graph = build_views(ds, 1.0)["group"]
    lap = np.eye(ds.n_items) - to_dense(graph.matrix)
    system = np.eye(ds.n_items) + 0.05 * lap
    want = np.linalg.solve(system, ds.r_g_train[0].toarray().ravel())
    assert np.max(np.abs(check.exact_solution - want)) < 1e-12


def test_equivalence_requires_linear_presets():
    ds = fixture_dataset()
    with pytest.raises(ParameterError, match="linear"):
        verify_regularization_equivalence(ds, ModelConfig(mask_seen=False), 0.1)


def test_equivalence_item_cap():
    ds = fixture_dataset()
    with pytest.raises(ResourceError):
        verify_regularization_equivalence(ds, LINEAR_CFG, 0.1, max_items=2)


# -- bench ---------------------------------------------------------------------------------


def test_bench_sample_counts_and_phases():
    rng = np.random.default_rng(88)
    ds = random_dataset(rng, n_test=3)
    report = bench(ds, ModelConfig(mask_seen=False), repetitions=3)
    assert isinstance(report, BenchReport)
    assert len(report.samples) == 3
    for phase in ("graph_build", "filter_materialization", "scoring", "metrics", "total"):
        assert phase in report.summary
        values = sorted(s[phase] for s in report.samples)
        assert report.summary[phase]["min"] == values[0]
        assert report.summary[phase]["median"] == values[1]
    payload = report.to_dict()
    assert payload["repetitions"] == 3
    assert report.to_tsv().startswith("phase\tmin_ms\tmedian_ms")


def test_bench_validates_inputs():
    rng = np.random.default_rng(89)
    ds = random_dataset(rng)
    with pytest.raises(ParameterError):
        bench(ds, ModelConfig(), repetitions=0)
    empty = Dataset(ds.n_members, ds.n_items, ds.n_groups, ds.r_u_train,
                    ds.r_g_train, ds.membership)
    with pytest.raises(ProtocolError):
        bench(empty, ModelConfig(), repetitions=1)
