"""Group and member scoring via weighted multi-view graph filtering.

The estimator follows the scikit-learn protocol: hyperparameters go to
``__init__`` verbatim (so ``get_params``/``set_params``/``clone`` work),
``fit`` builds the similarity graphs and binds the per-view filters, and the
scoring methods are read-only afterwards.

A subject's score vector is the weighted sum of its raw binary interaction
row pushed through each enabled view's filter; weights are (1-alpha-beta,
alpha, beta) for (member, group, unified). When a view is disabled the
remaining weights are renormalized to sum to 1 (equal split if they are all
zero), keeping scores comparable across ablation variants.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Dataset
from .errors import ParameterError
from .filters import (DEFAULT_NNZ_CAP, MATERIALIZE_MAX_ITEMS, FilterSpec, apply_filter_to_rows,
                      as_spec, build_filter)
from .graphs import VIEW_GROUP, VIEW_MEMBER, VIEW_UNIFIED, VIEWS, build_views

log = logging.getLogger(__name__)

__all__ = [
    "ModelConfig",
    "ScoreRow",
    "GraphFilterRecommender",
    "effective_weights",
    "top_k",
]

#: alpha/beta may sum to 1 up to float slack from grid arithmetic.
_WEIGHT_SLACK = 1e-9


@dataclass(frozen=True)
class ModelConfig:
    """Everything that determines a scoring function (hyperparameters + ablations)."""

    alpha: float = 0.3
    beta: float = 0.3
    s: float = 1.0
    filter_u: object = "second_order"
    filter_g: object = "second_order"
    filter_uni: object = "second_order"
    use_membership: bool = True
    enabled_views: tuple[str, ...] = VIEWS
    mask_seen: bool = True

    def validate(self) -> "ModelConfig":
        if not (self.alpha >= 0 and self.beta >= 0):
            raise ParameterError(f"alpha/beta must be >= 0, got {self.alpha}/{self.beta}")
        if self.alpha + self.beta > 1 + _WEIGHT_SLACK:
            raise ParameterError(f"alpha + beta must be <= 1, got {self.alpha + self.beta}")
        if not self.s > 0:
            raise ParameterError(f"s must be > 0, got {self.s}")
        views = tuple(self.enabled_views)
        if not views or any(v not in VIEWS for v in views):
            raise ParameterError(f"enabled_views must be a nonempty subset of {VIEWS}, "
                                 f"got {views}")
        self.specs()
        return self

    def specs(self) -> dict[str, FilterSpec]:
        return {
            VIEW_MEMBER: as_spec(self.filter_u),
            VIEW_GROUP: as_spec(self.filter_g),
            VIEW_UNIFIED: as_spec(self.filter_uni),
        }

    def to_dict(self) -> dict:
        def spec_repr(value):
            spec = as_spec(value)
            return spec.name if spec.name else {"coefficients": list(spec.coefficients)}
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "s": self.s,
            "filter_u": spec_repr(self.filter_u),
            "filter_g": spec_repr(self.filter_g),
            "filter_uni": spec_repr(self.filter_uni),
            "use_membership": self.use_membership,
            "enabled_views": list(self.enabled_views),
            "mask_seen": self.mask_seen,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        kwargs = dict(d)
        if "enabled_views" in kwargs:
            kwargs["enabled_views"] = tuple(kwargs["enabled_views"])
        known = {f.name for f in fields(cls)}
        unknown = set(kwargs) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        return cls(**kwargs).validate()


def effective_weights(alpha: float, beta: float, enabled_views=VIEWS) -> dict[str, float]:
    """Per-view aggregation weights after ablation redistribution.

    With all three views enabled the literal (1-alpha-beta, alpha, beta) is
    used; with views disabled the remaining weights are renormalized to sum
    to 1, or split equally when they are all zero.
    """
    enabled = tuple(enabled_views)
    base = {VIEW_MEMBER: 1.0 - alpha - beta, VIEW_GROUP: alpha, VIEW_UNIFIED: beta}
    if set(enabled) == set(VIEWS):
        return base
    kept = {v: base[v] for v in VIEWS if v in enabled}
    total = sum(kept.values())
    if total > 0:
        return {v: w / total for v, w in kept.items()}
    return {v: 1.0 / len(kept) for v in kept}


@dataclass
class ScoreRow:
    """Scores over the full catalog for one subject; masked items carry -inf."""

    subject_id: int
    scores: np.ndarray
    masked_items: frozenset = field(default_factory=frozenset)


def top_k(row: ScoreRow, k: int) -> list[int]:
    """The k best unmasked items, ties broken by ascending item index.

    Returns all unmasked items (with a logged warning) when fewer than k
    remain.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    scores = row.scores
    valid = np.flatnonzero(np.isfinite(scores))
    if valid.size < k:
        log.warning("subject %s: only %d unmasked items for top-%d",
                    row.subject_id, valid.size, k)
    order = np.lexsort((valid, -scores[valid]))
    return [int(i) for i in valid[order[:k]]]


class GraphFilterRecommender(BaseEstimator):
    """Training-free recommender aggregating three filtered similarity views.

    Parameters mirror :class:`ModelConfig` plus engine knobs: ``strategy``
    selects materialized vs mat-vec filtering (``"auto"`` materializes small
    graphs), ``nnz_cap``/``materialize_max_items`` bound materialization, and
    ``s_u``/``s_g``/``s_uni`` optionally override the shared exponent per view.
    """

    def __init__(self, alpha: float = 0.3, beta: float = 0.3, s: float = 1.0,
                 filter_u="second_order", filter_g="second_order",
                 filter_uni="second_order", use_membership: bool = True,
                 enabled_views: tuple[str, ...] = VIEWS, mask_seen: bool = True,
                 s_u: float | None = None, s_g: float | None = None,
                 s_uni: float | None = None, strategy: str = "auto",
                 nnz_cap: int = DEFAULT_NNZ_CAP,
                 materialize_max_items: int = MATERIALIZE_MAX_ITEMS):
        self.alpha = alpha
        self.beta = beta
        self.s = s
        self.filter_u = filter_u
        self.filter_g = filter_g
        self.filter_uni = filter_uni
        self.use_membership = use_membership
        self.enabled_views = enabled_views
        self.mask_seen = mask_seen
        self.s_u = s_u
        self.s_g = s_g
        self.s_uni = s_uni
        self.strategy = strategy
        self.nnz_cap = nnz_cap
        self.materialize_max_items = materialize_max_items

    @classmethod
    def from_config(cls, cfg: ModelConfig, **engine_kwargs) -> "GraphFilterRecommender":
        return cls(alpha=cfg.alpha, beta=cfg.beta, s=cfg.s, filter_u=cfg.filter_u,
                   filter_g=cfg.filter_g, filter_uni=cfg.filter_uni,
                   use_membership=cfg.use_membership,
                   enabled_views=tuple(cfg.enabled_views), mask_seen=cfg.mask_seen,
                   **engine_kwargs)

    def config(self) -> ModelConfig:
        return ModelConfig(alpha=self.alpha, beta=self.beta, s=self.s,
                           filter_u=self.filter_u, filter_g=self.filter_g,
                           filter_uni=self.filter_uni,
                           use_membership=self.use_membership,
                           enabled_views=tuple(self.enabled_views),
                           mask_seen=self.mask_seen).validate()

    # -- fitting ---------------------------------------------------------------

    def fit(self, dataset: Dataset, y=None, graphs: dict | None = None):
        """Build (or adopt prebuilt) similarity graphs and bind the filters."""
        cfg = self.config()
        overrides = {v: s for v, s in ((VIEW_MEMBER, self.s_u), (VIEW_GROUP, self.s_g),
                                       (VIEW_UNIFIED, self.s_uni)) if s is not None}
        t0 = time.perf_counter()
        if graphs is None:
            graphs = build_views(dataset, cfg.s, cfg.use_membership,
                                 views=tuple(cfg.enabled_views), s_overrides=overrides)
        else:
            self._check_graphs(graphs, cfg, overrides)
        t1 = time.perf_counter()
        specs = cfg.specs()
        self.filters_ = {
            view: build_filter(graphs[view], specs[view], self.strategy,
                               self.nnz_cap, self.materialize_max_items)
            for view in cfg.enabled_views
        }
        t2 = time.perf_counter()
        self.graphs_ = graphs
        self.weights_ = effective_weights(cfg.alpha, cfg.beta, cfg.enabled_views)
        self.dataset_ = dataset
        self.n_items_ = dataset.n_items
        self.fit_timings_ms_ = {"graph_build": (t1 - t0) * 1e3,
                                "filter_materialization": (t2 - t1) * 1e3}
        return self

    def _check_graphs(self, graphs: dict, cfg: ModelConfig, overrides: dict):
        for view in cfg.enabled_views:
            g = graphs.get(view)
            if g is None:
                raise ParameterError(f"prebuilt graphs missing view {view!r}")
            expected_s = overrides.get(view, cfg.s)
            if g.s_used != expected_s:
                raise ParameterError(
                    f"{view} graph built with s={g.s_used}, config wants {expected_s}")
            if view != VIEW_UNIFIED and g.augmented_with_membership != cfg.use_membership:
                raise ParameterError(
                    f"{view} graph membership augmentation {g.augmented_with_membership} "
                    f"!= config {cfg.use_membership}")

    def _check_fitted(self):
        if not hasattr(self, "filters_"):
            raise NotFittedError("call fit(dataset) before scoring")

    # -- scoring ---------------------------------------------------------------

    def _train_matrix(self, kind: str):
        if kind == "group":
            return self.dataset_.r_g_train
        if kind == "member":
            return self.dataset_.r_u_train
        raise ParameterError(f"subject kind must be 'group' or 'member', got {kind!r}")

    def score_rows(self, subjects, kind: str = "group") -> list[ScoreRow]:
        """Score a batch of subjects; one ScoreRow per subject, in order."""
        self._check_fitted()
        train = self._train_matrix(kind)
        subjects = [int(s) for s in subjects]
        for s in subjects:
            if not (0 <= s < train.shape[0]):
                raise IndexError(f"{kind} index {s} out of range [0, {train.shape[0]})")
        signals = train[subjects, :]
        total = np.zeros((len(subjects), self.n_items_))
        for view in VIEWS:
            if view not in self.filters_:
                continue
            w = self.weights_[view]
            if w == 0:
                continue
            total += w * apply_filter_to_rows(self.filters_[view], signals)
        rows = []
        for pos, subj in enumerate(subjects):
            scores = total[pos]
            masked = frozenset()
            if self.mask_seen:
                seen = train.indices[train.indptr[subj]:train.indptr[subj + 1]]
                masked = frozenset(int(i) for i in seen)
                scores = scores.copy()
                scores[list(masked)] = -np.inf
            rows.append(ScoreRow(subj, scores, masked))
        return rows

    def score_group(self, g: int) -> ScoreRow:
        """Score all items for group *g* from its raw train interaction row."""
        return self.score_rows([g], "group")[0]

    def score_member(self, u: int) -> ScoreRow:
        """Score all items for member *u* (same filters, member signal)."""
        return self.score_rows([u], "member")[0]

    def scorer(self, kind: str = "group"):
        """A subject_id -> ScoreRow callable for the evaluation harness."""
        self._check_fitted()
        return lambda subject: self.score_rows([subject], kind)[0]

    def recommend(self, subject: int, k: int = 10, kind: str = "group") -> list[int]:
        """Top-k unmasked items for one subject."""
        return top_k(self.score_rows([subject], kind)[0], k)

    def predict(self, subjects, k: int = 10, kind: str = "group") -> list[list[int]]:
        """Top-k item lists for a batch of subjects."""
        return [top_k(row, k) for row in self.score_rows(subjects, kind)]
