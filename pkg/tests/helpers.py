"""Shared test fixtures and independent dense oracles.

The oracle functions are literal dense-numpy transcriptions of the scoring
pipeline's math (normalize -> gram -> item block -> entrywise power ->
polynomial filters -> weighted aggregation) and never call into the package's
sparse kernels, so they stay independent of the paths they check.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ggf.data import Dataset, EvalInstance

MEMBER, GROUP, UNIFIED = "member", "group", "unified"
ALL_VIEWS = (MEMBER, GROUP, UNIFIED)


# -- dense oracle --------------------------------------------------------------


def dense_inv_sqrt(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(np.asarray(v, dtype=float))
    nz = v > 0
    out[nz] = np.asarray(v, dtype=float)[nz] ** -0.5
    return out


def dense_normalize(r: np.ndarray) -> np.ndarray:
    left = dense_inv_sqrt(r.sum(axis=1))
    right = dense_inv_sqrt(r.sum(axis=0))
    return left[:, None] * r * right[None, :]


def dense_view(base: np.ndarray, membership_block: np.ndarray | None,
               n_items: int, s: float) -> np.ndarray:
    """One adjusted item graph: augment, normalize, gram, item block, power."""
    augmented = np.hstack([base, membership_block]) if membership_block is not None else base
    normalized = dense_normalize(augmented)
    full_gram = normalized.T @ normalized
    item_block = full_gram[:n_items, :n_items]
    return np.power(item_block, s)


def dense_views(ds: Dataset, s: float, use_membership: bool = True) -> dict[str, np.ndarray]:
    r_u = ds.r_u_train.toarray()
    r_g = ds.r_g_train.toarray()
    m = ds.membership.toarray()
    return {
        MEMBER: dense_view(r_u, m.T if use_membership else None, ds.n_items, s),
        GROUP: dense_view(r_g, m if use_membership else None, ds.n_items, s),
        UNIFIED: dense_view(np.vstack([r_g, r_u]), None, ds.n_items, s),
    }


def dense_poly(p: np.ndarray, coefficients) -> np.ndarray:
    return sum(c * np.linalg.matrix_power(p, k)
               for k, c in enumerate(coefficients, start=1))


def dense_weights(alpha: float, beta: float, enabled=ALL_VIEWS) -> dict[str, float]:
    base = {MEMBER: 1.0 - alpha - beta, GROUP: alpha, UNIFIED: beta}
    if set(enabled) == set(ALL_VIEWS):
        return base
    kept = {v: base[v] for v in ALL_VIEWS if v in enabled}
    total = sum(kept.values())
    if total > 0:
        return {v: w / total for v, w in kept.items()}
    return {v: 1.0 / len(kept) for v in kept}


def dense_scores(ds: Dataset, alpha: float, beta: float, s: float,
                 coeffs: dict[str, tuple], use_membership: bool = True,
                 enabled=ALL_VIEWS, kind: str = "group") -> np.ndarray:
    """End-to-end oracle: weighted multi-view filtered scores for all subjects."""
    views = dense_views(ds, s, use_membership)
    weights = dense_weights(alpha, beta, enabled)
    combined = np.zeros((ds.n_items, ds.n_items))
    for view in enabled:
        combined += weights[view] * dense_poly(views[view], coeffs[view])
    signals = (ds.r_g_train if kind == "group" else ds.r_u_train).toarray()
    return signals @ combined


def rel_err(got: np.ndarray, want: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(want))), 1e-300)
    return float(np.max(np.abs(got - want))) / scale


# -- dataset builders ------------------------------------------------------------


def fixture_dataset() -> Dataset:
    """The hand-authored 3-member / 2-group / 4-item dataset."""
    r_u = np.array([[1, 1, 0, 0],
                    [0, 1, 1, 0],
                    [0, 0, 1, 0]], dtype=float)
    r_g = np.array([[1, 1, 0, 0],
                    [0, 0, 1, 0]], dtype=float)
    m = np.array([[1, 1, 0],
                  [0, 1, 1]], dtype=float)
    return Dataset(
        n_members=3, n_items=4, n_groups=2,
        r_u_train=sp.csr_matrix(r_u), r_g_train=sp.csr_matrix(r_g),
        membership=sp.csr_matrix(m),
        val_instances=(EvalInstance(1, 3),),
        test_instances=(EvalInstance(0, 2), EvalInstance(1, 0)),
        member_val_instances=(EvalInstance(2, 3),),
        member_test_instances=(EvalInstance(0, 2),),
    ).validate()


AGREE_FIXTURE_FILES = {
    "groupMember.txt": "0 0,1\n1 1,2\n",
    "userRatingTrain.txt": "0 0 5\n0 1 3\n1 1 4\n1 2 2\n2 2 1\n",
    "userRatingVal.txt": "2 3\n",
    "userRatingTest.txt": "0 2\n",
    "groupRatingTrain.txt": "0 0\n0 1\n1 2\n",
    "groupRatingVal.txt": "1 3\n",
    "groupRatingTest.txt": "0 2\n1 0\n",
}


def write_agree_fixture(directory, files=None):
    directory.mkdir(parents=True, exist_ok=True)
    for name, content in (files or AGREE_FIXTURE_FILES).items():
        (directory / name).write_text(content, encoding="utf-8")
    return directory


def random_dataset(rng: np.random.Generator, n_members=8, n_items=20, n_groups=3,
                   density_u=0.25, density_g=0.2, n_test=2, n_val=1,
                   candidates: int | None = None) -> Dataset:
    """A structurally valid random dataset (no leakage, nonempty groups)."""
    r_u = (rng.random((n_members, n_items)) < density_u).astype(float)
    r_g = (rng.random((n_groups, n_items)) < density_g).astype(float)
    m = np.zeros((n_groups, n_members))
    for g in range(n_groups):
        size = int(rng.integers(1, max(2, n_members // 2)))
        m[g, rng.choice(n_members, size=size, replace=False)] = 1.0

    def holdouts(train, n_subjects, count):
        out = []
        for _ in range(count):
            subject = int(rng.integers(n_subjects))
            unseen = np.flatnonzero(train[subject] == 0)
            positive = int(rng.choice(unseen))
            if candidates:
                pool = np.setdiff1d(unseen, [positive])
                negs = rng.choice(pool, size=min(candidates, pool.size), replace=False)
                out.append(EvalInstance(subject, positive, (positive, *map(int, negs))))
            else:
                out.append(EvalInstance(subject, positive))
        return tuple(out)

    ds = Dataset(
        n_members=n_members, n_items=n_items, n_groups=n_groups,
        r_u_train=sp.csr_matrix(r_u), r_g_train=sp.csr_matrix(r_g),
        membership=sp.csr_matrix(m),
        val_instances=holdouts(r_g, n_groups, n_val),
        test_instances=holdouts(r_g, n_groups, n_test),
    )
    return ds.validate()


def scaled_dataset(n_members: int, n_items: int, n_groups: int,
                   n_ui: int, n_gi: int, seed: int = 7,
                   n_test: int = 200) -> Dataset:
    """Deterministic synthetic dataset with prescribed interaction totals."""
    rng = np.random.default_rng(seed)

    def sample_pairs(n_rows, n_cols, count):
        flat = rng.choice(n_rows * n_cols, size=count, replace=False)
        return np.stack([flat // n_cols, flat % n_cols], axis=1)

    ui = sample_pairs(n_members, n_items, n_ui)
    gi = sample_pairs(n_groups, n_items, n_gi)
    r_u = sp.csr_matrix((np.ones(len(ui)), (ui[:, 0], ui[:, 1])),
                        shape=(n_members, n_items))
    r_g = sp.csr_matrix((np.ones(len(gi)), (gi[:, 0], gi[:, 1])),
                        shape=(n_groups, n_items))
    sizes = rng.integers(2, 8, size=n_groups)
    rows = np.repeat(np.arange(n_groups), sizes)
    cols = np.concatenate([rng.choice(n_members, size=k, replace=False) for k in sizes])
    m = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_groups, n_members))

    dense_g = r_g.toarray()
    tests = []
    for g in rng.permutation(n_groups)[:n_test]:
        unseen = np.flatnonzero(dense_g[g] == 0)
        tests.append(EvalInstance(int(g), int(rng.choice(unseen))))
    return Dataset(n_members, n_items, n_groups, r_u, r_g, m,
                   test_instances=tuple(tests)).validate()
