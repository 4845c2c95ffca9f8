"""Dataset ingestion for group recommendation.

Loads member-item, group-item and group-membership interactions, either from
an AGREE-style benchmark directory (groupMember file plus per-role
train/val/test rating files) or from the canonical TSV interchange format::

    ggf-v1 <n_members> <n_items> <n_groups>
    #membership        rows: group <TAB> member
    #member-item       rows: member <TAB> item
    #group-item        rows: group <TAB> item
    #val / #test       rows: subject <TAB> positive [<TAB> negative ...]
    #member-val / #member-test   optional member-role holdout sections

Interactions are binarized (ratings/timestamps in source files are ignored).
Evaluation rows without explicit negatives rank against the full catalog
(``ALL_ITEMS``); `sample_negatives` attaches sampled candidate lists.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError, ProtocolError
from .validation import as_csr

log = logging.getLogger(__name__)

#: Candidate marker: rank the positive against the full item catalog.
ALL_ITEMS = None

DATA_DIR_ENV = "GGF_DATA_DIR"

_HEADER_TAG = "ggf-v1"
_SECTIONS = ("#membership", "#member-item", "#group-item", "#val", "#test",
             "#member-val", "#member-test")


@dataclass(frozen=True)
class EvalInstance:
    """One held-out positive for a subject, plus its candidate list (if sampled)."""

    subject_id: int
    positive_item: int
    candidate_items: tuple[int, ...] | None = ALL_ITEMS


@dataclass(eq=False)
class Dataset:
    """Immutable container for one group-recommendation dataset.

    ``val_instances`` / ``test_instances`` hold group-subject evaluation
    instances; the ``member_*`` lists hold the member-role holdouts that
    AGREE-style directories ship (kept out of ``r_u_train``, used only for
    member-eval mode).
    """

    n_members: int
    n_items: int
    n_groups: int
    r_u_train: sp.csr_matrix
    r_g_train: sp.csr_matrix
    membership: sp.csr_matrix
    val_instances: tuple[EvalInstance, ...] = ()
    test_instances: tuple[EvalInstance, ...] = ()
    member_val_instances: tuple[EvalInstance, ...] = ()
    member_test_instances: tuple[EvalInstance, ...] = ()

    def __post_init__(self):
        self.r_u_train = as_csr(self.r_u_train)
        self.r_g_train = as_csr(self.r_g_train)
        self.membership = as_csr(self.membership)
        self.val_instances = tuple(self.val_instances)
        self.test_instances = tuple(self.test_instances)
        self.member_val_instances = tuple(self.member_val_instances)
        self.member_test_instances = tuple(self.member_test_instances)

    # -- structural checks ---------------------------------------------------

    def validate(self) -> "Dataset":
        """Check shapes, binarity, empty groups, and train/eval leakage."""
        if self.r_u_train.shape != (self.n_members, self.n_items):
            raise DataFormatError(
                f"member-item matrix shape {self.r_u_train.shape} != "
                f"({self.n_members}, {self.n_items})")
        if self.r_g_train.shape != (self.n_groups, self.n_items):
            raise DataFormatError(
                f"group-item matrix shape {self.r_g_train.shape} != "
                f"({self.n_groups}, {self.n_items})")
        if self.membership.shape != (self.n_groups, self.n_members):
            raise DataFormatError(
                f"membership matrix shape {self.membership.shape} != "
                f"({self.n_groups}, {self.n_members})")
        for name, m in (("member-item", self.r_u_train),
                        ("group-item", self.r_g_train),
                        ("membership", self.membership)):
            if m.nnz and not np.isin(m.data, (1.0,)).all():
                raise DataFormatError(f"{name} matrix is not binary")
        group_sizes = np.diff(self.membership.indptr)
        if (group_sizes == 0).any():
            empty = int(np.flatnonzero(group_sizes == 0)[0])
            raise DataFormatError(f"group {empty} has no members")
        self._check_instances(self.val_instances + self.test_instances,
                              self.r_g_train, self.n_groups, "group")
        self._check_instances(self.member_val_instances + self.member_test_instances,
                              self.r_u_train, self.n_members, "member")
        return self

    def _check_instances(self, instances, train, n_subjects, kind):
        for inst in instances:
            if not (0 <= inst.subject_id < n_subjects):
                raise DataFormatError(f"{kind} id {inst.subject_id} out of range")
            if not (0 <= inst.positive_item < self.n_items):
                raise DataFormatError(f"item id {inst.positive_item} out of range")
            if train[inst.subject_id, inst.positive_item] != 0:
                raise DataFormatError(
                    f"{kind} {inst.subject_id}: held-out item {inst.positive_item} "
                    f"leaks into the train matrix")
            if inst.candidate_items is not ALL_ITEMS:
                cands = inst.candidate_items
                if len(set(cands)) != len(cands):
                    raise DataFormatError(
                        f"{kind} {inst.subject_id}: duplicate candidate items")
                if inst.positive_item not in cands:
                    raise DataFormatError(
                        f"{kind} {inst.subject_id}: positive missing from candidates")
                seen = set(train.indices[train.indptr[inst.subject_id]:
                                         train.indptr[inst.subject_id + 1]])
                overlap = seen.intersection(cands)
                if overlap:
                    raise DataFormatError(
                        f"{kind} {inst.subject_id}: candidates overlap train "
                        f"interactions {sorted(overlap)[:5]}")

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            (self.n_members, self.n_items, self.n_groups)
            == (other.n_members, other.n_items, other.n_groups)
            and (self.r_u_train != other.r_u_train).nnz == 0
            and (self.r_g_train != other.r_g_train).nnz == 0
            and (self.membership != other.membership).nnz == 0
            and self.val_instances == other.val_instances
            and self.test_instances == other.test_instances
            and self.member_val_instances == other.member_val_instances
            and self.member_test_instances == other.member_test_instances
        )

    def stats(self) -> dict:
        """Counts in the style of the benchmark summary tables (train + eval totals)."""
        return {
            "members": self.n_members,
            "items": self.n_items,
            "groups": self.n_groups,
            "mi_interactions": int(self.r_u_train.nnz
                                   + len(self.member_val_instances)
                                   + len(self.member_test_instances)),
            "gi_interactions": int(self.r_g_train.nnz
                                   + len(self.val_instances)
                                   + len(self.test_instances)),
        }

    def fingerprint(self) -> str:
        """Content hash (sha256 of the canonical serialization); cache key material."""
        return hashlib.sha256(canonical_dumps(self).encode()).hexdigest()


def resolve_dataset_path(path) -> Path:
    """Resolve *path*, falling back to $GGF_DATA_DIR for relative names."""
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_DIR_ENV)
    if root and not p.is_absolute():
        candidate = Path(root) / p
        if candidate.exists():
            return candidate
    return p


# -- AGREE-style benchmark directories ----------------------------------------


def _parse_pairs(path: Path):
    """Yield (id, item) int pairs from a whitespace-separated rating file."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'id item ...', got {line!r}")
            try:
                subj, item = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-integer ids in {line!r}") from None
            if subj < 0 or item < 0:
                raise DataFormatError(f"{path}:{lineno}: negative id in {line!r}")
            pairs.append((subj, item))
    return pairs


def _parse_group_members(path: Path):
    """Parse 'group member1,member2,...' lines into (group, members) pairs."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split(None, 1)
            if len(tokens) < 2:
                raise DataFormatError(f"{path}:{lineno}: expected 'group m1,m2,...', got {line!r}")
            try:
                gid = int(tokens[0])
                members = [int(tok) for tok in tokens[1].replace(" ", "").split(",") if tok]
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-integer ids in {line!r}") from None
            if gid < 0 or any(m < 0 for m in members):
                raise DataFormatError(f"{path}:{lineno}: negative id in {line!r}")
            if not members:
                raise DataFormatError(f"{path}:{lineno}: group {gid} has no members")
            rows.append((gid, members))
    return rows


def _parse_negatives(path: Path):
    """Parse '(subject,positive) neg1 neg2 ...' lines into a candidate map."""
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            head = tokens[0].strip("()")
            try:
                subj, pos = (int(tok) for tok in head.split(","))
                negs = tuple(int(tok) for tok in tokens[1:])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: malformed negatives row {line!r}") from None
            if subj < 0 or pos < 0 or any(n < 0 for n in negs):
                raise DataFormatError(f"{path}:{lineno}: negative id in {line!r}")
            table[(subj, pos)] = negs
    return table


def _find_file(directory: Path, stems) -> Path | None:
    for stem in stems:
        for ext in (".txt", ".dat", ""):
            candidate = directory / f"{stem}{ext}"
            if candidate.is_file():
                return candidate
    return None


def _pairs_to_csr(pairs, shape, what: str) -> sp.csr_matrix:
    unique = sorted(set(pairs))
    dupes = len(pairs) - len(unique)
    if dupes:
        log.warning("%s: deduplicated %d repeated interaction rows", what, dupes)
    if not unique:
        return sp.csr_matrix(shape)
    rows, cols = zip(*unique)
    data = np.ones(len(unique))
    return sp.csr_matrix((data, (rows, cols)), shape=shape)


def _attach_negatives(pairs, negatives, what: str):
    instances = []
    for subj, item in pairs:
        negs = negatives.get((subj, item)) if negatives else None
        if negs is None:
            instances.append(EvalInstance(subj, item))
        else:
            instances.append(EvalInstance(subj, item, (item, *negs)))
    return tuple(instances)


def load_agree_format(dir_path) -> Dataset:
    """Load an AGREE-style benchmark directory.

    Expects a ``groupMember`` file plus ``{user|member}Rating{Train,Val,Test}``
    and ``groupRating{Train,Val,Test}`` files (Val optional). Optional
    ``...Negative`` files attach pre-sampled candidate lists to the matching
    held-out positives.
    """
    directory = resolve_dataset_path(dir_path)
    if not directory.is_dir():
        raise DataFormatError(f"{directory}: not a dataset directory")

    gm_path = _find_file(directory, ("groupMember", "group_member"))
    if gm_path is None:
        raise DataFormatError(f"{directory}: missing groupMember file")
    memberships = _parse_group_members(gm_path)

    def role_file(role_prefixes, split):
        return _find_file(directory, [f"{p}Rating{split}" for p in role_prefixes])

    user_prefixes = ("user", "member")
    files = {
        ("member", "Train"): role_file(user_prefixes, "Train"),
        ("member", "Val"): role_file(user_prefixes, "Val"),
        ("member", "Test"): role_file(user_prefixes, "Test"),
        ("group", "Train"): role_file(("group",), "Train"),
        ("group", "Val"): role_file(("group",), "Val"),
        ("group", "Test"): role_file(("group",), "Test"),
    }
    if files[("member", "Train")] is None or files[("group", "Train")] is None:
        raise DataFormatError(f"{directory}: missing member/group RatingTrain file")

    pairs = {key: (_parse_pairs(path) if path else [])
             for key, path in files.items()}

    def negative_table(role_prefixes, split):
        path = _find_file(directory, [f"{p}Rating{split}Negative" for p in role_prefixes])
        if path is None and split == "Test":
            path = _find_file(directory, [f"{p}RatingNegative" for p in role_prefixes])
        return _parse_negatives(path) if path else None

    max_member = max([m for _, ms in memberships for m in ms]
                     + [s for s, _ in pairs[("member", "Train")]
                        + pairs[("member", "Val")] + pairs[("member", "Test")]],
                     default=-1)
    max_group = max([g for g, _ in memberships]
                    + [s for s, _ in pairs[("group", "Train")]
                       + pairs[("group", "Val")] + pairs[("group", "Test")]],
                    default=-1)
    max_item = max([i for ps in pairs.values() for _, i in ps], default=-1)
    n_members, n_groups, n_items = max_member + 1, max_group + 1, max_item + 1

    membership_pairs = [(g, m) for g, ms in memberships for m in ms]
    ds = Dataset(
        n_members=n_members,
        n_items=n_items,
        n_groups=n_groups,
        r_u_train=_pairs_to_csr(pairs[("member", "Train")], (n_members, n_items),
                                f"{directory.name} member-item"),
        r_g_train=_pairs_to_csr(pairs[("group", "Train")], (n_groups, n_items),
                                f"{directory.name} group-item"),
        membership=_pairs_to_csr(membership_pairs, (n_groups, n_members),
                                 f"{directory.name} membership"),
        val_instances=_attach_negatives(pairs[("group", "Val")],
                                        negative_table(("group",), "Val"), "group val"),
        test_instances=_attach_negatives(pairs[("group", "Test")],
                                         negative_table(("group",), "Test"), "group test"),
        member_val_instances=_attach_negatives(pairs[("member", "Val")],
                                               negative_table(user_prefixes, "Val"),
                                               "member val"),
        member_test_instances=_attach_negatives(pairs[("member", "Test")],
                                                negative_table(user_prefixes, "Test"),
                                                "member test"),
    )
    return ds.validate()


# -- canonical TSV interchange -------------------------------------------------


def _instance_rows(instances):
    rows = []
    for inst in instances:
        if inst.candidate_items is ALL_ITEMS:
            rows.append(f"{inst.subject_id}\t{inst.positive_item}")
        else:
            negs = [c for c in inst.candidate_items if c != inst.positive_item]
            rows.append("\t".join(str(t) for t in (inst.subject_id, inst.positive_item, *negs)))
    return rows


def canonical_dumps(ds: Dataset) -> str:
    """Serialize *ds* to the canonical TSV interchange text."""
    lines = [f"{_HEADER_TAG} {ds.n_members} {ds.n_items} {ds.n_groups}"]
    sections = {
        "#membership": [f"{g}\t{u}" for g, u in zip(*sorted_coords(ds.membership))],
        "#member-item": [f"{u}\t{i}" for u, i in zip(*sorted_coords(ds.r_u_train))],
        "#group-item": [f"{g}\t{i}" for g, i in zip(*sorted_coords(ds.r_g_train))],
        "#val": _instance_rows(ds.val_instances),
        "#test": _instance_rows(ds.test_instances),
        "#member-val": _instance_rows(ds.member_val_instances),
        "#member-test": _instance_rows(ds.member_test_instances),
    }
    for name in _SECTIONS:
        rows = sections[name]
        if name in ("#member-val", "#member-test") and not rows:
            continue
        lines.append(name)
        lines.extend(rows)
    return "\n".join(lines) + "\n"


def sorted_coords(m: sp.csr_matrix):
    """Row/col index arrays of the stored entries in (row, col) order."""
    coo = m.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return coo.row[order], coo.col[order]


def save_canonical(ds: Dataset, path) -> None:
    """Write *ds* to *path* in the canonical TSV format."""
    Path(path).write_text(canonical_dumps(ds), encoding="utf-8")


def _parse_instance_row(tokens):
    subj, pos = tokens[0], tokens[1]
    if len(tokens) == 2:
        return EvalInstance(subj, pos)
    return EvalInstance(subj, pos, (pos, *tokens[2:]))


def load_canonical(path) -> Dataset:
    """Load a canonical TSV file written by :func:`save_canonical`."""
    path = resolve_dataset_path(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != _HEADER_TAG:
        raise DataFormatError(
            f"{path}:1: expected '{_HEADER_TAG} <members> <items> <groups>', got {lines[0]!r}")
    try:
        n_members, n_items, n_groups = (int(tok) for tok in header[1:])
    except ValueError:
        raise DataFormatError(f"{path}:1: non-integer counts in header") from None

    limits = {
        "#membership": (n_groups, n_members),
        "#member-item": (n_members, n_items),
        "#group-item": (n_groups, n_items),
        "#val": (n_groups, n_items),
        "#test": (n_groups, n_items),
        "#member-val": (n_members, n_items),
        "#member-test": (n_members, n_items),
    }
    rows: dict = {name: [] for name in _SECTIONS}
    section = None
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line not in rows:
                raise DataFormatError(f"{path}:{lineno}: unknown section {line!r}")
            section = line
            continue
        if section is None:
            raise DataFormatError(f"{path}:{lineno}: row outside any section")
        try:
            tokens = [int(tok) for tok in line.split()]
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-integer row {line!r}") from None
        if len(tokens) < 2:
            raise DataFormatError(f"{path}:{lineno}: expected at least two ids")
        if any(tok < 0 for tok in tokens):
            raise DataFormatError(f"{path}:{lineno}: negative id in {line!r}")
        max_subj, max_item = limits[section]
        if tokens[0] >= max_subj or any(tok >= max_item for tok in tokens[1:]):
            raise DataFormatError(f"{path}:{lineno}: id exceeds declared counts")
        if section in ("#membership", "#member-item", "#group-item"):
            rows[section].append((tokens[0], tokens[1]))
        else:
            rows[section].append(_parse_instance_row(tokens))

    ds = Dataset(
        n_members=n_members,
        n_items=n_items,
        n_groups=n_groups,
        r_u_train=_pairs_to_csr(rows["#member-item"], (n_members, n_items), "#member-item"),
        r_g_train=_pairs_to_csr(rows["#group-item"], (n_groups, n_items), "#group-item"),
        membership=_pairs_to_csr(rows["#membership"], (n_groups, n_members), "#membership"),
        val_instances=tuple(rows["#val"]),
        test_instances=tuple(rows["#test"]),
        member_val_instances=tuple(rows["#member-val"]),
        member_test_instances=tuple(rows["#member-test"]),
    )
    return ds.validate()


# -- negative sampling ----------------------------------------------------------


def sample_negatives(ds: Dataset, per_positive: int, seed: int) -> Dataset:
    """Attach *per_positive* uniformly sampled unseen negatives to every instance.

    Eligible items for a subject exclude its train interactions and all of its
    held-out positives. Deterministic under a fixed *seed*.
    """
    if per_positive < 1:
        raise ProtocolError(f"per_positive must be >= 1, got {per_positive}")
    rng = np.random.default_rng(seed)

    def resample(instances, all_role_instances, train, kind):
        # a subject's banned pool spans its positives across val AND test
        positives: dict[int, set] = {}
        for inst in all_role_instances:
            positives.setdefault(inst.subject_id, set()).add(inst.positive_item)
        eligible_cache: dict[int, np.ndarray] = {}
        out = []
        for inst in instances:
            subj = inst.subject_id
            if subj not in eligible_cache:
                seen = train.indices[train.indptr[subj]:train.indptr[subj + 1]]
                banned = np.union1d(seen, np.fromiter(positives[subj], dtype=np.int64))
                eligible_cache[subj] = np.setdiff1d(
                    np.arange(ds.n_items, dtype=np.int64), banned, assume_unique=True)
            eligible = eligible_cache[subj]
            if eligible.shape[0] < per_positive:
                raise ProtocolError(
                    f"{kind} {subj}: only {eligible.shape[0]} eligible negatives, "
                    f"need {per_positive}")
            negs = rng.choice(eligible, size=per_positive, replace=False)
            out.append(replace(inst, candidate_items=(inst.positive_item, *map(int, negs))))
        return tuple(out)

    group_all = ds.val_instances + ds.test_instances
    member_all = ds.member_val_instances + ds.member_test_instances
    return replace(
        ds,
        val_instances=resample(ds.val_instances, group_all, ds.r_g_train, "group"),
        test_instances=resample(ds.test_instances, group_all, ds.r_g_train, "group"),
        member_val_instances=resample(ds.member_val_instances, member_all,
                                      ds.r_u_train, "member"),
        member_test_instances=resample(ds.member_test_instances, member_all,
                                       ds.r_u_train, "member"),
    )
