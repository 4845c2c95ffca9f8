"""Command-line entry point.

Subcommands: ``prepare`` (convert an AGREE-style directory to the canonical
TSV and print dataset statistics), ``run`` (score + evaluate the test split,
writing report/rankings/timings), ``tune`` (validation grid search),
``spectrum`` (per-view eigenvalue histograms and pairwise KL divergences),
``bench`` (phase timings).

Config precedence is CLI flags > --config JSON file > defaults; the effective
config is echoed into the output directory. Exit codes: 1 usage, 2 data,
3 resource.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import analysis, data, filters, graphs, metrics, recommender, sparse, tuning
from .errors import (DataFormatError, DimensionError, DomainError, GGFError, ParameterError,
                     ProtocolError, ResourceError)

log = logging.getLogger("ggf")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RESOURCE = 3

_CONFIG_DEFAULTS = {
    "alpha": 0.3,
    "beta": 0.3,
    "s": 1.0,
    "filter_u": "second_order",
    "filter_g": "second_order",
    "filter_uni": "second_order",
    "use_membership": True,
    "enabled_views": list(graphs.VIEWS),
    "mask_seen": "auto",
    "negatives": None,
    "k": [5, 10, 20],
    "seed": 0,
    "strategy": "auto",
}

_ABLATIONS = {
    "none": {},
    "m": {"enabled_views": [graphs.VIEW_GROUP, graphs.VIEW_UNIFIED]},
    "g": {"enabled_views": [graphs.VIEW_MEMBER, graphs.VIEW_UNIFIED]},
    "uni": {"enabled_views": [graphs.VIEW_MEMBER, graphs.VIEW_GROUP]},
    "a": {"use_membership": False},
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_filter(text: str):
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        return text


def _parse_k(text: str):
    return [int(tok) for tok in text.split(",")]


def _parse_floats(text: str):
    return tuple(float(tok) for tok in text.split(","))


def _parse_names(text: str):
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--dataset", required=True,
                   help="dataset path (AGREE directory or canonical TSV); relative "
                        f"names also resolve under ${data.DATA_DIR_ENV}")
    p.add_argument("--format", choices=("agree", "canonical"),
                   help="dataset format (default: directory => agree, file => canonical)")
    p.add_argument("--out", help="output directory", default="ggf-out")
    p.add_argument("--config", help="JSON config file (overridden by flags)")
    p.add_argument("--seed", type=int, help="seed for negative sampling")
    p.add_argument("--cache-dir", help="graph snapshot cache directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--filter-u", type=_parse_filter)
    p.add_argument("--filter-g", type=_parse_filter)
    p.add_argument("--filter-uni", type=_parse_filter)
    p.add_argument("--ablate", choices=sorted(_ABLATIONS))
    p.add_argument("--mask-seen", choices=("auto", "on", "off"))
    p.add_argument("--strategy", choices=("auto", filters.MATERIALIZED, filters.MATVEC_CHAIN))


def _add_protocol_flags(p: argparse.ArgumentParser):
    p.add_argument("--negatives",
                   help="negatives per positive (int), or 'full' for full ranking; "
                        "default keeps dataset candidates, sampling 100 if absent")
    p.add_argument("--k", type=_parse_k, help="comma-separated cutoffs, e.g. 5,10,20")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ggf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="convert a dataset to canonical TSV + stats")
    _add_common(p)

    p = sub.add_parser("run", help="score the test split and evaluate")
    _add_common(p)
    _add_model_flags(p)
    _add_protocol_flags(p)

    p = sub.add_parser("tune", help="grid search on the validation split")
    _add_common(p)
    _add_model_flags(p)
    _add_protocol_flags(p)
    p.add_argument("--alphas", type=_parse_floats)
    p.add_argument("--betas", type=_parse_floats)
    p.add_argument("--s-values", type=_parse_floats)
    p.add_argument("--presets-u", type=_parse_names)
    p.add_argument("--presets-g", type=_parse_names)
    p.add_argument("--presets-uni", type=_parse_names)
    p.add_argument("--metric", choices=("hr", "ndcg"), default="ndcg")
    p.add_argument("--tune-k", type=int, default=10)

    p = sub.add_parser("spectrum", help="eigenvalue histograms + pairwise KL per view")
    _add_common(p)
    p.add_argument("--s", type=float)
    p.add_argument("--bins", type=int, default=analysis.DEFAULT_BINS)
    p.add_argument("--eig-cap", type=int, default=analysis.DEFAULT_EIG_CAP)
    p.add_argument("--no-membership", action="store_true")

    p = sub.add_parser("bench", help="wall-clock per pipeline phase")
    _add_common(p)
    _add_model_flags(p)
    _add_protocol_flags(p)
    p.add_argument("--repetitions", type=int, default=3)

    return parser


# -- config assembly -----------------------------------------------------------


def effective_config(args) -> dict:
    cfg = dict(_CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{args.config}: {exc}") from exc
        unknown = set(loaded) - set(cfg) - {"s_u", "s_g", "s_uni", "cubic_coefficients"}
        if unknown:
            raise ParameterError(f"{args.config}: unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    flag_names = ("alpha", "beta", "s", "filter_u", "filter_g", "filter_uni",
                  "negatives", "k", "seed", "strategy")
    for name in flag_names:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    mask_flag = getattr(args, "mask_seen", None)
    if mask_flag is not None:
        cfg["mask_seen"] = mask_flag
    ablate = getattr(args, "ablate", None)
    if ablate:
        cfg.update(_ABLATIONS[ablate])
    return cfg


def _model_config(cfg: dict, mask_seen: bool) -> recommender.ModelConfig:
    cubic = cfg.get("cubic_coefficients")
    return recommender.ModelConfig(
        alpha=cfg["alpha"], beta=cfg["beta"], s=cfg["s"],
        filter_u=filters.as_spec(cfg["filter_u"], cubic),
        filter_g=filters.as_spec(cfg["filter_g"], cubic),
        filter_uni=filters.as_spec(cfg["filter_uni"], cubic),
        use_membership=cfg["use_membership"],
        enabled_views=tuple(cfg["enabled_views"]), mask_seen=mask_seen).validate()


def _s_overrides(cfg: dict) -> dict:
    return {view: cfg[key] for view, key in
            ((graphs.VIEW_MEMBER, "s_u"), (graphs.VIEW_GROUP, "s_g"),
             (graphs.VIEW_UNIFIED, "s_uni")) if cfg.get(key) is not None}


def load_dataset(args) -> data.Dataset:
    path = data.resolve_dataset_path(args.dataset)
    fmt = args.format or ("agree" if path.is_dir() else "canonical")
    if fmt == "agree":
        return data.load_agree_format(path)
    return data.load_canonical(path)


def apply_protocol(ds: data.Dataset, cfg: dict) -> tuple[data.Dataset, bool]:
    """Resolve the --negatives setting; returns (dataset, full_ranking)."""
    negatives = cfg.get("negatives")
    if negatives in ("full", "FULL"):
        strip = {
            "val_instances": tuple(data.EvalInstance(i.subject_id, i.positive_item)
                                   for i in ds.val_instances),
            "test_instances": tuple(data.EvalInstance(i.subject_id, i.positive_item)
                                    for i in ds.test_instances),
        }
        return replace(ds, **strip), True
    if negatives is None:
        has_candidates = all(i.candidate_items is not data.ALL_ITEMS
                             for i in ds.val_instances + ds.test_instances)
        if has_candidates and (ds.val_instances or ds.test_instances):
            return ds, False
        negatives = 100
    return data.sample_negatives(ds, int(negatives), int(cfg["seed"])), False


def _resolve_mask(cfg: dict, full_ranking: bool) -> bool:
    mode = cfg.get("mask_seen", "auto")
    if mode == "auto":
        return full_ranking
    if isinstance(mode, bool):
        return mode
    return mode == "on"


# -- graph cache -----------------------------------------------------------------


def _cached_views(ds, cfg_model, cache_dir, s_overrides=None):
    if not cache_dir:
        return graphs.build_views(ds, cfg_model.s, cfg_model.use_membership,
                                  views=tuple(cfg_model.enabled_views),
                                  s_overrides=s_overrides)
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    fp = ds.fingerprint()[:16]
    out = {}
    overrides = s_overrides or {}
    for view in cfg_model.enabled_views:
        s_view = overrides.get(view, cfg_model.s)
        aug = cfg_model.use_membership and view != graphs.VIEW_UNIFIED
        key = f"{fp}-s{s_view!r}-m{int(aug)}-{view}.ggfm"
        path = cache / key
        if path.is_file():
            matrix = sparse.load_snapshot(path)
            out[view] = graphs.SimilarityGraph(view, matrix, s_view, aug)
            log.info("cache hit: %s", key)
        else:
            built = graphs.build_views(ds, s_view, cfg_model.use_membership,
                                       views=(view,))[view]
            fd, tmp = tempfile.mkstemp(dir=cache, suffix=".tmp")
            os.close(fd)
            sparse.save_snapshot(built.matrix, tmp)
            os.replace(tmp, path)
            out[view] = built
    return out


# -- output helpers ----------------------------------------------------------------


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _echo_config(out: Path, cfg: dict, extra: dict | None = None):
    payload = dict(cfg)
    if extra:
        payload.update(extra)
    _write_json(out / "effective_config.json", payload)


def _rankings_tsv(est, subjects, k: int) -> str:
    lines = ["subject_id\trank\titem_id\tscore"]
    rows = est.score_rows(subjects, "group")
    for row in rows:
        for rank, item in enumerate(recommender.top_k(row, k), start=1):
            lines.append(f"{row.subject_id}\t{rank}\t{item}\t{float(row.scores[item])!r}")
    return "\n".join(lines) + "\n"


# -- commands ------------------------------------------------------------------------


def cmd_prepare(args) -> int:
    ds = load_dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "dataset.tsv"
    data.save_canonical(ds, target)
    stats = ds.stats()
    print(" ".join(f"{key}={value}" for key, value in stats.items()))
    log.info("wrote %s", target)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = effective_config(args)
    _model_config(cfg, True)  # surface flag/config mistakes before loading data
    ds = load_dataset(args)
    ds, full_ranking = apply_protocol(ds, cfg)
    if not ds.test_instances:
        raise ProtocolError("dataset has no test instances")
    mask = _resolve_mask(cfg, full_ranking)
    model_cfg = _model_config(cfg, mask)
    overrides = _s_overrides(cfg)
    built = _cached_views(ds, model_cfg, args.cache_dir, overrides)
    est = recommender.GraphFilterRecommender.from_config(
        model_cfg, strategy=cfg["strategy"],
        s_u=cfg.get("s_u"), s_g=cfg.get("s_g"), s_uni=cfg.get("s_uni"),
    ).fit(ds, graphs=built)

    report = metrics.evaluate(est.scorer("group"), ds.test_instances, cfg["k"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(out, cfg, {"mask_seen_resolved": mask,
                            "protocol": report.protocol})
    _write_json(out / "report.json", report.to_dict(include_timings=False))
    (out / "report.tsv").write_text(report.to_tsv(), encoding="utf-8")
    subjects = sorted({inst.subject_id for inst in ds.test_instances})
    (out / "rankings.tsv").write_text(
        _rankings_tsv(est, subjects, max(cfg["k"])), encoding="utf-8")
    timings = dict(est.fit_timings_ms_)
    timings.update(report.wall_clock_ms)
    _write_json(out / "timings.json", timings)
    for k in report.k_values:
        print(f"hr@{k}={report.hr[k]:.4f} ndcg@{k}={report.ndcg[k]:.4f}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = effective_config(args)
    _model_config(cfg, True)
    ds = load_dataset(args)
    ds, full_ranking = apply_protocol(ds, cfg)
    mask = _resolve_mask(cfg, full_ranking)
    base = _model_config(cfg, mask)
    grid_kwargs = {}
    for flag, field_name in (("alphas", "alphas"), ("betas", "betas"),
                             ("s_values", "s_values"), ("presets_u", "presets_u"),
                             ("presets_g", "presets_g"), ("presets_uni", "presets_uni")):
        value = getattr(args, flag, None)
        if value is not None:
            grid_kwargs[field_name] = value
    grid = tuning.TuneGrid(**grid_kwargs) if grid_kwargs else tuning.default_grid()
    result = tuning.grid_search(ds, grid, target_metric=args.metric, k=args.tune_k,
                                base_config=base, k_list=cfg["k"],
                                strategy=cfg["strategy"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(out, cfg, {"mask_seen_resolved": mask})
    (out / "trace.tsv").write_text(tuning.trace_tsv(result, args.tune_k), encoding="utf-8")
    _write_json(out / "best_config.json", result.best_config.to_dict())
    _write_json(out / "best_report.json", result.best_report.to_dict(include_timings=False))
    best = result.best_report
    print(f"best {args.metric}@{args.tune_k}="
          f"{best.metric(args.metric, args.tune_k):.4f} "
          f"alpha={result.best_config.alpha} beta={result.best_config.beta} "
          f"s={result.best_config.s}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = effective_config(args)
    ds = load_dataset(args)
    s = args.s if args.s is not None else 1.0
    use_membership = not args.no_membership
    built = graphs.build_views(ds, s, use_membership)
    spectra = analysis.view_spectra(built, bins=args.bins, cap=args.eig_cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for view, spec in spectra.items():
        lines = ["bin_lo\tbin_hi\tdensity"]
        for i, density in enumerate(spec.densities):
            lines.append(f"{float(spec.bin_edges[i])!r}\t{float(spec.bin_edges[i + 1])!r}"
                         f"\t{float(density)!r}")
        (out / f"spectrum_{view}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    lines = ["p\tq\tkl"]
    for p in graphs.VIEWS:
        for q in graphs.VIEWS:
            if p != q:
                lines.append(f"{p}\t{q}\t{analysis.kl_divergence(spectra[p], spectra[q])!r}")
    (out / "kl.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _echo_config(out, {"s": s, "bins": args.bins, "use_membership": use_membership,
                       "seed": cfg["seed"]})
    print(f"wrote spectra for {len(spectra)} views to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = effective_config(args)
    _model_config(cfg, True)
    ds = load_dataset(args)
    ds, full_ranking = apply_protocol(ds, cfg)
    mask = _resolve_mask(cfg, full_ranking)
    model_cfg = _model_config(cfg, mask)
    report = analysis.bench(ds, model_cfg, repetitions=args.repetitions,
                            k_list=cfg["k"], strategy=cfg["strategy"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(out, cfg, {"repetitions": args.repetitions})
    _write_json(out / "bench.json", report.to_dict())
    (out / "bench.tsv").write_text(report.to_tsv(), encoding="utf-8")
    for phase, agg in report.summary.items():
        print(f"{phase}: min={agg['min']:.1f}ms median={agg['median']:.1f}ms")
    return EXIT_OK


_COMMANDS = {
    "prepare": cmd_prepare,
    "run": cmd_run,
    "tune": cmd_tune,
    "spectrum": cmd_spectrum,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"ggf {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, DimensionError, DomainError, ProtocolError, IndexError) as exc:
        print(f"ggf {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ResourceError as exc:
        print(f"ggf {args.command}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except GGFError as exc:
        print(f"ggf {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
