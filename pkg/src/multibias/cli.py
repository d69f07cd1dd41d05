"""Command-line interface: reproducible, provenance-stamped runs.

Every subcommand reads its inputs, writes its artifacts atomically, and
drops a ``<out>.manifest.json`` sidecar recording input hashes and all
parameters. Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .debias import DebiasResult
from .diagnostics import cluster_bias_report, generate_analogies
from .errors import DataError, UsageError
from .hard import hard_debias
from .lexicon import Lexicon, ResolvedLexicon, lowercased, parse_lexicon
from .lexicon import resolve as resolve_lexicon
from .manifest import build_manifest, write_manifest
from .metrics import MacReport, compare, mac
from .report import Report, atomic_write_text, tsv_table
from .report import read as read_report
from .report import write as write_report
from .soft import SoftDebiasConfig, soft_debias
from .store import EmbeddingStore, load_text, nearest_neighbors, normalize_all, save_text
from .subspace import identify_bias_subspace

# Subcommands whose main report has a tabular form.
_TSV_CAPABLE = {"eval-mac", "analogies", "cluster-bias"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(parser: _Parser, embeddings: str | None = "single", lexicon: bool = True) -> None:
    if embeddings == "single":
        parser.add_argument("--embeddings", required=True, help="embedding text file")
    elif embeddings == "multi":
        parser.add_argument(
            "--embeddings",
            action="append",
            required=True,
            help="embedding text file (repeat to intersect across stores)",
        )
    if embeddings:
        parser.add_argument(
            "--embeddings-format",
            choices=("word2vec", "headerless"),
            default="word2vec",
            help="input embedding file layout",
        )
        parser.add_argument(
            "--no-normalize",
            action="store_true",
            help="keep embeddings at their stored lengths instead of unit-normalizing on load",
        )
    if lexicon:
        parser.add_argument("--lexicon", required=True, help="lexicon JSON file")
        parser.add_argument(
            "--missing",
            choices=("error", "skip"),
            default="error",
            help="what to do when a lexicon token is absent from the vocabulary",
        )
        parser.add_argument(
            "--lowercase", action="store_true", help="lowercase lexicon tokens before lookup"
        )
    parser.add_argument("--out", required=True, help="output artifact path")
    parser.add_argument("--format", choices=("json", "tsv"), default="json", help="report format")
    parser.add_argument("--seed", type=int, default=0, help="seed recorded in the manifest")
    parser.add_argument("--config", help="JSON file of flag defaults; explicit flags win")


def _add_subspace_flags(parser: _Parser) -> None:
    parser.add_argument("--k", type=int, default=None, help="number of bias directions (default 1)")
    parser.add_argument(
        "--variance-threshold",
        type=float,
        default=None,
        help="pick k as the smallest count reaching this cumulative explained-variance ratio",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="multibias", allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"multibias {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("inspect", help="summarize an embedding file", allow_abbrev=False)
    _add_common(p, lexicon=False)
    p.add_argument("--word", action="append", default=[], help="report nearest neighbors of this word")
    p.add_argument("--neighbors", type=int, default=10, help="neighbor count per queried word")

    p = sub.add_parser("subspace", help="report the bias-subspace spectrum", allow_abbrev=False)
    _add_common(p)
    _add_subspace_flags(p)
    p.add_argument("--loadings", type=int, default=10, help="top-loading words per component")

    p = sub.add_parser("debias-hard", help="neutralize-and-equalize debiasing", allow_abbrev=False)
    _add_common(p)
    _add_subspace_flags(p)

    p = sub.add_parser("debias-soft", help="learned-transform debiasing", allow_abbrev=False)
    _add_common(p)
    _add_subspace_flags(p)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.2, help="bias-term weight")
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--step-init", type=float, default=1e-2)
    p.add_argument(
        "--renormalize", action="store_true", help="rescale rows to unit length after the transform"
    )

    p = sub.add_parser("eval-mac", help="mean average cosine distance report", allow_abbrev=False)
    _add_common(p)
    p.add_argument("--baseline", help="earlier MAC report to compare against")

    p = sub.add_parser("compare", help="paired t-test between two MAC reports", allow_abbrev=False)
    _add_common(p, embeddings=None, lexicon=False)
    p.add_argument("--before", required=True, help="MAC report before debiasing")
    p.add_argument("--after", required=True, help="MAC report after debiasing")

    p = sub.add_parser("analogies", help="seed-offset analogy generation", allow_abbrev=False)
    _add_common(p, embeddings="multi")
    p.add_argument("--delta", type=float, default=1.0, help="max distance between pair words")
    p.add_argument("--top", type=int, default=100, help="candidates kept per store")

    p = sub.add_parser("cluster-bias", help="residual neighborhood clustering", allow_abbrev=False)
    _add_common(p)
    p.add_argument("--debiased", required=True, help="debiased embedding text file")
    p.add_argument("--professions", required=True, help="text file, one profession token per line")
    p.add_argument("--neighbors", type=int, default=100, help="nearest neighbors per profession")
    p.add_argument("--top-biased", type=int, default=500, help="most-biased words listed per class")
    p.add_argument("--defining-set", default=None, help="defining set to use (default: first)")

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            overrides = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError("bad-config", f"{args.config}: not valid JSON ({exc})") from None
    if not isinstance(overrides, dict):
        raise DataError("bad-config", f"{args.config}: expected an object of flag values")
    given = set()
    for token in argv:
        if token.startswith("--"):
            name = token.split("=", 1)[0].lstrip("-").replace("-", "_")
            given.add("lambda_" if name == "lambda" else name)
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest == "lambda":
            dest = "lambda_"
        if not hasattr(args, dest):
            raise UsageError(f"config key {key!r} is not a flag of subcommand {args.subcommand!r}")
        if dest not in given:
            setattr(args, dest, value)


def _load_store(path: str, fmt: str, no_normalize: bool) -> EmbeddingStore:
    store = load_text(path, format=fmt)
    return store if no_normalize else normalize_all(store)


def _load_lexicon(args) -> Lexicon:
    lexicon = parse_lexicon(args.lexicon)
    return lowercased(lexicon) if args.lowercase else lexicon


def _check_outputs(inputs: list[str], outputs: list[str]) -> None:
    taken = {os.path.abspath(p) for p in inputs}
    for out in outputs:
        if os.path.abspath(out) in taken:
            raise UsageError(f"refusing to overwrite input file {out!r}")


def _finish(
    args,
    inputs: list[str],
    parameters: dict,
    extra_outputs: list[str],
    kind: str,
    payload: dict,
    warnings: tuple[str, ...],
    report_path: str | None = None,
    report_format: str = "json",
) -> None:
    """Write the report artifact and its manifest sidecar."""
    report_path = report_path or args.out
    manifest_path = f"{args.out}.manifest.json"
    outputs = list(dict.fromkeys([*extra_outputs, report_path, manifest_path]))
    _check_outputs(inputs, outputs)
    manifest = build_manifest(args.subcommand, inputs, parameters, outputs)
    report = Report(kind=kind, payload=payload, manifest=manifest.run_hash, warnings=warnings)
    write_report(report, report_path, format=report_format)
    write_manifest(manifest, manifest_path)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {report_path}")


def _subspace_from_args(args, resolved: ResolvedLexicon, store: EmbeddingStore):
    return identify_bias_subspace(
        resolved.defining_sets, store, k=args.k, variance_threshold=args.variance_threshold
    )


def _spectrum_payload(subspace, store: EmbeddingStore, loadings: int) -> dict:
    components = []
    for i in range(subspace.k):
        scores = store.matrix @ subspace.basis[i]
        ranked = sorted(zip(store.vocab, scores), key=lambda kv: (-abs(kv[1]), kv[0]))[:loadings]
        components.append(
            {"component": i, "words": [{"loading": float(s), "word": w} for w, s in ranked]}
        )
    ratios = [float(r) for r in subspace.explained_variance_ratio]
    return {
        "k": subspace.k,
        "defining_sets": list(subspace.source["defining_sets"]),
        "eigenvalues": [float(v) for v in subspace.eigenvalues],
        "explained_variance_ratio": ratios,
        "cumulative_ratio": [float(sum(ratios[: i + 1])) for i in range(len(ratios))],
        "top_loading": components,
    }


def _debias_common_params(args) -> dict:
    return {
        "embeddings_format": args.embeddings_format,
        "no_normalize": args.no_normalize,
        "missing": args.missing,
        "lowercase": args.lowercase,
        "k": args.k,
        "variance_threshold": args.variance_threshold,
        "seed": args.seed,
    }


def _provenance_payload(result: DebiasResult) -> dict:
    return {
        "method": result.method,
        "k": result.k,
        "lambda": result.lambda_,
        "neutralized": list(result.neutralized),
        "equalized": [list(group) for group in result.equalized],
        "provenance": result.provenance,
    }


def _mac_payload(report: MacReport, comparison) -> dict:
    return {
        "mac": report.mac,
        "cells": report.cells(),
        "t": comparison.t if comparison else None,
        "p": comparison.p_two_sided if comparison else None,
        "df": comparison.df if comparison else None,
        "metadata": report.metadata,
    }


def _mac_report_from_payload(payload: dict, where: str) -> MacReport:
    try:
        cells = payload["cells"]
        targets, attributes = [], []
        for cell in cells:
            if cell["target"] not in targets:
                targets.append(cell["target"])
            if cell["attributes"] not in attributes:
                attributes.append(cell["attributes"])
        values = np.full((len(targets), len(attributes)), np.nan)
        for cell in cells:
            values[targets.index(cell["target"]), attributes.index(cell["attributes"])] = cell["s"]
        if np.isnan(values).any():
            raise DataError("bad-report", f"{where}: cell grid is incomplete")
        return MacReport(tuple(targets), tuple(attributes), values, float(payload["mac"]))
    except (KeyError, TypeError) as exc:
        raise DataError("bad-report", f"{where}: not a MAC report ({exc})") from None


def _read_mac_report(path: str) -> MacReport:
    report = read_report(path)
    if report.kind != "mac":
        raise DataError("bad-report", f"{path}: expected a MAC report, found kind {report.kind!r}")
    return _mac_report_from_payload(report.payload, path)


def _run_inspect(args) -> None:
    store = _load_store(args.embeddings, args.embeddings_format, args.no_normalize)
    queries = []
    for word in args.word:
        neighbors = nearest_neighbors(store, store.word_vector(word), args.neighbors, exclude={word})
        queries.append(
            {"word": word, "neighbors": [{"cosine": c, "token": t} for t, c in neighbors]}
        )
    payload = {
        "vocabulary_size": len(store),
        "dimension": store.dim,
        "normalized": store.normalized,
        "first_tokens": list(store.vocab[:10]),
        "queries": queries,
    }
    params = {
        "embeddings_format": args.embeddings_format,
        "no_normalize": args.no_normalize,
        "words": list(args.word),
        "neighbors": args.neighbors,
        "seed": args.seed,
    }
    _finish(args, [args.embeddings], params, [], "inspect", payload, ())
    print(f"{len(store)} words, dimension {store.dim}")


def _run_subspace(args) -> None:
    store = _load_store(args.embeddings, args.embeddings_format, args.no_normalize)
    resolved = resolve_lexicon(_load_lexicon(args), store, args.missing)
    subspace = _subspace_from_args(args, resolved, store)
    payload = _spectrum_payload(subspace, store, args.loadings)
    params = {**_debias_common_params(args), "loadings": args.loadings}
    _finish(args, [args.embeddings, args.lexicon], params, [], "spectrum", payload, resolved.warnings)


def _run_debias_hard(args) -> None:
    store = _load_store(args.embeddings, args.embeddings_format, args.no_normalize)
    resolved = resolve_lexicon(_load_lexicon(args), store, args.missing)
    subspace = _subspace_from_args(args, resolved, store)
    result = hard_debias(store, resolved, subspace)

    inputs = [args.embeddings, args.lexicon]
    provenance_path = f"{args.out}.provenance.json"
    _check_outputs(inputs, [args.out, provenance_path])
    save_text(result.store, args.out)
    print(f"wrote {args.out}")
    _finish(
        args,
        inputs,
        _debias_common_params(args),
        [args.out],
        "debias-provenance",
        _provenance_payload(result),
        result.warnings,
        report_path=provenance_path,
    )


def _run_debias_soft(args) -> None:
    store = _load_store(args.embeddings, args.embeddings_format, args.no_normalize)
    resolved = resolve_lexicon(_load_lexicon(args), store, args.missing)
    subspace = _subspace_from_args(args, resolved, store)
    config = SoftDebiasConfig(
        lambda_=args.lambda_,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        step_init=args.step_init,
        seed=args.seed,
    )
    log_rows: list[list] = []
    result, breakdown = soft_debias(
        store,
        resolved,
        subspace,
        config,
        renormalize=args.renormalize,
        trace=lambda it, total, fid, bias, step: log_rows.append([it, total, fid, bias, step]),
    )

    inputs = [args.embeddings, args.lexicon]
    provenance_path = f"{args.out}.provenance.json"
    log_path = f"{args.out}.iterations.tsv"
    _check_outputs(inputs, [args.out, provenance_path, log_path])
    save_text(result.store, args.out)
    print(f"wrote {args.out}")
    atomic_write_text(log_path, tsv_table(["iteration", "total", "fidelity", "bias", "step"], log_rows))
    params = {
        **_debias_common_params(args),
        "lambda": args.lambda_,
        "max_iters": args.max_iters,
        "rel_tol": args.rel_tol,
        "step_init": args.step_init,
        "renormalize": args.renormalize,
    }
    payload = _provenance_payload(result)
    payload["optimizer"] = {
        "iterations": breakdown.iterations,
        "converged": breakdown.converged,
        "total": breakdown.total,
        "fidelity_term": breakdown.fidelity_term,
        "bias_term": breakdown.bias_term,
    }
    _finish(
        args,
        inputs,
        params,
        [args.out, log_path],
        "debias-provenance",
        payload,
        result.warnings,
        report_path=provenance_path,
    )


def _run_eval_mac(args) -> None:
    store = _load_store(args.embeddings, args.embeddings_format, args.no_normalize)
    resolved = resolve_lexicon(_load_lexicon(args), store, args.missing)
    report = mac(store, resolved.eval_targets, resolved.eval_attributes, {"lexicon_digest": resolved.digest})
    comparison = None
    inputs = [args.embeddings, args.lexicon]
    if args.baseline:
        baseline = _read_mac_report(args.baseline)
        comparison = compare(baseline, report)
        inputs.append(args.baseline)
    payload = _mac_payload(report, comparison)
    params = {
        "embeddings_format": args.embeddings_format,
        "no_normalize": args.no_normalize,
        "missing": args.missing,
        "lowercase": args.lowercase,
        "seed": args.seed,
        "baseline": bool(args.baseline),
    }
    _finish(args, inputs, params, [], "mac", payload, resolved.warnings, report_format=args.format)
    print(f"mac {report.mac:.6f}")


def _run_compare(args) -> None:
    before = _read_mac_report(args.before)
    after = _read_mac_report(args.after)
    result = compare(before, after)
    payload = {
        "mac_before": before.mac,
        "mac_after": after.mac,
        "t": result.t,
        "p": result.p_two_sided,
        "df": result.df,
        "n": result.n,
    }
    _finish(args, [args.before, args.after], {"seed": args.seed}, [], "comparison", payload, ())
    print(f"t {result.t:.4f}, p {result.p_two_sided:.3g}")


def _run_analogies(args) -> None:
    paths = args.embeddings
    stores = [_load_store(p, args.embeddings_format, args.no_normalize) for p in paths]
    lexicon = _load_lexicon(args)
    if not lexicon.analogy_seeds:
        raise DataError("no-analogy-seeds", f"{args.lexicon}: lexicon has no analogy_seeds")
    blocks = []
    for seed in lexicon.analogy_seeds:
        candidates = generate_analogies(stores, seed, top=args.top, delta=args.delta)
        blocks.append(
            {
                "seed": list(seed),
                "candidates": [{"score": c.score, "x": c.x, "y": c.y} for c in candidates],
            }
        )
    payload = {"delta": args.delta, "top": args.top, "stores": len(stores), "seeds": blocks}
    params = {
        "embeddings_format": args.embeddings_format,
        "no_normalize": args.no_normalize,
        "missing": args.missing,
        "lowercase": args.lowercase,
        "delta": args.delta,
        "top": args.top,
        "seed": args.seed,
    }
    _finish(args, [*paths, args.lexicon], params, [], "analogy", payload, (), report_format=args.format)


def _run_cluster_bias(args) -> None:
    biased = _load_store(args.embeddings, args.embeddings_format, args.no_normalize)
    debiased = _load_store(args.debiased, args.embeddings_format, args.no_normalize)
    resolved = resolve_lexicon(_load_lexicon(args), biased, args.missing)
    if args.defining_set is None:
        defining = resolved.defining_sets[0]
    else:
        match = [s for s in resolved.defining_sets if s.name == args.defining_set]
        if not match:
            raise DataError("unknown-set", f"lexicon has no defining set named {args.defining_set!r}")
        defining = match[0]
    with open(args.professions, "r", encoding="utf-8") as fh:
        professions = [line.strip() for line in fh if line.strip()]
    report = cluster_bias_report(
        biased, debiased, defining, professions, m=args.neighbors, n=args.top_biased
    )
    classes = []
    for entry in report.classes:
        classes.append(
            {
                "class": entry.class_token,
                "pearson": entry.pearson,
                "spearman": entry.spearman,
                "top_biased": [{"component": c, "word": w} for w, c in entry.top_biased],
                "professions": [
                    {
                        "word": word,
                        "original_bias": entry.original_bias[i],
                        "neighbor_count_biased": entry.neighbor_counts["biased"][i],
                        "neighbor_count_debiased": entry.neighbor_counts["debiased"][i],
                    }
                    for i, word in enumerate(entry.professions)
                ],
            }
        )
    payload = {"m": report.m, "n": report.n, "metadata": report.metadata, "classes": classes}
    params = {
        "embeddings_format": args.embeddings_format,
        "no_normalize": args.no_normalize,
        "missing": args.missing,
        "lowercase": args.lowercase,
        "neighbors": args.neighbors,
        "top_biased": args.top_biased,
        "defining_set": args.defining_set,
        "seed": args.seed,
    }
    inputs = [args.embeddings, args.debiased, args.lexicon, args.professions]
    warnings = resolved.warnings + report.warnings
    _finish(args, inputs, params, [], "cluster", payload, warnings, report_format=args.format)


_RUNNERS = {
    "inspect": _run_inspect,
    "subspace": _run_subspace,
    "debias-hard": _run_debias_hard,
    "debias-soft": _run_debias_soft,
    "eval-mac": _run_eval_mac,
    "compare": _run_compare,
    "analogies": _run_analogies,
    "cluster-bias": _run_cluster_bias,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.format == "tsv" and args.subcommand not in _TSV_CAPABLE:
            raise UsageError(f"subcommand {args.subcommand!r} has no TSV report; use --format json")
        _apply_config(args, argv)
        _RUNNERS[args.subcommand](args)
        return 0
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except SystemExit as err:
        return int(err.code or 0)


def entrypoint() -> None:
    sys.exit(main())
