"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 data error, 3 model error.
Artifacts go to stdout or ``--output``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .automaton import complete, simulate
from .conditional import (
    conditional_merge_test,
    conditional_select,
    covariate_global_test,
    fit_grouped,
    fit_logistic_edges,
    logistic_merge_test,
)
from .dataset import CATEGORICAL, Dataset, digest, format_dataset, parse_dataset
from .equivalence import Dag, dag_to_apfa, equivalence_report, ug_to_apfa
from .errors import DataError, ModelError
from .estimation import fit_mle
from .inference import merge_test, nested_test
from .ingest import count_data, sample_apfa
from .io import (
    apfa_to_document,
    document_to_apfa,
    dumps,
    export_dot,
    load_graph,
    provenance,
)
from .merging import merge_with_groups
from .selection import SelectionConfig, default_threads, select


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _alpha(text: str):
    if text.lower() in ("bic", "aic"):
        return text.lower()
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number, 'bic' or 'aic'") from None


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _load_data(args) -> tuple[Dataset, str]:
    text = _read_text(args.data)
    d = parse_dataset(
        text,
        header=args.header,
        covariate=getattr(args, "covariate", None),
        continuous=getattr(args, "continuous", False),
        alphabets=args.alphabets,
        drop=args.drop or (),
    )
    return d, digest(text)


def _load_model(path: str):
    try:
        text = Path(path).read_text() if path != "-" else sys.stdin.read()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON: {exc}") from None
    return document_to_apfa(doc)


def _emit(text: str, output: str | None) -> None:
    if output and output != "-":
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _fit_summary(f) -> dict:
    return {
        "loglik": f.loglik,
        "dim": f.dim,
        "n": f.n,
        "aic": f.aic,
        "bic": f.bic,
        "inestimable_states": sorted(f.inestimable),
    }


def _add_data_options(p, covariate: bool = True):
    p.add_argument("--header", action="store_true", help="first data row holds column names")
    p.add_argument("--alphabets", type=_int_list, help="alphabet sizes, e.g. 2,2,3")
    p.add_argument("--drop", action="append", metavar="COLUMN", help="skip a column (name or zero-based index); repeatable")
    if covariate:
        p.add_argument("--covariate", help="covariate column (name or zero-based index)")
        p.add_argument("--continuous", action="store_true", help="covariate is continuous")


def _add_output(p):
    p.add_argument("-o", "--output", help="write the artifact here instead of stdout")
    p.add_argument("--reproducible", action="store_true", help="omit timestamps from provenance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="apfa-lab", description="Learn and test acyclic probabilistic finite automata.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("tree", help="sample automaton of a dataset")
    p.add_argument("data", help="CSV file ('-' for stdin)")
    _add_data_options(p, covariate=True)
    p.add_argument("--keep-leaves", action="store_true", help="do not contract leaves into a sink")
    _add_output(p)

    p = sub.add_parser("fit", help="count data on a model and estimate its probabilities")
    p.add_argument("model")
    p.add_argument("data")
    _add_data_options(p, covariate=False)
    _add_output(p)

    p = sub.add_parser("merge", help="merge states of a model")
    p.add_argument("model")
    p.add_argument("--states", type=_int_list, required=True)
    _add_output(p)

    p = sub.add_parser("test", help="likelihood-ratio test of a merge or between nested models")
    p.add_argument("data")
    p.add_argument("--model", help="model JSON (defaults to the sample automaton of the data)")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--states", type=_int_list, help="states to merge")
    mode.add_argument("--nested", metavar="SUBMODEL", help="submodel JSON to compare with --model")
    mode.add_argument("--covariate-global", action="store_true", help="compare outcome distributions across covariate levels")
    _add_data_options(p, covariate=True)
    p.add_argument("--table", action="store_true", help="print a human-readable table instead of JSON")
    p.add_argument("-o", "--output", help="write the JSON result here")

    p = sub.add_parser("select", help="greedy model selection")
    p.add_argument("data")
    crit = p.add_mutually_exclusive_group()
    crit.add_argument("--alpha", type=_alpha, help="penalty per parameter: number, 'bic' (default) or 'aic'")
    crit.add_argument("--mu", type=float, help="max-difference threshold in (0, 1]")
    _add_data_options(p, covariate=True)
    p.add_argument("--seedless-trace", action="store_true", help="omit timings so the trace is deterministic")
    p.add_argument("--trace-output", help="write the trace to a separate JSON file")
    p.add_argument("--threads", type=int, help="scoring threads (default: APFA_LAB_THREADS or all cores)")
    _add_output(p)

    p = sub.add_parser("simulate", help="draw a dataset from a model with probabilities")
    p.add_argument("model")
    p.add_argument("-n", "--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--header", action="store_true", help="write a header row of column names")
    p.add_argument("-o", "--output")

    p = sub.add_parser("equiv", help="graphical-model equivalence of a model, or a model from a graph")
    p.add_argument("model", nargs="?")
    p.add_argument("--dag", help="DAG JSON to convert")
    p.add_argument("--ug", help="undirected graph JSON to convert")
    p.add_argument("--alphabets", type=_int_list, help="alphabet sizes for --dag/--ug (default binary)")
    _add_output(p)

    p = sub.add_parser("export-dot", help="Graphviz drawing of a model")
    p.add_argument("model")
    p.add_argument("--counts", action="store_true", help="add counts to edge labels")
    p.add_argument("--show-synthetic", action="store_true", help="draw edges added by completion")
    p.add_argument("--complete", action="store_true", help="draw the completion of the model")
    p.add_argument("-o", "--output")
    return parser


# -- commands -----------------------------------------------------------------


def cmd_tree(args) -> int:
    d, dig = _load_data(args)
    from .ingest import sample_tree

    a = sample_tree(d) if args.keep_leaves else sample_apfa(d)
    prov = provenance("tree", {"keep_leaves": args.keep_leaves}, dig, not args.reproducible)
    _emit(dumps(apfa_to_document(a, provenance=prov)), args.output)
    return 0


def cmd_fit(args) -> int:
    model = _load_model(args.model)
    d, dig = _load_data(args)
    f = fit_mle(count_data(model.stripped(), d))
    prov = provenance("fit", {}, dig, not args.reproducible)
    _emit(dumps(apfa_to_document(f.apfa, provenance=prov, extra={"fit": _fit_summary(f)})), args.output)
    return 0


def cmd_merge(args) -> int:
    model = _load_model(args.model)
    merged, groups = merge_with_groups(model, args.states)
    prov = provenance("merge", {"states": args.states}, None, not args.reproducible)
    doc = apfa_to_document(merged, provenance=prov, extra={"merge_list": [list(g) for g in groups]})
    _emit(dumps(doc), args.output)
    print("merged: " + " ".join("{" + ",".join(map(str, g)) + "}" for g in groups), file=sys.stderr)
    return 0


def cmd_test(args) -> int:
    d, _ = _load_data(args)
    if args.covariate_global:
        result = covariate_global_test(d)
    else:
        base = d.without_covariate()
        model = _load_model(args.model).stripped() if args.model else sample_apfa(base).stripped()
        if args.nested:
            if not args.model:
                raise UsageError("--nested needs --model")
            sub = _load_model(args.nested).stripped()
            result = nested_test(count_data(model, base), count_data(sub, base))
        elif d.covariate is None:
            result = merge_test(count_data(model, base), args.states)
        elif d.covariate_kind == CATEGORICAL:
            result = conditional_merge_test(fit_grouped(model, d), args.states)
        else:
            if len(args.states) != 2:
                raise UsageError("logistic merge tests take exactly two states")
            result = logistic_merge_test(fit_logistic_edges(model, d), *args.states)
    text = dumps(result.to_dict())
    if args.output:
        _emit(text, args.output)
    if args.table:
        sys.stdout.write(result.format_table() + "\n")
    elif not args.output:
        sys.stdout.write(text)
    return 0


def cmd_select(args) -> int:
    d, dig = _load_data(args)
    threads = args.threads if args.threads is not None else default_threads()
    try:
        if args.mu is not None:
            config = SelectionConfig(alpha=None, mu=args.mu, threads=threads)
        else:
            config = SelectionConfig(alpha=args.alpha if args.alpha is not None else "bic", threads=threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = conditional_select(d, config) if d.covariate is not None else select(d, config)
    trace = [s.to_dict(timing=not args.seedless_trace) for s in result.trace]
    selection = {
        "config": config.to_dict(),
        "alpha": result.alpha,
        "ic": result.ic,
        "sample_ic": result.sample_ic,
        "merges": len(result.trace),
    }
    if d.covariate is not None:
        selection["covariate"] = {"name": d.covariate_name, "kind": d.covariate_kind}
    extra = {"fit": _fit_summary(result.fitted), "selection": selection}
    if args.trace_output:
        Path(args.trace_output).write_text(dumps({"trace": trace}))
    else:
        extra["trace"] = trace
    prov = provenance("select", config.to_dict(), dig, not args.reproducible)
    _emit(dumps(apfa_to_document(result.apfa, provenance=prov, extra=extra)), args.output)
    return 0


def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    if args.n < 0:
        raise UsageError("-n must be nonnegative")
    d = simulate(model, args.n, args.seed)
    _emit(format_dataset(d, header=args.header), args.output)
    return 0


def cmd_equiv(args) -> int:
    sources = [x for x in (args.model, args.dag, args.ug) if x]
    if len(sources) != 1:
        raise UsageError("give exactly one of MODEL, --dag or --ug")
    if args.model:
        report = equivalence_report(_load_model(args.model))
        _emit(dumps(report.to_dict()), args.output)
        return 0
    g = load_graph(args.dag or args.ug)
    alphabets = args.alphabets or [2] * g.p
    a = dag_to_apfa(g, alphabets) if isinstance(g, Dag) else ug_to_apfa(g, alphabets)
    prov = provenance("equiv", {"graph": "dag" if isinstance(g, Dag) else "ug"}, None, not args.reproducible)
    _emit(dumps(apfa_to_document(a, provenance=prov)), args.output)
    return 0


def cmd_export_dot(args) -> int:
    model = _load_model(args.model)
    if args.complete:
        model = complete(model)
    _emit(export_dot(model, show_counts=args.counts, show_synthetic=args.show_synthetic), args.output)
    return 0


COMMANDS = {
    "tree": cmd_tree,
    "fit": cmd_fit,
    "merge": cmd_merge,
    "test": cmd_test,
    "select": cmd_select,
    "simulate": cmd_simulate,
    "equiv": cmd_equiv,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"apfa-lab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"apfa-lab {args.command}: data error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"apfa-lab {args.command}: model error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
