"""JSON documents for automata and graphs, and Graphviz DOT export.

Floats are written with Python's shortest round-trip representation, so a
document read back yields bit-identical numbers.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
from pathlib import Path
from typing import Any, TextIO

from .automaton import Apfa, Edge
from .equivalence import Dag, UndirectedGraph
from .errors import ModelError

SCHEMA = "apfa-lab/apfa/1"
DAG_SCHEMA = "apfa-lab/dag/1"
UG_SCHEMA = "apfa-lab/ug/1"

# symbol 1 red, symbol 2 blue, then further distinguishable colours
PALETTE = ("red", "blue", "darkgreen", "orange", "purple", "brown", "magenta", "gray40")


def apfa_to_document(
    a: Apfa,
    *,
    labels: list[list[str]] | None = None,
    provenance: dict | None = None,
    extra: dict | None = None,
) -> dict:
    doc: dict[str, Any] = {
        "schema": SCHEMA,
        "p": a.p,
        "alphabets": list(a.alphabets),
    }
    if labels is not None:
        if len(labels) != a.p or any(len(l) != k for l, k in zip(labels, a.alphabets)):
            raise ModelError("symbol labels do not match the alphabets")
        doc["labels"] = [list(l) for l in labels]
    doc["states"] = [{"id": v, "level": a.levels[v]} for v in sorted(a.levels, key=lambda v: (a.levels[v], v))]
    edges = []
    for e in a.edges:
        item: dict[str, Any] = {"source": e.source, "target": e.target, "symbol": e.symbol}
        if e.count is not None:
            item["count"] = e.count
        if e.prob is not None:
            item["prob"] = e.prob
        if e.synthetic:
            item["synthetic"] = True
        edges.append(item)
    doc["edges"] = edges
    if provenance is not None:
        doc["provenance"] = provenance
    if extra:
        doc.update(extra)
    return doc


def _int(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ModelError(f"{what} must be an integer, got {x!r}")
    return x


def document_to_apfa(doc: dict) -> Apfa:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise ModelError(f"unsupported schema {doc.get('schema')!r}; expected {SCHEMA!r}")
    try:
        alphabets = tuple(_int(k, "alphabet size") for k in doc["alphabets"])
        if doc.get("p", len(alphabets)) != len(alphabets):
            raise ModelError("'p' disagrees with the number of alphabets")
        levels = {_int(s["id"], "state id"): _int(s["level"], "level") for s in doc["states"]}
        if len(levels) != len(doc["states"]):
            raise ModelError("duplicate state ids")
        edges = []
        for item in doc["edges"]:
            count = item.get("count")
            prob = item.get("prob")
            edges.append(
                Edge(
                    _int(item["source"], "edge source"),
                    _int(item["target"], "edge target"),
                    _int(item["symbol"], "edge symbol"),
                    None if count is None else _int(count, "edge count"),
                    None if prob is None else float(prob),
                    bool(item.get("synthetic", False)),
                )
            )
    except KeyError as exc:
        raise ModelError(f"model document lacks field {exc.args[0]!r}") from None
    except (TypeError, AttributeError):
        raise ModelError("malformed model document") from None
    return Apfa(alphabets, levels, tuple(edges))


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _read_json(source: str | os.PathLike | TextIO) -> Any:
    text = source.read() if hasattr(source, "read") else Path(source).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}") from None


def load_apfa(source) -> Apfa:
    return document_to_apfa(_read_json(source))


def load_document(source) -> dict:
    return _read_json(source)


def save_apfa(a: Apfa, dest, **kwargs) -> None:
    text = dumps(apfa_to_document(a, **kwargs))
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def provenance(command: str, config: dict, dataset_digest: str | None = None, timestamp: bool = True) -> dict:
    prov: dict[str, Any] = {"command": command, "config": config}
    if dataset_digest is not None:
        prov["dataset_sha256"] = dataset_digest
    if timestamp:
        prov["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return prov


# -- graphs ---------------------------------------------------------------


def dag_to_document(g: Dag) -> dict:
    return {"schema": DAG_SCHEMA} | g.to_dict()


def ug_to_document(u: UndirectedGraph) -> dict:
    return {"schema": UG_SCHEMA} | u.to_dict()


def document_to_graph(doc: dict) -> Dag | UndirectedGraph:
    schema = doc.get("schema") if isinstance(doc, dict) else None
    try:
        if schema == DAG_SCHEMA:
            p = _int(doc["p"], "p")
            parents = {int(k): [_int(j, "parent") for j in v] for k, v in doc["parents"].items()}
            unknown = [k for k in parents if not 1 <= k <= p]
            if unknown:
                raise ModelError(f"parent sets given for unknown nodes {unknown}")
            return Dag.from_parents(p, parents)
        if schema == UG_SCHEMA:
            p = _int(doc["p"], "p")
            return UndirectedGraph.from_edges(p, [(_int(i, "node"), _int(j, "node")) for i, j in doc["edges"]])
    except KeyError as exc:
        raise ModelError(f"graph document lacks field {exc.args[0]!r}") from None
    except (TypeError, ValueError, AttributeError):
        raise ModelError("malformed graph document") from None
    raise ModelError(f"unsupported graph schema {schema!r}")


def load_graph(source) -> Dag | UndirectedGraph:
    return document_to_graph(_read_json(source))


# -- DOT ---------------------------------------------------------------------


def export_dot(a: Apfa, *, show_counts: bool = False, show_synthetic: bool = False, name: str = "apfa") -> str:
    """Left-to-right drawing, one rank per level, edges coloured by symbol."""
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    hidden = set()
    if not show_synthetic:
        # states reachable only through synthetic edges are hidden too
        hidden = {v for v in a.levels if v != a.root and a.inc[v] and all(e.synthetic for e in a.inc[v])}
    for lv, states in enumerate(a.by_level):
        shown = [str(v) for v in states if v not in hidden]
        if shown:
            lines.append("  { rank=same; " + "; ".join(shown) + "; }")
    for e in a.edges:
        if e.synthetic and not show_synthetic:
            continue
        attrs = [f"color={PALETTE[(e.symbol - 1) % len(PALETTE)]}"]
        label = []
        if e.prob is not None:
            label.append(f"{e.prob:.2f}")
        if e.count is not None and (show_counts or e.prob is None):
            label.append(f"n={e.count}" if e.prob is not None else str(e.count))
        if label:
            attrs.append('label="' + " ".join(label) + '"')
        lines.append(f"  {e.source} -> {e.target} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
