"""JSON form of a constructed curve and its reconstruction.

Floats are written with Python's shortest round-trip repr, so every double
reloads bit for bit. Alongside the float coefficient arrays the document
keeps the exact rational coefficients of P and Q as "p/q" strings; a curve
rebuilt from them is identical to the original. Documents without the exact
block are rebuilt from the float arrays instead.
"""

from __future__ import annotations

import json
from pathlib import Path

from gmpy2 import mpq

from .errors import DocumentError
from .geodesic import GeodesicCurve, build_curve
from .graph_core import Graph, Measure, load_graph, load_measure
from .orientation import orient
from .polynomial import Polynomial
from .scaling import ScalingResult, cost_kernel
from .transport import Coupling, SupportUnion
from .weights import WeightSystem, default_weights, validate_custom_weights

FORMAT = "w1plus-curve/1"


def _floats(p: Polynomial) -> list[float]:
    return p.floats() or [0.0]


def _rationals(p: Polynomial) -> list[str]:
    return [str(v) for v in p.c]


def curve_to_document(curve: GeodesicCurve, *, exact: bool = True) -> dict:
    g = curve.graph
    name = g.name
    doc = {
        "format": FORMAT,
        "graph": g.to_document(),
        "f0": curve.f0.to_document() if curve.f0 is not None else None,
        "f1": curve.f1.to_document() if curve.f1 is not None else None,
        "w1": curve.w1,
        "support_union": [[name(x), name(y)] for x, y in sorted(curve.og.pairs)],
        "orientation": curve.og.to_document(),
        "weights": curve.weights.to_document(),
        "scaling": curve.scaling.to_document() if curve.scaling is not None else None,
        "P": {str(name(x)): _floats(p) for x, p in curve.P.items()},
        "Q_one_minus_t": {str(name(x)): _floats(q) for x, q in curve.Qs.items()},
        "f": {str(name(x)): _floats(p) for x, p in curve.f.items()},
        "g": [{"edge": [name(a), name(b)], "coeffs": _floats(p)} for (a, b), p in curve.g.items()],
        "h": [{"triple": [name(a), name(b), name(c)], "coeffs": _floats(p)}
              for (a, b, c), p in curve.h.items()],
    }
    if exact:
        doc["exact"] = {
            "P": {str(name(x)): _rationals(p) for x, p in curve.P.items()},
            "Q_one_minus_t": {str(name(x)): _rationals(q) for x, q in curve.Qs.items()},
            "edge_weights": [[name(a), name(b), str(v)] for (a, b), v in curve.weights.edge.items()],
        }
    return doc


def dumps(curve: GeodesicCurve, *, exact: bool = True, indent: int | None = None) -> str:
    return json.dumps(curve_to_document(curve, exact=exact), indent=indent)


def _weights_from_document(og, doc: dict, exact_edges) -> WeightSystem:
    g = og.graph
    if doc.get("kind", "default") == "default":
        w = default_weights(og)
    else:
        if exact_edges is not None:
            m_edges = {(g.index(a), g.index(b)): mpq(v) for a, b, v in exact_edges}
        else:
            m_edges = {(g.index(a), g.index(b)): v for a, b, v in doc["edges"]}
        w = validate_custom_weights(og, m_edges)
    stored = {(g.index(a), g.index(b)) for a, b, _ in doc["edges"]}
    if stored != set(w.edge):
        raise DocumentError("stored weights do not cover the oriented edges")
    return w


def _poly_table(g: Graph, table: dict) -> dict[int, Polynomial]:
    return {g.index(k): Polynomial(mpq(v) if isinstance(v, str) else v for v in coeffs)
            for k, coeffs in table.items()}


def curve_from_document(doc: dict) -> GeodesicCurve:
    """Rebuild a curve, re-deriving the orientation and checking it against the stored one."""
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise DocumentError(f"not a {FORMAT} document")
    try:
        g = load_graph(doc["graph"])
        f0 = load_measure(g, doc["f0"]) if doc.get("f0") is not None else None
        f1 = load_measure(g, doc["f1"]) if doc.get("f1") is not None else None
        pairs = [(g.index(x), g.index(y)) for x, y in doc["support_union"]]
        og = orient(g, pairs)
        stored = {(g.index(a), g.index(b)) for a, b in doc["orientation"]["edges"]}
        if stored != og.edge_set:
            raise DocumentError("stored orientation differs from the one induced by the support union")
        exact_block = doc.get("exact")
        w = _weights_from_document(og, doc["weights"], exact_block and exact_block.get("edge_weights"))
        source = exact_block if exact_block else doc
        P = _poly_table(g, source["P"])
        Qs = _poly_table(g, source["Q_one_minus_t"])
        w1 = float(doc["w1"])
        extra = {"f0": f0, "f1": f1, "support": SupportUnion(frozenset(pairs), w1)}
        sdoc = doc.get("scaling")
        if sdoc is not None and f0 is not None and f1 is not None:
            ck = cost_kernel(w, w.order, f0, f1)
            extra["scaling"] = ScalingResult(
                ck,
                {g.index(k): float(v) for k, v in sdoc["a"].items()},
                {g.index(k): float(v) for k, v in sdoc["b"].items()},
                Coupling.from_document(g, sdoc["pi"]),
                int(sdoc["iterations"]), float(sdoc["marginal_error"]), sdoc["method"], float(sdoc["J"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"malformed curve document: {exc}") from exc
    return build_curve(w, P, Qs, w1=w1, **extra)


def loads(text: str) -> GeodesicCurve:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(str(exc)) from exc
    return curve_from_document(doc)


def load_curve(path: str | Path) -> GeodesicCurve:
    return loads(Path(path).read_text(encoding="utf-8"))
