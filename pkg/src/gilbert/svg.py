"""Plain SVG 1.1 drawing of a planar arborescence."""

from __future__ import annotations

from .errors import InvalidInputError
from .model import EmbeddedArborescence, Role

HEADER = (
    '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
    '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{x:.6g} {y:.6g} {w:.6g} {h:.6g}">\n'
)


def emit_svg(arb: EmbeddedArborescence) -> str:
    """Terminals as filled dots, Steiner points as rings, edges as arrows to the sink.

    Stroke width is proportional to edge weight. The y axis points up, so
    coordinates are drawn with y negated.
    """
    dims = {len(v.position) for v in arb.vertices}
    if dims != {2}:
        raise InvalidInputError(f"SVG output needs planar positions, got dimension {dims}", code="dimension")
    xs = [v.position[0] for v in arb.vertices]
    ys = [-v.position[1] for v in arb.vertices]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0) or 1.0
    mx = 0.05 * (x1 - x0 or span)
    my = 0.05 * (y1 - y0 or span)
    radius = 0.012 * span
    max_w = max((e.weight for e in arb.edges), default=1.0) or 1.0
    unit = 0.012 * span

    out = [HEADER.format(x=x0 - mx, y=y0 - my, w=x1 - x0 + 2 * mx, h=y1 - y0 + 2 * my)]
    out.append(
        '  <defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" '
        'markerWidth="4" markerHeight="4" orient="auto">'
        '<path d="M 0 0 L 10 5 L 0 10 z" fill="#333"/></marker></defs>\n'
    )
    for e in arb.edges:
        a, b = arb.vertex(e.tail).position, arb.vertex(e.head).position
        out.append(
            f'  <line class="edge" x1="{a[0]:.9g}" y1="{-a[1]:.9g}" x2="{b[0]:.9g}" y2="{-b[1]:.9g}" '
            f'stroke="#333" stroke-width="{unit * e.weight / max_w:.9g}" marker-end="url(#arrow)" '
            f'data-flow="{e.flow:.9g}" data-weight="{e.weight:.9g}"/>\n'
        )
    for v in arb.vertices:
        x, y = v.position[0], -v.position[1]
        if v.role is Role.STEINER:
            style = f'fill="none" stroke="#1f77b4" stroke-width="{radius / 3:.9g}"'
        else:
            colour = "#d62728" if v.role is Role.SINK else "#2ca02c"
            style = f'fill="{colour}"'
        out.append(
            f'  <circle class="{v.role.value}" cx="{x:.9g}" cy="{y:.9g}" r="{radius:.9g}" {style}/>\n'
        )
    out.append("</svg>\n")
    return "".join(out)
