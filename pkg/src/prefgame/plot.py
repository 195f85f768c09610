"""Static SVG of trajectories on the 2-simplex.

Vertices: y_a bottom-left, y_b top, y_c bottom-right. Each policy maps to
the barycentric combination of the three vertex positions.
"""

from xml.sax.saxutils import escape

import numpy as np

from .errors import DimensionError

WIDTH, HEIGHT = 440, 420
VERTICES = np.array([[40.0, 370.0], [220.0, 370.0 - 180.0 * np.sqrt(3.0)], [400.0, 370.0]])
ALGORITHM_COLORS = {
    "MWU": "#1f77b4",
    "IterIPO": "#17becf",
    "IterDPO": "#ff7f0e",
    "SPPO": "#9467bd",
    "INPO": "#8c564b",
    "COMAL": "#2ca02c",
    "MirrorProx": "#e377c2",
    "OMWU": "#bcbd22",
    "RegularizedSolver": "#7f7f7f",
}
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def project(policies):
    """Map an (m, 3) array of policies to (m, 2) SVG coordinates."""
    p = np.atleast_2d(np.asarray(policies, dtype=np.float64))
    if p.shape[1] != 3:
        raise DimensionError(f"simplex plots need 3 responses, got {p.shape[1]}")
    return p @ VERTICES


def _star(cx, cy, r=9.0):
    angles = -np.pi / 2 + np.arange(10) * np.pi / 5
    radii = np.where(np.arange(10) % 2 == 0, r, r * 0.4)
    pts = " ".join(f"{cx + q * np.cos(a):.2f},{cy + q * np.sin(a):.2f}" for q, a in zip(radii, angles))
    return f'<polygon class="nash" points="{pts}" fill="red" stroke="darkred" stroke-width="0.8"/>'


def _colors(labels):
    used, out = set(), []
    for label in labels:
        c = ALGORITHM_COLORS.get(label)
        if c is None or c in used:
            c = next((x for x in PALETTE if x not in used), PALETTE[len(out) % len(PALETTE)])
        used.add(c)
        out.append(c)
    return out


def simplex_svg(trajectories, nash=None, initial=None):
    """Render ``[(label, policies), ...]`` as an SVG string.

    ``initial`` defaults to the first policy of the first trajectory.
    """
    tri = " ".join(f"{x:.2f},{y:.2f}" for x, y in VERTICES)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<polygon class="simplex" points="{tri}" fill="none" stroke="black" stroke-width="1.2"/>',
    ]
    for (x, y), name, dy in zip(VERTICES, ("y_a", "y_b", "y_c"), (18, -8, 18)):
        parts.append(f'<text x="{x:.2f}" y="{y + dy:.2f}" font-size="13" text-anchor="middle">{name}</text>')
    labels = [label for label, _ in trajectories]
    for (label, pols), color, row in zip(trajectories, _colors(labels), range(len(trajectories))):
        xy = project(pols)
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in xy)
        parts.append(
            f'<polyline class="trajectory" data-label="{escape(label)}" points="{pts}" '
            f'fill="none" stroke="{color}" stroke-width="1.2" stroke-linejoin="round"/>'
        )
        parts.append(f'<line x1="12" y1="{14 + 16 * row}" x2="30" y2="{14 + 16 * row}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="36" y="{18 + 16 * row}" font-size="12">{escape(label)}</text>')
    if initial is None and trajectories:
        initial = np.atleast_2d(trajectories[0][1])[0]
    if initial is not None:
        x, y = project(initial)[0]
        parts.append(f'<circle class="initial" cx="{x:.2f}" cy="{y:.2f}" r="4.5" fill="blue"/>')
    if nash is not None:
        x, y = project(nash)[0]
        parts.append(_star(x, y))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
