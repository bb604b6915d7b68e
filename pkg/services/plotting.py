"""
SVG rendering of workspace cross-sections and sweep maps.

Figures are built on matplotlib.figure.Figure directly (no pyplot state),
so rendering is safe from worker threads and request handlers.
"""
import io
import logging
from typing import Dict, Optional

import matplotlib
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.figure import Figure
from matplotlib.patches import Patch

from services.report import SweepMap

logger = logging.getLogger(__name__)

FOUR_SOLUTION_COLOR = '#6E6E6E'
TWO_SOLUTION_COLOR = '#C8C8C8'
BACKGROUND_COLOR = '#FFFFFF'
CURVE_COLOR = '#000000'
TRANSITION_COLOR = '#000000'
INVALID_COLOR = '#FFFFFF'

# fixed ids and no timestamp: identical inputs give identical files
matplotlib.rcParams['svg.hashsalt'] = 'workspace-topology'
SVG_METADATA = {'Date': None}


def _svg_text(fig: Figure) -> str:
    buffer = io.StringIO()
    fig.savefig(buffer, format='svg', metadata=SVG_METADATA)
    return buffer.getvalue()


def _write(text: str, path: Optional[str]) -> str:
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info(f"SVG written to {path}")
    return text


def render_workspace_svg(analysis, path: Optional[str] = None) -> str:
    """
    Half cross-section: 4-solution regions dark gray, 2-solution regions
    light gray, singular curves black, cusps as circles, nodes as crosses,
    isolated points as diamonds.
    """
    region_map = analysis.region_map
    counts = region_map.count_image()
    shade = np.zeros(counts.shape, dtype=int)
    shade[counts == 2] = 1
    shade[counts == 4] = 2
    cmap = ListedColormap([BACKGROUND_COLOR, TWO_SOLUTION_COLOR, FOUR_SOLUTION_COLOR])

    fig = Figure(figsize=(5, 8))
    ax = fig.add_subplot()
    ax.imshow(shade, origin='lower', extent=region_map.frame.extent, cmap=cmap,
              vmin=0, vmax=2, interpolation='nearest', aspect='equal')

    for curve in analysis.singular.planar_curves:
        if curve.degenerate_to_point:
            continue
        vertices = np.vstack([curve.vertices, curve.vertices[:1]]) if curve.closed else curve.vertices
        ax.plot(vertices[:, 0], vertices[:, 1], color=CURVE_COLOR, linewidth=0.8)

    markers = (('cusps', 'o'), ('nodes', 'x'), ('isolated', 'D'))
    for attribute, marker in markers:
        points = getattr(analysis.singular, attribute)
        if points:
            ax.plot([p.location.rho for p in points], [p.location.z for p in points],
                    linestyle='none', marker=marker, markersize=6, markerfacecolor='none',
                    markeredgecolor=CURVE_COLOR)

    geom = analysis.geometry
    ax.set_xlabel('rho')
    ax.set_ylabel('z')
    ax.set_title(', '.join(f"{k}={v:g}" for k, v in geom.as_dict().items()), fontsize=9)
    fig.tight_layout()
    return _write(_svg_text(fig), path)


def _label_colors(labels) -> Dict[str, str]:
    palette = matplotlib.colormaps['tab20'].colors
    colors = {}
    for index, label in enumerate(l for l in labels if not l.startswith('Transition') and l != 'INVALID'):
        red, green, blue = palette[index % len(palette)][:3]
        colors[label] = '#{:02X}{:02X}{:02X}'.format(int(red * 255), int(green * 255), int(blue * 255))
    for label in labels:
        if label.startswith('Transition'):
            colors[label] = TRANSITION_COLOR
        elif label == 'INVALID':
            colors[label] = INVALID_COLOR
    return colors


def render_sweep_svg(sweep: SweepMap, path: Optional[str] = None) -> str:
    """Color-coded label map of a sweep with a legend."""
    labels = sweep.distinct_labels()
    colors = _label_colors(labels)
    index = {label: i for i, label in enumerate(labels)}
    grid = np.array([[index[label] for label in row] for row in sweep.labels], dtype=int)

    xs, ys = sweep.x_axis.values(), sweep.y_axis.values()
    dx = (xs[1] - xs[0]) if len(xs) > 1 else 1.0
    dy = (ys[1] - ys[0]) if len(ys) > 1 else 1.0
    extent = (xs[0] - dx / 2, xs[-1] + dx / 2, ys[0] - dy / 2, ys[-1] + dy / 2)

    fig = Figure(figsize=(7, 6))
    ax = fig.add_subplot()
    ax.imshow(grid, origin='lower', extent=extent, cmap=ListedColormap([colors[l] for l in labels]),
              vmin=-0.5, vmax=len(labels) - 0.5, interpolation='nearest', aspect='auto')
    ax.set_xlabel(sweep.x_axis.name)
    ax.set_ylabel(sweep.y_axis.name)
    fixed = ', '.join(f"{k}={v:g}" for k, v in sorted(sweep.fixed.items()))
    ax.set_title(f"{sweep.mode} sweep ({fixed})", fontsize=9)
    handles = [Patch(facecolor=colors[l], edgecolor=CURVE_COLOR, label=l) for l in labels]
    ax.legend(handles=handles, loc='center left', bbox_to_anchor=(1.02, 0.5), fontsize=8)
    fig.tight_layout()
    return _write(_svg_text(fig), path)
