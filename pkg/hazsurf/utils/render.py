# hazsurf/utils/render.py
"""Static SVG heatmaps of long-format grids"""

import logging
from typing import Optional

import matplotlib

matplotlib.use("Agg")  # non-interactive backend
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib import colors as mcolors  # noqa: E402
from matplotlib.cm import ScalarMappable  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
import numpy as np  # noqa: E402

from ..core.config import RenderConfig  # noqa: E402
from ..core.errors import ArtifactError, ConfigError  # noqa: E402

logger = logging.getLogger(__name__)


def _step(values: np.ndarray) -> float:
    return float(np.min(np.diff(values))) if len(values) > 1 else 1.0


def render_heatmap(u_values: np.ndarray, s_values: np.ndarray, values: np.ndarray,
                   present: Optional[np.ndarray], path, options: Optional[RenderConfig] = None) -> int:
    """
    Draw one rectangle per grid cell, coloured by value, with contour lines.

    Masked cells are drawn transparent. On the (t, s) plane each cell is
    placed at t = u + s. Returns the number of coloured cells.
    """
    options = options or RenderConfig()
    if options.plane not in ("us", "ts"):
        raise ConfigError(f"unknown plane '{options.plane}'")
    try:
        cmap = matplotlib.colormaps[options.palette].resampled(max(2, int(options.n_shades)))
    except KeyError as e:
        raise ConfigError(f"unknown palette '{options.palette}'") from e

    values = np.asarray(values, dtype=float)
    present = np.ones(values.shape, dtype=bool) if present is None else np.asarray(present, dtype=bool)
    present = present & np.isfinite(values)

    t = u_values[:, None] + s_values[None, :]
    if options.t_max is not None:
        present = present & (t <= options.t_max + 1e-9)

    shown = values[present]
    vmin, vmax = (float(shown.min()), float(shown.max())) if shown.size else (0.0, 1.0)
    if vmax <= vmin:
        vmax = vmin + 1.0
    norm = mcolors.Normalize(vmin=vmin, vmax=vmax)

    plt.rcParams["svg.hashsalt"] = "hazsurf"
    fig, ax = plt.subplots(figsize=(options.width, options.height))
    du, ds = _step(u_values), _step(s_values)

    coloured = 0
    for i, u in enumerate(u_values):
        for j, s in enumerate(s_values):
            x = u + s if options.plane == "ts" else u
            if present[i, j]:
                face, gid = cmap(norm(values[i, j])), f"cell-{i}-{j}"
                coloured += 1
            else:
                face, gid = "none", f"masked-{i}-{j}"
            patch = Rectangle((x - du / 2, s - ds / 2), du, ds, facecolor=face,
                              edgecolor="none", linewidth=0)
            patch.set_gid(gid)
            ax.add_patch(patch)

    if len(u_values) > 1 and len(s_values) > 1 and shown.size and np.ptp(shown) > 0:
        masked = np.ma.masked_where(~present, values)
        uu, ss = np.meshgrid(u_values, s_values, indexing="ij")
        xx = uu + ss if options.plane == "ts" else uu
        try:
            ax.contour(xx, ss, masked, levels=int(options.contour_levels),
                       colors="white", linewidths=0.6)
        except ValueError:
            logger.debug("Contour lines skipped: not enough unmasked cells")

    x_all = (t if options.plane == "ts" else np.broadcast_to(u_values[:, None], t.shape))
    ax.set_xlim(float(x_all.min()) - du / 2, float(x_all.max()) + du / 2)
    ax.set_ylim(float(s_values.min()) - ds / 2, float(s_values.max()) + ds / 2)
    xlab = options.xlab if options.plane == "us" or options.xlab != "u" else "t"
    ax.set_xlabel(xlab)
    ax.set_ylabel(options.ylab)
    if options.title:
        ax.set_title(options.title)
    fig.colorbar(ScalarMappable(norm=norm, cmap=cmap), ax=ax)

    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.info(f"Rendered {coloured} cells to {path}")
    return coloured
