"""Deterministic SVG line/scatter plots."""
import io
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "svg.hashsalt": "interp-bound",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def emit_plot(series, xlabel, ylabel, path, logx=False, logy=False, hlines=None, title=None):
    """Write an SVG plot and return its bytes.

    ``series`` is a list of dicts with keys ``label``, ``x``, ``y`` and an
    optional ``yerr``. ``hlines`` maps labels to horizontal reference values.
    The output carries no timestamp, so equal inputs give equal bytes.
    """
    if not series:
        raise ValueError("emit_plot needs at least one series")
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        try:
            for s in series:
                x = np.asarray(s["x"], dtype=float)
                y = np.asarray(s["y"], dtype=float)
                if x.shape != y.shape or x.size == 0:
                    raise ValueError(f"series {s.get('label')!r} has mismatched or empty data")
                yerr = s.get("yerr")
                if yerr is not None:
                    ax.errorbar(x, y, yerr=np.asarray(yerr, dtype=float), marker="o",
                                capsize=3, label=s.get("label"))
                else:
                    ax.plot(x, y, marker="o", label=s.get("label"))
            for label, value in (hlines or {}).items():
                ax.axhline(value, linestyle="--", color="gray", label=label)
            if logx:
                ax.set_xscale("log")
            if logy:
                ax.set_yscale("log")
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if title:
                ax.set_title(title)
            if len(series) + len(hlines or {}) > 1:
                ax.legend()
            ax.grid(True, alpha=0.3)
            buf = io.BytesIO()
            fig.savefig(buf, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    data = buf.getvalue()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data)
    return data
