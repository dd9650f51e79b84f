"""Result emission: delimited data plus rendered figures.

CSV and JSON carry identical values with 12 significant digits, so a rerun
with the same seed produces byte-identical artifacts.  The figure renderer
reads the same rows and drops PNGs next to the delimited files.
"""

from __future__ import annotations

import csv
import json
import os

from .experiments import COLUMNS


def _fmt(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.12g}"
    return "" if value is None else str(value)


def _clean(row: dict) -> dict:
    return {c: _fmt(row.get(c, "")) for c in COLUMNS}


def emit_report(rows, out_base: str, formats=("csv", "json")):
    """Write rows to ``out_base``.csv / ``out_base``.json (plus sidecars).

    Validate-mode rows may carry a frequency-response table; it lands in
    ``out_base``_freqresp.csv keyed by trial.
    """
    if not rows:
        raise ValueError("no rows to emit")
    os.makedirs(os.path.dirname(os.path.abspath(out_base)), exist_ok=True)
    written = []
    clean = [_clean(r) for r in rows]
    if "csv" in formats:
        path = out_base + ".csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(clean)
        written.append(path)
    if "json" in formats:
        path = out_base + ".json"
        payload = [{c: row[c] for c in COLUMNS} for row in clean]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(path)
    freq_rows = []
    for row in rows:
        table = row.get("_freq_response")
        if table:
            for entry in table:
                freq_rows.append({"trial": row["trial"],
                                  "sweep_value": _fmt(row["sweep_value"]),
                                  **{k: _fmt(v) for k, v in entry.items()}})
    if freq_rows:
        path = out_base + "_freqresp.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(freq_rows[0]),
                                    lineterminator="\n")
            writer.writeheader()
            writer.writerows(freq_rows)
        written.append(path)
    return written


def read_rows(path: str):
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def _float_or_none(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


_OBJECTIVE_LABEL = {
    "power-min": "mean relay transmit power (linear)",
    "worst-snr": "mean worst subcarrier SNR (linear)",
    "worst-snr-joint": "mean worst subcarrier SNR (linear)",
    "rate-max": "mean sum rate (bits / OFDM symbol)",
    "validate": "worst subcarrier SNR (linear)",
    "mismatch": "mean achieved objective",
}


def render_figures(rows, out_dir: str, stem: str = "report"):
    """Render objective-vs-sweep and diagnostic figures from emitted rows.

    Returns the list of files written.  Uses the Agg backend so it works
    headless; figures land alongside the delimited output.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    written = []
    mode = rows[0].get("mode", "") if rows else ""
    means = [r for r in rows if str(r.get("trial")) == "mean"]

    if means and any(_float_or_none(r.get("objective")) is not None for r in means):
        xs, ys = [], []
        for r in means:
            x = _float_or_none(r.get("sweep_value"))
            y = _float_or_none(r.get("objective"))
            if y is None:
                continue
            xs.append(x if x is not None else len(xs))
            ys.append(y)
        if xs:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot(xs, ys, "o-")
            ax.set_xlabel(rows[0].get("sweep") or "sweep point")
            ax.set_ylabel(_OBJECTIVE_LABEL.get(mode, "mean objective"))
            ax.set_title(f"{mode}: objective vs {rows[0].get('sweep') or 'run'}")
            ax.grid(True, alpha=0.3)
            path = os.path.join(out_dir, f"{stem}_objective.png")
            fig.savefig(path, dpi=120, bbox_inches="tight")
            plt.close(fig)
            written.append(path)

    if mode == "mismatch" and means:
        xs = [_float_or_none(r.get("sweep_value")) for r in means]
        deg = [_float_or_none(r.get("degradation")) for r in means]
        pairs = [(x, d) for x, d in zip(xs, deg) if d is not None]
        if pairs:
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.plot([p[0] for p in pairs], [p[1] for p in pairs], "s-")
            ax.set_xlabel("channel-information error power rho")
            ax.set_ylabel("mean objective degradation")
            ax.set_title("mismatch degradation")
            ax.grid(True, alpha=0.3)
            path = os.path.join(out_dir, f"{stem}_mismatch.png")
            fig.savefig(path, dpi=120, bbox_inches="tight")
            plt.close(fig)
            written.append(path)

    return written


def render_frequency_response(freq_rows, out_dir: str,
                              stem: str = "freqresp"):
    """Plot channel vs relay-shaped magnitude responses from the sidecar."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    trials = sorted({r["trial"] for r in freq_rows})
    written = []
    for trial in trials:
        rows = [r for r in freq_rows if r["trial"] == trial]
        rows.sort(key=lambda r: int(r["bin"]))
        freq = [float(r["freq"]) for r in rows]
        h1 = [float(r["h_channel_abs"]) for r in rows]
        h2 = [float(r["h_shaped_abs"]) for r in rows]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(freq, h1, label="channel cascade")
        ax.plot(freq, h2, label="with relay filter")
        ax.set_xlabel("normalised frequency")
        ax.set_ylabel("|H|")
        ax.set_title("overall frequency response")
        ax.legend()
        ax.grid(True, alpha=0.3)
        path = os.path.join(out_dir, f"{stem}_trial{trial}.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
