"""Render figures from pcpow metric CSVs.

Pure views: every number comes straight out of the CSVs, nothing is
recomputed here.  Rendering is deterministic: identical inputs produce
byte-identical image files (fonts are embedded settings-free, timestamps
and random salts are pinned).

Figure kinds
  band            hashrate multiplier vs the min/max difficulty region,
                  both normalized to their initial values
                  (input: difficulty_band.csv)
  histogram       adoption-delay histogram in block intervals, log y
                  (input: adoption_delay.csv)
  series-compare  forking-rate windows of several runs as labeled series
                  (inputs: one forking_rate.csv per run)
  bars-compare    per-chain difficulty-change frequency of several runs
                  (inputs: one difficulty_changes.csv per run)
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGURE_KINDS = ("band", "histogram", "series-compare", "bars-compare")

_EXPECTED_HEADERS = {
    "band": ["round", "seconds", "hashrate_multiplier", "min_difficulty",
             "max_difficulty"],
    "histogram": ["chain", "transition", "boundary_round", "adopt_round",
                  "delay_rounds", "delay_block_intervals",
                  "delay_block_count"],
    "series-compare": ["window_start_round", "window_end_round", "on_chain",
                       "off_chain", "forking_rate"],
    "bars-compare": ["chain", "changes_per_second"],
}


class SchemaError(ValueError):
    """A CSV does not carry the documented header for its figure kind."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_paths: tuple[str, ...]
    output: str
    labels: tuple[str, ...] = ()
    title: str = ""
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.csv_paths:
            raise ValueError("at least one CSV path is required")

    @classmethod
    def from_json(cls, path) -> "FigureSpec":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            kind=data["kind"],
            csv_paths=tuple(data["csv_paths"]),
            output=data["output"],
            labels=tuple(data.get("labels", ())),
            title=data.get("title", ""),
            x_label=data.get("x_label", ""),
            y_label=data.get("y_label", ""),
        )


def _read_csv(path, kind: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = _EXPECTED_HEADERS[kind]
        if reader.fieldnames != expected:
            raise SchemaError(
                f"{path}: expected columns {expected}, got {reader.fieldnames}"
            )
        return list(reader)


def _deterministic_figure():
    plt.rcParams.update({
        "svg.hashsalt": "pcpow",
        "figure.dpi": 100,
        "font.family": "DejaVu Sans",
    })
    return plt.subplots(figsize=(6.4, 4.0))


def _save(fig, output):
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    kind = out.suffix.lstrip(".").lower() or "png"
    metadata = {"Date": None} if kind == "svg" else {"Software": None}
    fig.savefig(out, format=kind, metadata=metadata)
    plt.close(fig)
    return out


def _label(spec: FigureSpec, i: int) -> str:
    if i < len(spec.labels):
        return spec.labels[i]
    return Path(spec.csv_paths[i]).parent.name or f"series {i}"


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written image path."""
    if spec.kind == "band":
        rows = _read_csv(spec.csv_paths[0], "band")
        seconds = [float(r["seconds"]) for r in rows]
        mult = [float(r["hashrate_multiplier"]) for r in rows]
        lo = [float(r["min_difficulty"]) for r in rows]
        hi = [float(r["max_difficulty"]) for r in rows]
        # Normalize over initial values.
        m0, l0 = mult[0] or 1.0, lo[0] or 1.0
        mult = [m / m0 for m in mult]
        lo = [v / l0 for v in lo]
        hi = [v / l0 for v in hi]
        fig, ax = _deterministic_figure()
        ax.plot(seconds, mult, color="#1f77b4", label="hashrate")
        ax.fill_between(seconds, lo, hi, color="#2ca02c", alpha=0.45,
                        label="difficulty (min-max across chains)")
        ax.set_xlabel(spec.x_label or "time (s)")
        ax.set_ylabel(spec.y_label or "normalized to initial value")
        ax.legend(loc="upper left")
    elif spec.kind == "histogram":
        rows = _read_csv(spec.csv_paths[0], "histogram")
        counts: dict[int, int] = {}
        for r in rows:
            b = max(1, int(r["delay_block_count"]))
            counts[b] = counts.get(b, 0) + 1
        xs = sorted(counts)
        fig, ax = _deterministic_figure()
        ax.bar(xs, [counts[x] for x in xs], color="#1f77b4", width=0.8)
        ax.set_yscale("log")
        ax.set_xlabel(spec.x_label or "adoption delay (block intervals)")
        ax.set_ylabel(spec.y_label or "frequency (log scale)")
    elif spec.kind == "series-compare":
        fig, ax = _deterministic_figure()
        for i, path in enumerate(spec.csv_paths):
            rows = _read_csv(path, "series-compare")
            xs = [
                0.5 * (int(r["window_start_round"]) + int(r["window_end_round"]))
                for r in rows
            ]
            ys = [float(r["forking_rate"]) for r in rows]
            ax.plot(xs, ys, marker="o", label=_label(spec, i))
        ax.set_xlabel(spec.x_label or "round")
        ax.set_ylabel(spec.y_label or "forking rate")
        ax.legend()
    else:  # bars-compare
        fig, ax = _deterministic_figure()
        width = 0.8 / len(spec.csv_paths)
        for i, path in enumerate(spec.csv_paths):
            rows = _read_csv(path, "bars-compare")
            xs = [int(r["chain"]) + i * width for r in rows]
            ys = [float(r["changes_per_second"]) for r in rows]
            ax.bar(xs, ys, width=width, label=_label(spec, i))
        ax.set_xlabel(spec.x_label or "chain")
        ax.set_ylabel(spec.y_label or "difficulty changes per second")
        ax.legend()
    if spec.title:
        ax.set_title(spec.title)
    return _save(fig, spec.output)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pcpow-plots",
        description="Render a figure from pcpow metric CSVs",
    )
    parser.add_argument("spec", nargs="?",
                        help="JSON figure spec (kind, csv_paths, output, ...)")
    parser.add_argument("--kind", choices=FIGURE_KINDS)
    parser.add_argument("--csv", action="append", default=[])
    parser.add_argument("--out")
    parser.add_argument("--label", action="append", default=[])
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    try:
        if args.spec:
            spec = FigureSpec.from_json(args.spec)
        else:
            if not (args.kind and args.csv and args.out):
                parser.error("need either a JSON spec or --kind/--csv/--out")
            spec = FigureSpec(kind=args.kind, csv_paths=tuple(args.csv),
                              output=args.out, labels=tuple(args.label),
                              title=args.title)
        out = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
