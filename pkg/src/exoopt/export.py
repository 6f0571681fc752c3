"""Report rendering: CSV solution tables, SVG Pareto-projection plots, and a
machine-readable JSON summary.

CSV column order is genome variables, then objectives, then aux fields, then
run, generation, seed.  Floats are written with ``repr`` so a parsed file
re-exports byte-identically.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "exoopt"  # stable element ids across re-runs
import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

import numpy as np  # noqa: E402

from .experiment import (  # noqa: E402
    DesignCatalog,
    NondominatedSet,
    aggregate_to_dict,
    catalog_to_dict,
    summarize,
    _entry_lx,
)
from .linkage import VARIABLE_NAMES  # noqa: E402


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def genome_column_names(problem: str, dim: int) -> list:
    if problem.startswith("uhex"):
        return list(VARIABLE_NAMES[:dim])
    return [f"x{i}" for i in range(dim)]


def _aux_columns(rows: list) -> list:
    keys = set()
    for row in rows:
        keys.update(row["aux"].keys())
    return sorted(keys)


def write_solutions_csv(path, problem: str, rows: list) -> list:
    """Write solution rows (dicts with genome/objectives/aux/run/generation/
    seed) in the documented column order; returns the header used."""
    dim = len(rows[0]["genome"]) if rows else 0
    nobj = len(rows[0]["objectives"]) if rows else 0
    aux_cols = _aux_columns(rows)
    header = (
        genome_column_names(problem, dim)
        + [f"obj{k + 1}" for k in range(nobj)]
        + aux_cols
        + ["run", "generation", "seed"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(v) for v in row["genome"]]
                + [_fmt(v) for v in row["objectives"]]
                + [_fmt(row["aux"].get(k, "")) for k in aux_cols]
                + [row["run"], row["generation"], row["seed"]]
            )
    return header


def read_solutions_csv(path) -> list:
    """Parse a solutions CSV back into row dicts (inverse of the writer)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        tail = header.index("run")
        obj_start = next(i for i, h in enumerate(header) if h == "obj1")
        obj_end = obj_start
        while obj_end < tail and header[obj_end].startswith("obj"):
            obj_end += 1
        rows = []
        for rec in reader:
            aux = {}
            for k, v in zip(header[obj_end:tail], rec[obj_end:tail]):
                if v == "":
                    continue
                aux[k] = v == "True" if v in ("True", "False") else float(v)
            rows.append({
                "genome": [float(v) for v in rec[:obj_start]],
                "objectives": [float(v) for v in rec[obj_start:obj_end]],
                "aux": aux,
                "run": int(rec[tail]),
                "generation": int(rec[tail + 1]),
                "seed": int(rec[tail + 2]),
            })
    return rows


def _record_rows(records: list) -> list:
    rows = []
    for run_idx, rec in enumerate(records):
        if rec.failed:
            continue
        for sol in rec.solutions:
            rows.append({
                "genome": sol["genome"],
                "objectives": sol["objectives"],
                "aux": sol["aux"],
                "run": run_idx,
                "generation": sol["generation"],
                "seed": rec.seed,
            })
    return rows


def _aggregate_rows(agg: NondominatedSet) -> list:
    rows = []
    for entry in agg.entries:
        first = entry.provenance[0]
        rows.append({
            "genome": entry.genome,
            "objectives": entry.objectives,
            "aux": entry.aux,
            "run": first["run"],
            "generation": first["generation"],
            "seed": first["seed"],
        })
    return rows


OBJECTIVE_LABELS = {
    "uhex-moop": ("obj1 force transmission", "obj2 torque balance", "obj3 Lx (mm)"),
}


def plot_front_projections(agg: NondominatedSet, catalog: DesignCatalog | None,
                           out_dir, feasible_lx: float = 50.0) -> list:
    """SVG scatter plots of every pairwise objective projection.

    Points whose actuator excursion stays under ``feasible_lx`` are drawn in a
    distinct color; catalog designs are starred and labeled.
    """
    objs = agg.objectives
    if objs.size == 0:
        return []
    m = objs.shape[1]
    names = OBJECTIVE_LABELS.get(agg.problem, tuple(f"obj{k + 1}" for k in range(m)))
    lx = np.array([_entry_lx(e, m) for e in agg.entries])
    ok = np.isfinite(lx) & (lx <= feasible_lx)
    paths = []
    for a in range(m):
        for b in range(a + 1, m):
            fig, ax = plt.subplots(figsize=(5, 4))
            ax.scatter(objs[~ok, a], objs[~ok, b], s=12, c="tab:gray", alpha=0.6,
                       label=f"Lx > {feasible_lx:g} mm")
            ax.scatter(objs[ok, a], objs[ok, b], s=12, c="tab:blue", alpha=0.8,
                       label=f"Lx <= {feasible_lx:g} mm")
            if catalog is not None:
                for label, idx in sorted(catalog.labels.items()):
                    ax.scatter(objs[idx, a], objs[idx, b], marker="*", s=140,
                               c="tab:red", zorder=3)
                    ax.annotate(label, (objs[idx, a], objs[idx, b]), fontsize=7,
                                xytext=(4, 4), textcoords="offset points")
            ax.set_xlabel(names[a])
            ax.set_ylabel(names[b])
            ax.legend(fontsize=7, loc="best")
            fig.tight_layout()
            path = Path(out_dir) / f"front_obj{a + 1}_obj{b + 1}.svg"
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths


def export_artifacts(records: list, agg: NondominatedSet | None,
                     catalog: DesignCatalog | None, out_dir,
                     feasible_lx: float = 50.0) -> dict:
    """Write all report artifacts; returns a map of artifact name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    produced = {}
    problem = records[0].problem if records else (agg.problem if agg else "unknown")

    path = out / "solutions.csv"
    write_solutions_csv(path, problem, _record_rows(records))
    produced["solutions"] = path

    with open(out / "summary.json", "w") as fh:
        json.dump(summarize(records), fh, indent=2, sort_keys=True)
        fh.write("\n")
    produced["summary"] = out / "summary.json"

    if agg is not None:
        path = out / "aggregate.csv"
        write_solutions_csv(path, agg.problem, _aggregate_rows(agg))
        produced["aggregate_csv"] = path
        with open(out / "aggregate.json", "w") as fh:
            json.dump(aggregate_to_dict(agg), fh, indent=2, sort_keys=True)
            fh.write("\n")
        produced["aggregate_json"] = out / "aggregate.json"
        for svg in plot_front_projections(agg, catalog, out, feasible_lx):
            produced[svg.stem] = svg
    if agg is not None and catalog is not None:
        with open(out / "catalog.json", "w") as fh:
            json.dump(catalog_to_dict(catalog, agg), fh, indent=2, sort_keys=True)
            fh.write("\n")
        produced["catalog"] = out / "catalog.json"
    return produced
