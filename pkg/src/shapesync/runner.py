"""Running scenarios and reading/writing their output files.

Trajectory file (CSV, one row per sample and agent)::

    t, agent, species, x0..x{d-1}, v0..v{d-1}, O00..O{d-1}{d-1}, W00..W{d-1}{d-1}

Diagnostics file (CSV, one row per sample): the fields of
:class:`~shapesync.diagnostics.DiagnosticsRow` in declaration order.
Floats are written with 17 significant digits. A copy of the resolved
scenario is stored next to them as ``config.json``.
"""

import csv
import glob
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import build_initial, load_config, parse_config, serialize_config
from .errors import ValidationError
from .integrate import integrate

log = logging.getLogger(__name__)

CONFIG_COPY = "config.json"


def fmt(x):
    return format(float(x), ".17g")


def trajectory_header(d):
    cols = ["t", "agent", "species"]
    cols += [f"x{a}" for a in range(d)]
    cols += [f"v{a}" for a in range(d)]
    cols += [f"O{a}{b}" for a in range(d) for b in range(d)]
    cols += [f"W{a}{b}" for a in range(d) for b in range(d)]
    return cols


def write_trajectory(path, traj):
    d = traj.states[0].dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(d))
        for t, s in zip(traj.times, traj.states):
            for i in range(s.n_agents):
                row = [fmt(t), str(i), str(int(s.species[i]))]
                row += [fmt(v) for v in s.centroids[i]]
                row += [fmt(v) for v in s.velocities[i]]
                row += [fmt(v) for v in s.rotations[i].ravel()]
                row += [fmt(v) for v in s.angular[i].ravel()]
                w.writerow(row)


def write_diagnostics(path, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(diagnostics.DiagnosticsRow.columns())
        for r in traj.rows:
            w.writerow([fmt(v) for v in r.values()])


def read_diagnostics(path):
    """Diagnostics file as a dict of column name -> float array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if header != diagnostics.DiagnosticsRow.columns():
        raise ValidationError(f"{path} does not look like a diagnostics file")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


@dataclass
class RunResult:
    config: object
    trajectory: object
    summary: dict
    paths: dict


def _safe_rate(t, y, window):
    try:
        return diagnostics.fit_decay_rate(t, y, window)
    except ValidationError:
        return None


def summarize(config, times, table):
    """Rate fits, predicted rates and bound checks for one run."""
    t = np.asarray(times)
    window = diagnostics.default_window(config.integration.t_final)
    p = config.params
    out = {
        "model": config.model,
        "t_final": float(t[-1]),
        "terminal_residual": float(table["residual"][-1]),
        "terminal_diam_centroid": float(table["diam_centroid"][-1]),
        "terminal_diam_rotation": float(table["diam_rotation"][-1]),
        "max_ortho_drift": float(np.max(table["ortho_drift"])),
        "max_rigidity_error": float(np.max(table["rigidity_error"])),
        "window": list(window),
        "fitted_rate_centroid": _safe_rate(t, table["diam_centroid"], window),
        "fitted_rate_rotation": _safe_rate(t, table["diam_rotation"], window),
    }
    predicted = None
    if config.model == "order1" and p.kappa > 0:
        predicted = diagnostics.predicted_rate_order1(p)
    elif config.model in ("order2", "similar") and p.m > 0 and p.gamma > 0 and p.kappa > 0:
        predicted = float(diagnostics.predicted_rate_order2(p))
    out["predicted_rate_centroid"] = predicted
    violations = 0
    if config.model == "order1":
        D = table["diam_rotation"]
        if D[0] < 1:
            bound = diagnostics.lohe_diameter_bound(D[0], p.kappa, t)
            violations = int(np.sum(D > bound + 1e-8))
    elif config.model in ("order2", "hetero"):
        # rotational energy is non-increasing; the similar model has no such functional
        violations = int(np.sum(np.diff(table["energy"]) > 1e-10))
    out["bound_violations"] = violations
    return out


def run(config, out_dir=".", quiet=False):
    """Integrate ``config`` and write trajectory, diagnostics and a config copy.

    Raises :class:`~shapesync.errors.IntegrationError` if the run aborts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    initial = build_initial(config)
    traj = integrate(initial, config.params, config.model, config.integration)
    paths = {
        "trajectory": out / config.output.trajectory,
        "diagnostics": out / config.output.diagnostics,
        "config": out / CONFIG_COPY,
    }
    write_trajectory(paths["trajectory"], traj)
    write_diagnostics(paths["diagnostics"], traj)
    paths["config"].write_text(serialize_config(config))
    table = {name: traj.column(name) for name in diagnostics.DiagnosticsRow.columns()}
    summary = summarize(config, traj.times, table)
    if not quiet:
        print(format_summary(config.name or config.model, summary))
    return RunResult(config, traj, summary, paths)


def format_summary(title, summary):
    def num(v):
        return "n/a" if v is None else f"{v:.6g}"

    lines = [
        f"[{title}] model={summary['model']} t_final={summary['t_final']:g}",
        f"  terminal residual        {num(summary['terminal_residual'])}",
        f"  terminal D(centroids)    {num(summary['terminal_diam_centroid'])}",
        f"  terminal D(rotations)    {num(summary['terminal_diam_rotation'])}",
        f"  centroid rate fitted     {num(summary['fitted_rate_centroid'])}"
        f"   predicted {num(summary['predicted_rate_centroid'])}",
        f"  rotation rate fitted     {num(summary['fitted_rate_rotation'])}",
        f"  max orthogonality drift  {num(summary['max_ortho_drift'])}",
        f"  max rigidity error       {num(summary['max_rigidity_error'])}",
        f"  bound violations         {summary['bound_violations']}",
    ]
    return "\n".join(lines)


def analyze(diagnostics_path, window=None, quiet=False):
    """Rate fits and bound checks on a diagnostics file.

    When a ``config.json`` written by :func:`run` sits next to the file, the
    model parameters are used for predicted rates and bound checks.
    """
    path = Path(diagnostics_path)
    table = read_diagnostics(path)
    t = table["t"]
    cfg_path = path.parent / CONFIG_COPY
    if cfg_path.exists():
        config = parse_config(json.loads(cfg_path.read_text()))
        summary = summarize(config, t, table)
        if window is not None:
            summary["window"] = list(window)
            summary["fitted_rate_centroid"] = _safe_rate(t, table["diam_centroid"], window)
            summary["fitted_rate_rotation"] = _safe_rate(t, table["diam_rotation"], window)
        title = config.name or config.model
    else:
        window = window or diagnostics.default_window(t[-1])
        summary = {
            "model": "unknown",
            "t_final": float(t[-1]),
            "terminal_residual": float(table["residual"][-1]),
            "terminal_diam_centroid": float(table["diam_centroid"][-1]),
            "terminal_diam_rotation": float(table["diam_rotation"][-1]),
            "max_ortho_drift": float(np.max(table["ortho_drift"])),
            "max_rigidity_error": float(np.max(table["rigidity_error"])),
            "window": list(window),
            "fitted_rate_centroid": _safe_rate(t, table["diam_centroid"], window),
            "fitted_rate_rotation": _safe_rate(t, table["diam_rotation"], window),
            "predicted_rate_centroid": None,
            "bound_violations": int(np.sum(np.diff(table["energy"]) > 1e-10)),
        }
        title = path.name
    if not quiet:
        print(format_summary(title, summary))
    return summary


def _run_one(args):
    cfg_path, out_dir, seed = args
    config = load_config(cfg_path)
    if seed is not None:
        config = config.with_seed(seed)
    result = run(config, out_dir, quiet=True)
    return str(cfg_path), result.summary


def sweep(pattern, out_dir=".", seed=None, workers=None, quiet=False):
    """Run every config matching ``pattern`` into ``out_dir/<config stem>/``."""
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise ValidationError(f"no config files match {pattern!r}")
    jobs = [(p, Path(out_dir) / Path(p).stem, seed) for p in paths]
    # validate everything up front so a typo fails before any run starts
    for p in paths:
        load_config(p)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = dict(pool.map(_run_one, jobs))
    if not quiet:
        for p in paths:
            print(format_summary(Path(p).stem, results[p]))
    return results
