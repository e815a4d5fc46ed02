"""Run artifacts: trajectory CSV, summary JSON and optional SVG plots."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim import Scenario, TrajectoryLog, VerificationReport, summary, verify_run

__all__ = ["RunArtifacts", "csv_header", "write_csv", "read_csv", "emit"]


@dataclass
class RunArtifacts:
    csv: Path
    summary: Path
    scenario: Path
    plots: list


def csv_header(n_agents: int, n_edges: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n_agents + 1):
        cols += [f"q{i}_1", f"q{i}_2", f"dq{i}_1", f"dq{i}_2", f"x{i}", f"y{i}", f"u{i}_1", f"u{i}_2"]
    cols += [f"e_{k}" for k in range(1, n_edges + 1)]
    cols += ["xi_norm", "U"]
    return cols


def _rows(log: TrajectoryLog):
    S, N = log.q.shape[:2]
    per_agent = np.concatenate([log.q, log.qdot, log.x, log.u], axis=2)  # (S, N, 8)
    table = np.column_stack(
        [log.t, per_agent.reshape(S, N * 8), log.e, log.xi_norm, log.U]
    )
    for row in table.tolist():
        # repr of a Python float is the shortest exact round-trip form, '.' decimal
        yield [repr(v) for v in row]


def write_csv(log: TrajectoryLog, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(log.n_agents, log.n_edges))
        if len(log):
            w.writerows(_rows(log))
    return path


def read_csv(path, scenario: Scenario) -> TrajectoryLog:
    """Rebuild a :class:`TrajectoryLog` from a trajectory CSV and its scenario."""
    path = Path(path)
    N = scenario.network.n
    E = scenario.network.formation.n_edges
    expected = csv_header(N, E)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if header != expected:
            raise ValueError(
                f"{path}: header does not match scenario ({len(header)} columns, expected {len(expected)})"
            )
        data = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(expected))
    S = data.shape[0]
    per_agent = data[:, 1 : 1 + 8 * N].reshape(S, N, 8)
    return TrajectoryLog(
        scenario=scenario,
        t=data[:, 0],
        q=per_agent[:, :, 0:2].copy(),
        qdot=per_agent[:, :, 2:4].copy(),
        x=per_agent[:, :, 4:6].copy(),
        u=per_agent[:, :, 6:8].copy(),
        e=data[:, 1 + 8 * N : 1 + 8 * N + E].copy(),
        xi_norm=data[:, -2].copy(),
        U=data[:, -1].copy(),
    )


def emit(log: TrajectoryLog, out_dir, formats=("csv", "json"), report: VerificationReport | None = None) -> RunArtifacts:
    """Write the artifacts of one run into ``out_dir``.

    ``formats`` may contain ``"csv"``, ``"json"`` and ``"svg"``. The scenario
    is always saved next to them so the CSV can be re-verified later.
    """
    from .scenario import save_scenario

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    formats = set(formats)
    csv_path = out / "trajectory.csv"
    json_path = out / "summary.json"
    scen_path = save_scenario(log.scenario, out / "scenario.json")
    if "csv" in formats:
        write_csv(log, csv_path)
    if "json" in formats:
        data = summary(log, report) if len(log) else {"scenario": log.scenario.name, "samples": 0}
        json_path.write_text(json.dumps(data, indent=2) + "\n")
    plots = []
    if "svg" in formats and len(log):
        from .plots import write_svg_plots

        plots = write_svg_plots(log, out)
    return RunArtifacts(csv=csv_path, summary=json_path, scenario=scen_path, plots=plots)


def verify_csv(csv_path, scenario: Scenario) -> VerificationReport:
    return verify_run(read_csv(csv_path, scenario))
