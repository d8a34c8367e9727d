"""Run pricers from configs, reproduce the reference tables, write reports."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .benchmarks import black_scholes_call, crank_nicolson_1d, lsq_monte_carlo
from .config import TABLE1_JSON, parse_config
from .errors import NumericalFailure, UnknownExperiment
from .solvers import forward_dnn_solve, lsq_backward_dnn_solve

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "contract", "dims", "price", "dispersion", "rel_diff_vs_reference",
               "wall_clock_s", "seed")


@dataclass
class ReportRecord:
    method: str
    contract: str
    dims: int
    price: float
    dispersion: float | None
    rel_diff_vs_reference: float | None
    wall_clock_s: float
    seed: int
    reference: float | None = None
    config_hash: str = ""
    history: str = ""


def rel_diff(value, reference):
    """``(value - reference) / reference``; None when there is no reference."""
    if reference is None or value is None:
        return None
    return (value - reference) / reference


def _write_convergence(path, report):
    snaps = {s.iteration: s for s in report.validation_history}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "training_loss", "validation_loss", "validation_price"])
        for it, loss in enumerate(report.loss_history, start=1):
            s = snaps.get(it)
            w.writerow([it, repr(float(loss)), "" if s is None else repr(s.loss),
                        "" if s is None else repr(s.price)])


def run_price(config, write=True):
    """Price one configuration and return its :class:`ReportRecord`.

    With an output directory configured, writes ``<run-id>.<fmt>`` and, for
    DNN methods, ``<run-id>-convergence.csv``.
    """
    market, grid, contract = config.market, config.grid, config.contract
    start = time.perf_counter()
    dispersion = None
    solver_report = None
    if config.method == "black_scholes":
        a = market.assets[0]
        price = float(black_scholes_call(a.spot, contract.strike / contract.weights[0], market.rate,
                                         a.dividend, a.vol, grid.maturity) * contract.weights[0])
    elif config.method == "pde_1d":
        price = crank_nicolson_1d(market, grid, contract, config.pde)
    elif config.method == "lsq_mc":
        res = lsq_monte_carlo(market, grid, contract, config.mc_paths, config.seed, config.basis_order)
        price, dispersion = res.price, res.standard_error
    else:
        solve = forward_dnn_solve if config.method == "forward_dnn" else lsq_backward_dnn_solve
        solver_report = solve(market, grid, contract, config.protocol)
        price, dispersion = solver_report.price, solver_report.dispersion
    if not np.isfinite(price):
        raise NumericalFailure(f"{config.method} returned a non-finite price")
    record = ReportRecord(
        method=config.method,
        contract=config.contract_label,
        dims=market.dims,
        price=float(price),
        dispersion=None if dispersion is None else float(dispersion),
        rel_diff_vs_reference=rel_diff(price, config.reference),
        wall_clock_s=time.perf_counter() - start,
        seed=config.seed,
        reference=config.reference,
        config_hash=config.config_hash,
    )
    if write and config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        run_id = run_id_for(record)
        if solver_report is not None:
            conv = out / f"{run_id}-convergence.csv"
            _write_convergence(conv, solver_report)
            record.history = str(conv)
        emit_report([record], out / f"{run_id}.{config.output_format}", config.output_format)
    log.info("%s %s d=%d price=%.6f (%.1fs)", record.method, record.contract, record.dims,
             record.price, record.wall_clock_s)
    return record


def run_id_for(record):
    return f"{record.method}-{record.contract}-{record.dims}d-{record.config_hash[:10]}"


def emit_report(records, path, fmt="csv"):
    """Write records as CSV (fixed columns) or JSON lines (all fields)."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
            w.writeheader()
            for r in records:
                row = asdict(r)
                w.writerow({k: "" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k])
                            for k in CSV_COLUMNS})
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps(asdict(r)) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_report(path):
    """Parse a report written by :func:`emit_report` back into dicts."""
    path = Path(path)
    if path.suffix == ".jsonl":
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    types = {f.name: f.type for f in fields(ReportRecord)}
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out = {}
            for k, v in row.items():
                if v == "":
                    out[k] = None
                elif k in ("dims", "seed"):
                    out[k] = int(v)
                elif k in ("method", "contract"):
                    out[k] = v
                else:
                    out[k] = float(v)
            rows.append(out)
    return rows


# --- table reproduction ---------------------------------------------------

QUARTERLY = [0.25, 0.5, 0.75, 1.0]
EUROPEAN = {"type": "european_call", "weights": "equal", "strike": "atm"}
BERMUDAN = {"type": "bermudan_call", "weights": "equal", "strike": "atm", "exercise_times": QUARTERLY}
CYN = {"type": "cyn", "notional": 1.0, "coupon_rate": 0.05, "coupon_barrier": 0.70,
       "knockin_barrier": 0.50, "put_strike": 1.00, "schedule_times": QUARTERLY}

# published values: {dims: {method: price}}
EXPERIMENTS = {
    "table2": dict(contract=EUROPEAN, dims=[1], preset="full",
                   methods=["black_scholes", "forward_dnn", "lsq_backward_dnn"], baseline="black_scholes",
                   reference={1: {"black_scholes": 6.8669, "forward_dnn": 6.8688, "lsq_backward_dnn": 6.8575}}),
    "table3": dict(contract=BERMUDAN, dims=[1, 2, 3, 5], preset="full",
                   methods=["pde_1d", "lsq_mc", "lsq_backward_dnn"], baseline="pde_1d",
                   reference={1: {"pde_1d": 6.9933, "lsq_mc": 6.9923, "lsq_backward_dnn": 6.9863},
                              2: {"pde_1d": 9.9514, "lsq_mc": 9.9535, "lsq_backward_dnn": 9.9488},
                              3: {"pde_1d": 9.6987, "lsq_mc": 9.7224, "lsq_backward_dnn": 9.6813},
                              5: {"lsq_mc": 8.2709, "lsq_backward_dnn": 8.2795}}),
    "table5": dict(contract=CYN, dims=[1, 2, 3, 5], preset="full",
                   methods=["pde_1d", "lsq_mc", "lsq_backward_dnn"], baseline="pde_1d",
                   reference={1: {"pde_1d": 1.0475, "lsq_mc": 1.0474, "lsq_backward_dnn": 1.0474},
                              2: {"pde_1d": 1.0457, "lsq_mc": 1.0458, "lsq_backward_dnn": 1.0465},
                              3: {"pde_1d": 1.0438, "lsq_mc": 1.0453, "lsq_backward_dnn": 1.0452},
                              5: {"lsq_mc": 1.0449, "lsq_backward_dnn": 1.0448}}),
    "table6": dict(contract=EUROPEAN, dims=[5, 10, 20, 50], preset="efficiency",
                   methods=["lsq_mc", "lsq_backward_dnn"], baseline="lsq_mc",
                   reference={5: {"lsq_mc": 8.1033, "lsq_backward_dnn": 8.1146},
                              10: {"lsq_mc": 7.2546, "lsq_backward_dnn": 7.2318},
                              20: {"lsq_mc": 6.8038, "lsq_backward_dnn": 6.7856},
                              50: {"lsq_mc": 6.5121, "lsq_backward_dnn": 6.4975}}),
    "table7": dict(contract=BERMUDAN, dims=[5, 10, 20, 50], preset="efficiency",
                   methods=["lsq_mc", "lsq_backward_dnn"], baseline="lsq_mc",
                   reference={5: {"lsq_mc": 8.2709, "lsq_backward_dnn": 8.2795},
                              10: {"lsq_mc": 7.4112, "lsq_backward_dnn": 7.4127},
                              20: {"lsq_mc": 6.9760, "lsq_backward_dnn": 6.9745},
                              50: {"lsq_mc": 6.7372, "lsq_backward_dnn": 6.7100}}),
    "table8": dict(contract=CYN, dims=[5, 10, 20, 50], preset="efficiency",
                   methods=["lsq_mc", "lsq_backward_dnn"], baseline="lsq_mc",
                   reference={5: {"lsq_mc": 1.0449, "lsq_backward_dnn": 1.0448},
                              10: {"lsq_mc": 1.0402, "lsq_backward_dnn": 1.0390},
                              20: {"lsq_mc": 1.0257, "lsq_backward_dnn": 1.0236},
                              50: {"lsq_mc": 0.9778, "lsq_backward_dnn": 0.9633}}),
}


def experiment_config(name, dims, method, preset=None, seed=2020, mc_paths=None, output_dir=None,
                      protocol=None):
    spec = EXPERIMENTS[name]
    raw = json.loads(json.dumps(TABLE1_JSON))
    raw["market"]["underliers"] = dims
    raw.update(
        contract=dict(spec["contract"]),
        method=method,
        seed=seed,
        protocol={"preset": preset or spec["preset"], **(protocol or {})},
        reference=spec["reference"].get(dims, {}).get(method),
    )
    if mc_paths is not None:
        raw["mc"] = {"num_paths": mc_paths}
    if output_dir is not None:
        raw["output"] = {"dir": str(output_dir)}
    return parse_config(raw)


def _run_cell(config):
    return run_price(config)


def run_experiment(name, dims=None, preset=None, jobs=1, seed=2020, mc_paths=None, output_dir=None,
                   methods=None, protocol=None):
    """Run every in-scope cell of a published table.

    Multi-asset PDE cells are not computed; they come back as
    ``pde_reference`` rows carrying the published number. Returns
    ``(records, table_text)``.
    """
    if name not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}",
                                "experiment")
    spec = EXPERIMENTS[name]
    dims = list(dims or spec["dims"])
    methods = list(methods or spec["methods"])
    cells, slots = [], []
    for d in dims:
        for m in methods:
            if m == "pde_1d" and d > 1:
                ref = spec["reference"].get(d, {}).get(m)
                if ref is not None:
                    slots.append(ReportRecord("pde_reference", spec["contract"]["type"], d, ref, None, 0.0,
                                              0.0, seed, ref))
                continue
            slots.append(len(cells))
            cells.append(experiment_config(name, d, m, preset, seed, mc_paths, output_dir, protocol))
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_cell, cells))
    else:
        done = [_run_cell(c) for c in cells]
    records = [done[s] if isinstance(s, int) else s for s in slots]
    if output_dir is not None:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        emit_report(records, Path(output_dir) / f"{name}.csv", "csv")
    return records, comparison_table(name, records)


def comparison_table(name, records):
    """Side-by-side computed vs published prices and the relative differences."""
    spec = EXPERIMENTS[name]
    base = spec["baseline"]
    by_dim = {}
    for r in records:
        method = "pde_1d" if r.method == "pde_reference" else r.method
        by_dim.setdefault(r.dims, {})[method] = r
    methods = [m for m in spec["methods"] if any(m in row for row in by_dim.values())]
    head = ["dims"] + [f"{m} (published)" for m in methods]
    others = [m for m in methods if m != base]
    if base in methods:
        head += [f"{m} rel diff vs {base}" for m in others]
    if "lsq_mc" in methods and base != "lsq_mc" and "lsq_backward_dnn" in methods:
        head.append("lsq_backward_dnn rel diff vs lsq_mc")
    lines = [" | ".join(head)]
    for d in sorted(by_dim):
        row = by_dim[d]
        cells = [str(d)]
        for m in methods:
            r = row.get(m)
            if r is None:
                cells.append("-")
                continue
            ref = spec["reference"].get(d, {}).get(m)
            note = "published value" if r.method == "pde_reference" else (f"{ref:.4f}" if ref is not None else "-")
            cells.append(f"{r.price:.4f} ({note})")
        if base in methods:
            for m in others:
                rd = rel_diff(row[m].price, row[base].price) if m in row and base in row else None
                cells.append("-" if rd is None else f"{rd:+.2%}")
        if "lsq_mc" in methods and base != "lsq_mc" and "lsq_backward_dnn" in methods:
            rd = (rel_diff(row["lsq_backward_dnn"].price, row["lsq_mc"].price)
                  if "lsq_backward_dnn" in row and "lsq_mc" in row else None)
            cells.append("-" if rd is None else f"{rd:+.2%}")
        lines.append(" | ".join(cells))
    return "\n".join(lines)
