"""Batch front end: ``tempomc run <config>`` and ``tempomc compare <a> <b>``.

Each run writes a JSON manifest (resolved config, seeds, version, wall time,
convergence diagnostics) plus CSV data files with full round-trip decimal
formatting, so identical configs and seeds reproduce byte-identical CSV
bodies.  Exit codes: 0 success, 2 config error, 3 convergence failure
(manifest still written), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .engine import AmplitudeEngine, sweep_environments
from .network import QuenchSpec, build_columns
from .sampler import (LocalOperatorSpec, full_enumeration_expectation,
                      metropolis_run, renyi2_swap)
from .analytics import (circuit_entropy_experiment, entropy_series,
                        fixed_point_entropy_scan, free_energy_scan)
from .tmps import ZeroOverlapError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_NUMERICAL = 4


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def _observables(raw: str, n: int) -> List[LocalOperatorSpec]:
    out = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, site = item.partition(":")
        idx = n // 2 if site in ("auto", "") else int(site)
        if name.upper() == "Z":
            out.append(LocalOperatorSpec.pauli_z(idx))
        elif name.upper() == "X":
            out.append(LocalOperatorSpec.pauli_x(idx))
        else:
            raise ConfigError(f"unknown observable {item!r}")
    if not out:
        raise ConfigError("no observables given")
    return out


def _quench_spec(cfg: RunConfig, t_total: float) -> QuenchSpec:
    model = cfg["model"]
    dt = float(model["dt"])
    steps = max(0, round(t_total / dt)) if t_total > 0 else 0
    return QuenchSpec(n=cfg.n_sites(), hz=float(model["hz"]), hx=float(model["hx"]),
                      t_total=steps * dt, dt=dt, trotter_order=int(model["trotter_order"]),
                      x0=str(cfg.get("boundaries", "initial", "0")))


# ---------------------------------------------------------------------------
# experiment dispatchers; each returns (csv rows by filename, diagnostics)


def _run_evolve_expectation(cfg: RunConfig):
    n = int(cfg.n_sites())
    chi = int(cfg.get("contraction", "chi"))
    tol = float(cfg.get("contraction", "tol"))
    obs = _observables(str(cfg.get("sampling", "observable")), n)[0]
    rows = []
    diags = {"non_converged": 0}
    for t in cfg.t_grid():
        spec = _quench_spec(cfg, t)
        engine = AmplitudeEngine(spec, chi, tol)
        val = full_enumeration_expectation(spec, chi, obs, engine=engine)
        rows.append((spec.t_total, val.real, val.imag, 0.0))
    return {"data.csv": (("T", "value_re", "value_im", "err"), rows)}, diags


def _run_mc_sample(cfg: RunConfig):
    n = int(cfg.n_sites())
    chi = int(cfg.get("contraction", "chi"))
    tol = float(cfg.get("contraction", "tol"))
    m = int(cfg.get("sampling", "m"))
    seed = int(cfg.get("run", "seed"))
    spec = _quench_spec(cfg, float(cfg.get("evolution", "t")))
    obs = _observables(str(cfg.get("sampling", "observable")), n)
    engine = AmplitudeEngine(spec, chi, tol)
    estimates = metropolis_run(spec, chi, m, seed, obs, engine=engine)
    rows = [(name, est.mean.real, est.std_error, est.n_samples, est.acceptance_rate)
            for name, est in estimates.items()]
    return {"data.csv": (("observable", "mean", "stderr", "M", "acceptance_rate"),
                         rows)}, {}


def _run_renyi2(cfg: RunConfig):
    n = int(cfg.n_sites())
    chi = int(cfg.get("contraction", "chi"))
    tol = float(cfg.get("contraction", "tol"))
    m = int(cfg.get("sampling", "m"))
    seed = int(cfg.get("run", "seed"))
    cut_raw = str(cfg.get("sampling", "cut"))
    cut = n // 2 if cut_raw == "auto" else int(cut_raw)
    spec = _quench_spec(cfg, float(cfg.get("evolution", "t")))
    engine = AmplitudeEngine(spec, chi, tol)
    est = renyi2_swap(spec, chi, m, seed, cut, engine=engine)
    rows = [(est.name, est.mean if not isinstance(est.mean, complex) else est.mean.real,
             est.std_error, est.n_samples, est.acceptance_rate)]
    return {"data.csv": (("observable", "mean", "stderr", "M", "acceptance_rate"),
                         rows)}, {}


def _run_entropy_scan(cfg: RunConfig):
    chi = int(cfg.get("contraction", "chi"))
    tol = float(cfg.get("contraction", "tol"))
    model = cfg["model"]
    x0 = str(cfg.get("boundaries", "initial", "0"))
    xf = str(cfg.get("boundaries", "final", "0"))
    rows = []
    diags = {"skipped_points": 0}
    if cfg.n_sites() == "infinite":
        series = fixed_point_entropy_scan(
            x0, xf, float(model["hz"]), float(model["hx"]), cfg.t_grid(), chi,
            dt=float(model["dt"]), trotter_order=int(model["trotter_order"]), tol=tol)
        dt = float(model["dt"])
        for t_tot, cut, slr, sll, r2 in zip(series.times, series.cuts, series.s_lr,
                                            series.s_ll, series.renyi2_lr):
            rows.append((t_tot, cut * dt, slr.real, slr.imag, sll, r2.real))
    else:
        n = int(cfg.n_sites())
        dt = float(model["dt"])
        for t in cfg.t_grid():
            spec = _quench_spec(cfg, t)
            if spec.n_steps < 2:
                diags["skipped_points"] += 1
                continue
            colset = build_columns(spec, xf)
            env = sweep_environments(colset, chi, tol)
            mid = n // 2
            series = entropy_series(env.left[mid], env.right[mid],
                                    dt_per_site=spec.t_total / spec.n_steps)
            for tt, slr, sll, r2 in zip(series.times, series.s_lr, series.s_ll,
                                        series.renyi2_lr):
                rows.append((spec.t_total, tt, slr.real, slr.imag, sll, r2.real))
    return {"data.csv": (("T", "t", "S_LR_re", "S_LR_im", "S_LL", "renyi2_LR"),
                         rows)}, diags


def _run_dqpt_scan(cfg: RunConfig):
    model = cfg["model"]
    scan = free_energy_scan(
        str(cfg.get("boundaries", "initial", "0")),
        str(cfg.get("boundaries", "final", "0")),
        float(model["hz"]), float(model["hx"]), cfg.t_grid(),
        int(cfg.get("contraction", "chi")), dt=float(model["dt"]),
        trotter_order=int(model["trotter_order"]), n=cfg.n_sites(),
        threshold=float(cfg.get("detector", "threshold", 10.0)),
        workers=_worker_count(cfg))
    rows = [(t, f, int(flag)) for t, f, flag in zip(scan.times, scan.f, scan.cusp_flags)]
    diags = {"missing_points": int(np.sum(~np.isfinite(scan.f))),
             "cusp_times": [float(t) for t in scan.cusp_times]}
    return {"data.csv": (("T", "f", "cusp_flag"), rows)}, diags


def _run_circuit_ensemble(cfg: RunConfig):
    circ = cfg["circuit"]
    res = circuit_entropy_experiment(
        half_n=int(circ["half_n"]), dt=float(circ["dt"]), t_grid=cfg.t_grid(),
        chi=int(cfg.get("contraction", "chi")), realizations=int(circ["realizations"]),
        seed=int(cfg.get("run", "seed")), boundaries=str(circ["boundaries"]))
    rows = [(t, a, b, c, d, res.n_realizations)
            for t, a, b, c, d in zip(res.times, res.s_lr_re, res.s_lr_re_err,
                                     res.s_ll, res.s_ll_err)]
    return {"data.csv": (("T", "S_LR_re", "S_LR_re_err", "S_LL", "S_LL_err", "n"),
                         rows)}, {"failed_realizations": res.n_failed}


def _run_benchmark_truncation(cfg: RunConfig):
    from .engine import amplitude as engine_amplitude
    n = int(cfg.n_sites())
    bench = cfg["benchmark"]
    chis = [int(c) for c in str(bench["chis"]).split(",")]
    n_strings = int(bench["n_strings"])
    chi_ref = int(bench["chi_ref"])
    seed = int(cfg.get("run", "seed"))
    spec = _quench_spec(cfg, float(cfg.get("evolution", "t")))
    rng = np.random.default_rng(seed)
    rows = []
    diags = {"zero_reference": 0}
    for k in range(n_strings):
        bits = "".join(str(b) for b in rng.integers(0, 2, size=n))
        colset = build_columns(spec, bits)
        ref = engine_amplitude(colset, chi_ref)
        if ref == 0:
            diags["zero_reference"] += 1
            continue
        for chi in chis:
            for mode in ("rtm", "rdm"):
                val = engine_amplitude(colset, chi, trunc_mode=mode)
                rows.append((k, chi, mode, abs(val - ref) / abs(ref)))
    return {"data.csv": (("string_index", "chi", "mode", "rel_error"), rows)}, diags


_DISPATCH = {
    "evolve-expectation": _run_evolve_expectation,
    "mc-sample": _run_mc_sample,
    "renyi2": _run_renyi2,
    "entropy-scan": _run_entropy_scan,
    "dqpt-scan": _run_dqpt_scan,
    "circuit-ensemble": _run_circuit_ensemble,
    "benchmark-truncation": _run_benchmark_truncation,
}


def _worker_count(cfg: RunConfig) -> int:
    env = os.environ.get("TEMPOMC_WORKERS")
    if env is not None:
        return max(1, int(env))
    return max(1, int(cfg.get("run", "workers", 1)))


def run_experiment(config_path: str) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(str(cfg.get("run", "output")))
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    manifest = {
        "version": __version__,
        "kind": cfg.kind,
        "config": cfg.values,
        "config_path": str(config_path),
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    status = EXIT_OK
    try:
        files, diags = _DISPATCH[cfg.kind](cfg)
        for name, (header, rows) in files.items():
            _write_csv(outdir / name, header, rows)
        manifest["diagnostics"] = diags
        if diags.get("non_converged") or diags.get("missing_points"):
            status = EXIT_CONVERGENCE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZeroOverlapError as exc:
        manifest["diagnostics"] = {"error": str(exc)}
        status = EXIT_CONVERGENCE
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        manifest["diagnostics"] = {"error": f"{type(exc).__name__}: {exc}"}
        status = EXIT_NUMERICAL
    manifest["wall_seconds"] = time.time() - t0
    manifest["exit_code"] = status
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return status


# ---------------------------------------------------------------------------
# artifact comparison


def compare_artifacts(path_a: str, path_b: str, tol: float) -> int:
    with open(path_a, encoding="utf-8") as fh:
        rows_a = list(csv.reader(fh))
    with open(path_b, encoding="utf-8") as fh:
        rows_b = list(csv.reader(fh))
    if not rows_a or not rows_b or rows_a[0] != rows_b[0]:
        print("schema mismatch", file=sys.stderr)
        return EXIT_CONFIG
    if len(rows_a) != len(rows_b):
        print(f"row count differs: {len(rows_a) - 1} vs {len(rows_b) - 1}",
              file=sys.stderr)
        return 1
    header = rows_a[0]
    max_abs = {h: 0.0 for h in header}
    max_rel = {h: 0.0 for h in header}
    for ra, rb in zip(rows_a[1:], rows_b[1:]):
        for h, ca, cb in zip(header, ra, rb):
            try:
                fa, fb = float(ca), float(cb)
            except ValueError:
                if ca != cb:
                    max_abs[h] = math.inf
                continue
            diff = abs(fa - fb)
            max_abs[h] = max(max_abs[h], diff)
            scale = max(abs(fa), abs(fb))
            if scale > 0:
                max_rel[h] = max(max_rel[h], diff / scale)
    worst = 0.0
    for h in header:
        print(f"{h}: max_abs={max_abs[h]:.3e} max_rel={max_rel[h]:.3e}")
        worst = max(worst, max_abs[h])
    return EXIT_OK if worst <= tol else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="tempomc",
                                     description="transverse-contraction experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_cmp = sub.add_parser("compare", help="compare two CSV artifacts")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("--tol", type=float, default=0.0)
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config)
    return compare_artifacts(args.a, args.b, args.tol)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
