"""Scenario runners and convergence sweeps.

Every stage computes its results in memory first; files are written only once
all requested stages succeeded, so a failing run leaves no partial output.
"""
from __future__ import annotations

import contextlib
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import canonical_frame, rotated_spec
from .errors import ConfigError, MeanFieldError, PipelineFailure
from .fockstat import fock_report, recursion_analysis
from .io import sha256_file, write_csv, write_json
from .macroflow import MACRO_CSV_HEADER, MacroTrajectory, classify_fixed_points, integrate_macro
from .mesoflow import (COV_CSV_HEADER, CovarianceState, gaussian_char, integrate_covariance,
                       sigma12_candidates)
from .microsim import (MICRO_CSV_HEADER, MicroObservables, Reference, SingleSiteState,
                       build_product_state, collective_observables, evolve_micro)
from .scenario import Scenario

PARTS = ("macro", "meso", "micro", "fock")
# a candidate is "consistent" when within this relative distance at the largest N
VERDICT_RTOL = 0.10


class Target(str, enum.Enum):
    MACRO_MEANS = "MacroMeans"
    FLUCT_COV = "FluctCov"
    PAIR_CORR = "PairCorr"


@contextlib.contextmanager
def stage(module: str):
    """Re-raise numerical errors as :class:`PipelineFailure` naming ``module``."""
    try:
        yield
    except (ConfigError, PipelineFailure):
        raise
    except (MeanFieldError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise PipelineFailure(module, exc) from exc


@dataclass
class _Table:
    name: str
    header: list[str]
    rows: list[list[float]]


def _macro(sc: Scenario) -> MacroTrajectory:
    with stage("macroflow"):
        return integrate_macro(sc.initial_bloch, sc.spec.B, sc.t_grid, tol=sc.tol)


def _meso(sc: Scenario, macro: MacroTrajectory) -> list[CovarianceState]:
    with stage("mesoflow"):
        return integrate_covariance(sc.initial_covariance, macro, sc.spec.A, sc.spec.B,
                                    tol=sc.tol)


def micro_series(sc: Scenario, N: int, t_grid=None, spec=None, omega0=None,
                 probes=()) -> list[MicroObservables]:
    """Exact finite-N observables from the product state of ``omega0``."""
    spec = sc.spec if spec is None else spec
    omega0 = sc.initial_bloch if omega0 is None else omega0
    t_grid = sc.t_grid if t_grid is None else t_grid
    with stage("microsim"):
        state0 = build_product_state(N, SingleSiteState(omega0))
        traj = evolve_micro(state0, spec, t_grid, tol=sc.micro_tol)
        return [collective_observables(st, Reference.EVOLVED, char_probes=probes)
                for _, st in traj]


def _map_n(fn, n_values, threads: int) -> dict[int, object]:
    ns = sorted(n_values)
    if threads <= 1 or len(ns) <= 1:
        return {n: fn(n) for n in ns}
    # larger N first keeps the pool busy; results are keyed, merge order is N ascending
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {n: pool.submit(fn, n) for n in sorted(ns, reverse=True)}
        return {n: futures[n].result() for n in ns}


def _char_report(obs: MicroObservables, meso: CovarianceState | None) -> dict:
    entries = []
    for r, val in obs.char_samples.items():
        entry = {"r": list(r), "micro": [val.real, val.imag]}
        if meso is not None:
            entry["gaussian"] = gaussian_char(meso, np.array(r))
        entries.append(entry)
    return {"t": obs.t, "probes": entries}


def compute_scenario(sc: Scenario, parts=PARTS, threads: int = 1) -> list:
    """All tables and reports of a run, in memory, in a fixed order."""
    parts = tuple(p for p in PARTS if p in set(parts))
    out: list = []
    macro = meso = None
    if {"macro", "meso", "micro"} & set(parts):
        macro = _macro(sc)
    if "macro" in parts:
        rows = [[t, *w, np.linalg.norm(w)] for t, w in zip(macro.times, macro.states)]
        out.append(_Table("macro.csv", MACRO_CSV_HEADER, rows))
    if "meso" in parts or ("micro" in parts and sc.char_probes):
        meso = _meso(sc, macro)
    if "meso" in parts:
        rows = [[c.t, *c.Sigma[np.triu_indices(3)]] for c in meso]
        out.append(_Table("meso.csv", COV_CSV_HEADER, rows))
    if "micro" in parts:
        probes = sc.probes()
        per_n = _map_n(lambda n: micro_series(sc, n, probes=probes), sc.n_values, threads)
        for n, series in per_n.items():
            out.append(_Table(f"micro_N{n}.csv", MICRO_CSV_HEADER, [o.row() for o in series]))
            if sc.char_probes:
                out.append((f"micro_N{n}_char.json",
                            _char_report(series[-1], meso[-1] if meso else None)))
    if "fock" in parts and sc.fock is not None:
        with stage("fockstat"):
            rep = fock_report(sc.fock.b, sc.fock.n_max)
            if sc.fock.b in (1, -1):
                rec = recursion_analysis(int(sc.fock.b), sc.fock.n_max)
                rep["recursion"] = {
                    "coefficients": rec.coefficients,
                    "rho00_forced_zero": rec.rho00_forced_zero,
                    "feasible": rec.feasible,
                    "boundary_solution": rec.boundary_solution,
                }
        out.append(("fock.json", rep))
    return out


def write_outputs(sc: Scenario, items: list, out_dir: Path, manifest_name="manifest.json",
                  extra: dict | None = None) -> dict:
    out_dir = Path(out_dir)
    files = []
    for item in items:
        if isinstance(item, _Table):
            path = write_csv(out_dir / item.name, item.header, item.rows)
        else:
            name, payload = item
            path = write_json(out_dir / name, payload)
        files.append({"path": path.name, "sha256": sha256_file(path)})
    manifest = {"version": __version__, "config": sc.raw, "files": files}
    if extra:
        manifest.update(extra)
    write_json(out_dir / manifest_name, manifest)
    return manifest


def run_scenario(sc: Scenario, parts=PARTS, threads: int = 1, out_dir=None) -> dict:
    """Run the requested stages and write CSV/JSON outputs plus a manifest."""
    items = compute_scenario(sc, parts, threads)
    return write_outputs(sc, items, sc.output_dir if out_dir is None else out_dir)


# --- convergence sweeps ------------------------------------------------------------

def _fit(x, y) -> tuple[float, float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2


def pair_corr_time(sc: Scenario) -> tuple[float, float, float, float]:
    """``(t, lam, xi, b)`` for the correlation sweep: ``t = 10/b`` in the canonical frame."""
    frame = canonical_frame(sc.spec, sc.initial_bloch)
    xi = float(np.linalg.norm(sc.initial_bloch))
    fp = classify_fixed_points(frame.lam, xi)
    if fp.b <= 0:
        raise PipelineFailure("mesoflow", ValueError("correlation sweep needs b > 0"))
    return 10.0 / fp.b, frame.lam, xi, fp.b


def convergence_sweep(sc: Scenario, target: Target | str, threads: int = 1) -> dict:
    """Finite-N convergence report for one observable family.

    ``MacroMeans``: ``e_N = max_t |m_N(t) - omega(t)|``, fitted on log-log axes.
    ``FluctCov``: ``e_N = max_t max_entry |S_N(t) - Sigma(t)|``, log-log axes.
    ``PairCorr``: ``N C12(N, 10/b)`` in the canonical frame, fitted against ``1/N``.
    """
    target = Target(target)
    if len(sc.n_values) < 3:
        raise ConfigError("a sweep needs at least three n_values")
    ns = sorted(sc.n_values)
    if target is Target.PAIR_CORR:
        return _pair_sweep(sc, ns, threads)
    macro = _macro(sc)
    ref = macro.states if target is Target.MACRO_MEANS else np.array(
        [c.Sigma for c in _meso(sc, macro)])

    def err(n):
        series = micro_series(sc, n)
        if target is Target.MACRO_MEANS:
            return max(float(np.linalg.norm(o.mean - w)) for o, w in zip(series, ref))
        return max(float(np.max(np.abs(o.fluct_cov - S))) for o, S in zip(series, ref))

    errs = _map_n(err, ns, threads)
    e = np.array([errs[n] for n in ns])
    slope, intercept, r2 = _fit(np.log(ns), np.log(e))
    report = {"target": target.value, "slope": slope, "intercept": intercept, "r2": r2,
              "per_N": [{"N": n, "error": errs[n]} for n in ns],
              "monotone_decreasing": bool(np.all(np.diff(e) < 0))}
    return report


def _pair_sweep(sc: Scenario, ns, threads) -> dict:
    t_eval, lam, xi, b = pair_corr_time(sc)
    frame = canonical_frame(sc.spec, sc.initial_bloch)
    spec_rot = rotated_spec(sc.spec, frame)
    grid = np.array([0.0, t_eval])

    def scaled(n):
        return n * micro_series(sc, n, grid, spec_rot, frame.omega_rot)[-1].pair_corr_12

    vals = _map_n(scaled, ns, threads)
    v = np.array([vals[n] for n in ns])
    slope, intercept, r2 = _fit(1.0 / np.asarray(ns, float), v)
    cands = sigma12_candidates(frame.A_rot, lam, xi)
    rel = {k: abs(v[-1] - c) / abs(c) if c != 0 else float("inf") for k, c in cands.items()}
    consistent = sorted(k for k, r in rel.items() if r <= VERDICT_RTOL)
    verdict = consistent[0] if len(consistent) == 1 else ("ambiguous" if consistent else "none")
    return {"target": Target.PAIR_CORR.value, "slope": slope, "intercept": intercept, "r2": r2,
            "per_N": [{"N": n, "N_C12": vals[n]} for n in ns],
            "t": t_eval, "b": b, "xi": xi, "lambda": lam,
            "candidates": cands, "relative_deviation": rel, "verdict": verdict}

