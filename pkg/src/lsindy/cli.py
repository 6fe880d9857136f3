"""Command-line driver: gen, simulate, identify, predict, evaluate, pipeline.

Every stage reads and writes files in the output directory, so a pipeline run
is the composition of the single-stage commands.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy import optimize

from .grid_model import (
    EffectiveNetwork,
    NetworkFileError,
    ParameterRanges,
    equilibrium_residual,
    generate_synthetic,
    load_network,
    save_network,
    stacked_field,
)
from .library import DEFAULT_MEMORY_BUDGET, LibrarySpec, LibraryTooLarge, build
from .metrics import average_series, evaluate, timed
from .ode import IntegrationConfig, IntegrationError, integrate
from .reduction import compute_basis, project, write_spectrum_csv
from .snapshots import add_noise, assemble, read_snapshot_csv, read_state_csv, write_snapshot_csv, write_state_csv
from .sparse_id import RegressionConfig, estimate_HD, fit, initial_coordinates, load_model, save_model, simulate_model

log = logging.getLogger("lsindy")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

NETWORK_FILE = "network.json"
EQUILIBRIUM_FILE = "equilibrium.csv"
SNAPSHOT_FILE = "snapshots.csv"
MODEL_FILE = "model.json"
BASIS_FILE = "basis.csv"
SPECTRUM_FILE = "spectrum.csv"
PREDICTION_FILE = "prediction.csv"
LATENT_FILE = "latent.csv"
REPORT_FILE = "report.json"
AVERAGES_FILE = "averages.csv"
ERRORS_FILE = "errors.csv"
HD_FILE = "hd_estimates.json"
# wall-clock times; the only output that differs between identical runs
TIMING_FILE = "timing.json"


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "network": {
        "file": None,
        "synthetic": {
            "n_g": 3,
            "topology": "ring",
            "density": 0.1,
            "seed": 0,
            "ranges": {},
        },
    },
    "disturbance": {"angle": 0.1, "frequency": 0.0, "seed": 1},
    "integration": {
        "t0": 0.0,
        "t_end": 5.0,
        "dt": 0.01,
        "rel_tol": 1e-8,
        "abs_tol": 1e-10,
        "max_steps": 1_000_000,
    },
    "derivatives": "exact",
    "noise": {"sigma_rel": 0.0, "seed": 2},
    "reduction": {"criterion": "energy", "tau": 0.999, "r": None, "center": False},
    "library": LibrarySpec().to_dict(),
    "regression": {"lambda": 0.001, "max_iters": 10, "normalize_columns": True,
                   "rank_tolerance": None},
    "memory_budget_bytes": DEFAULT_MEMORY_BUDGET,
    "output_dir": "lsindy_out",
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict) and key not in ("ranges",):
            out[key] = _merge(base[key], val, f"{path}{key}.")
        else:
            out[key] = val
    return out


def load_config(path=None, seed=None, out=None) -> dict:
    """Defaults overlaid with the JSON file at ``path`` and CLI overrides.

    ``seed`` replaces every seed: network ``seed``, disturbance ``seed + 1``,
    noise ``seed + 2``.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, doc)
    if seed is not None:
        cfg["network"]["synthetic"]["seed"] = seed
        cfg["disturbance"]["seed"] = seed + 1
        cfg["noise"]["seed"] = seed + 2
    if out is not None:
        cfg["output_dir"] = str(out)
    for where, s in (("network.synthetic.seed", cfg["network"]["synthetic"]["seed"]),
                     ("disturbance.seed", cfg["disturbance"]["seed"]),
                     ("noise.seed", cfg["noise"]["seed"])):
        if not isinstance(s, int) or isinstance(s, bool):
            raise ConfigError(f"{where} must be an integer, got {s!r}")
    if cfg["derivatives"] not in ("exact", "finite-difference"):
        raise ConfigError(f"derivatives must be 'exact' or 'finite-difference'")
    return cfg


def integration_config(cfg) -> IntegrationConfig:
    ic = cfg["integration"]
    try:
        return IntegrationConfig(ic["t0"], ic["t_end"], ic["dt"], ic["rel_tol"], ic["abs_tol"],
                                 int(ic["max_steps"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integration: {exc}") from exc


def library_spec(cfg, d, full_state=False) -> LibrarySpec:
    """Library settings for ``d`` coordinates.

    In full-state mode ``trig_coordinates`` / ``poly_coordinates`` may name a
    block (``"delta"`` or ``"omega"``); trig terms default to the angle block.
    """
    lib = dict(cfg["library"])
    if full_state and lib.get("trig", "none") != "none" and lib.get("trig_coordinates") is None:
        lib["trig_coordinates"] = "delta"
    blocks = {"delta": list(range(d // 2)), "omega": list(range(d // 2, d))}
    for key in ("trig_coordinates", "poly_coordinates"):
        if isinstance(lib.get(key), str):
            if not full_state or lib[key] not in blocks:
                raise ConfigError(f"library.{key}={lib[key]!r} needs full-state mode and "
                                  "'delta' or 'omega'")
            lib[key] = blocks[lib[key]]
    try:
        return LibrarySpec.from_dict(lib)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"library: {exc}") from exc


def regression_config(cfg) -> RegressionConfig:
    rc = cfg["regression"]
    try:
        return RegressionConfig(rc["lambda"], int(rc["max_iters"]), bool(rc["normalize_columns"]),
                                rc["rank_tolerance"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"regression: {exc}") from exc


def _out(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _update_timing(out: Path, **vals):
    path = out / TIMING_FILE
    doc = json.loads(path.read_text()) if path.exists() else {}
    doc.update(vals)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _read_timing(out: Path) -> dict:
    path = out / TIMING_FILE
    return json.loads(path.read_text()) if path.exists() else {}


def find_equilibrium(net: EffectiveNetwork, guess=None) -> np.ndarray:
    """Angles with zero net power at every generator, pinned to mean zero."""
    guess = np.zeros(net.n_g) if guess is None else np.asarray(guess, dtype=float)

    def resid(delta):
        return net.F - net.coupling_power(delta)

    sol = optimize.least_squares(resid, guess, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    # the field only sees angle differences, so the common offset is free
    return sol.x - sol.x.mean()


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def cmd_gen(cfg) -> dict:
    """Write ``network.json`` and ``equilibrium.csv``."""
    out = _out(cfg)
    src = cfg["network"]
    if src.get("file"):
        net = load_network(src["file"])
        delta_eq = find_equilibrium(net)
    else:
        syn = src["synthetic"]
        try:
            ranges = ParameterRanges(**{
                k: (tuple(v) if isinstance(v, list) else v) for k, v in syn.get("ranges", {}).items()
            })
            net, delta_eq = generate_synthetic(
                int(syn["n_g"]), syn["topology"], syn["seed"], ranges, float(syn["density"]),
                return_equilibrium=True,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"network.synthetic: {exc}") from exc
    save_network(net, out / NETWORK_FILE)
    np.savetxt(out / EQUILIBRIUM_FILE, delta_eq, header="delta_eq", comments="", fmt="%.17g")
    res = equilibrium_residual(net, delta_eq)
    log.info("n_g=%d equilibrium residual=%.3e", net.n_g, res)
    return {"n_g": net.n_g, "residual": res}


def _load_stage_network(out: Path):
    net = load_network(out / NETWORK_FILE)
    eq_path = out / EQUILIBRIUM_FILE
    if eq_path.exists():
        delta_eq = np.atleast_1d(np.loadtxt(eq_path, skiprows=1))
    else:
        delta_eq = find_equilibrium(net)
    return net, delta_eq


def initial_state(cfg, net, delta_eq) -> np.ndarray:
    dist = cfg["disturbance"]
    rng = np.random.default_rng(dist["seed"])
    d_angle = rng.uniform(-dist["angle"], dist["angle"], net.n_g) if dist["angle"] else np.zeros(net.n_g)
    d_freq = rng.uniform(-dist["frequency"], dist["frequency"], net.n_g) if dist["frequency"] else np.zeros(net.n_g)
    return np.concatenate([delta_eq + d_angle, d_freq])


def cmd_simulate(cfg) -> dict:
    """Integrate the full-order model and write the snapshot CSV pair."""
    out = _out(cfg)
    net, delta_eq = _load_stage_network(out)
    icfg = integration_config(cfg)
    x0 = initial_state(cfg, net, delta_eq)
    traj, fom_time = timed(integrate, stacked_field(net), x0, icfg)
    snaps = assemble(traj, net, cfg["derivatives"])
    noise = cfg["noise"]
    if noise["sigma_rel"]:
        snaps = add_noise(snaps, float(noise["sigma_rel"]), noise["seed"])
    write_snapshot_csv(snaps, out / SNAPSHOT_FILE)
    _update_timing(out, fom_time_s=fom_time)
    log.info("simulated m=%d samples, %d steps in %.3fs", snaps.m, traj.n_steps, fom_time)
    return {"m": snaps.m, "fom_time_s": fom_time}


def cmd_identify(cfg) -> dict:
    """Reduce (unless ``criterion`` is ``none``), build the library and fit."""
    out = _out(cfg)
    snaps = read_snapshot_csv(out / SNAPSHOT_FILE)
    red = cfg["reduction"]
    crit = red.get("criterion", "energy")
    basis = None
    if crit == "none":
        coords, derivs, prefix = snaps.X, snaps.Xdot, "x"
    else:
        if crit == "energy":
            basis = compute_basis(snaps, energy=float(red["tau"]), center=bool(red.get("center")))
        elif crit == "rank":
            basis = compute_basis(snaps, rank=int(red["r"]), center=bool(red.get("center")))
        else:
            raise ConfigError(f"reduction.criterion must be energy, rank or none; got {crit!r}")
        lat = project(snaps, basis)
        coords, derivs, prefix = lat.Z, lat.Zdot, "z"
        write_spectrum_csv(basis, out / SPECTRUM_FILE)

    spec = library_spec(cfg, coords.shape[0], full_state=basis is None)
    lib = build(coords, spec, prefix, memory_budget=int(cfg["memory_budget_bytes"]))
    rcfg = regression_config(cfg)
    model = fit(lib, derivs.T, rcfg, basis=basis, var_prefix=prefix)
    save_model(model, out / MODEL_FILE, BASIS_FILE, SPECTRUM_FILE)
    info = {
        "r": None if basis is None else basis.r,
        "lambda": rcfg.lam,
        "library_size": lib.n_terms,
        "active_terms": int(np.count_nonzero(model.Xi)),
    }
    if basis is None and (out / NETWORK_FILE).exists():
        est = estimate_HD(model, load_network(out / NETWORK_FILE))
        (out / HD_FILE).write_text(json.dumps(est.to_dict(), indent=1) + "\n")
    log.info("identified r=%s lambda=%g library=%d active=%d", info["r"], info["lambda"],
             info["library_size"], info["active_terms"])
    return info


def cmd_predict(cfg) -> dict:
    """Integrate the identified model from the first snapshot and lift it."""
    out = _out(cfg)
    model = load_model(out / MODEL_FILE)
    times, X = read_state_csv(out / SNAPSHOT_FILE)
    icfg = integration_config(cfg)
    z0 = initial_coordinates(model, X[:, 0])
    run, rom_time = timed(simulate_model, model, z0, icfg)
    Xhat = run.full_states if model.is_latent else run.trajectory.states
    write_state_csv(out / PREDICTION_FILE, run.trajectory.times, Xhat)
    if model.is_latent:
        Z = run.trajectory.states
        header = ",".join(["t"] + [f"z_{k + 1}" for k in range(Z.shape[0])])
        np.savetxt(out / LATENT_FILE, np.column_stack([run.trajectory.times, Z.T]),
                   delimiter=",", header=header, comments="", fmt="%.17g")
    _update_timing(out, rom_time_s=rom_time)
    log.info("predicted %d samples in %.3fs", Xhat.shape[1], rom_time)
    return {"rom_time_s": rom_time}


def cmd_evaluate(cfg) -> dict:
    """Compare prediction to truth; write report and plot-ready CSVs."""
    out = _out(cfg)
    t_true, X = read_state_csv(out / SNAPSHOT_FILE)
    t_pred, Xhat = read_state_csv(out / PREDICTION_FILE)
    if X.shape != Xhat.shape or not np.allclose(t_true, t_pred, rtol=0, atol=1e-9):
        raise ValueError(f"prediction {Xhat.shape} does not match truth {X.shape}")
    model_path = out / MODEL_FILE
    r = lam = order = None
    if model_path.exists():
        doc = json.loads(model_path.read_text())
        r = doc["basis"]["r"] if doc.get("basis") else None
        lam = doc["lambda"]
        order = doc["library_spec"]["poly_order"]
    timing = _read_timing(out)
    rep = evaluate(X, Xhat, t_true, r, lam, order, timing.get("fom_time_s"), timing.get("rom_time_s"))
    (out / REPORT_FILE).write_text(rep.to_json(include_timing=False))
    ad_t, aw_t = average_series(X)
    ad_e, aw_e = average_series(Xhat)
    np.savetxt(out / AVERAGES_FILE, np.column_stack([t_true, ad_t, ad_e, aw_t, aw_e]), delimiter=",",
               header="t,avg_delta_true,avg_delta_est,avg_domega_true,avg_domega_est",
               comments="", fmt="%.17g")
    np.savetxt(out / ERRORS_FILE, np.column_stack([t_true, rep.err_delta_series, rep.err_omega_series]),
               delimiter=",", header="t,err_delta,err_omega", comments="", fmt="%.17g")
    return rep.to_dict()


STAGES = {
    "gen": cmd_gen,
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
}


def cmd_pipeline(cfg) -> dict:
    results = {}
    for name in ("gen", "simulate", "identify", "predict", "evaluate"):
        try:
            results[name] = STAGES[name](cfg)
        except Exception as exc:
            exc.stage = name
            raise
    return results


def _exit_code(exc) -> int:
    if isinstance(exc, (ConfigError, LibraryTooLarge)):
        return EXIT_CONFIG
    if isinstance(exc, (NetworkFileError, OSError, json.JSONDecodeError)):
        return EXIT_IO
    return EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lsindy", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=[*STAGES, "pipeline"])
    p.add_argument("--config", type=Path, help="JSON config file (defaults used otherwise)")
    p.add_argument("--out", type=Path, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="override every seed in the config")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config, args.seed, args.out)
        if args.command == "pipeline":
            res = cmd_pipeline(cfg)
            ev = res["evaluate"]
            summary = (f"err_delta={ev['err_delta']:.4e} err_omega={ev['err_omega']:.4e} "
                       f"fom_time_s={ev['fom_time_s']:.3f} rom_time_s={ev['rom_time_s']:.3f} "
                       f"r={ev['r']}")
        else:
            res = STAGES[args.command](cfg)
            summary = " ".join(f"{k}={v}" for k, v in res.items() if not isinstance(v, dict))
    except (ConfigError, LibraryTooLarge, NetworkFileError, OSError, json.JSONDecodeError,
            IntegrationError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        stage = getattr(exc, "stage", args.command)
        print(f"lsindy {stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    if not args.quiet:
        print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
