"""Command-line entry point: ``app stationary|spectrum|simulate|particles --config <path>``.

Every subcommand reads one JSON config, calls the library and writes its
artifacts into the output directory.  Exit codes: 0 ok, 2 no partially
locked state, 3 inconsistent K_Theta, 4 diverged, 5 polar projection
breakdown, 64 config error, 66 missing input.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .errors import (ConfigurationError, Diverged, InconsistentKTheta, NoPartiallyLockedState,
                     PolarCoordinatesBreakdown, ProjectionFailed)
from .nonlinear_sim import (PerturbationRecipe, SimulationConfig, fit_decay, run, run_metadata)
from .particle import mean_field_order_parameter, particle_eta, sample_from_stationary, simulate
from .spectral_core import FieldGrid, NormSpec, Weight, tail_ratio
from .stationary import StationaryState, VelocityDistribution, stationary_state
from .transport import AlphaCoefficients, AlphaFunctional
from .volterra import analyze_spectrum

log = logging.getLogger("kuramoto_landau")

EXIT_OK, EXIT_NO_STATE, EXIT_KTHETA, EXIT_DIVERGED, EXIT_PROJECTION = 0, 2, 3, 4, 5
EXIT_CONFIG, EXIT_NO_INPUT = 64, 66

STATE_FILE = "state.json"
SPLIT_FILE = "resolvent_split.json"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "g": _obj({"kind": {"enum": ["gaussian", "lorentzian", "uniform", "tabulated"]},
               "scale": _pos,
               "nodes": {"type": "array", "items": _num},
               "values": {"type": "array", "items": _num}}, ["kind"]),
    "K": _pos,
    "r_stat": {"type": ["number", "null"]},
    "grid": _obj({"ell_max": {"type": "integer", "minimum": 2}, "xi_max": _pos, "d_xi": _pos}),
    "out": {"type": "string"},
    "spectrum": _obj({"T": _pos, "dt": _pos, "b": _num, "tol": _pos,
                      "sigma_max": _opt_pos, "omega_max": _opt_pos,
                      "double_horizon": {"type": "boolean"}}),
    "alpha": _obj({"T_alpha": {"type": "number", "minimum": 10}, "dt_alpha": _opt_pos}),
    "simulate": _obj({
        "T": _pos, "dt": _pos, "b": _num, "b_d": {"type": ["number", "null"]},
        "n_diag": {"type": "integer", "minimum": 1},
        "beta_every": {"type": ["integer", "null"], "minimum": 1},
        "perturbation": _obj({"kind": {"enum": ["rotation", "phase_shift", "power_law"]},
                              "amplitude": _num, "width": _pos, "decay": _pos}),
        "linear": {"type": "boolean"},
        "fit_window": {"type": ["array", "null"], "items": _num, "minItems": 2, "maxItems": 2},
        "dt_halving": {"type": "boolean"}}),
    "particles": _obj({"N": {"type": "integer", "minimum": 1},
                       "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                       "T": _pos, "dt": _pos, "antithetic": {"type": "boolean"},
                       "record_every": {"type": "integer", "minimum": 1},
                       "perturbation": _obj({"kind": {"enum": ["phase_shift"]},
                                             "amplitude": _num, "width": _pos})}),
}, ["g", "K"])

DEFAULTS = {
    "r_stat": None,
    "grid": {"ell_max": 16, "xi_max": 16.0, "d_xi": 0.1},
    "out": "out",
    "spectrum": {"T": 200.0, "dt": 0.00625, "b": 2.0, "tol": 0.02, "sigma_max": None,
                 "omega_max": None, "double_horizon": False},
    "alpha": {"T_alpha": 20.0, "dt_alpha": None},
    "simulate": {"T": 50.0, "dt": 0.00625, "b": 2.0, "b_d": None, "n_diag": 10,
                 "beta_every": None,
                 "perturbation": {"kind": "power_law", "amplitude": 1e-3, "width": 0.5,
                                  "decay": 2.75},
                 "linear": False, "fit_window": None, "dt_halving": False},
    "particles": {"N": 10000, "seeds": [0], "T": 10.0, "dt": 0.01, "antithetic": True,
                  "record_every": 1,
                  "perturbation": {"kind": "phase_shift", "amplitude": 0.3, "width": 0.5}},
}


class MissingInput(Exception):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    """Read, validate and complete a run config; raises ConfigurationError."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"config file {path} not found")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config error at {where}: {exc.message}") from exc
    return _merge(DEFAULTS, raw)


def _grid(cfg) -> FieldGrid:
    return FieldGrid(**cfg["grid"])


def _g(cfg) -> VelocityDistribution:
    d = dict(cfg["g"])
    for key in ("nodes", "values"):
        if key in d:
            d[key] = tuple(d[key])
    return VelocityDistribution(**d)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x)}")


def _load_state(out: Path) -> StationaryState:
    p = out / STATE_FILE
    if not p.exists():
        raise MissingInput(f"stationary state {p} not found; run 'stationary' first")
    return StationaryState.load(p)


def _alpha_setup(cfg, out: Path, state: StationaryState, dt: float):
    p = out / SPLIT_FILE
    if not p.exists():
        raise MissingInput(f"{p} not found; run 'spectrum' first")
    split = json.loads(p.read_text())
    a = cfg["alpha"]
    ac = AlphaCoefficients(split["c_r"], split["c_i"], a["T_alpha"], a["dt_alpha"] or dt,
                           split["K_norm"])
    alpha_fn = AlphaFunctional.for_state(state, ac)
    return ac, alpha_fn, state.with_r_theta(alpha_fn(state.rot_mode.values))


def cmd_stationary(cfg: dict, out: Path, workers: int = 1) -> dict:
    state = stationary_state(cfg["K"], _g(cfg), _grid(cfg), cfg["r_stat"])
    state.save(out / STATE_FILE)
    f = state.fstat_hat
    summary = {
        "r_stat": state.r_stat, "residual": state.residual,
        "fhat_1_0": [f.values[0, 0].real, f.values[0, 0].imag],
        "tail_max_abs": float(np.abs(f.values[:, -max(1, f.grid.n_xi // 10):]).max()),
        "tail_ratio": tail_ratio(f, NormSpec(Weight(1.0, 0.0))),
        "config": cfg,
    }
    _write_json(out / "stationary_summary.json", summary)
    log.info("r_stat = %.15g (residual %.2e)", state.r_stat, state.residual)
    return summary


def cmd_spectrum(cfg: dict, out: Path, workers: int = 1) -> dict:
    state = _load_state(out)
    s = cfg["spectrum"]

    def analyze(T):
        return analyze_spectrum(state, T, s["dt"], s["b"], s["tol"], s["sigma_max"], s["omega_max"])

    horizons = [s["T"], 2 * s["T"]] if s["double_horizon"] else [s["T"]]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(analyze, horizons))
    res = results[0]
    report = res.report.to_dict()
    report["config"] = cfg
    _write_json(out / "stability_report.json", report)
    res.kernel.to_csv(out / "kernel.csv")
    payload = {"stable": res.report.stable}
    if res.split is not None:
        res.resolvent.to_csv(out / "resolvent.csv")
        payload.update(res.split.to_dict())
        payload["resolvent_residuals"] = {k: res.resolvent.meta.get(k)
                                          for k in ("right_residual", "left_residual")}
        if len(results) > 1 and results[1].split is not None:
            K1, K2 = res.split.K_Theta, results[1].split.K_Theta
            payload["horizon_doubling_drift"] = float(np.abs(K2 - K1).max() / np.linalg.norm(K1, 2))
        payload["config"] = cfg
        _write_json(out / SPLIT_FILE, payload)
    log.info("stable=%s roots=%s", res.report.stable, report["roots"])
    return payload


def _recipe(d: dict) -> PerturbationRecipe:
    return PerturbationRecipe(**d)


def _sim_config(cfg, state, ac, dt) -> SimulationConfig:
    s = cfg["simulate"]
    return SimulationConfig(state, ac, s["T"], dt, f_init=_recipe(s["perturbation"]), b=s["b"],
                            b_d=s["b_d"], n_diag=s["n_diag"], beta_every=s["beta_every"],
                            nonlinear=not s["linear"])


def cmd_simulate(cfg: dict, out: Path, workers: int = 1) -> dict:
    state = _load_state(out)
    s = cfg["simulate"]
    ac, alpha_fn, state = _alpha_setup(cfg, out, state, s["dt"])
    config = _sim_config(cfg, state, ac, s["dt"])
    trace = run(config, alpha_fn)
    fit = fit_decay(trace, s["b"], tuple(s["fit_window"]) if s["fit_window"] else None)
    trace.to_csv(out / "trace.csv")
    meta = run_metadata(config, trace, None if fit.degenerate else fit)
    if s["dt_halving"]:
        def final_eta(dt):
            return run(_sim_config(cfg, state, ac, dt), alpha_fn).eta[-1]
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            e2, e4 = pool.map(final_eta, [s["dt"] / 2, s["dt"] / 4])
        e1 = trace.eta[-1]
        d1, d2 = abs(e1 - e2), abs(e2 - e4)
        meta["convergence"] = {"final_eta": [e1, e2, e4], "differences": [d1, d2],
                               "order": float(np.log2(d1 / d2)) if d2 > 0 and d1 > 0 else None}
    meta["config"] = cfg
    _write_json(out / "simulation.json", meta)
    log.info("fit exponent %s (predicted %.3f)", fit.exponent, 0.5 - s["b"])
    return meta


def cmd_particles(cfg: dict, out: Path, workers: int = 1) -> dict:
    state = _load_state(out)
    p = cfg["particles"]
    dt_mf = cfg["simulate"]["dt"]
    ac, alpha_fn, state = _alpha_setup(cfg, out, state, dt_mf)
    recipe = PerturbationRecipe(**p["perturbation"])
    mf = run(SimulationConfig(state, ac, p["T"], dt_mf, f_init=recipe, b=cfg["simulate"]["b"],
                              perturbation_warn=np.inf), alpha_fn)
    mf.to_csv(out / "mean_field_trace.csv")
    r_mf = mean_field_order_parameter(mf.eta, mf.theta, state.r_stat)

    def one(seed):
        e = sample_from_stationary(state, p["N"], seed, recipe.phase(), p["antithetic"])
        _, tr = simulate(e, p["T"], p["dt"], p["record_every"])
        tr.to_csv(out / f"particles_seed{seed}.csv")
        rm = np.interp(tr.t, mf.t, r_mf.real) + 1j * np.interp(tr.t, mf.t, r_mf.imag)
        th = np.interp(tr.t, mf.t, mf.theta)
        em = np.interp(tr.t, mf.t, np.abs(mf.eta))
        return {"seed": seed,
                "max_abs_eta_deviation": float(np.max(np.abs(np.abs(
                    particle_eta(tr.r, th, state.r_stat)) - em))),
                "max_order_parameter_deviation": float(np.max(np.abs(tr.r - rm)))}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(one, p["seeds"]))
    band = 5 / np.sqrt(p["N"]) + 1e-2
    report = {"band": band, "seeds": rows,
              "within_band": all(r["max_abs_eta_deviation"] <= band for r in rows),
              "config": cfg}
    _write_json(out / "particles.json", report)
    return report


COMMANDS = {"stationary": cmd_stationary, "spectrum": cmd_spectrum,
            "simulate": cmd_simulate, "particles": cmd_particles}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="app", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides config 'out')")
    ap.add_argument("--workers", type=int, default=1, help="worker threads for independent tasks")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args.workers)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except NoPartiallyLockedState as exc:
        print(f"error: no partially locked state: {exc}", file=sys.stderr)
        return EXIT_NO_STATE
    except InconsistentKTheta as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_KTHETA
    except Diverged as exc:
        print(f"error: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PolarCoordinatesBreakdown, ProjectionFailed) as exc:
        print(f"error: projection breakdown: {exc}", file=sys.stderr)
        return EXIT_PROJECTION
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
