"""Experiment runner: ``qelmptm {spreading,decode,capacity,forecast,flowmap}``.

Each run reads an optional YAML config, lets flags override it, and writes a
CSV table (with a ``# key: value`` metadata header) plus a JSON summary next
to it.  On failure a JSON error object goes to stderr and the exit code is
nonzero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .capacity import capacity_curve, relative_capacity, target_kind_for, z_readout_capacity
from .channels import parse_hamiltonian, tfim_hamiltonian
from .decodability import decodability_scores, isolatable_features
from .dynsys import (
    InputMap,
    attractor_points,
    forecast_horizon,
    make_system,
    rescale,
    train_error,
    training_trajectory,
)
from .encoding import feature_vector, scheme
from .pauli import PauliString
from .qelm import build_readout, design_matrices, fit, predict, save_model
from .readout import MultiplexPlan, effective_ptm, select_observables, spreading_profile
from .surrogate import compare_flowmaps, learned_flowmap, taylor_transform, true_flowmap

DEFAULTS = {
    "spreading": {
        "n": 3, "hamiltonian": "tfim-zzx", "observable": "ZII",
        "h": [0.0, 2.0, 11], "J": [0.0, 2.0, 11], "times": [0.5, 1.0, 2.0],
    },
    "decode": {
        "n": 3, "hamiltonian": "random:seed=0", "observables": "z+zz", "L_max": 13,
        "include_zero": False,
    },
    "capacity": {
        "n": 3, "encoding": "amp-sqrt", "observables": "zstrings", "hamiltonian": "none", "L": 1,
        "degrees": [1, 2, 3, 4, 5, 6], "P_train": 20000, "P_test": 5000, "lambda": 1e-8,
        "relative": True, "delta": 0.1,
    },
    "forecast": {
        "system": "lorenz63", "alpha": 0.005, "m": [-30.0, -30.0, -5.0], "input_range": None,
        "encoding": "amp-sqrt", "observables": "all", "hamiltonian": "none", "L": 1,
        "add_squares": False, "increments": False, "lambda": 1e-8, "P": 10000, "dt": 0.01, "starts": 10,
        "max_steps": 2000, "model_file": True,
    },
    "flowmap": {
        "system": "lorenz63", "alpha": 0.005, "m": [-30.0, -30.0, -5.0], "input_range": None,
        "encoding": "amp-sqrt", "observables": "all", "hamiltonian": "none", "L": 1,
        "lambda": 1e-8, "P": 10000, "dt": 0.01, "order": 3, "lie_order": 4, "method": "analytic",
    },
}


class ConfigError(ValueError):
    pass


def load_config(command: str, path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file (top level or a section named after the command), then flags."""
    cfg = dict(DEFAULTS[command])
    if path:
        doc = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        doc = doc.get(command, doc)
        unknown = set(doc) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(doc)
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def child_seed(root: int, name: str) -> int:
    """Independent, reproducible seed for a named component."""
    ss = np.random.SeedSequence([root, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


def write_table(path: Path, header, rows, meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _hamiltonian(token: str, n: int):
    return None if token in (None, "none") else parse_hamiltonian(token, n)


def _plan(L) -> MultiplexPlan:
    return MultiplexPlan.default(int(L))


def _pmap(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_spreading(cfg: dict, seed: int, threads: int = 1) -> dict:
    """Pauli weight average over an (h, J) grid at each time: one table per time."""
    n = int(cfg["n"])
    k = PauliString.parse(cfg["observable"]).index
    hs = np.linspace(*cfg["h"][:2], int(cfg["h"][2]))
    Js = np.linspace(*cfg["J"][:2], int(cfg["J"][2]))
    variant = cfg["hamiltonian"].removeprefix("tfim-")
    points = [(h, J) for h in hs for J in Js]

    def profile(p):
        h, J = p
        return spreading_profile(tfim_hamiltonian(variant, n, J=J, h=h), k, cfg["times"])

    profiles = _pmap(profile, points, threads)
    tables = {}
    for ti, t in enumerate(cfg["times"]):
        rows = [[float(h), float(J), float(pr.nu_bar[ti]), *map(float, pr.sectors[ti])]
                for (h, J), pr in zip(points, profiles)]
        header = ["h", "J", "nu_bar"] + [f"sector_{w}" for w in range(n + 1)]
        tables[f"t={t:g}"] = (header, rows)
    return {"tables": tables, "summary": {"times": list(cfg["times"]), "grid_points": len(points)}}


def run_decodability(cfg: dict, seed: int, threads: int = 1) -> dict:
    """Sector-mean decodability, rank and isolatable counts versus multiplexing length."""
    n = int(cfg["n"])
    H = parse_hamiltonian(cfg["hamiltonian"], n)
    obs = select_observables(cfg["observables"], n)
    Ls = list(range(1, int(cfg["L_max"]) + 1))

    def point(L):
        R = effective_ptm(H, obs, MultiplexPlan.default(L, cfg["include_zero"])).entries
        rep = decodability_scores(R)
        iso = isolatable_features(R)
        return [L, R.shape[0], rep.rank, rep.rank / 4**n, float(rep.scores.sum()), iso.count,
                *map(float, rep.sector_means)]

    rows = _pmap(point, Ls, threads)
    header = ["L", "M_tot", "rank", "rank_over_d2", "sum_gamma2", "isolatable"] + [
        f"gamma2_weight_{w}" for w in range(n + 1)]
    return {"tables": {"": (header, rows)},
            "summary": {"final_rank": rows[-1][2], "d2": 4**n, "max_isolatable": max(r[5] for r in rows)}}


def run_capacity(cfg: dict, seed: int, threads: int = 1) -> dict:
    n = int(cfg["n"])
    enc = scheme(cfg["encoding"])
    kind = target_kind_for(enc.kind)
    H = _hamiltonian(cfg["hamiltonian"], n)
    ro = build_readout(enc, n, cfg["observables"], H, _plan(cfg["L"]) if H else None)
    check = enc.kind != "rot-y"  # Gaussian inputs fall outside the nominal rotation interval
    s = child_seed(seed, "capacity")
    kw = dict(degrees=cfg["degrees"], P_train=int(cfg["P_train"]), P_test=int(cfg["P_test"]),
              lam=float(cfg["lambda"]), seed=s)
    curve = capacity_curve(lambda U: feature_vector(enc, U, check=check) @ ro.R.T, n, kind, **kw)
    if cfg["relative"]:
        full = capacity_curve(lambda U: feature_vector(enc, U, check=check), n, kind, **kw)
        curve = relative_capacity(curve, full, float(cfg["delta"]))
    header = curve.header + ["R2_z_closed_form"]
    rows = [row + [z_readout_capacity(n, int(row[0]))] for row in curve.rows()]
    return {"tables": {"": (header, rows)},
            "summary": {"integrated": curve.integrated, "M": ro.R.shape[0], "target_distribution": kind}}


def _system(cfg: dict, seed: int):
    sys_ = make_system(cfg["system"])
    if cfg.get("input_range"):
        lo, hi = cfg["input_range"]
        raw = training_trajectory(sys_, int(cfg["P"]), float(cfg["dt"]), seed=child_seed(seed, "input_range"))
        return InputMap.fit(raw.states, lo, hi).system(sys_)
    if cfg.get("alpha") is not None:
        return rescale(sys_, cfg["alpha"], cfg["m"])
    return sys_


def _train(cfg: dict, seed: int, L=None, add_squares=False, increments=False):
    """Fit a one-step model; with ``increments`` the targets are u_{t+1} - u_t."""
    sys_ = _system(cfg, seed)
    n = 3
    H = _hamiltonian(cfg["hamiltonian"], n)
    L = cfg["L"] if L is None else L
    ro = build_readout(cfg["encoding"], n, cfg["observables"], H, _plan(L) if H else None, add_squares)
    tr = training_trajectory(sys_, int(cfg["P"]), float(cfg["dt"]), seed=child_seed(seed, "train"))
    X, Y = tr.states[:-1], tr.states[1:]
    model = fit(ro, X, Y - X if increments else Y, float(cfg["lambda"]),
                {"system": sys_.descriptor, "increments": increments, **ro.describe()})
    return sys_, ro, tr, model


def run_forecast(cfg: dict, seed: int, threads: int = 1) -> dict:
    """One-step training error and forecast horizons; a list-valued ``L`` sweeps multiplexing."""
    Ls = cfg["L"] if isinstance(cfg["L"], list) else [cfg["L"]]

    def point(L):
        inc = bool(cfg["increments"])
        sys_, ro, tr, model = _train(cfg, seed, L, bool(cfg["add_squares"]), inc)
        f = (lambda U: U + predict(model, U)) if inc else (lambda U: predict(model, U))
        eps = train_error(f, tr)
        starts = attractor_points(sys_, int(cfg["starts"]), child_seed(seed, "starts"), float(cfg["dt"]))
        res = forecast_horizon(sys_, f, starts, tr.spread(), float(cfg["dt"]), int(cfg["max_steps"]),
                               ro.encoding.domain)
        dm = design_matrices(ro, tr.states[:-1])
        q = 3**ro.n
        return model, eps, res, dm.rank_G / q

    results = _pmap(point, Ls, threads)
    rows, summary = [], {"points": []}
    for L, (model, eps, res, rg) in zip(Ls, results):
        for i in range(len(res.horizons)):
            rows.append([L, i, float(res.horizons[i]), int(res.steps[i]), bool(res.censored[i]),
                         int(res.clamped[i]), eps, rg])
        summary["points"].append({"L": L, "eps_train": eps, "T_fch_mean": res.mean, "T_fch_std": res.std,
                                  "censored": int(res.censored.sum()), "clamped": int(res.clamped.sum()),
                                  "rank_G_over_q": rg})
    header = ["L", "start", "T_fch_over_TL", "steps", "censored", "clamped", "eps_train", "rank_G_over_q"]
    out = {"tables": {"": (header, rows)}, "summary": summary}
    if cfg["model_file"]:
        out["model"] = results[-1][0]
    return out


def run_flowmap(cfg: dict, seed: int, threads: int = 1) -> dict:
    sys_, ro, tr, model = _train(cfg, seed)
    ub = tr.states.mean(axis=0)
    T = taylor_transform(ro.encoding, ub, int(cfg["order"]), cfg["method"])
    dt = float(cfg["dt"])
    learned = learned_flowmap(model, T, dt)
    truth = true_flowmap(sys_, dt, int(cfg["lie_order"]), int(cfg["order"]), about=ub)
    cmp = compare_flowmaps(learned, truth)
    summary = {"rank_K": T.rank, "N": T.N, "operating_point": ub.tolist(),
               "by_degree": {str(k): {"mean_abs_err": a, "max_rel_err": r} for k, (a, r) in cmp.by_degree.items()},
               "note": cmp.note}
    return {"tables": {"": (cmp.header, list(cmp.rows()))}, "summary": summary}


RUNNERS = {
    "spreading": run_spreading,
    "decode": run_decodability,
    "capacity": run_capacity,
    "forecast": run_forecast,
    "flowmap": run_flowmap,
}


def _table_path(out: Path, suffix: str) -> Path:
    return out if not suffix else out.with_name(f"{out.stem}_{suffix}{out.suffix}")


def run(command: str, cfg: dict, seed: int, out, threads: int = 1) -> dict:
    out = Path(out)
    if out.suffix != ".csv":
        out = out / f"{command}.csv"
    result = RUNNERS[command](cfg, seed, threads)
    meta = {"command": command, "version": __version__, "seed": seed, "config_hash": config_hash(cfg)}
    files = []
    for suffix, (header, rows) in result["tables"].items():
        p = _table_path(out, suffix)
        write_table(p, header, rows, meta)
        files.append(str(p))
    if "model" in result:
        mp = out.with_suffix(".model.json")
        save_model(result["model"], mp)
        files.append(str(mp))
    summary = {**meta, "config": cfg, "files": files, **result["summary"]}
    out.with_suffix(".json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=str) + "\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qelmptm", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(RUNNERS))
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results", help="CSV path or output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (value parsed as YAML)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip()] = yaml.safe_load(val)
        cfg = load_config(args.command, args.config, overrides)
        unknown = set(cfg) - set(DEFAULTS[args.command])
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        summary = run(args.command, cfg, args.seed, args.out, max(1, args.threads))
    except Exception as exc:  # reported as JSON for machine consumers
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigError, ValueError, KeyError, OSError)) else 1
    print(json.dumps({"files": summary["files"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
