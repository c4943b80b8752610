"""Batch runner: ``qhdcascade --experiment toy-cascade --out runs/x``.

Config files are INI text:

    [run]
    experiment = toy-cascade
    [sim]
    q = 16
    seed = 3
    [toy-cascade]
    nu = 1e-4

Precedence, lowest first: built-in defaults, config file, environment
(QHDCASCADE_EXPERIMENT, QHDCASCADE_OUT, QHDCASCADE_<SIMFIELD> such as
QHDCASCADE_Q), command-line flags.  Exit status 0 when every assertion
passes, 2 when one fails, 3 on a bad configuration.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import SimConfig
from .errors import CascadeError, ConfigError, ExperimentFailed, SearchFailed

ENV_PREFIX = "QHDCASCADE_"

KNOBS: dict[str, dict] = {
    "lambda-gen": {"radius": 300, "grow": False, "shell": False, "restarts": 400},
    "verify": {"radius": 300, "grow": False, "shell": False, "restarts": 400},
    "divisor-audit": {"radius": 300, "qs": (8, 16, 32), "kappa_min": 0.5},
    "toy-cascade": {"nu": 1e-3, "source": 3, "target": 0, "fraction": 0.7},
    "nls-run": {"K": 4, "amp": 0.05, "T": 0.1, "equation": "rescaled", "samples": 10, "pad": 4},
    "approximation-sweep": {"qs": (8, 16, 32), "lams": (160.0, 320.0), "horizon": 1e-2,
                            "max_steps": 200_000, "radius": 100, "nu": 1e-3},
    "equivalence-sweep": {"amps": (0.01, 0.05, 0.1, 0.2, 0.3), "eps_list": (1.0, 0.5, 0.25),
                          "vacuum_amps": (0.6, 0.8, 0.9, 0.95), "window": 2.0},
    "growth-run": {"nu": 1e-3, "source": 1, "target": 4, "radius": 100, "weight_target": 5.0,
                   "restarts": 60, "min_ratio": 2.0},
}
EXPERIMENTS = tuple(KNOBS)


@dataclass
class ExperimentSpec:
    name: str = "toy-cascade"
    sim: SimConfig = field(default_factory=SimConfig)
    out: str = "runs/default"
    knobs: dict = field(default_factory=dict)
    threads: int = 1

    def to_dict(self) -> dict:
        return {"experiment": self.name, "sim": asdict(self.sim), "out": self.out,
                "knobs": {k: list(v) if isinstance(v, tuple) else v for k, v in self.knobs.items()},
                "threads": self.threads}

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# -- parsing -----------------------------------------------------------------------

def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.split("=")[0].strip() == key:
            return i
    return None


def _coerce(name: str, raw: str, like):
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            elem = type(like[0]) if like else float
            return tuple(elem(x) for x in raw.replace(" ", "").split(",") if x)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {type(like).__name__}") from None


_SIM_DEFAULTS = asdict(SimConfig())
_SIM_KEYS = {k.lower(): k for k in _SIM_DEFAULTS}


def _sim_value(key: str, raw: str):
    return _coerce(key, raw, _SIM_DEFAULTS[key])


def parse_config(text: str, env: dict | None = None, overrides: dict | None = None) -> ExperimentSpec:
    """Validated ExperimentSpec from config text, then environment, then explicit overrides."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    name, out, threads = "toy-cascade", "runs/default", 1
    sim: dict = {}
    knob_text: dict[str, dict] = {}
    for sec in cp.sections():
        items = dict(cp.items(sec))
        if sec == "run":
            for k, v in items.items():
                if k == "experiment":
                    name = v.strip()
                elif k == "out":
                    out = v.strip()
                elif k == "threads":
                    threads = _coerce(k, v, 1)
                else:
                    raise ConfigError(f"line {_line_of(text, k)}: unknown key {k!r} in [run]")
        elif sec == "sim":
            for k, v in items.items():
                if k not in _SIM_DEFAULTS:
                    raise ConfigError(f"line {_line_of(text, k)}: unknown key {k!r} in [sim]")
                sim[k] = _sim_value(k, v)
        elif sec in KNOBS:
            knob_text[sec] = items
        else:
            raise ConfigError(f"unknown section [{sec}]")
    env = os.environ if env is None else env
    for k, v in env.items():
        if not k.startswith(ENV_PREFIX):
            continue
        key = k[len(ENV_PREFIX):].lower()
        if key == "experiment":
            name = v
        elif key == "out":
            out = v
        elif key == "threads":
            threads = _coerce(k, v, 1)
        elif key in _SIM_KEYS:
            sim[_SIM_KEYS[key]] = _sim_value(_SIM_KEYS[key], v)
        else:
            raise ConfigError(f"unknown environment override {k}")
    overrides = overrides or {}
    name = overrides.get("experiment") or name
    out = overrides.get("out") or out
    if overrides.get("threads") is not None:
        threads = overrides["threads"]
    if overrides.get("seed") is not None:
        sim["seed"] = overrides["seed"]
    if name not in KNOBS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    for sec in knob_text:
        if sec != name:
            raise ConfigError(f"section [{sec}] does not match experiment {name!r}")
    knobs = dict(KNOBS[name])
    for k, v in knob_text.get(name, {}).items():
        if k not in knobs:
            raise ConfigError(f"line {_line_of(text, k)}: unknown key {k!r} in [{name}]")
        knobs[k] = _coerce(k, v, knobs[k])
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return ExperimentSpec(name, SimConfig(**sim), out, knobs, threads)


# -- artifacts ----------------------------------------------------------------------

def _versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("scipy", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


class Artifacts:
    def __init__(self, out: str):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, body: str):
        (self.dir / name).write_text(body)

    def json(self, name: str, obj):
        self.text(name, json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
        self.text(name, buf.getvalue())


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, tuple):
        return list(x)
    return str(x)


# -- experiments --------------------------------------------------------------------

def _lambda(spec: ExperimentSpec):
    from .lambdaset import build_lambda
    k, c = spec.knobs, spec.sim
    return build_lambda(c.N, c.G, q=c.q, seed=c.seed, radius=k["radius"], grow=k.get("grow", False),
                        shell=k.get("shell", False), max_restarts=k.get("restarts", 400))


def _exp_lambda_gen(spec, art):
    from .lambdaset import verify_lambda
    lam = _lambda(spec)
    art.text("lambda.json", lam.to_json() + "\n")
    rep = verify_lambda(lam)
    return {"constructed": True, "all_properties": rep.all_pass}


def _exp_verify(spec, art):
    from .lambdaset import verify_lambda
    lam = _lambda(spec)
    rep = verify_lambda(lam)
    art.text("lambda.json", lam.to_json() + "\n")
    art.text("verify.json", rep.to_json() + "\n")
    checks = {p: bool(v) for p, v in rep.passed.items()}
    checks["structure"] = bool(rep.structure_ok)
    return checks


def _exp_divisors(spec, art):
    from .lambdaset import build_lambda
    from .spectra import verify_small_divisors
    c, k = spec.sim, spec.knobs
    base = build_lambda(c.N, c.G, seed=c.seed, radius=k["radius"])
    fam = {}
    checks = {}
    for q in k["qs"]:
        rep = verify_small_divisors(base.scaled(q), c.m, c.eps)
        art.text(f"divisors_q{q}.csv", rep.to_csv())
        fam[q] = rep.family_max
        checks[f"kappa3_q{q}"] = rep.kappa3 >= k["kappa_min"]
        checks[f"kappa4_q{q}"] = rep.kappa4 >= k["kappa_min"]
    qs = list(k["qs"])
    for a, b in zip(qs, qs[1:]):
        f = fam[a] / fam[b] if fam[b] else math.inf
        checks[f"family_shrink_{a}_{b}"] = 3.0 <= f <= 5.0
    art.json("family_max.json", {str(q): v for q, v in fam.items()})
    return checks


def _exp_toy(spec, art):
    from .toy import cascade_search
    c, k = spec.sim, spec.knobs
    target = k["target"] or None
    try:
        res = cascade_search(c.N, k["nu"], k["fraction"], k["source"], target, tol=min(c.tol, 1e-12))
    except SearchFailed as e:
        art.json("cascade.json", {"failed": str(e), "best": e.best})
        return {"fraction_reached": False}
    art.text("cascade.json", res.to_json() + "\n")
    art.text("trajectory.csv", res.trajectory.to_csv())
    st = res.trajectory.stats
    return {"fraction_reached": res.peak_fraction >= k["fraction"],
            "mass_conserved": st["mass_drift"] <= 1e-9,
            "energy_conserved": st["energy_drift"] <= 1e-8}


def _exp_nls(spec, art):
    from .fields import hs_norm, random_field
    from .nls import integrate_nls, sim_grid_size
    c, k = spec.sim, spec.knobs
    rng = np.random.default_rng(c.seed)
    u0 = random_field(rng, k["K"], k["amp"], c.q)
    c00 = u0.coeffs.copy()
    c00[k["K"], k["K"]] += math.sqrt(c.m)
    u0 = u0.replace(coeffs=c00)
    M = sim_grid_size(k["K"], k["pad"])
    ts, fs, log = integrate_nls(u0, k["T"], c.dt, c.eps, k["equation"],
                                max(1, int(round(k["T"] / c.dt)) // k["samples"]), M)
    art.csv("trajectory.csv", ["t", "mass", "energy", "px", "py", "hs_norm"],
            [(t, m, e, float(p[0]), float(p[1]), hs_norm(f, c.s))
             for t, m, e, p, f in zip(log.t, log.mass, log.energy, log.momentum, fs)])
    art.text("final_field.json", fs[-1].to_json() + "\n")
    d = log.drift()
    return {"mass": d["mass"] <= 1e-12, "momentum": d["momentum_abs"] <= 1e-10,
            "sublattice": fs[-1].stride == c.q}


def _exp_approx(spec, art):
    from .experiments import ApproxConfig, approximation_experiment, approximation_plan, trend_checks
    c, k = spec.sim, spec.knobs
    cfg = ApproxConfig(N=c.N, G=c.G, qs=tuple(k["qs"]), lams=tuple(k["lams"]), m=c.m, eps=c.eps,
                       nu=k["nu"], horizon=k["horizon"], seed=c.seed, radius=k["radius"],
                       max_steps=k["max_steps"])
    plan = approximation_plan(cfg)
    art.json("plan.json", plan)
    series = approximation_experiment(cfg)
    for d in series:
        art.text(f"deviation_q{d.q}_lam{d.lam:g}.csv", d.to_csv())
    tr = trend_checks(series, cfg.qs, cfg.lams)
    art.json("trends.json", tr)
    return {"non_increasing_in_q": tr["q"], "non_increasing_in_lam": tr["lam"]}


def _exp_equivalence(spec, art):
    from .errors import HypothesisViolated
    from .hydro import equivalence_report, perturbed_plane_wave
    c, k = spec.sim, spec.knobs
    rows, checks = [], {}

    def one(e):
        return [equivalence_report(perturbed_plane_wave(c.m, a), c.m, c.s, e) for a in k["amps"]]

    with ThreadPoolExecutor(spec.threads) as pool:
        reps = list(pool.map(one, k["eps_list"]))
    for e, rs in zip(k["eps_list"], reps):
        ratios = [r.ratio for r in rs]
        checks[f"window_eps{e:g}"] = max(ratios) / min(ratios) <= k["window"]
        rows += [("family", e, a, r.ratio, r.slack) for a, r in zip(k["amps"], rs)]
    vac = []
    for a in k["vacuum_amps"]:
        u = perturbed_plane_wave(c.m, a)
        try:
            equivalence_report(u, c.m, c.s, 1.0)
            flagged = False
        except HypothesisViolated:
            flagged = True
        r = equivalence_report(u, c.m, c.s, 1.0, check=False, M=513)
        vac.append(r.ratio)
        rows.append(("near-vacuum", 1.0, a, r.ratio, r.slack))
        checks[f"vacuum_flagged_a{a:g}"] = flagged
    checks["vacuum_blowup"] = all(x > y for x, y in zip(vac, vac[1:]))
    art.csv("equivalence.csv", ["family", "eps", "a", "hs_over_ms", "slack"], rows)
    return checks


def _exp_growth(spec, art):
    from .experiments import GrowthConfig, growth_run
    c, k = spec.sim, spec.knobs
    cfg = GrowthConfig(N=c.N, G=c.G, q=c.q, m=c.m, eps=c.eps, s=c.s, lam=c.lam, nu=k["nu"],
                       source=k["source"], target=k["target"], seed=c.seed, radius=k["radius"],
                       weight_target=k["weight_target"], restarts=k["restarts"])
    rep = growth_run(cfg)
    art.text("growth.json", rep.to_json() + "\n")
    return {"hs_growth": rep.hs_ratio >= k["min_ratio"], "no_vacuum": rep.min_density > 0}


RUNNERS = {"lambda-gen": _exp_lambda_gen, "verify": _exp_verify, "divisor-audit": _exp_divisors,
           "toy-cascade": _exp_toy, "nls-run": _exp_nls, "approximation-sweep": _exp_approx,
           "equivalence-sweep": _exp_equivalence, "growth-run": _exp_growth}


def run(spec: ExperimentSpec) -> int:
    art = Artifacts(spec.out)
    t0 = time.time()
    error = None
    try:
        checks = RUNNERS[spec.name](spec, art)
    except ExperimentFailed as e:
        checks, error = {"completed": False}, str(e)
    except CascadeError as e:
        checks, error = {"completed": False}, f"{type(e).__name__}: {e}"
    checks = {k: bool(v) for k, v in checks.items()}
    art.json("manifest.json", {"config_hash": spec.digest(), "seed": spec.sim.seed,
                               "versions": _versions(), "spec": spec.to_dict(),
                               "started": t0, "seconds": time.time() - t0})
    summary = {"experiment": spec.name, "passed": all(checks.values()), "assertions": checks}
    if error:
        summary["error"] = error
    art.json("summary.json", summary)
    return 0 if summary["passed"] else 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qhdcascade", description=__doc__.split("\n")[0])
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("--experiment", choices=EXPERIMENTS)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        spec = parse_config(text, overrides={"experiment": args.experiment, "out": args.out,
                                             "seed": args.seed, "threads": args.threads})
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    code = run(spec)
    print(json.dumps(json.loads((Path(spec.out) / "summary.json").read_text())))
    return code


if __name__ == "__main__":
    sys.exit(main())
