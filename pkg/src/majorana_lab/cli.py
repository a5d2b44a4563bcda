"""Command-line front end.

    majorana-lab {verify,preserve,limit,cluster,geom} [--config PATH] [--out DIR]
                 [--seed N] [--mass M] [--tol X] [--sabotage {none,phase}]

Exit codes: 0 pass, 1 invariant failure, 2 usage/config error,
3 numerical indeterminacy.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import scaling_lab as scaling, verify
from .one_particle import DoubleCone, GaussianPolynomial, QuasifreeModel, inner
from .quadrature import NonConvergence, QuadraturePolicy
from .spinor_core import (
    ZERO, FourVector, gamma_table, small_boost_violation, small_boost_witness, sample_small_boosts,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INDETERMINATE = 0, 1, 2, 3
COMMANDS = ("verify", "preserve", "limit", "cluster", "geom")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "verify"
    out: str = "out"
    seed: int = 0
    mass: float = 1.0
    tol: float | None = None
    sabotage: str = "none"
    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    # preserve
    inner_radius: float = 1.0
    outer_radius: float = 1.5
    lambda_grid: list = field(default_factory=lambda: [1.0, 0.1, 0.01, 1e-3])
    nu_max: int = 8
    # limit
    flow_grid: list = field(default_factory=lambda: [0.1, 0.01, 1e-3, 1e-4])
    pairs: int = 1
    # cluster
    r: float = 1.0
    x_list: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    # geom
    radius: float = 10.0
    samples: int = 100000
    # test hook
    inject_fault: str = "none"

    def model(self) -> QuasifreeModel:
        return QuasifreeModel(self.mass, QuadraturePolicy(rel_tol=self.rel_tol, abs_tol=self.abs_tol))


_LIST_KEYS = {"lambda_grid", "flow_grid", "x_list"}


def _coerce(key: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        if key in _LIST_KEYS:
            return [float(x) for x in raw.split(",") if x.strip()]
        t = types[key]
        if t in ("int",):
            return int(float(raw))
        if t in ("float", "float | None"):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def read_config(path: str | None) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = _coerce(k, v)
    return out


def _validate(cfg: RunConfig) -> None:
    if cfg.mass < 0:
        raise ConfigError("mass must be non-negative")
    if cfg.sabotage not in ("none", "phase"):
        raise ConfigError("sabotage must be none or phase")
    if cfg.command == "preserve":
        if len(cfg.lambda_grid) < 2:
            raise ConfigError("lambda_grid needs at least two points")
        if not cfg.outer_radius > cfg.inner_radius > 0:
            raise ConfigError("need 0 < inner_radius < outer_radius")
        if cfg.nu_max < 3:
            raise ConfigError("nu_max must be at least 3")
    if cfg.command == "limit" and len(cfg.flow_grid) < 4:
        raise ConfigError("flow_grid needs at least four points")
    if cfg.inject_fault not in ("none", "gamma_table"):
        raise ConfigError("inject_fault must be none or gamma_table")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------- commands

def cmd_verify(cfg: RunConfig, out: Path) -> int:
    g = gamma_table()
    if cfg.inject_fault == "gamma_table":
        g[2] = 1j * g[2]  # squares to +1: breaks the Clifford relations
    results = verify.run_suites(g, cfg.seed)
    ok = all(r["passed"] for r in results)
    _write_json(out / "verify_report.json", {"suites": results, "passed": ok, "seed": cfg.seed})
    for r in results:
        if not r["passed"]:
            print(f"FAILED suite {r['suite']}: {r['detail']} (deviation {r['deviation']:.3e})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_preserve(cfg: RunConfig, out: Path) -> int:
    model = cfg.model()
    seq = scaling.DeltaSequence()
    rep = scaling.preservance_report(
        DoubleCone(ZERO, cfg.inner_radius), DoubleCone(ZERO, cfg.outer_radius), seq,
        cfg.lambda_grid, model, nus=range(1, cfg.nu_max + 1), sabotage=cfg.sabotage,
        deficit_tol=cfg.tol if cfg.tol is not None else 1e-2)
    rows = [[c.nu, c.lam, c.delta, c.delta_plus, c.delta_minus, c.error, int(c.support_ok)]
            for c in sorted(rep.cells, key=lambda c: (c.nu, -c.lam))]
    _write_csv(out / "preserve.csv",
               ["nu [index]", "lambda [1]", "delta [1]", "delta_field [1]", "delta_adjoint [1]",
                "error [1]", "support_inside [bool]"], rows)
    d = rep.to_dict()
    d["quadrature_policy"] = asdict(model.policy)
    d["sabotage"] = cfg.sabotage
    _write_json(out / "preserve.json", d)
    print(f"preservance verdict: {rep.verdict}")
    return {"PASS": EXIT_OK, "FAIL": EXIT_FAIL}.get(rep.verdict, EXIT_INDETERMINATE)


def random_unit_gaussian(rng: np.random.Generator, model: QuasifreeModel) -> GaussianPolynomial:
    """Random Gaussian test function with unit norm at the model's mass."""
    sigma = rng.uniform(0.3, 1.0)
    u = rng.normal(size=4) + 1j * rng.normal(size=4)
    c = FourVector(*rng.uniform(-0.5, 0.5, 4))
    f = GaussianPolynomial(sigma, u, c)
    return GaussianPolynomial(sigma, u / math.sqrt(inner(f, f, model).real), c)


def cmd_limit(cfg: RunConfig, out: Path) -> int:
    model = cfg.model()
    rng = np.random.default_rng(cfg.seed)
    tol = cfg.tol if cfg.tol is not None else 1e-4
    rows, summary, ok = [], [], True
    for k in range(cfg.pairs):
        f, g = random_unit_gaussian(rng, model), random_unit_gaussian(rng, model)
        E = scaling.scaled_field(f) * scaling.scaled_field(g)
        try:
            rep = scaling.limit_flow(E, cfg.flow_grid, model)
        except scaling.ExtrapolationUnstable as exc:
            print(f"extrapolation unstable: {exc}", file=sys.stderr)
            return EXIT_INDETERMINATE
        target = model.with_mass(0.0).two_point(f, g)
        for lam, v, e in zip(rep.grid, rep.values, rep.errors):
            rows.append([k, lam, v.real, v.imag, e, target.real, target.imag])
        dev = abs(rep.extrapolated_limit - target)
        good = dev <= max(tol, 3 * rep.extrapolation_error) and abs(rep.values[-1] - target) <= tol
        ok &= good
        summary.append({"pair": k, "limit": rep.extrapolated_limit, "error": rep.extrapolation_error,
                        "power": rep.fitted_power, "massless": target, "deviation": dev, "ok": good})
    _write_csv(out / "flow.csv", ["pair [index]", "lambda [1]", "re_omega [1]", "im_omega [1]",
                                  "error [1]", "re_massless [1]", "im_massless [1]"], rows)
    _write_json(out / "flow.json", {"pairs": summary, "grid": cfg.flow_grid, "tolerance": tol})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_cluster(cfg: RunConfig, out: Path) -> int:
    if any(x <= 3 * cfg.r for x in cfg.x_list):
        print("cluster: every |x| must exceed 3r", file=sys.stderr)
        return EXIT_USAGE
    model = cfg.model()
    rng = np.random.default_rng(cfg.seed)
    sig = cfg.r / 4
    f = GaussianPolynomial(sig, rng.normal(size=4) + 1j * rng.normal(size=4))
    g = GaussianPolynomial(sig, rng.normal(size=4) + 1j * rng.normal(size=4))
    tab = scaling.cluster_bound_check((f, g), (f, g), cfg.x_list, model)
    rows = [[r.x, r.lhs, r.lhs_error, r.envelope, r.bound, int(r.holds)] for r in tab.rows]
    _write_csv(out / "cluster.csv", ["x [length]", "lhs [1]", "lhs_error [1]", "envelope [1]",
                                     "bound [1]", "holds [bool]"], rows)
    _write_json(out / "cluster.json", {"c_fit": tab.c_fit, "decay_exponent": tab.decay_exponent,
                                       "mass": tab.mass, "r": tab.r, "flags": tab.flags})
    return EXIT_OK if all(r.holds for r in tab.rows) else EXIT_FAIL


def cmd_geom(cfg: RunConfig, out: Path) -> int:
    delta, check = small_boost_witness(cfg.mass, cfg.radius)
    rng = np.random.default_rng(cfg.seed)
    p, L = sample_small_boosts(cfg.mass, cfg.radius, cfg.samples, delta, rng)
    violations = int(np.sum(~check(p, L)))
    pv, Lv, s = small_boost_violation(cfg.mass, cfg.radius)
    constructed = not bool(check(pv[None], Lv[None])[0])
    _write_json(out / "geom.json", {"violations": violations, "delta": delta, "samples": cfg.samples,
                                    "mass": cfg.mass, "radius": cfg.radius,
                                    "constructed_violation": {"rapidity": s, "detected": constructed}})
    return EXIT_OK if violations == 0 and constructed else EXIT_FAIL


HANDLERS = {"verify": cmd_verify, "preserve": cmd_preserve, "limit": cmd_limit,
            "cluster": cmd_cluster, "geom": cmd_geom}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="majorana-lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config")
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--mass", type=float)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--sabotage", choices=("none", "phase"))
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        values = read_config(args.config)
        for k in ("out", "seed", "mass", "tol", "sabotage"):
            v = getattr(args, k)
            if v is not None:
                values[k] = v
        values["command"] = args.command
        cfg = RunConfig(**values)
        _validate(cfg)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", asdict(cfg))
    try:
        return HANDLERS[cfg.command](cfg, out)
    except scaling.SeparationTooSmall as exc:
        print(f"precondition: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, scaling.ExtrapolationUnstable) as exc:
        print(f"numerical indeterminacy: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
