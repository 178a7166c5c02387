"""Command-line surface: one JSON config per experiment, reproducible artifacts.

Flags only pick the command, config path, output directory, and worker count;
everything else lives in the config so runs are archival.  Exit codes: 0
success, 2 validation error, 3 numerical failure (parameter not findable,
domain overflow).  Artifacts embed the resolved config and tool version and
are byte-identical across reruns and worker counts.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, bounds, cmo, compactness, operators, oscillation, weights
from ._backend import backend_name
from .grid import Cube, DomainError, Grid
from .io import FLOAT_FMT, grid_from_descriptor, make_function, write_function_csv

COMMANDS = (
    "osc-report", "cmo-check", "cmo-approx", "weights", "apply", "commutate",
    "bounds-lower", "bounds-upper", "witness", "fk-report", "probe-bound",
)


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def _meta(config: dict) -> dict:
    return {
        "tool": {"name": "oscbench", "version": __version__, "backend": backend_name()},
        "config": config,
    }


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, str) else _fmt(c) for c in row) + "\n")


class _Builder:
    """Decodes the config document into library objects."""

    def __init__(self, config: dict):
        self.config = config
        self.grid = grid_from_descriptor(config["grid"])
        self._validate()

    def _validate(self):
        c = self.config
        lam = c.get("lam")
        if lam is not None and not 0.0 < lam < 1.0:
            raise ValueError(f"lam must lie in (0,1), got {lam}")
        p, q = c.get("p"), c.get("q")
        alpha = c.get("alpha", c.get("kernel", {}).get("alpha"))
        if p is not None and q is not None and alpha is not None:
            if abs(1.0 / q - (1.0 / p - alpha / self.grid.n)) > 1e-12:
                raise ValueError("exponent relation 1/q = 1/p - alpha/n violated")

    def function(self, key="function"):
        return make_function(self.grid, self.config[key])

    def symbol(self, key="symbol"):
        return make_function(self.grid, self.config[key])

    def symbols(self):
        return [make_function(self.grid, d) for d in self.config["symbols"]]

    def weight(self):
        fn = make_function(self.grid, self.config["weight"])
        return weights.Weight(fn)

    def kernel(self):
        return operators.kernel_from_descriptor(self.config["kernel"], self.grid.n)

    def family(self):
        f = self.config["family"]
        return oscillation.CubeFamily(self.grid, int(f["k_min"]), int(f["k_max"]),
                                      bool(f.get("translates", True)))

    def cube(self, desc) -> Cube:
        return Cube.from_bounds(self.grid, desc["lower"], float(desc["side"]))

    def pq(self):
        return float(self.config["p"]), float(self.config["q"])

    def lam(self, default=0.5):
        return float(self.config.get("lam", default))

    def params(self) -> dict:
        return self.config.get("params", {})


def _cmd_osc_report(b: _Builder, out: Path) -> None:
    rep = oscillation.build_report(b.function(), b.family(), b.lam())
    payload = _meta(b.config)
    payload["report"] = rep.to_dict()
    _write_json(out / "osc_report.json", payload)
    rows = []
    for r in rep.records:
        rows.append([
            "|".join(map(str, r.cube_key)), r.mean_osc, r.inf_mean_osc,
            r.local if r.local is not None else "",
            r.local_inf_real if r.local_inf_real is not None else "",
            r.local_inf,
            r.median_lo if r.median_lo is not None else "",
            r.median_hi if r.median_hi is not None else "",
        ])
    _write_csv(out / "osc_report.csv",
               ["cube", "mean_osc", "inf_mean_osc", "local", "local_inf_real",
                "local_inf", "median_lo", "median_hi"], rows)


def _cmd_cmo_check(b: _Builder, out: Path) -> None:
    params = b.params()
    prof = cmo.limit_profile(b.function(), b.family(),
                             kind=params.get("kind", "local"), lam=b.lam(0.25))
    verdict = cmo.cmo_check(prof, params["thresholds"])
    payload = _meta(b.config)
    payload["profile"] = prof.to_dict()
    payload["verdict"] = verdict
    _write_json(out / "cmo_check.json", payload)
    _write_csv(out / "cmo_scale_curve.csv", ["side", "sup_osc"],
               zip(prof.scale_sides, prof.scale_sup))
    _write_csv(out / "cmo_far_curve.csv", ["d", "sup_osc"],
               zip(prof.far_d, prof.far_sup))


def _cmd_cmo_approx(b: _Builder, out: Path) -> None:
    params = b.params()
    res = cmo.build_approximant(b.function(), float(params["eps"]), b.lam(0.25),
                                b.family())
    payload = _meta(b.config)
    payload["parameters"] = res.params_dict()
    payload["certificate"] = res.certificate
    _write_json(out / "cmo_approx.json", payload)
    write_function_csv(res.step_fn, out / "step_fn.csv")
    write_function_csv(res.smooth_fn, out / "smooth_fn.csv")


def _cmd_weights(b: _Builder, out: Path) -> None:
    w = b.weight()
    fam = b.family()
    p, q = b.pq()
    ap = weights.ap_constant(w, p, fam)
    apq = weights.apq_constant(w, p, q, fam)
    ainf = weights.ainf_constant(w, fam)
    sigma = weights.dual_weight(w, p)
    ainf_dual = weights.ainf_constant(sigma, fam)
    rh = weights.reverse_holder_check(w, fam)
    payload = _meta(b.config)
    payload["constants"] = {
        "ap": ap.value, "ap_root": ap.root,
        "apq": apq.value, "apq_root": apq.root,
        "ainf": ainf.value,
        "ainf_dual": ainf_dual.value,
        "pair_ainf": max(ainf.value, ainf_dual.value),
        "reverse_holder_eps": rh["eps"],
        "reverse_holder_ratio": rh["ratio"],
    }
    _write_json(out / "weights.json", payload)
    _write_csv(out / "weights.csv", ["constant", "value"],
               [[k, v] for k, v in sorted(payload["constants"].items())])


def _cmd_apply(b: _Builder, out: Path) -> None:
    img = operators.apply(b.kernel(), b.function())
    payload = _meta(b.config)
    _write_json(out / "apply.json", payload)
    write_function_csv(img, out / "apply.csv")


def _cmd_commutate(b: _Builder, out: Path) -> None:
    comm = operators.SymbolPowerCommutator(b.kernel(), b.symbol(),
                                           int(b.config.get("m", 1)))
    img = operators.commutator(comm, b.function())
    payload = _meta(b.config)
    _write_json(out / "commutate.json", payload)
    write_function_csv(img, out / "commutate.csv")


def _cmd_bounds_lower(b: _Builder, out: Path) -> None:
    params = b.params()
    cube = b.cube(params["cube"])
    symbol = b.symbol()
    kernel = b.kernel()
    w = b.weight()
    p, q = b.pq()
    cons = bounds.construct_sets(cube, symbol, b.lam(), kernel)
    removed = None
    if "removed" in params:
        removed = b.cube(params["removed"]).cellset()
    est = bounds.lower_estimate(cons, symbol, int(b.config.get("m", 1)), kernel,
                                w, p, q, removed)
    payload = _meta(b.config)
    payload["construction"] = cons.checks()
    payload["estimate"] = est
    _write_json(out / "bounds_lower.json", payload)


def _cmd_bounds_upper(b: _Builder, out: Path) -> None:
    params = b.params()
    cube = b.cube(params["cube"])
    p, q = b.pq()
    rec = bounds.upper_profile(cube, b.symbol(), int(b.config.get("m", 1)),
                               b.kernel(), b.weight(), p, q, params["d_range"],
                               b.lam())
    payload = _meta(b.config)
    payload["profile"] = rec
    _write_json(out / "bounds_upper.json", payload)


def _cmd_witness(b: _Builder, out: Path) -> None:
    params = b.params()
    cubes = [b.cube(d) for d in params["cubes"]]
    p, q = b.pq()
    rep = bounds.witness_sequence(
        params["scenario"], cubes, b.symbol(), int(b.config.get("m", 1)),
        b.kernel(), b.weight(), p, q, lam=b.lam(),
        strict_ratios=bool(params.get("strict_ratios", False)))
    payload = _meta(b.config)
    payload["report"] = rep.to_dict()
    _write_json(out / "witness.json", payload)
    k = rep.distances.shape[0]
    _write_csv(out / "witness_distances.csv",
               ["j\\k"] + [str(i + 1) for i in range(k)],
               [[str(i + 1)] + list(rep.distances[i]) for i in range(k)])


def _cmd_fk_report(b: _Builder, out: Path) -> None:
    params = b.params()
    w = b.weight()
    p, q = b.pq()
    samples = compactness.make_samples(
        b.grid, w, p, int(params.get("samples", 8)),
        int(b.config.get("seed", 0)),
        support_radius=float(params.get("support_radius", 2.0)))
    rep = compactness.fk_report(b.symbol(), int(b.config.get("m", 1)), b.kernel(),
                                w, p, q, samples, params["n_list"],
                                params["z_list"], params.get("thresholds"))
    payload = _meta(b.config)
    payload["report"] = rep.to_dict()
    _write_json(out / "fk_report.json", payload)
    _write_csv(out / "fk_tail.csv", ["N", "value"], zip(rep.tail_n, rep.tail_values))
    _write_csv(out / "fk_shift.csv", ["z_cells", "value"],
               zip(rep.shift_cells, rep.shift_values))


def _cmd_probe_bound(b: _Builder, out: Path) -> None:
    params = b.params()
    w = b.weight()
    p, q = b.pq()
    samples = compactness.make_samples(
        b.grid, w, p, int(params.get("samples", 8)),
        int(b.config.get("seed", 0)),
        support_radius=float(params.get("support_radius", 2.0)))
    rec = compactness.boundedness_probe(b.symbols(), b.kernel(), w, p, q,
                                        samples, b.family())
    payload = _meta(b.config)
    payload["probe"] = rec
    _write_json(out / "probe_bound.json", payload)


_DISPATCH = {
    "osc-report": _cmd_osc_report,
    "cmo-check": _cmd_cmo_check,
    "cmo-approx": _cmd_cmo_approx,
    "weights": _cmd_weights,
    "apply": _cmd_apply,
    "commutate": _cmd_commutate,
    "bounds-lower": _cmd_bounds_lower,
    "bounds-upper": _cmd_bounds_upper,
    "witness": _cmd_witness,
    "fk-report": _cmd_fk_report,
    "probe-bound": _cmd_probe_bound,
}


def run(command: str, config: dict, out_dir) -> int:
    """Library entry point mirroring the CLI; returns the exit code."""
    if command not in _DISPATCH:
        print(f"oscbench: unknown command {command!r}", file=sys.stderr)
        return 2
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        operators.set_workers(int(config.get("workers", 1)))
        builder = _Builder(config)
        _DISPATCH[command](builder, out)
    except DomainError as exc:
        print(f"oscbench: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError) as exc:
        print(f"oscbench: invalid config: {exc!r}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oscbench",
        description="oscillation / weight / commutator experiments from a JSON config")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the experiment JSON")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="override the config worker count")
    args = parser.parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"oscbench: cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.workers is not None:
        config["workers"] = args.workers
    return run(args.command, config, args.out)


if __name__ == "__main__":
    sys.exit(main())
