"""Grid-function I/O: CSV serialization and JSON generator descriptors."""
from __future__ import annotations

import numpy as np

from .grid import Grid, GridFunction

# 17 significant digits round-trips IEEE doubles exactly
FLOAT_FMT = "%.16e"


def write_function_csv(f: GridFunction, path) -> None:
    """One value per line (real or 're,im'), header carrying the grid spec."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# oscbench grid n={f.grid.n} L={f.grid.L} s={f.grid.s}\n")
        flat = f.values.ravel()
        if f.is_complex:
            for v in flat:
                fh.write(f"{FLOAT_FMT % v.real},{FLOAT_FMT % v.imag}\n")
        else:
            for v in flat:
                fh.write(f"{FLOAT_FMT % v}\n")


def read_function_csv(path) -> GridFunction:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# oscbench grid"):
            raise ValueError(f"{path}: missing grid header")
        fields = dict(tok.split("=") for tok in header.split() if "=" in tok)
        grid = Grid(int(fields["n"]), int(fields["L"]), int(fields["s"]))
        rows = [line.strip() for line in fh if line.strip()]
    if rows and "," in rows[0]:
        vals = np.array([complex(float(a), float(b))
                         for a, b in (r.split(",") for r in rows)])
    else:
        vals = np.array([float(r) for r in rows])
    return GridFunction(grid, vals.reshape(grid.shape))


def grid_from_descriptor(desc: dict) -> Grid:
    return Grid(int(desc["n"]), int(desc["L"]), int(desc["s"]))


def _radius(grid, pts, center):
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if grid.n == 1:
        return np.abs(pts[:, 0] - c[0])
    return np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])


def make_function(grid: Grid, desc: dict) -> GridFunction:
    """Build a grid function from an analytic generator descriptor.

    Supported names: constant, linear, indicator, bump, log_abs, power_weight,
    lacunary_sum, sum (list of parts), complex (real/imag parts).
    """
    name = desc.get("name")
    params = desc.get("params", {})
    pts = grid.coords
    if name == "constant":
        vals = np.full(grid.size, float(params.get("value", 1.0)))
    elif name == "linear":
        slope = np.atleast_1d(np.asarray(params.get("slope", [1.0] * grid.n), dtype=float))
        vals = pts @ slope + float(params.get("intercept", 0.0))
    elif name == "indicator":
        lo = np.atleast_1d(np.asarray(params["lower"], dtype=float))
        hi = np.atleast_1d(np.asarray(params["upper"], dtype=float))
        inside = np.ones(grid.size, dtype=bool)
        for d in range(grid.n):
            inside &= (pts[:, d] > lo[d]) & (pts[:, d] < hi[d])
        vals = inside.astype(float) * float(params.get("height", 1.0))
    elif name == "bump":
        center = params.get("center", [0.0] * grid.n)
        radius = float(params.get("radius", 1.0))
        height = float(params.get("height", 1.0))
        r = _radius(grid, pts, center) / radius
        vals = np.zeros(grid.size)
        inside = r < 1.0
        vals[inside] = height * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    elif name == "log_abs":
        coeff = float(params.get("coeff", 1.0))
        floor = float(params.get("floor", 0.0))
        r = _radius(grid, pts, params.get("center", [0.0] * grid.n))
        vals = coeff * np.log(np.maximum(r, max(floor, np.finfo(float).tiny)))
    elif name == "power_weight":
        gamma = float(params["exponent"])
        r = _radius(grid, pts, params.get("center", [0.0] * grid.n))
        vals = r ** gamma
    elif name == "lacunary_sum":
        terms = int(params.get("terms", 6))
        amp = float(params.get("amplitude", 1.0))
        base = float(params.get("base_freq", 1.0))
        u = pts.sum(axis=1)
        vals = np.zeros(grid.size)
        for k in range(terms):
            vals += amp * np.cos(np.pi * base * (2.0 ** k) * u)
    elif name == "sum":
        vals = np.zeros(grid.size)
        for part in desc["parts"]:
            vals = vals + make_function(grid, part).values.ravel()
    elif name == "complex":
        re = make_function(grid, desc["real"]).values.ravel()
        im = make_function(grid, desc["imag"]).values.ravel()
        vals = re + 1j * im
    else:
        raise ValueError(f"unknown generator {name!r}")
    return GridFunction(grid, vals.reshape(grid.shape))
