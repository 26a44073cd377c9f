"""Flat-file formats: key=value configs and manifests, and the CSV exports."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .model import Degenerate, Gamma, Mixture, ModelConfig, Nakagami, Uniform, Weibull

DEFAULTS = {
    "b": "1",
    "N": "40",
    "law.kind": "uniform",
    "law.delta": "1",
    "n0.kind": "gamma",
    "n0.params": "25,30",
    "precision_digits": "200",
}


def read_keyvalue(path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_keyvalue(path, items: dict) -> Path:
    path = Path(path)
    path.write_text("".join(f"{k}={_fmt(v)}\n" for k, v in items.items()))
    return path


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def make_law(kind: str, delta: float):
    if kind == "uniform":
        return Uniform(delta)
    if kind == "degenerate":
        return Degenerate(delta)
    raise ValueError(f"unknown shortening law {kind!r}")


def make_n0(kind: str, params: list[float]):
    if kind == "gamma":
        return Gamma(*params)
    if kind == "weibull":
        return Weibull(*params)
    if kind == "nakagami":
        return Nakagami(*params)
    if kind == "mixture":
        if len(params) % 3:
            raise ValueError("mixture parameters come as (weight, shape, rate) triples")
        triples = [params[i:i + 3] for i in range(0, len(params), 3)]
        return Mixture(tuple(w for w, _, _ in triples), tuple(Gamma(l, r) for _, l, r in triples))
    raise ValueError(f"unknown initial law {kind!r}")


def config_from_dict(items: dict) -> tuple[ModelConfig, int]:
    """Build a model configuration; returns it with the requested precision."""
    merged = {**DEFAULTS, **items}
    unknown = set(items) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    law = make_law(merged["law.kind"], float(merged["law.delta"]))
    n0 = make_n0(merged["n0.kind"], _floats(merged["n0.params"]))
    config = ModelConfig(float(merged["b"]), float(merged["N"]), law, n0)
    return config, int(merged["precision_digits"])


def load_config(path) -> tuple[ModelConfig, int]:
    return config_from_dict(read_keyvalue(path))


def config_items(config: ModelConfig) -> dict:
    return {
        "b": config.b,
        "N": config.N,
        "law.kind": config.law.kind,
        "law.delta": float(config.law.delta),
        "n0.kind": config.n0.kind,
        "n0.params": config.n0.params(),
    }


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(path, header, columns, comments: dict | None = None) -> Path:
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        for k, v in (comments or {}).items():
            fh.write(f"# {k}={_fmt(v)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def read_csv(path) -> tuple[dict, dict]:
    """(comments, columns) of a file written by :func:`write_csv`."""
    comments, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            comments[k] = v
        else:
            lines.append(line)
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    cols = {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}
    return comments, cols


def write_sample(path, sample):
    return write_csv(path, ["T"], [sample.times], {"seed": sample.seed, "n_d": len(sample.times)})


def write_cemetery(path, series):
    return write_csv(path, ["t", "flux"], [series.t_grid, series.flux])


def write_snapshot(path, snap):
    return write_csv(path, ["x", "value"], [snap.x_grid, snap.values], {"t": snap.time})


def write_bound_check(path, t, x, lhs, rhs):
    t, x, lhs, rhs = (np.ravel(a) for a in np.broadcast_arrays(t, x, lhs, rhs))
    return write_csv(path, ["t", "x", "lhs", "rhs", "ok"], [t, x, lhs, rhs, lhs <= rhs])


def write_estimate(path, curve, digits=None):
    meta = {"estimator_id": curve.estimator_id, **curve.params}
    if digits is not None:
        meta.setdefault("digits", digits)
    meta["integral"] = curve.integral()
    meta["negative_mass"] = curve.negative_mass()
    return write_csv(path, ["x", "value"], [curve.x, curve.values], meta)


def write_density(path, t, density, comments=None):
    return write_csv(path, ["t", "density"], [t, density], comments)


def write_transform(path, ps, values):
    ps = [complex(p) for p in ps]
    vs = [complex(v) for v in values]
    return write_csv(path, ["Re(p)", "Im(p)", "Re(L)", "Im(L)"],
                     [[p.real for p in ps], [p.imag for p in ps], [v.real for v in vs], [v.imag for v in vs]])


def finite(values) -> bool:
    return all(math.isfinite(float(v)) for v in np.ravel(values))
