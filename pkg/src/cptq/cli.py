"""Experiment runner: value computation, condition checks, the
non-attainability demonstration, the quantile solver, and elasticity
estimates, with reproducible file outputs.

Configuration is a flat key = value text file with dotted keys, e.g.::

    kernel.model = lognormal
    kernel.sigma = 0.2
    utility.plus.kind = exponential
    utility.plus.alpha = 1.0
    utility.minus.kind = logarithmic
    distortion.plus.kind = prelec
    distortion.plus.beta = 1.0
    distortion.plus.shape = 0.5
    distortion.minus.kind = prelec
    distortion.minus.beta = 1.0
    distortion.minus.shape = 0.5
    x0 = 1.0

Any key can be overridden from the environment as CPTQ_<KEY> with dots
replaced by double underscores (CPTQ_KERNEL__SIGMA=0.3).  Every output file
starts with a comment block echoing the resolved configuration, so runs are
reproducible byte for byte.

Exit codes: 0 success (a "not attainable" finding is a successful run),
2 configuration error, 3 computation error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import attainability as attn
from . import constructions, functions, market, optimizer
from .choquet import DiscreteLaw, cpt_value
from .errors import ConfigError

ENV_PREFIX = "CPTQ_"

_BOOL = {"true": True, "false": False, "yes": True, "no": False}


def parse_config_text(text):
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        cfg[key] = _coerce(value)
    return cfg


def _coerce(token):
    low = token.lower()
    if low in _BOOL:
        return _BOOL[low]
    if low == "inf":
        return math.inf
    if low == "-inf":
        return -math.inf
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def apply_env_overrides(cfg, environ=None):
    environ = os.environ if environ is None else environ
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        cfg[key] = _coerce(value)
    return cfg


def load_config(path, environ=None):
    try:
        with open(path) as fh:
            cfg = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return apply_env_overrides(cfg, environ)


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing config key '{key}'")
    return cfg[key]


def build_kernel(cfg):
    model = _require(cfg, "kernel.model")
    if model == "lognormal":
        return market.LognormalKernel(float(_require(cfg, "kernel.sigma")))
    if model == "custom_quantile":
        return market.TableKernel.from_csv(_require(cfg, "kernel.path"))
    raise ConfigError(f"unknown kernel.model '{model}'")


def build_utility(cfg, side):
    prefix = f"utility.{side}"
    kind = _require(cfg, f"{prefix}.kind")
    if kind == "power":
        return functions.PowerUtility(float(_require(cfg, f"{prefix}.alpha")))
    if kind == "exponential":
        return functions.ExponentialUtility(float(_require(cfg, f"{prefix}.alpha")))
    if kind == "logarithmic":
        return functions.LogUtility()
    if kind == "loglog":
        return functions.LogLogUtility()
    if kind == "log_power":
        return functions.LogPowerUtility(
            float(_require(cfg, f"{prefix}.alpha")),
            float(_require(cfg, f"{prefix}.shape")),
        )
    if kind == "custom":
        return functions.TableUtility.from_csv(_require(cfg, f"{prefix}.path"))
    raise ConfigError(f"unknown {prefix}.kind '{kind}'")


def build_distortion(cfg, side, u_minus=None):
    prefix = f"distortion.{side}"
    kind = _require(cfg, f"{prefix}.kind")
    if kind == "identity":
        return functions.IdentityDistortion()
    if kind == "power":
        return functions.PowerDistortion(float(_require(cfg, f"{prefix}.beta")))
    if kind == "prelec":
        return functions.PrelecDistortion(
            float(_require(cfg, f"{prefix}.beta")),
            float(_require(cfg, f"{prefix}.shape")),
        )
    if kind == "associated":
        if u_minus is None:
            raise ConfigError("associated distortion needs utility.minus")
        return functions.AssociatedDistortion(
            u_minus, float(_require(cfg, f"{prefix}.delta"))
        )
    if kind == "custom":
        return functions.TableDistortion.from_csv(_require(cfg, f"{prefix}.path"))
    raise ConfigError(f"unknown {prefix}.kind '{kind}'")


def build_preferences(cfg):
    u_plus = build_utility(cfg, "plus")
    u_minus = build_utility(cfg, "minus")
    w_plus = build_distortion(cfg, "plus", u_minus)
    w_minus = build_distortion(cfg, "minus", u_minus)
    return u_plus, u_minus, w_plus, w_minus


def config_header(cfg, seed=None):
    lines = [f"cptq {__version__}"]
    for key in sorted(cfg):
        lines.append(f"{key} = {cfg[key]}")
    if seed is not None:
        lines.append(f"seed = {seed}")
    return lines


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_value(cfg, out_dir, seed):
    law = DiscreteLaw.from_csv(_require(cfg, "law.path"))
    u_plus, u_minus, w_plus, w_minus = build_preferences(cfg)
    value = cpt_value(law, u_plus, u_minus, w_plus, w_minus)
    print(value)
    path = os.path.join(out_dir, "value.csv")
    with open(path, "w") as fh:
        for line in config_header(cfg, seed):
            fh.write(f"# {line}\n")
        fh.write("v_plus,v_minus,total\n")
        d = value.as_dict()
        fh.write(f"{d['v_plus']},{d['v_minus']},{d['total']}\n")
    print(f"wrote {path}")
    return 0


def cmd_check(cfg, out_dir, seed):
    kernel = build_kernel(cfg)
    u_plus, u_minus, w_plus, w_minus = build_preferences(cfg)
    orders = cfg.get("check.moment_orders", "1,2,4,8,16")
    if isinstance(orders, str):
        orders = tuple(float(tok) for tok in orders.split(","))
    else:
        orders = (float(orders),)
    report = {
        "library_version": __version__,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "kernel_assumptions": market.check_assumptions(kernel, moment_orders=orders).as_dict(),
        "loss_liminf": attn.liminf_condition(w_minus, u_minus).as_dict(),
    }
    delta = cfg.get("check.delta")
    if delta is None and isinstance(w_minus, functions.AssociatedDistortion):
        delta = w_minus.delta
    if delta is not None:
        report["delta_threshold"] = attn.check_delta_threshold(u_minus, float(delta)).as_dict()
    if math.isinf(u_minus.saturation):
        growth_delta = float(delta) if delta is not None and 0 < float(delta) < 1 else 0.5
        report["loss_growth_condition"] = attn.check_growth_condition(
            u_minus, growth_delta
        ).as_dict()
        z = functions.z_transform(u_minus)
        try:
            report["elasticity"] = {
                "AE_transform": attn.asymptotic_elasticity(z),
                "AE_utility": attn.asymptotic_elasticity(u_minus),
            }
        except Exception as exc:  # bounded tails etc.
            report["elasticity"] = {"error": str(exc)}
    path = os.path.join(out_dir, "check_report.json")
    _write_json(path, report)
    attainable = report.get("delta_threshold", report["loss_liminf"])["holds"]
    print(f"loss_liminf: {report['loss_liminf']['holds']}")
    if "delta_threshold" in report:
        print(f"delta_threshold: {report['delta_threshold']['holds']}")
    print(f"kernel assumptions satisfied: {report['kernel_assumptions']['all_satisfied']}")
    print(f"wrote {path}")
    return 0


def cmd_demo_nonattain(cfg, out_dir, seed):
    kernel = build_kernel(cfg)
    u_plus, u_minus, w_plus, w_minus = build_preferences(cfg)
    x0 = float(_require(cfg, "x0"))
    n_max = int(cfg.get("demo.n_max", 32))
    gap_tol = float(cfg.get("demo.gap_tol", constructions.DEFAULT_GAP_TOL))
    report = constructions.demonstrate_nonattainability(
        kernel, u_plus, u_minus, w_plus, w_minus, x0, n_max=n_max, gap_tol=gap_tol
    )
    csv_path = os.path.join(out_dir, "nonattainability.csv")
    report.to_csv(csv_path, header_lines=config_header(cfg, seed))
    svg_path = os.path.join(out_dir, "nonattainability.svg")
    report.to_svg(svg_path)
    print(f"elements: {len(report.elements)}, skipped (level below capital bar): "
          f"{len(report.skipped)}")
    print(f"ceiling M = {report.ceiling}, final gap = {report.final_gap:.6g}")
    print("non-attainability demonstrated" if report.nonattainability_demonstrated
          else f"gap still above {report.gap_tol} at n_max={n_max}")
    for note in report.notes:
        print(f"note: {note}")
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")
    return 0


def cmd_optimize(cfg, out_dir, seed):
    kernel = build_kernel(cfg)
    u_plus, u_minus, w_plus, w_minus = build_preferences(cfg)
    x0 = float(_require(cfg, "x0"))
    delta = cfg.get("optimize.delta")
    opts = optimizer.SolveOptions(
        n_starts=int(cfg.get("optimize.n_starts", 16)),
        max_iter=int(cfg.get("optimize.max_iter", 10_000)),
        seed=int(seed),
        q_min=float(cfg.get("optimize.q_min", -math.inf)),
        q_max=float(cfg.get("optimize.q_max", math.inf)),
        eta_moment=float(cfg.get("optimize.eta", 1.2)),
        delta=float(delta) if delta is not None else None,
    )
    n_cells = int(cfg.get("optimize.n", 512))
    portfolio, diag = optimizer.solve(
        kernel, u_plus, u_minus, w_plus, w_minus, x0, n_cells=n_cells, opts=opts
    )
    header = config_header(cfg, seed)
    port_path = os.path.join(out_dir, "portfolio.csv")
    portfolio.to_csv(port_path, header_lines=header)
    diag_path = os.path.join(out_dir, "diagnostics.csv")
    with open(diag_path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("accepted_step,value,neg_moment\n")
        offset = len(diag.neg_moment_trace) - len(diag.value_trace)
        for i, v in enumerate(diag.value_trace):
            fh.write(f"{i},{repr(float(v))},{repr(float(diag.neg_moment_trace[offset + i]))}\n")
    print(f"value = {portfolio.cpt.total!r}, cost = {portfolio.cost!r}, "
          f"converged = {diag.converged}")
    if diag.existence is not None:
        print(f"existence regime: {diag.existence}")
    print(f"wrote {port_path}")
    print(f"wrote {diag_path}")
    return 0


def cmd_elasticity(cfg, out_dir, seed):
    u_minus = build_utility(cfg, "minus")
    if not math.isinf(u_minus.saturation):
        raise ConfigError("elasticity estimates need an unbounded loss utility")
    z = functions.z_transform(u_minus)
    ae_z = attn.asymptotic_elasticity(z)
    ae_u = attn.asymptotic_elasticity(u_minus)
    print(f"AE of growth transform: {ae_z!r}")
    print(f"AE of utility:          {ae_u!r}")
    path = os.path.join(out_dir, "elasticity.csv")
    with open(path, "w") as fh:
        for line in config_header(cfg, seed):
            fh.write(f"# {line}\n")
        fh.write("quantity,estimate\n")
        fh.write(f"AE_transform,{repr(ae_z)}\n")
        fh.write(f"AE_utility,{repr(ae_u)}\n")
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "value": cmd_value,
    "check": cmd_check,
    "demo-nonattain": cmd_demo_nonattain,
    "optimize": cmd_optimize,
    "elasticity": cmd_elasticity,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cptq",
        description="Prospect-theory portfolio experiments in a complete market",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized runs")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
