"""Command-line entry point.

Configuration comes from a flat ``key = value`` file, overridden by flags;
precedence is flag > file > default.  Every option is validated before any
computation starts, and unknown or misplaced keys are rejected by name.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid configuration, 3 when a computation diverges.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import _quad, runners
from .reports import emit_report

COMMANDS = ("verify-quaternionic", "train", "ode-fit", "ft-kernels", "approx-sweep")
ALL = COMMANDS


class ConfigError(ValueError):
    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key


def _int_pos(s):
    v = int(s)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _int_nonneg(s):
    v = int(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _float_pos(s):
    v = float(s)
    if not v > 0:
        raise ValueError("must be > 0")
    return v


def _float_nonneg(s):
    v = float(s)
    if not v >= 0:
        raise ValueError("must be >= 0")
    return v


def _triple(lowest):
    # convergence checks also run at half the requested counts
    def parse(s):
        parts = tuple(int(p) for p in str(s).replace(" ", "").split(","))
        if len(parts) != 3 or min(parts) < lowest:
            raise ValueError(f"expected three integers >= {lowest}, e.g. 16,16,32")
        return parts
    return parse


def _int_list(s):
    vals = [int(p) for p in str(s).replace(" ", "").split(",") if p]
    if not vals or min(vals) < 1 or any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError("expected increasing positive integers, e.g. 4,16,64")
    return vals


def _choice(*opts):
    def parse(s):
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return s
    return parse


def _names(s):
    from .verify import CHECKS
    vals = [p for p in str(s).replace(" ", "").split(",") if p]
    bad = [v for v in vals if v not in CHECKS]
    if bad:
        raise ValueError(f"unknown checks {bad}")
    return vals


# key: (parser, default, commands, help)
SCHEMA = {
    "command": (_choice(*COMMANDS), None, ALL, "command to run"),
    "out": (str, "reports", ALL, "output directory"),
    "seed": (_int_nonneg, 0, ALL, "base RNG seed"),
    "workers": (_int_pos, 1, ALL, "threads for quadrature loops (results do not depend on it)"),
    "refinement": (_triple(12), (16, 16, 32), ("verify-quaternionic",), "sphere grid for single integrals"),
    "double_refinement": (_triple(8), (16, 16, 32), ("verify-quaternionic",), "sphere grid for double integrals"),
    "n_nodes": (_int_pos, 20, ("verify-quaternionic",), "probe nodes per check"),
    "checks": (_names, None, ("verify-quaternionic",), "comma-separated subset of checks (default: all)"),
    "task": (_choice(*runners.TRAIN_TASKS), "xor", ("train",), "training task"),
    "system": (_choice("R", "C", "H"), "R", ("train",), "number system for xor"),
    "hidden": (_int_pos, 2, ("train",), "hidden width (quaternion width for parity3)"),
    "activation": (_choice("tanh", "sigmoid", "identity", "relu"), "tanh", ("train",), "activation"),
    "optimizer": (_choice("gd", "adam"), "gd", ("train",), "full-batch update rule"),
    "nets": (_int_pos, 20, ("train",), "random networks per number system for gradcheck"),
    "eta": (_float_nonneg, None, ("train", "ode-fit", "approx-sweep"), "learning rate (task default if unset)"),
    "epochs": (_int_pos, None, ("train", "ode-fit", "approx-sweep"), "epoch budget (task default if unset)"),
    "seeds": (_int_pos, 10, ("train", "ode-fit", "approx-sweep"), "number of seeds"),
    "threshold": (_float_pos, None, ("train", "ode-fit"), "loss threshold (task default if unset)"),
    "dim": (_int_pos, 2, ("ode-fit",), "ODE state dimension"),
    "steps": (_int_pos, 4, ("ode-fit",), "Euler steps"),
    "horizon": (_float_pos, 1.0, ("ode-fit",), "integration horizon T"),
    "points": (_int_pos, 21, ("ode-fit",), "training points on [-1, 1]"),
    "models": (_int_pos, 100, ("ode-fit",), "random models for the ResNet comparison"),
    "nodes": (_int_pos, 11, ("ft-kernels",), "partition nodes"),
    "h": (_float_pos, 0.1, ("ft-kernels",), "partition bandwidth"),
    "spacing": (_float_pos, 0.025, ("ft-kernels",), "sample spacing (must divide h)"),
    "widths": (_int_list, [4, 64], ("approx-sweep",), "hidden widths"),
    "target": (_choice(*runners.TARGETS), "sin", ("approx-sweep",), "function on [0, 1]"),
    "depth": (_int_pos, 8, ("approx-sweep",), "hidden layers of the width-2 network"),
}

TASK_DEFAULTS = {
    ("train", "xor"): {"eta": 0.3, "epochs": 5000, "threshold": 1e-2},
    ("train", "parity3"): {"eta": 0.3, "epochs": 5000, "threshold": 1e-2},
    ("train", "affine2d"): {"eta": 0.5, "epochs": 3000, "threshold": 1e-6},
    ("train", "rot3d"): {"eta": 0.5, "epochs": 500, "threshold": 1e-12},
    ("train", "perceptron"): {"eta": 1.0, "epochs": 100, "threshold": 1e-2},
    ("train", "gradcheck"): {"eta": 0.0, "epochs": 1, "threshold": 1e-5},
    ("ode-fit", None): {"eta": 0.1, "epochs": 5000, "threshold": 1e-4},
    ("approx-sweep", None): {"eta": 0.01, "epochs": 3000},
}


def read_config_file(path):
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}", f"expected key = value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve(raw: dict) -> dict:
    """Validate raw string/typed values and fill defaults for the command."""
    for k in raw:
        if k not in SCHEMA:
            raise ConfigError(k, "unknown key")
    if raw.get("command") is None:
        raise ConfigError("command", f"missing; expected one of {', '.join(COMMANDS)}")
    cmd = SCHEMA["command"][0](raw["command"])
    opts = {}
    for k, v in raw.items():
        parser, _, cmds, _ = SCHEMA[k]
        if cmd not in cmds:
            raise ConfigError(k, f"not an option of {cmd}")
        try:
            opts[k] = v if (v is None or not isinstance(v, str)) else parser(v)
        except ValueError as e:
            raise ConfigError(k, str(e)) from None
    for k, (_, default, cmds, _) in SCHEMA.items():
        if cmd in cmds and opts.get(k) is None:
            opts[k] = default
    task_defaults = TASK_DEFAULTS.get((cmd, opts.get("task") if cmd == "train" else None), {})
    for k, v in task_defaults.items():
        if opts.get(k) is None:
            opts[k] = v
    return opts


def build_parser():
    p = argparse.ArgumentParser(
        prog="hypernum",
        description="Verification suites and experiments for quaternionic boundary operators and hypercomplex networks.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("command_pos", nargs="?", metavar="COMMAND", help=f"one of {', '.join(COMMANDS)}")
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    for k, (_, default, cmds, helptext) in SCHEMA.items():
        where = "all commands" if cmds == ALL else ", ".join(cmds)
        d = ",".join(map(str, default)) if isinstance(default, (tuple, list)) else default
        p.add_argument("--" + k.replace("_", "-"), dest=k, default=None, metavar=k.upper(),
                       help=f"{helptext} [{where}; default: {d}]")
    return p


def gather(argv):
    args = build_parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        k, v = item.split("=", 1)
        raw[k.strip().replace("-", "_")] = v.strip()
    if args.command_pos:
        raw["command"] = args.command_pos
    for k in SCHEMA:
        v = getattr(args, k)
        if v is not None:
            raw[k] = v
    return resolve(raw)


def run(opts, log=print) -> int:
    out = Path(opts["out"])
    _quad.set_workers(opts["workers"])
    cmd = opts["command"]
    t0 = time.perf_counter()
    if cmd == "verify-quaternionic":
        from .verify import VerifyConfig, run_verification

        def progress(name):
            opts["_current"] = name
            log(f"[{time.perf_counter() - t0:7.1f}s] {name}")

        cfg = VerifyConfig(opts["refinement"], opts["double_refinement"], opts["n_nodes"], opts["seed"])
        records = run_verification(cfg, opts["checks"], progress=progress)
        path = emit_report(records, out / "verify_report.json")
        key = "theorem_id"
    else:
        driver = {
            "train": runners.run_train,
            "ode-fit": runners.run_ode_fit,
            "ft-kernels": runners.run_ft_kernels,
            "approx-sweep": runners.run_approx_sweep,
        }[cmd]
        out.mkdir(parents=True, exist_ok=True)
        opts["_current"] = opts.get("task", cmd)
        records = driver(opts, out)
        name = f"{cmd}_{opts['task']}" if cmd == "train" else cmd
        path = emit_report(records, out / f"{name.replace('-', '_')}_summary.json")
        key = "task"
    failed = [r[key] for r in records if r["pass"] is False]
    for r in records:
        flag = {True: "PASS", False: "FAIL", None: "INFO"}[r["pass"]]
        log(f"{flag:4s} {r[key]}: measured={r['measured']} tolerance={r['tolerance']}")
    log(f"report written to {path}")
    if failed:
        log("failed checks: " + ", ".join(failed))
        return 1
    return 0


def main(argv=None) -> int:
    try:
        opts = gather(sys.argv[1:] if argv is None else argv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return run(opts)
    except FloatingPointError as e:
        print(f"divergence in {opts.get('_current', opts['command'])}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
