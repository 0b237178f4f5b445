"""Command-line experiment runner.

Every subcommand resolves its parameters in three layers: built-in defaults,
then a JSON config file (`--config`), then explicit flags, with flags winning.
Runs are reproducible: the same resolved parameters and seed produce
byte-identical CSV output.  When `--out` is given, results go to that file,
a plot-ready variant goes to `<out minus .csv>.plot.csv`, and a manifest with
the resolved parameters, seed, package version, and wall time goes to
`<out>.manifest.json`; without `--out` the primary output prints to stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace

from . import __version__
from .d2d import D2DScenario, scaling_check, sweep_gamma1, sweep_r
from .errors import (
    ConfigError,
    DegenerateInstanceError,
    InfeasiblePlacementError,
    InsufficientDataError,
    InstanceTooLargeError,
    InvalidParameterError,
)
from .macro_sim import MacroConfig, sweep_capacity, sweep_helper_count
from .placement_coded import coded_placement_rows, solve_grouped
from .placement_uncoded import (
    HelperSpecs,
    brute_force_place,
    greedy_place,
    most_popular_place,
    placement_to_json,
)
from .popularity import (
    fit_zipf,
    read_trace_csv,
    sample_requests,
    trace_from_samples,
    zipf_model,
)
from .rng import stream
from .topology import (
    DEFAULT_HELPER_MODEL,
    DEFAULT_MACRO_MODEL,
    CellLayout,
    build_connectivity,
    place_helpers,
    place_uniform,
)


def _parse_int(value) -> int:
    return int(str(value))


def _int_at_least(bound: int):
    def parse(value):
        out = _parse_int(value)
        if out < bound:
            raise ValueError(f"must be an integer >= {bound}")
        return out

    return parse


def _parse_float(value) -> float:
    out = float(str(value))
    if not math.isfinite(out):
        raise ValueError("must be finite")
    return out


def _positive_float(value) -> float:
    out = _parse_float(value)
    if out <= 0:
        raise ValueError("must be > 0")
    return out


def _nonneg_float(value) -> float:
    out = _parse_float(value)
    if out < 0:
        raise ValueError("must be >= 0")
    return out


def _fraction(value) -> float:
    text = str(value).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        out = float(num) / float(den)
    else:
        out = float(text)
    if not math.isfinite(out) or not (0.0 < out <= 1.0):
        raise ValueError("must be a fraction in (0, 1], e.g. 0.1 or 1/10")
    return out


def _choice(*options: str):
    def parse(value):
        text = str(value)
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text

    return parse


def _list_of(item_parser, min_items: int = 1):
    def parse(value):
        if isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [tok for tok in str(value).split(",") if tok.strip()]
        if len(items) < min_items:
            raise ValueError(f"needs at least {min_items} value(s)")
        return [item_parser(tok) for tok in items]

    return parse


def _seed(value) -> int:
    out = _parse_int(value)
    if out < 0:
        raise ValueError("must be >= 0")
    return out


def _path(value) -> str:
    return str(value)


class Param:
    def __init__(self, name: str, parse, default, help: str):
        self.name = name
        self.parse = parse
        self.default = default
        self.help = help


_COMMON = [
    Param("seed", _seed, 0, "root seed for all random streams"),
    Param("out", _path, None, "output file; stdout when omitted"),
]

_MACRO = [
    Param("n", _int_at_least(1), 24, "users in the cell"),
    Param("m", _int_at_least(1), 4000, "catalog size"),
    Param("capacity", _int_at_least(0), 2000, "files per helper cache"),
    Param("gamma", _nonneg_float, None, "request Zipf exponent; fitted from a synthetic trace when omitted"),
    Param("trace_gamma", _nonneg_float, 0.8, "exponent of the synthetic fitting trace"),
    Param("trace_samples", _int_at_least(2), 200_000, "synthetic fitting trace length"),
    Param("file_bits", _positive_float, 2.4e8, "request size in bits"),
    Param("qos", _positive_float, 200.0, "delivery deadline in seconds"),
    Param("cell_radius", _positive_float, 400.0, "cell radius in meters"),
    Param("helper_radius", _positive_float, 150.0, "helper service radius in meters"),
    Param("helper_mode", _choice("grid", "uniform"), "grid", "helper layout"),
    Param("coded_groups", _int_at_least(1), 16, "popularity buckets for the coded LP"),
    Param("reps", _int_at_least(1), 100, "Monte Carlo replications"),
]

_D2D = [
    Param("n", _int_at_least(1), 500, "users in the unit-square cell"),
    Param("m", _int_at_least(1), 1000, "catalog size"),
    Param("M", _int_at_least(0), 1, "files cached per device"),
    Param("gamma", _nonneg_float, 0.6, "request Zipf exponent"),
    Param("strategy", _choice("deterministic", "random-zipf"), "deterministic", "caching rule"),
    Param("gamma1", _nonneg_float, None, "caching Zipf exponent (random-zipf only)"),
    Param("reps", _int_at_least(1), 1000, "Monte Carlo replications"),
    Param("mode", _choice("auto", "analytic", "mc"), "auto", "evaluation mode"),
]

COMMANDS: dict[str, list[Param]] = {
    "fit": [
        Param("trace", _path, None, "request trace CSV (file_id,count); synthetic when omitted"),
        Param("synthetic_gamma", _nonneg_float, 0.8, "exponent of the synthetic trace"),
        Param("samples", _int_at_least(2), 200_000, "synthetic trace length"),
        Param("m", _int_at_least(1), 4000, "synthetic catalog size"),
    ],
    "place": [
        Param("policy", _choice("greedy", "most-popular", "brute-force", "coded"), "greedy", "placement policy"),
        Param("helpers", _int_at_least(0), 4, "number of helpers"),
        Param("capacity", _int_at_least(0), 3, "files per helper cache"),
        Param("m", _int_at_least(1), 100, "catalog size"),
        Param("n", _int_at_least(1), 24, "users in the cell"),
        Param("gamma", _nonneg_float, 0.8, "request Zipf exponent"),
        Param("file_bits", _positive_float, 2.4e8, "request size in bits"),
        Param("cell_radius", _positive_float, 400.0, "cell radius in meters"),
        Param("helper_radius", _positive_float, 150.0, "helper service radius in meters"),
        Param("helper_mode", _choice("grid", "uniform"), "grid", "helper layout"),
        Param("coded_groups", _int_at_least(1), 16, "popularity buckets for the coded LP"),
    ],
    "simulate-macro": [
        Param("policy", _choice("greedy", "most-popular", "coded"), "greedy", "placement policy"),
        Param("helpers", _int_at_least(0), 32, "number of helpers"),
        *_MACRO,
    ],
    "sweep-helpers": [
        Param("counts", _list_of(_int_at_least(0)), [0, 2, 4, 8, 10, 16, 24, 32], "helper counts"),
        Param("policy", _choice("greedy", "most-popular", "coded"), "greedy", "placement policy"),
        *_MACRO,
    ],
    "sweep-capacity": [
        Param("capacities", _list_of(_int_at_least(0)), [0, 250, 500, 1000, 2000, 4000], "cache sizes"),
        Param("helpers", _int_at_least(0), 32, "number of helpers"),
        Param("policy", _choice("greedy", "most-popular", "coded"), "greedy", "placement policy"),
        *[p for p in _MACRO if p.name != "capacity"],
    ],
    "simulate-d2d": [
        Param("r", _fraction, 0.1, "collaboration distance (cluster side)"),
        *_D2D,
    ],
    "sweep-r": [
        Param(
            "r_values",
            _list_of(_fraction),
            [1.0, 1 / 2, 1 / 4, 1 / 5, 1 / 10, 1 / 20, 1 / 25, 1 / 50],
            "collaboration distances (accepts 1/10 style fractions)",
        ),
        *_D2D,
    ],
    "sweep-gamma1": [
        Param(
            "gamma1_values",
            _list_of(_nonneg_float),
            [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0],
            "caching exponents",
        ),
        Param("r_values", _list_of(_fraction), [1 / 5, 1 / 10], "collaboration distances"),
        *[p for p in _D2D if p.name not in ("strategy", "gamma1", "mode")],
    ],
    "scaling-check": [
        Param("gamma", _nonneg_float, 1.5, "request Zipf exponent"),
        Param("n_values", _list_of(_int_at_least(1)), [250, 500, 1000, 2000], "cell populations"),
        Param("M", _int_at_least(0), 1, "files cached per device"),
        Param("scale", _positive_float, 50.0, "catalog files per log-unit of n"),
        Param("mode", _choice("analytic", "mc"), "analytic", "evaluation mode"),
        Param("reps", _int_at_least(1), 2000, "Monte Carlo replications (mc mode)"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="helpercache",
        description="Cache placement and delivery experiments for helper and D2D networks.",
    )
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = top.add_subparsers(dest="command", required=True)
    for command, params in COMMANDS.items():
        sp = sub.add_parser(command)
        sp.add_argument("--config", default=None, help="JSON file of parameter overrides")
        for param in _COMMON + params:
            sp.add_argument(
                f"--{param.name.replace('_', '-')}",
                dest=param.name,
                default=None,
                help=f"{param.help} (default: {param.default})",
            )
    return top


def resolve_params(args: argparse.Namespace) -> dict:
    """Merge defaults, config-file values, and flags (flags win)."""
    params = _COMMON + COMMANDS[args.command]
    known = {p.name for p in params}
    from_file: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{args.config} is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config", "the config file must hold a JSON object")
        for key, value in loaded.items():
            name = str(key).replace("-", "_")
            if name not in known:
                raise ConfigError(name, f"unknown field for command {args.command!r}")
            from_file[name] = value
    resolved = {}
    for param in params:
        raw = getattr(args, param.name)
        if raw is None and param.name in from_file:
            raw = from_file[param.name]
        if raw is None:
            resolved[param.name] = param.default
            continue
        try:
            resolved[param.name] = param.parse(raw)
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError(param.name, str(exc))
    return resolved


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return str(value)
    return str(value)


def _csv_text(header: list[str], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_format(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _plot_text(x_label: str, y_label: str, rows: list[tuple]) -> str:
    head = [f"# x: {x_label}", f"# y: {y_label}", "x,y,yerr,series"]
    body = [",".join(_format(v) for v in row) for row in rows]
    return "\n".join(head + body) + "\n"


class _Emitter:
    def __init__(self, command: str, params: dict):
        self.command = command
        self.params = params
        self.started = time.perf_counter()
        self.written: list[str] = []

    def write(self, path: str, text: str):
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.written.append(path)

    def primary(self, text: str, plot: str | None = None):
        out = self.params["out"]
        if out is None:
            sys.stdout.write(text)
            return
        self.write(out, text)
        if plot is not None:
            base = out[:-4] if out.endswith(".csv") else out
            self.write(base + ".plot.csv", plot)

    def finish(self) -> int:
        out = self.params["out"]
        if out is not None:
            manifest = {
                "command": self.command,
                "version": __version__,
                "seed": self.params["seed"],
                "parameters": self.params,
                "outputs": list(self.written),
                "wall_time_s": round(time.perf_counter() - self.started, 6),
            }
            with open(out + ".manifest.json", "w", newline="") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
                fh.write("\n")
        return 0


def _macro_config(p: dict) -> MacroConfig:
    return MacroConfig(
        n_users=p["n"],
        catalog_size=p["m"],
        capacity=p.get("capacity", 0),
        file_bits=p["file_bits"],
        qos_s=p["qos"],
        cell_radius_m=p["cell_radius"],
        helper_radius_m=p["helper_radius"],
        helper_mode=p["helper_mode"],
        gamma=p["gamma"],
        trace_gamma=p["trace_gamma"],
        trace_samples=p["trace_samples"],
        coded_groups=p["coded_groups"],
    )


def _macro_rows(points, policy: str, seed: int):
    return [
        (int(pt.x), pt.mean_satisfied, pt.stderr, policy, seed) for pt in points
    ]


_MACRO_HEADER = ["x", "mean_satisfied", "stderr", "policy", "seed"]
_D2D_HEADER = ["r", "gamma", "gamma1", "mean_active", "stderr", "K", "mode"]


def _d2d_rows(rows):
    return [
        (row.r, row.gamma, row.gamma1, row.mean_active, row.stderr, row.K, row.mode)
        for row in rows
    ]


def _run_fit(p: dict, emitter: _Emitter) -> int:
    if p["trace"] is not None:
        trace = read_trace_csv(p["trace"])
    else:
        model = zipf_model(p["synthetic_gamma"], p["m"])
        samples = sample_requests(model, stream(p["seed"], "fit-trace"), p["samples"])
        trace = trace_from_samples(samples)
    gamma_hat, m_hat = fit_zipf(trace)
    sys.stdout.write(f"gamma_hat={_format(float(gamma_hat))}\n")
    sys.stdout.write(f"m_hat={m_hat}\n")
    if p["out"] is not None:
        payload = json.dumps(
            {"gamma_hat": float(gamma_hat), "m_hat": int(m_hat)}, indent=2, sort_keys=True
        )
        emitter.write(p["out"], payload + "\n")
    return emitter.finish()


def _run_place(p: dict, emitter: _Emitter) -> int:
    pop = zipf_model(p["gamma"], p["m"])
    helpers = place_helpers(
        p["helpers"],
        p["helper_mode"],
        p["cell_radius"],
        rng=stream(p["seed"], "helpers", p["helpers"]),
    )
    users = place_uniform(p["n"], p["cell_radius"], stream(p["seed"], "plan-users"))
    layout = CellLayout(cell_radius=p["cell_radius"], helpers=helpers, users=users)
    helper_model = replace(DEFAULT_HELPER_MODEL, helper_radius_m=p["helper_radius"])
    graph = build_connectivity(layout, helper_model, DEFAULT_MACRO_MODEL)
    specs = HelperSpecs.uniform(p["helpers"], p["capacity"])
    policy = p["policy"]
    if policy == "coded":
        placement, _ = solve_grouped(
            graph, pop, specs, p["file_bits"], min(p["coded_groups"], pop.m)
        )
        rows = coded_placement_rows(placement)
        emitter.primary(_csv_text(["file_rank", "helper_id", "rho"], rows))
        return emitter.finish()
    if policy == "greedy":
        placement = greedy_place(graph, pop, specs, p["file_bits"])
    elif policy == "most-popular":
        placement = most_popular_place(specs, pop)
    else:
        placement = brute_force_place(graph, pop, specs, p["file_bits"])
    emitter.primary(placement_to_json(placement) + "\n")
    return emitter.finish()


def _run_macro(p: dict, emitter: _Emitter, command: str) -> int:
    config = _macro_config(p)
    if command == "sweep-capacity":
        points = sweep_capacity(
            p["capacities"], config, p["policy"], p["reps"], p["seed"],
            helper_count=p["helpers"],
        )
        x_label = "cache capacity (files)"
    elif command == "sweep-helpers":
        points = sweep_helper_count(p["counts"], config, p["policy"], p["reps"], p["seed"])
        x_label = "number of helpers"
    else:
        points = sweep_helper_count([p["helpers"]], config, p["policy"], p["reps"], p["seed"])
        x_label = "number of helpers"
    rows = _macro_rows(points, p["policy"], p["seed"])
    plot = _plot_text(
        x_label,
        "mean satisfied users",
        [(row[0], row[1], row[2], p["policy"]) for row in rows],
    )
    emitter.primary(_csv_text(_MACRO_HEADER, rows), plot)
    return emitter.finish()


def _d2d_scenario(p: dict, r: float) -> D2DScenario:
    return D2DScenario(
        n=p["n"],
        m=p["m"],
        M=p["M"],
        r=r,
        gamma=p["gamma"],
        strategy=p["strategy"],
        gamma1=p["gamma1"],
    )


def _run_d2d(p: dict, emitter: _Emitter, command: str) -> int:
    if command == "sweep-gamma1":
        scenario = D2DScenario(
            n=p["n"], m=p["m"], M=p["M"], r=p["r_values"][0], gamma=p["gamma"],
            strategy="random-zipf", gamma1=p["gamma1_values"][0],
        )
        pop = scenario.popularity()
        rows = sweep_gamma1(
            scenario, p["gamma1_values"], p["r_values"], pop, p["reps"], p["seed"]
        )
        plot_rows = [
            (row.gamma1, row.mean_active, row.stderr, f"r={row.r}") for row in rows
        ]
        x_label = "caching exponent"
    else:
        r_values = p["r_values"] if command == "sweep-r" else [p["r"]]
        scenario = _d2d_scenario(p, r_values[0])
        pop = scenario.popularity()
        rows = sweep_r(scenario, r_values, pop, p["reps"], p["seed"], mode=p["mode"])
        plot_rows = [
            (row.r, row.mean_active, row.stderr, f"gamma={row.gamma}") for row in rows
        ]
        x_label = "collaboration distance r"
    plot = _plot_text(x_label, "mean active clusters", plot_rows)
    emitter.primary(_csv_text(_D2D_HEADER, _d2d_rows(rows)), plot)
    return emitter.finish()


def _run_scaling(p: dict, emitter: _Emitter) -> int:
    rows = scaling_check(
        gamma=p["gamma"],
        n_values=p["n_values"],
        M=p["M"],
        scale=p["scale"],
        reps=p["reps"],
        root_seed=p["seed"],
        mode=p["mode"],
    )
    table = [
        (row.n, row.m, row.r, row.K, row.mean_active, row.ratio, row.stderr, row.mode)
        for row in rows
    ]
    plot = _plot_text(
        "users in the cell",
        "active clusters per user",
        [(row.n, row.ratio, row.stderr / row.n, f"gamma={p['gamma']}") for row in rows],
    )
    header = ["n", "m", "r", "K", "mean_active", "ratio", "stderr", "mode"]
    emitter.primary(_csv_text(header, table), plot)
    return emitter.finish()


def run(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    emitter = _Emitter(args.command, params)
    if args.command == "fit":
        return _run_fit(params, emitter)
    if args.command == "place":
        return _run_place(params, emitter)
    if args.command in ("simulate-macro", "sweep-helpers", "sweep-capacity"):
        return _run_macro(params, emitter, args.command)
    if args.command in ("simulate-d2d", "sweep-r", "sweep-gamma1"):
        return _run_d2d(params, emitter, args.command)
    return _run_scaling(params, emitter)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvalidParameterError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        InstanceTooLargeError,
        InfeasiblePlacementError,
        DegenerateInstanceError,
        OSError,
    ) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
