"""Command-line interface.

    rslab instances [--id ID]
    rslab run --out FILE [--instances IDS] [--policies IDS] [--budgets A:B:S] ...
    rslab rates --delta D --sigma1 S1 --sigma2 S2 [--p P] [--alpha0 A]
    rslab bounds (--instance ID --alpha0 A | --two-design --delta D --sigma1 S1 --sigma2 S2) --t T
    rslab oracle {ds,rs,two-phase,density} ...
    rslab plot --in FILE --out FILE.svg

Data goes to stdout or files, diagnostics to stderr.  Exit status is 0 on
success, 2 for invalid arguments and 1 for other failures.  ``run`` also
reads a flat JSON config (``--config``) whose keys mirror the flag names;
flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__, harness, oracles, rates
from ._validation import InfeasibleBudget
from .plot import render_svg
from .policies import POLICY_IDS, PolicyConfig, linear_n0

log = logging.getLogger("rslab")

SEED_ENV = "RSLAB_SEED"
DEFAULT_POLICIES = "ocba,ocba+,ocba-d+,ocba-r+"
DEFAULT_BUDGETS = "200:4000:200"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Invalid flags or configuration; reported with exit status 2."""


def _fmt(x) -> str:
    return repr(float(x))


def _csv_list(text: str) -> list[str]:
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _budget_triple(text: str) -> tuple[int, int, int]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("budgets must look like start:stop:step")
    try:
        start, stop, step = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("budgets must be integers") from None
    if start < 1 or step < 1 or stop < start:
        raise argparse.ArgumentTypeError("need 1 <= start <= stop and step >= 1")
    return start, stop, step


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# ------------------------------------------------------------------ commands

def cmd_instances(args) -> int:
    rows = harness.builtin_instances()
    if args.id is not None:
        rows = [r for r in rows if r.id == args.id]
        if not rows:
            raise UsageError(f"unknown instance {args.id!r}")
    print("id\tK\tmeans\tstds")
    for inst in rows:
        means = ",".join(f"{m:g}" for m in inst.means)
        stds = ",".join(f"{s:g}" for s in inst.stds)
        print(f"{inst.id}\t{inst.n_designs}\t{means}\t{stds}")
    return EXIT_OK


_POLICY_FLAGS = {
    "n0": "n0",
    "delta_increment": "delta_increment",
    "alpha0": "alpha0",
    "p": "p",
    "exhaust_budget": "exhaust_budget",
}


def _policy_configs(args) -> list[PolicyConfig]:
    given = {name: getattr(args, name) for name in _POLICY_FLAGS if getattr(args, name) is not None}
    unknown = [p for p in args.policies if p not in POLICY_IDS]
    if unknown:
        raise UsageError(f"unknown policy {unknown[0]!r} (choose from {', '.join(POLICY_IDS)})")
    if len(set(args.policies)) != len(args.policies):
        raise UsageError("policy ids must be distinct")
    for name in given:
        if not any(name in PolicyConfig.parameters(p) for p in args.policies):
            raise UsageError(f"--{name.replace('_', '-')} is not used by any selected policy")
    configs = []
    for pid in args.policies:
        accepted = PolicyConfig.parameters(pid)
        configs.append(PolicyConfig(pid, **{k: v for k, v in given.items() if k in accepted}))
    return configs


def _summary(points, instance_ids) -> str:
    lines = []
    for iid in instance_ids:
        mine = [p for p in points if p.instance_id == iid]
        if not mine:
            continue
        lines.append(f"{iid}:")
        lines.append(f"  {'policy':<10} {'T_min':>6} {'pcs':>7} {'T_max':>6} {'pcs':>7}  T(pcs>=0.95)")
        for pid in dict.fromkeys(p.policy_id for p in mine):
            curve = sorted((p for p in mine if p.policy_id == pid), key=lambda q: q.T)
            hit = next((p.T for p in curve if p.pcs_hat >= 0.95), None)
            lines.append(f"  {pid:<10} {curve[0].T:>6} {curve[0].pcs_hat:>7.4f} "
                         f"{curve[-1].T:>6} {curve[-1].pcs_hat:>7.4f}  "
                         f"{hit if hit is not None else '-'}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    if args.out is None:
        raise UsageError("--out is required")
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if args.seed < 0 or args.seed >= 2**64:
        raise UsageError("--seed must be in [0, 2**64)")
    seed = args.seed
    try:
        configs = _policy_configs(args)
        spec = harness.ExperimentSpec(
            instance_ids=args.instances,
            policy_configs=configs,
            budgets=args.budgets,
            replications=args.reps,
            master_seed=seed,
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(exc.args[0] if exc.args else str(exc)) from None
    log.info("running %d instances x %d policies x %d budgets, %d replications, seed %d",
             len(spec.instance_ids), len(configs), len(spec.budget_values), spec.replications, seed)
    errors: list = []
    points = harness.run_sweep(spec, workers=args.workers, errors=errors)
    harness.persist(points, args.out)
    print(_summary(points, spec.instance_ids))
    print(f"wrote {len(points)} rows to {args.out}")
    if errors:
        print(f"rslab: {len(errors)} cells skipped (see warnings above)", file=sys.stderr)
    return EXIT_OK


def cmd_rates(args) -> int:
    params = oracles.TwoDesignParams(args.delta, args.sigma1, args.sigma2)
    ds_opt = rates.optimal_rate_ds(params)
    rs = rates.rate_rs(params, args.p)
    tp = rates.rate_two_phase(params, args.alpha0)
    out = [
        ("p", args.p),
        ("rate_ds", rates.rate_ds(params, args.p)),
        ("optimal_ds", ds_opt.rate),
        ("p_star", ds_opt.minimizer),
        ("ea", rates.rate_ea(params)),
        ("rs", rs.rate),
        ("rs_minimizer", rs.minimizer),
        ("alpha0", args.alpha0),
        ("two_phase", tp.rate),
        ("two_phase_minimizer", tp.minimizer),
    ]
    for key, value in out:
        print(f"{key}={_fmt(value)}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.two_design:
        missing = [f for f in ("delta", "sigma1", "sigma2") if getattr(args, f) is None]
        if missing:
            args.parser.error(f"--two-design needs --{', --'.join(missing)}")
        params = oracles.TwoDesignParams(args.delta, args.sigma1, args.sigma2)
        print(f"lower_bound={_fmt(rates.variance_driven_lower_bound(params, args.t))}")
        return EXIT_OK
    if args.instance is None or args.alpha0 is None:
        args.parser.error("need --instance and --alpha0 (or --two-design)")
    try:
        inst = harness.get_instance(args.instance)
    except KeyError:
        raise UsageError(f"unknown instance {args.instance!r}") from None
    n0 = linear_n0(args.alpha0, args.t, inst.n_designs, args.n0_scope)
    bound = rates.finite_sample_upper_bound(inst, args.alpha0, args.t, args.n0_scope)
    print(f"n0={n0}")
    print(f"upper_bound={_fmt(bound)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.kind == "density":
        value = oracles.phat_density(args.x, args.n0, args.sigma1, args.sigma2)
        print(f"density={_fmt(value)}")
        return EXIT_OK
    params = oracles.TwoDesignParams(args.delta, args.sigma1, args.sigma2)
    if args.kind == "ds":
        value = oracles.pfs_ds(params, args.p, args.t)
    elif args.kind == "rs":
        value = oracles.pfs_rs(params, args.p, args.t)
    else:
        value = oracles.pfs_two_phase(params, args.alpha0, args.t)
    print(f"pfs={_fmt(value)}")
    return EXIT_OK


def cmd_plot(args) -> int:
    with open(args.in_path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if not text.strip():
        raise UsageError(f"{args.in_path}: no rows")
    points = harness.loads(text, source=args.in_path)
    if not points:
        raise UsageError(f"{args.in_path}: no rows")
    svg = render_svg(points)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    n_inst = len({p.instance_id for p in points})
    print(f"wrote {n_inst} chart{'s' if n_inst != 1 else ''} to {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------- parsing

def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _unit_float(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return value


def _int_at_least(low):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError("must be an integer") from None
        if value < low:
            raise argparse.ArgumentTypeError(f"must be at least {low}")
        return value
    return parse


def _two_design_flags(p, required=True):
    p.add_argument("--delta", type=_positive_float, required=required, help="mean gap")
    p.add_argument("--sigma1", type=_positive_float, required=required)
    p.add_argument("--sigma2", type=_positive_float, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rslab", description="Fixed-budget ranking and selection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("instances", help="list the builtin problem instances")
    p.add_argument("--id", help="show one instance only")
    p.set_defaults(func=cmd_instances)

    p = sub.add_parser("run", help="estimate PCS curves and write a results CSV")
    p.add_argument("--config", help="JSON file with defaults for these flags")
    p.add_argument("--instances", "--instance", dest="instances", type=_csv_list,
                   default=[i.id for i in harness.builtin_instances()],
                   help="comma-separated instance ids (default: all)")
    p.add_argument("--policies", type=_csv_list, default=DEFAULT_POLICIES,
                   help=f"comma-separated policy ids (default: {DEFAULT_POLICIES})")
    p.add_argument("--budgets", type=_budget_triple, default=DEFAULT_BUDGETS,
                   help="inclusive start:stop:step (default: %(default)s)")
    p.add_argument("--reps", type=int, default=10000, help="replications per cell")
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="results CSV path")
    p.add_argument("--n0", type=int, default=None, help="initial runs per design (ocba, ocba-d, ocba-r)")
    p.add_argument("--delta-increment", type=int, default=None, help="OCBA batch size")
    p.add_argument("--alpha0", type=float, default=None, help="initial share for + variants and two-phase")
    p.add_argument("--p", type=float, default=None, help="static split for ds and rs")
    p.add_argument("--no-exhaust", dest="exhaust_budget", action="store_const", const=False,
                   default=None, help="let OCBA stop short of the budget")
    p.set_defaults(func=cmd_run)
    parser.run_parser = p

    p = sub.add_parser("rates", help="large-deviations rates for two designs")
    _two_design_flags(p)
    p.add_argument("--p", type=_unit_float, default=0.5)
    p.add_argument("--alpha0", type=_unit_float, default=0.2)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("bounds", help="analytical PFS bounds")
    p.add_argument("--t", type=_int_at_least(1), required=True, help="budget")
    p.add_argument("--instance")
    p.add_argument("--alpha0", type=_unit_float)
    p.add_argument("--n0-scope", choices=("total", "design"), default="total",
                   help="N0 = floor(alpha0 T / K) (total) or floor(alpha0 T) (design)")
    p.add_argument("--two-design", action="store_true",
                   help="variance-driven lower bound for two designs")
    _two_design_flags(p, required=False)
    p.set_defaults(func=cmd_bounds, parser=p)

    p = sub.add_parser("oracle", help="exact two-design PFS and the p-hat density")
    kinds = p.add_subparsers(dest="kind", metavar="KIND", required=True)
    k = kinds.add_parser("ds", help="deterministic static split")
    _two_design_flags(k)
    k.add_argument("--p", type=_unit_float, required=True)
    k.add_argument("--t", type=_int_at_least(1), required=True)
    k = kinds.add_parser("rs", help="randomised static split")
    _two_design_flags(k)
    k.add_argument("--p", type=_unit_float, required=True)
    k.add_argument("--t", type=_int_at_least(0), required=True)
    k = kinds.add_parser("two-phase", help="two-phase policy")
    _two_design_flags(k)
    k.add_argument("--alpha0", type=_unit_float, required=True)
    k.add_argument("--t", type=_int_at_least(1), required=True)
    k = kinds.add_parser("density", help="density of the phase-I fraction estimate")
    k.add_argument("--n0", type=_int_at_least(2), required=True)
    k.add_argument("--sigma1", type=_positive_float, required=True)
    k.add_argument("--sigma2", type=_positive_float, required=True)
    k.add_argument("--x", type=float, required=True, help="evaluation point")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("plot", help="SVG chart of a results CSV")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def _config_defaults(parser, path) -> dict:
    """Flag defaults from a flat JSON object keyed by flag names."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    dests = {a.dest: a for a in parser.run_parser._actions
             if a.dest not in ("help", "config", "func")}
    aliases = {"instance": "instances", "no_exhaust": "exhaust_budget", "exhaust": "exhaust_budget"}
    out = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        dest = aliases.get(dest, dest)
        if dest not in dests:
            raise UsageError(f"{path}: unknown key {key!r}")
        if dest == "exhaust_budget" and key.replace("-", "_") == "no_exhaust":
            value = not value
        if isinstance(value, list):
            value = ":".join(map(str, value)) if dest == "budgets" else ",".join(map(str, value))
        if isinstance(value, str) and dests[dest].type is not None:
            try:
                value = dests[dest].type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{path}: bad value for {key!r}: {exc}") from None
        out[dest] = value
    return out


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, format="rslab: %(message)s", level=logging.WARNING)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.INFO)
    try:
        if args.command == "run":
            if args.config:
                defaults = _config_defaults(parser, args.config)
                parser.run_parser.set_defaults(**defaults)
                args = parser.parse_args(argv)
            if isinstance(args.policies, str):
                args.policies = _csv_list(args.policies)
            if isinstance(args.budgets, str):
                args.budgets = _budget_triple(args.budgets)
            if args.seed is None:
                args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"rslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except harness.ResultsParseError as exc:
        print(f"rslab: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (InfeasibleBudget, ValueError, KeyError) as exc:
        print(f"rslab: error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rslab: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
