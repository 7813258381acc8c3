"""Command-line front end: reproducible experiments over the bundled
fixtures with CSV/JSON output.

Every command is a pure function of its (seeded) configuration; outputs
embed the seed and a hash of the effective config so runs can be audited
and replayed.  Exit codes: 0 success, 1 invariant or assertion failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import fixtures
from .core import (
    InvariantViolation,
    QuantumState,
    born_probabilities,
    pauli_eigenstates,
    povm_from_document,
)
from .noisy_device import NoiseModel, compare_schemes, load_experiment_plan
from .simulation import postselection_scheme, sample_postselection
from .tomography import operational_distance
from .usd import (
    ensemble_from_document,
    usd_advantage_bound,
    random_ensemble_experiment,
    symmetric_ensemble_from_gap,
)

SCHEMA_VERSION = 1

STATE_NAMES = ("zero", "one", "x+", "x-", "y+", "y-", "mixed")


def _state_by_name(name: str, dim: int) -> QuantumState:
    if name == "mixed":
        return QuantumState.maximally_mixed(dim)
    if dim != 2:
        if name == "zero":
            return QuantumState.basis_state(dim, 0)
        raise ValueError(f"named state {name!r} is qubit-only")
    table = dict(zip(("zero", "one", "x+", "x-", "y+", "y-"), pauli_eigenstates()))
    if name not in table:
        raise ValueError(f"unknown state {name!r}; available: {', '.join(STATE_NAMES)}")
    return table[name]


def _resolve_povm(args):
    if getattr(args, "povm_file", None):
        with open(args.povm_file) as f:
            return povm_from_document(json.load(f)), os.path.basename(args.povm_file)
    name = args.povm
    if name is None:
        raise UsageError("a POVM fixture name is required (--povm)")
    try:
        return fixtures.ideal_povm(name), name
    except KeyError:
        raise UsageError(f"unknown fixture {name!r}; "
                         f"available: {', '.join(fixtures.fixture_names())}")


class UsageError(Exception):
    pass


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _emit(payload: dict, config: dict, args) -> None:
    payload = {"schema_version": SCHEMA_VERSION,
               "config": config,
               "config_hash": _config_hash(config),
               **payload}
    fmt = getattr(args, "format", "json") or "json"
    if fmt == "json":
        text = json.dumps(payload, indent=2, default=_jsonable)
    elif fmt == "csv":
        text = _payload_csv(payload)
    else:
        raise UsageError(f"unknown format {fmt!r}")
    out = getattr(args, "out", None)
    if out:
        out_dir = os.environ.get("POVMSIM_OUTPUT_DIR", "")
        path = out if os.path.isabs(out) or not out_dir else os.path.join(out_dir, out)
        with open(path, "w") as f:
            f.write(text + "\n")
        print(f"wrote {path}")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def _payload_csv(payload: dict) -> str:
    rows = payload.get("rows")
    if not rows:
        raise UsageError("this payload has no tabular rows; use --format json")
    buf = io.StringIO()
    writer = csv.writer(buf)
    meta = {k: v for k, v in payload.items() if k not in ("rows", "config")}
    for key, value in meta.items():
        buf.write(f"# {key}: {json.dumps(value, default=_jsonable)}\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow([row[k] for k in rows[0].keys()])
    return buf.getvalue().rstrip("\n")


def cmd_simulate(args) -> int:
    povm, povm_name = _resolve_povm(args)
    state = _state_by_name(args.state, povm.dim)
    scheme = postselection_scheme(povm)
    record = sample_postselection(scheme, state, args.shots, args.seed)
    oracle = born_probabilities(state, povm)
    freqs = record.conditional_frequencies()
    rows = [{"outcome": povm.labels[i],
             "frequency": float(freqs[i]),
             "born_probability": float(oracle[i]),
             "deviation": float(freqs[i] - oracle[i])}
            for i in range(povm.n_outcomes)]
    config = {"command": "simulate", "povm": povm_name, "state": args.state,
              "shots": args.shots, "seed": args.seed}
    _emit({"rows": rows,
           "success_rate": record.success_rate,
           "expected_success_rate": scheme.success_probability,
           "seed": args.seed}, config, args)
    return 0


def cmd_usd(args) -> int:
    if args.symmetric:
        d, epsilon = int(args.symmetric[0]), float(args.symmetric[1])
        if not 0 < epsilon < 1:
            raise UsageError("epsilon must be in (0, 1) so the symmetric states "
                             "stay pairwise non-orthogonal")
        ensemble = symmetric_ensemble_from_gap(d, epsilon)
        bound = usd_advantage_bound(ensemble)
        rows = [{"d": d, "epsilon": epsilon,
                 "p_povm": ensemble.exact_optimum,
                 "p_sp": bound.p_sp,
                 "ratio": ensemble.exact_optimum / bound.p_sp,
                 "ratio_lower_band": d * (1 - epsilon),
                 "ratio_upper_band": float(d),
                 "bound_ok": bound.bound_ok}]
        config = {"command": "usd", "symmetric": [d, epsilon], "seed": args.seed}
        _emit({"rows": rows, "seed": args.seed}, config, args)
        return 0
    if args.random:
        d, space_dim = int(args.random[0]), int(args.random[1])
        experiment = random_ensemble_experiment(d, space_dim, args.trials, args.seed)
        config = {"command": "usd", "random": [d, space_dim],
                  "trials": args.trials, "seed": args.seed}
        _emit({"rows": experiment.rows,
               "mean_lambda_min": experiment.mean_lambda_min,
               "std_lambda_min": experiment.std_lambda_min,
               "band_ok": experiment.band_ok,
               "seed": args.seed}, config, args)
        return 0
    if args.ensemble:
        with open(args.ensemble) as f:
            ensemble = ensemble_from_document(json.load(f))
        bound = usd_advantage_bound(ensemble)
        rows = [{"n_states": ensemble.n_states, "dim": ensemble.space_dim,
                 "p_povm_lower": bound.p_povm_lower, "p_sp": bound.p_sp,
                 "ratio": bound.ratio, "bound_ok": bound.bound_ok}]
        config = {"command": "usd", "ensemble": args.ensemble, "seed": args.seed}
        _emit({"rows": rows, "seed": args.seed}, config, args)
        return 0
    raise UsageError("choose one of --symmetric, --random, --ensemble")


def cmd_compare(args) -> int:
    if args.plan:
        with open(args.plan) as f:
            plan = load_experiment_plan(json.load(f))
        povm = fixtures.ideal_povm(plan.povm_fixture)
        povm_name, noise = plan.povm_fixture, plan.noise
        shots, seed = plan.shots, plan.seed
        noise_label = {"noise.cnot": noise.cnot_depolarizing,
                       "noise.su2": noise.su2_depolarizing,
                       "noise.readout_bias": noise.readout_bias}
    else:
        povm, povm_name = _resolve_povm(args)
        try:
            noise = NoiseModel.preset(args.noise)
        except KeyError as err:
            raise UsageError(str(err).strip('"'))
        shots, seed, noise_label = args.shots, args.seed, args.noise
    result = compare_schemes(povm, noise, shots, seed)
    rows = [{"povm": povm_name,
             "naimark": result.d_op_naimark,
             "our_scheme": result.d_op_postselection,
             "postselection_fraction": result.postselection_fraction,
             "naimark_residual_mass": result.naimark_residual_mass}]
    config = {"command": "compare", "povm": povm_name, "noise": noise_label,
              "shots": shots, "seed": seed}
    _emit({"rows": rows, "seed": seed}, config, args)
    return 0


def table1_rows() -> list[dict]:
    """Operational distances between bundled ideals and reconstructions."""
    rows = []
    for name, label in (("tetrahedral", "Tetrahedral"), ("trine", "Trine"),
                        ("random4", "Random 4-effect")):
        ideal = fixtures.ideal_povm(name)
        rows.append({
            "povm": label,
            "naimark": operational_distance(ideal, fixtures.reconstruction(name, "naimark")),
            "our_scheme": operational_distance(ideal, fixtures.reconstruction(name, "postselection")),
        })
    return rows


def cmd_table1(args) -> int:
    config = {"command": "table1"}
    _emit({"rows": table1_rows()}, config, args)
    return 0


def cmd_fixtures(args) -> int:
    config = {"command": "fixtures"}
    _emit({"rows": [{"name": n} for n in fixtures.fixture_names()]}, config, args)
    return 0


def _apply_config_file(args, parser) -> None:
    """Values from --config override the command-line flags."""
    path = getattr(args, "config", None)
    if not path:
        return
    with open(path) as f:
        overrides = json.load(f)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            parser.error(f"config key {key!r} does not match any option")
        setattr(args, attr, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="povmsim",
        description="Generalized-measurement simulation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file (relative paths use POVMSIM_OUTPUT_DIR)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--config", help="JSON config file; overrides flags")

    p = sub.add_parser("simulate", help="sample the postselection protocol")
    p.add_argument("--povm", help="fixture name")
    p.add_argument("--povm-file", help="POVM JSON document")
    p.add_argument("--state", default="zero", choices=STATE_NAMES)
    p.add_argument("--shots", type=int, default=100_000)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("usd", help="state-discrimination bound experiments")
    p.add_argument("--symmetric", nargs=2, metavar=("D", "EPSILON"))
    p.add_argument("--random", nargs=2, metavar=("D", "DIM"))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--ensemble", help="ensemble JSON document")
    common(p)
    p.set_defaults(func=cmd_usd)

    p = sub.add_parser("compare", help="noisy postselection-vs-Naimark comparison")
    p.add_argument("--povm", help="fixture name")
    p.add_argument("--povm-file", help="POVM JSON document")
    p.add_argument("--noise", default="ibmx4-like")
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--plan", help="experiment plan JSON (noise.* keys override everything)")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("table1", help="recompute distances from bundled reconstructions")
    common(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("fixtures", help="list bundled fixture names")
    common(p)
    p.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, parser)
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (InvariantViolation, AssertionError) as err:
        print(f"invariant failure: {err}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
