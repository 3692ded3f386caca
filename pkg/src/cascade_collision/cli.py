"""Command-line front end: ``cascade-collision <subcommand> [flags]``.

Exit status: 0 success or pass, 1 a check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import presets
from .collision import simulate_discrete
from .generator import build_bundle, check_stability, enforce_stability
from .integrator import evolve_me
from .io import LoadedModel, dumps, load_document, matrix_to_json, model_from_document, model_to_document
from .model import DiscreteSpec, validate_model
from .verify import (
    causality_check,
    convergence_study,
    expansion_residual_check,
    invariant_monitor,
    q_term_check,
)

SUBCOMMANDS = (
    "simulate-discrete",
    "simulate-me",
    "build-generator",
    "check-stability",
    "enforce-stability",
    "converge",
    "verify",
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class InputError(Exception):
    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cascade-collision", description="Cascade collision-model simulator.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="JSON model document")
    src.add_argument("--preset", metavar="NAME", help=f"named model: {', '.join(presets.NAMES)}")
    p.add_argument("--output", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--sample-every", type=int, default=10, metavar="N")
    p.add_argument("--t-end", type=float, metavar="T")
    p.add_argument("--dt", type=float, metavar="D")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--damper-p", type=float, default=0.0, metavar="P",
                   help="depolarizing damper strength for the ad-cascade-2 preset")
    p.add_argument("--dt-list", default="4e-3,2e-3,1e-3", metavar="D1,D2,...",
                   help="step sizes for converge")
    p.add_argument("--trials", type=int, default=20, help="random inputs per verification check")
    return p


def load_model(args) -> tuple[dict, LoadedModel]:
    if args.preset is not None:
        kwargs = {"damper_p": args.damper_p} if args.preset == "ad-cascade-2" else {}
        try:
            doc = presets.preset(args.preset, **kwargs)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
    else:
        try:
            doc = load_document(args.config)
        except OSError as exc:
            raise InputError(f"cannot read {args.config}: {exc}") from None
    loaded = model_from_document(doc)
    violations = validate_model(loaded.model)
    if violations:
        report = {"status": "invalid", "violations": [v.to_dict() for v in violations]}
        raise InputError("model failed validation", report)
    return doc, loaded


def _write(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(args, traj) -> None:
    _write(args, traj.csv_text())


def _require_state(loaded: LoadedModel) -> np.ndarray:
    if loaded.initial_state is None:
        raise InputError("$.initial_state: required for simulation")
    rho = loaded.initial_state
    if rho.shape != (loaded.model.dim, loaded.model.dim):
        raise InputError(f"$.initial_state: shape {rho.shape} does not match dimension {loaded.model.dim}")
    return rho


def _discrete_model(args, loaded: LoadedModel):
    model = loaded.model
    spec = model.discrete
    if spec is None and (args.dt is None or args.t_end is None):
        raise InputError("$.discrete: missing; pass --dt and --t-end")
    dt = args.dt if args.dt is not None else spec.dt
    if args.t_end is not None:
        n = int(round(args.t_end / dt))
    elif args.dt is not None:
        n = int(round(spec.n_steps * spec.dt / dt))
    else:
        n = spec.n_steps
    regime = spec.regime if spec is not None else "dissipative"
    g = spec.g if spec is not None else None
    return model.with_(discrete=DiscreteSpec(dt, n, regime, g))


def _me_grid(args, loaded: LoadedModel) -> tuple[float, float]:
    spec = loaded.model.discrete
    dt = args.dt if args.dt is not None else (spec.dt if spec is not None else 1e-3)
    t_end = args.t_end if args.t_end is not None else (spec.n_steps * spec.dt if spec is not None else 1.0)
    return t_end, dt


def bundle_to_dict(bundle, model) -> dict:
    out = {
        "deltas": np.asarray(bundle.deltas).tolist(),
        "h_eff": [matrix_to_json(h) for h in bundle.h_eff],
        "gamma_local": [matrix_to_json(g) for g in bundle.gamma_local],
        "gamma_cross": [
            {"m": m, "m_prime": mp, "matrix": matrix_to_json(g)} for (m, mp), g in sorted(bundle.gamma_cross.items())
        ],
        "rates": [
            {"carrier": m, "rates": [float(r) for r in rates], "lindblad_ops": [matrix_to_json(op) for op in ops]}
            for m, (rates, ops) in enumerate(bundle.rates)
        ],
    }
    if bundle.frame is not None:
        out["frame"] = [matrix_to_json(h) for h in bundle.frame]
    return out


def cmd_simulate_discrete(args, doc, loaded) -> int:
    rho0 = _require_state(loaded)
    model = _discrete_model(args, loaded)
    traj = simulate_discrete(model, rho0, loaded.observables, sample_every=args.sample_every, store_states=False)
    _write_csv(args, traj)
    return EXIT_OK


def cmd_simulate_me(args, doc, loaded) -> int:
    rho0 = _require_state(loaded)
    t_end, dt = _me_grid(args, loaded)
    traj = evolve_me(None, loaded.model, rho0, t_end, dt, loaded.observables,
                     sample_every=args.sample_every, store_states=False)
    _write_csv(args, traj)
    return EXIT_OK


def cmd_build_generator(args, doc, loaded) -> int:
    _write(args, dumps(bundle_to_dict(build_bundle(loaded.model), loaded.model)))
    return EXIT_OK


def cmd_check_stability(args, doc, loaded) -> int:
    report = check_stability(loaded.model)
    _write(args, dumps(report.to_dict()))
    return EXIT_OK if report.satisfied else EXIT_FAIL


def cmd_enforce_stability(args, doc, loaded) -> int:
    new, _ = enforce_stability(loaded.model)
    _write(args, dumps(model_to_document(new, loaded.initial_state, loaded.observables)))
    return EXIT_OK


def _parse_dt_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--dt-list: cannot parse {text!r}") from None
    if len(vals) < 2 or any(v <= 0 for v in vals):
        raise InputError("--dt-list: need at least two positive step sizes")
    return vals


def cmd_converge(args, doc, loaded) -> int:
    rho0 = _require_state(loaded)
    dts = _parse_dt_list(args.dt_list)
    t_end = args.t_end if args.t_end is not None else 1.0
    report = convergence_study(loaded.model, rho0, t_end, dts)
    _write(args, report.to_json())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_verify(args, doc, loaded) -> int:
    """Run every applicable check on the model, each with a seed derived from ``--seed``."""
    model = loaded.model
    seeds = np.random.SeedSequence(args.seed).generate_state(3)
    reports = []
    reports.append(expansion_residual_check(model))
    if model.n_carriers >= 2:
        reports.append(causality_check(None, model, trials=args.trials, seed=int(seeds[0])))
    stable = check_stability(model).satisfied
    if model.has_drift:
        reports.append(q_term_check(model, trials=args.trials, seed=int(seeds[1])))
    if loaded.initial_state is not None:
        rho0 = _require_state(loaded)
        if model.discrete is not None:
            traj = simulate_discrete(model, rho0, sample_every=args.sample_every)
            reports.append(invariant_monitor(traj))
        if stable:
            t_end, dt = _me_grid(args, loaded)
            traj = evolve_me(None, model, rho0, t_end, dt, sample_every=args.sample_every)
            reports.append(invariant_monitor(traj))
    entries = [check_stability(model).to_dict()] + [r.to_dict() for r in reports]
    ok = stable and all(r.passed for r in reports)
    suite = {
        "status": "pass" if ok else "fail",
        "seed": args.seed,
        "stability_satisfied": stable,
        "reports": entries,
    }
    _write(args, json.dumps(suite, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "simulate-discrete": cmd_simulate_discrete,
    "simulate-me": cmd_simulate_me,
    "build-generator": cmd_build_generator,
    "check-stability": cmd_check_stability,
    "enforce-stability": cmd_enforce_stability,
    "converge": cmd_converge,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc, loaded = load_model(args)
        return COMMANDS[args.subcommand](args, doc, loaded)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        if exc.payload is not None:
            sys.stderr.write(json.dumps(exc.payload, indent=2) + "\n")
        return EXIT_INVALID
    except ValueError as exc:  # DocumentError and CascadeError included
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
