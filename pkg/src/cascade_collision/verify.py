"""Claim-checking harness: convergence, unidirectionality, Q-term cancellation,
expansion scaling and state-health monitors.

Every check returns a :class:`VerificationReport`.  All randomness comes from
one ``numpy.random.Generator`` seeded by the caller; the seed is recorded.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .collision import drift_frame, rotate_state, simulate_discrete
from .generator import apply_cross_term, build_bundle
from .integrator import Trajectory, evolve_me
from .io import model_digest
from .model import CascadeModel, DiscreteSpec, GeneratorBundle

SLOPE_BAND = (0.8, 1.2)


@dataclass
class VerificationReport:
    check: str
    status: str
    measured: dict
    tolerances: dict
    inputs_digest: str = ""
    seed: int | None = None
    details: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "measured": _jsonable(self.measured),
            "tolerances": _jsonable(self.tolerances),
            "inputs_digest": self.inputs_digest,
            "seed": self.seed,
            "details": _jsonable(self.details),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _digest(model: CascadeModel | None, **params) -> str:
    h = hashlib.sha256()
    if model is not None:
        h.update(model_digest(model).encode())
    h.update(json.dumps(_jsonable(params), sort_keys=True).encode())
    return h.hexdigest()


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def fit_slope(dts, errors) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(
    model: CascadeModel,
    rho0,
    t_end: float,
    dt_list,
    max_error: float | None = None,
    dt_ref: float | None = None,
    slope_band: tuple[float, float] = SLOPE_BAND,
    sample_every: int = 100,
) -> VerificationReport:
    """Trace distance at ``t_end`` between discrete runs (g = sqrt(γ/dt)) and the ME.

    The ME reference uses RK4 at ``min(dt_list)/10``.  For stability-enforced
    models the reference is rotated into the lab by each run's drift frame.
    The runs (reference first, then by dt descending) are kept in
    ``report.trajectories`` for state-health monitoring.
    """
    dt_list = sorted((float(d) for d in dt_list), reverse=True)
    dt_ref = min(dt_list) / 10 if dt_ref is None else dt_ref
    rho0 = np.asarray(rho0, dtype=complex)
    bundle = build_bundle(model)
    ref_traj = evolve_me(bundle, model, rho0, t_end, dt_ref, sample_every=10 * sample_every)
    ref = ref_traj.final_state
    trajectories = [ref_traj]

    errors = []
    for dt in dt_list:
        n = int(round(t_end / dt))
        run_model = model.with_(discrete=DiscreteSpec(dt, n, "dissipative"))
        g = math.sqrt(model.gamma / dt)
        traj = simulate_discrete(run_model, rho0, sample_every=sample_every)
        trajectories.append(traj)
        final = traj.final_state
        target = ref
        if model.has_drift:
            target = rotate_state(ref, drift_frame(model, g, dt, n), model, n * dt)
        errors.append(qmath.trace_distance(final, target))

    measured = {"dt": dt_list, "errors": errors, "dt_ref": dt_ref}
    tolerances = {"slope_band": list(slope_band)}
    ok = True
    if max(errors) <= 1e-10:
        measured["slope"] = None
        measured["slope_skipped"] = True
    else:
        slope = fit_slope(dt_list, errors)
        measured["slope"] = slope
        ok = slope_band[0] <= slope <= slope_band[1]
    if max_error is not None:
        tolerances["max_error_at_min_dt"] = max_error
        ok = ok and errors[-1] <= max_error
    return VerificationReport(
        "convergence_study", _status(ok), measured, tolerances,
        _digest(model, t_end=t_end, dt_list=dt_list, dt_ref=dt_ref, rho0=rho0),
        trajectories=trajectories,
    )


def causality_check(bundle: GeneratorBundle | None, model: CascadeModel, trials: int = 20, seed: int = 0,
                    tol: float = 1e-12) -> VerificationReport:
    """Tr over the later carrier of every cross term must vanish on random Hermitian inputs.

    Also reports the residual of the trace over the earlier carrier, which
    vanishes only in the decoupled (real cross-coefficient) case.
    """
    if model.n_carriers < 2:
        raise ValueError("causality_check needs at least two carriers")
    bundle = build_bundle(model) if bundle is None else bundle
    rng = np.random.default_rng(seed)
    n = model.n_carriers
    forward = 0.0
    backward = 0.0
    per_pair = {}
    for _ in range(trials):
        x = qmath.random_hermitian(rng, model.dim)
        for m in range(n):
            for mp in range(m + 1, n):
                out = apply_cross_term(bundle, model, m, mp, x)
                keep_f = [k for k in range(n) if k != mp]
                keep_b = [k for k in range(n) if k != m]
                f = float(np.max(np.abs(qmath.partial_trace(out, model.layout, keep_f))))
                b = float(np.max(np.abs(qmath.partial_trace(out, model.layout, keep_b))))
                forward = max(forward, f)
                backward = max(backward, b)
                key = f"{m},{mp}"
                prev = per_pair.get(key, (0.0, 0.0))
                per_pair[key] = (max(prev[0], f), max(prev[1], b))
    measured = {
        "forward_residual": forward,
        "backward_residual": backward,
        "decoupled": backward <= tol,
        "pairs": {k: {"forward": v[0], "backward": v[1]} for k, v in per_pair.items()},
    }
    return VerificationReport(
        "causality_check", _status(forward <= tol), measured, {"forward_residual": tol},
        _digest(model, trials=trials), seed,
    )


def q_term_check(model: CascadeModel, trials: int = 20, seed: int = 0, g: float | None = None,
                 drift=None, tol: float = 1e-12) -> VerificationReport:
    """Environment trace of the time-ordering correction [Q, x ⊗ M^m(η)], Q = i g [h_m, ΔH_m].

    ``ΔH_m`` is built from the model's (carrier-indexed) environment operators
    without the drift part.  ``drift`` overrides the per-carrier h_m; by
    default the model's enforcement drift is used.
    """
    if g is None:
        g = model.g() if model.discrete is not None else 1.0
    rng = np.random.default_rng(seed)
    de = model.env_dim
    worst = 0.0
    per_carrier = []
    for m in range(model.n_carriers):
        h = model.drift_hamiltonian(m) if drift is None else np.asarray(drift[m], dtype=complex)
        dm = model.carrier_dims[m]
        dh = sum(qmath.kron(model.carrier_op(m, ell), model.env_op(m, ell)) for ell in range(model.n_terms))
        hfull = qmath.kron(h, np.eye(de))
        q = 1j * g * (hfull @ dh - dh @ hfull)
        xi = model.env_states[m]
        layout = qmath.SpaceLayout((dm, de))
        res = 0.0
        for _ in range(trials):
            x = qmath.random_density(rng, dm)
            state = qmath.kron(x, xi)
            comm = q @ state - state @ q
            res = max(res, float(np.max(np.abs(qmath.partial_trace(comm, layout, [0])))))
        per_carrier.append(res)
        worst = max(worst, res)
    return VerificationReport(
        "q_term_check", _status(worst <= tol),
        {"residual": worst, "per_carrier": per_carrier, "g": g},
        {"residual": tol}, _digest(model, trials=trials, g=g), seed,
    )


def expansion_residual(h: np.ndarray, s: float) -> float:
    """‖exp(-i s h) - (I - i s h - s² h²/2)‖_F."""
    u = qmath.expm_unitary(h, s)
    approx = np.eye(h.shape[0]) - 1j * s * h - 0.5 * s * s * (h @ h)
    return float(np.linalg.norm(u - approx))


def expansion_residual_check(model: CascadeModel, dt_pair=(1e-2, 5e-3), g: float = 1.0, carrier: int = 0,
                             rel_band: float = 0.3) -> VerificationReport:
    """Third-order scaling of the second-order truncation of a collision unitary."""
    dt1, dt2 = (float(d) for d in dt_pair)
    h = model.collision_hamiltonian(carrier)
    r1 = expansion_residual(h, g * dt1)
    r2 = expansion_residual(h, g * dt2)
    expected = (dt1 / dt2) ** 3
    band = [expected * (1 - rel_band), expected * (1 + rel_band)]
    measured = {"residuals": [r1, r2], "g_dt": [g * dt1, g * dt2]}
    if not np.any(h):
        measured["ratio"] = None
        measured["skipped"] = True
        ok = True
    else:
        ratio = r1 / r2
        measured["ratio"] = ratio
        ok = band[0] <= ratio <= band[1]
    return VerificationReport(
        "expansion_residual_check", _status(ok), measured, {"ratio_band": band},
        _digest(model, dt_pair=[dt1, dt2], g=g, carrier=carrier),
    )


def invariant_monitor(trajectory: Trajectory, trace_tol: float = 1e-9, herm_tol: float = 1e-9,
                      min_eig_tol: float = -1e-7) -> VerificationReport:
    """Trace, Hermiticity and positivity of every stored snapshot."""
    states = trajectory.states or []
    trace_err = 0.0
    herm = 0.0
    min_eig = math.inf
    for rho in states:
        trace_err = max(trace_err, float(abs(np.trace(rho) - 1.0)))
        herm = max(herm, qmath.hermiticity_residual(rho))
        min_eig = min(min_eig, qmath.min_eigenvalue(rho))
    measured = {"snapshots": len(states), "trace_error": trace_err, "hermiticity": herm,
                "min_eigenvalue": min_eig if states else None}
    ok = trace_err <= trace_tol and herm <= herm_tol and (not states or min_eig >= min_eig_tol)
    if not states:
        measured["skipped"] = True
    return VerificationReport(
        "invariant_monitor", _status(ok), measured,
        {"trace_error": trace_tol, "hermiticity": herm_tol, "min_eigenvalue": min_eig_tol},
        _digest(None, times=list(trajectory.times)),
    )
