"""Fixed-step RK4 integration of the cascade master equation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import qmath
from .errors import DimensionError, StabilityViolated
from .generator import CascadeGenerator, build_bundle, check_stability, require_commuting_frame
from .io import model_digest
from .model import CascadeModel, GeneratorBundle

log = logging.getLogger(__name__)

TRACE_RENORM_TOL = 1e-12
POSITIVITY_TOL = 1e-7


@dataclass
class Trajectory:
    times: np.ndarray
    expectations: dict[str, np.ndarray]
    states: list[np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray | None:
        return None if not self.states else self.states[-1]

    def csv_text(self) -> str:
        """Header ``time,<labels>`` then one row per sample, 17 significant digits."""
        labels = list(self.expectations)
        lines = [",".join(["time"] + labels)]
        for i, t in enumerate(self.times):
            row = [format(float(t), ".17g")]
            row += [format(float(self.expectations[k][i]), ".17g") for k in labels]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.csv_text())


def normalize_observables(observables) -> list[tuple[str, np.ndarray]]:
    """Accept a mapping, a list of (label, matrix) pairs, or bare matrices."""
    if observables is None:
        return []
    if isinstance(observables, Mapping):
        return [(str(k), np.asarray(v, dtype=complex)) for k, v in observables.items()]
    out = []
    for i, item in enumerate(observables):
        if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], str):
            out.append((item[0], np.asarray(item[1], dtype=complex)))
        else:
            out.append((f"O{i}", np.asarray(item, dtype=complex)))
    return out


class Recorder:
    """Collects samples of a run: times, expectations, optional snapshots, positivity warnings."""

    def __init__(self, observables, dim: int, store_states: bool = True, check_positivity: bool = True):
        self.observables = normalize_observables(observables)
        for label, o in self.observables:
            if o.shape != (dim, dim):
                raise DimensionError(f"observable {label!r} has shape {o.shape}, expected ({dim}, {dim})")
        self.store_states = store_states
        self.check_positivity = check_positivity
        self.times: list[float] = []
        self.values: dict[str, list[float]] = {label: [] for label, _ in self.observables}
        self.states: list[np.ndarray] = []
        self.warnings: list[str] = []

    def record(self, t: float, rho: np.ndarray) -> None:
        self.times.append(t)
        for label, o in self.observables:
            self.values[label].append(float(np.real(np.trace(o @ rho))))
        if self.store_states:
            self.states.append(rho.copy())
        if self.check_positivity:
            lam = qmath.min_eigenvalue(rho)
            if lam < -POSITIVITY_TOL:
                self.warnings.append(f"t={t!r}: min eigenvalue {lam:.3e}")

    def finish(self, **metadata) -> Trajectory:
        md = dict(metadata)
        md["warnings"] = list(self.warnings)
        return Trajectory(
            times=np.array(self.times),
            expectations={k: np.array(v) for k, v in self.values.items()},
            states=self.states if self.store_states else None,
            metadata=md,
        )


def guard_state(rho: np.ndarray) -> np.ndarray:
    """Hermitize; renormalize the trace only when it drifted by more than 1e-12."""
    rho = qmath.hermitize(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_RENORM_TOL:
        rho = rho / tr
    return rho


def rk4_step(generator: Callable[[np.ndarray, float], np.ndarray], rho: np.ndarray, t: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = generator(rho, t)
    k2 = generator(rho + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = generator(rho + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = generator(rho + dt * k3, t + dt)
    return guard_state(rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def evolve_me(
    bundle: GeneratorBundle | None,
    model: CascadeModel,
    rho0,
    t_end: float,
    dt: float,
    observables=None,
    sample_every: int = 1,
    store_states: bool = True,
) -> Trajectory:
    """Integrate the cascade master equation from ``rho0`` up to ``t_end``.

    Stability-enforced models are integrated in their drift frame, which is
    only supported when the drift commutes with the coupling operators.
    Time-indexed operators are frozen at the left endpoint of each step.
    """
    report = check_stability(model)
    if not report.satisfied:
        m, ell, val = report.worst
        raise StabilityViolated(
            f"stability condition violated at carrier {m}, term {ell} (|delta| = {val:.3e}); "
            "enforce stability first"
        )
    require_commuting_frame(model)
    if bundle is None:
        bundle = build_bundle(model)
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise DimensionError(f"initial state has shape {rho.shape}, expected ({model.dim}, {model.dim})")
    n_steps = int(round(t_end / dt))
    if not math.isclose(n_steps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    sample_every = max(1, int(sample_every))

    gen = CascadeGenerator(bundle, model)
    rec = Recorder(observables, model.dim, store_states=store_states)
    rec.record(0.0, rho)
    for n in range(n_steps):
        t = n * dt
        rho = rk4_step(lambda x, _s, t=t: gen(x, t), rho, t, dt)
        if (n + 1) % sample_every == 0 or n + 1 == n_steps:
            rec.record((n + 1) * dt, rho)
    if rec.warnings:
        log.warning("positivity warnings during ME integration: %d", len(rec.warnings))
    return rec.finish(method="rk4", dt=dt, frame="drift" if model.has_drift else "lab",
                      model_hash=model_digest(model))

