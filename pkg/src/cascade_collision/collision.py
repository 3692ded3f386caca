"""Exact discrete-time simulation of the collisional model.

One sub-environment is alive at a time: it is attached in state η, collides
with carriers 0 … M-1 in order (the damper acting after each collision), and
is traced out.  Dropping it immediately is exact for the carrier marginal
because a used sub-environment never meets a carrier again.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import qmath
from .errors import DimensionError, NotUnitaryError, StepIndexError
from .integrator import Recorder, Trajectory, guard_state
from .io import model_digest
from .model import CascadeModel, TimedOperator


@dataclass(frozen=True)
class DiscreteState:
    rho: np.ndarray
    step: int = 0
    time: float = 0.0


class ColumnStepper:
    """Applies column super-operators for a fixed model and coupling strength ``g``.

    Collision unitaries of time-independent models are built once.
    """

    def __init__(self, model: CascadeModel, g: float | None = None, dt: float | None = None):
        if dt is None:
            if model.discrete is None:
                raise ValueError("model has no discrete block; pass dt explicitly")
            dt = model.discrete.dt
        self.model = model
        self.dt = float(dt)
        self.g = float(model.g() if g is None else g)
        self._constant = None if model.is_time_dependent else self._unitaries(0.0)

    def _unitaries(self, t: float) -> list[np.ndarray]:
        model = self.model
        out = []
        for m in range(model.n_carriers):
            h = model.collision_hamiltonian(m, t)
            u = qmath.expm_unitary(h, self.g * self.dt)
            out.append(qmath.embed_factors(u, model.joint_layout, [m, model.n_carriers]))
        return out

    def unitaries(self, step_index: int) -> list[np.ndarray]:
        if step_index < 0:
            raise StepIndexError(f"negative step index {step_index}")
        if self._constant is not None:
            return self._constant
        return self._unitaries(step_index * self.dt)

    def step(self, rho: np.ndarray, step_index: int) -> np.ndarray:
        model = self.model
        d, de = model.dim, model.env_dim
        x = qmath.kron(rho, model.eta)
        kraus = model.damper.kraus
        trivial_damper = len(kraus) == 1 and np.allclose(kraus[0], np.eye(de), atol=0, rtol=0)
        for u in self.unitaries(step_index):
            x = u @ x @ u.conj().T
            if not trivial_damper:
                x4 = x.reshape(d, de, d, de)
                x4 = sum(np.einsum("ca,iajb,db->icjd", k, x4, k.conj()) for k in kraus)
                x = x4.reshape(d * de, d * de)
        rho = np.einsum("iaja->ij", x.reshape(d, de, d, de))
        return guard_state(rho)


def apply_column_step(state: DiscreteState, model: CascadeModel, step_index: int | None = None,
                      g: float | None = None) -> DiscreteState:
    """Advance the carrier state through one column of collisions."""
    rho = np.asarray(state.rho, dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise DimensionError(f"state has shape {rho.shape}, expected ({model.dim}, {model.dim})")
    n = state.step if step_index is None else step_index
    stepper = ColumnStepper(model, g=g)
    new = stepper.step(rho, n)
    return DiscreteState(new, n + 1, (n + 1) * stepper.dt)


def _free_propagator(model: CascadeModel, t: float, dt: float) -> np.ndarray | None:
    if model.free_hamiltonians is None:
        return None
    factors = []
    active = False
    for m, d in enumerate(model.carrier_dims):
        h = model.free_hamiltonian(m, t)
        if h is None:
            factors.append(np.eye(d, dtype=complex))
        else:
            factors.append(qmath.expm_unitary(h, dt))
            active = True
    return qmath.kron_all(factors) if active else None


def simulate_discrete(
    model: CascadeModel,
    rho0,
    observables=None,
    sample_every: int = 1,
    store_states: bool = True,
    n_steps: int | None = None,
    g: float | None = None,
) -> Trajectory:
    """Iterate column steps ``n_steps`` times, sampling every ``sample_every`` steps.

    Local free evolution exp(-i h_m(τ_n) dt) is applied after each column
    when the model carries free Hamiltonians, with τ_n = n·dt.
    """
    if model.discrete is None:
        raise ValueError("simulate_discrete needs a model with a discrete block")
    dt = model.discrete.dt
    n_steps = model.discrete.n_steps if n_steps is None else int(n_steps)
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise DimensionError(f"initial state has shape {rho.shape}, expected ({model.dim}, {model.dim})")
    sample_every = max(1, int(sample_every))
    stepper = ColumnStepper(model, g=g)
    timed_free = model.free_hamiltonians is not None and any(
        isinstance(h, TimedOperator) for h in model.free_hamiltonians
    )
    v_const = None if timed_free else _free_propagator(model, 0.0, dt)

    rec = Recorder(observables, model.dim, store_states=store_states)
    rec.record(0.0, rho)
    for n in range(n_steps):
        rho = stepper.step(rho, n)
        v = _free_propagator(model, n * dt, dt) if timed_free else v_const
        if v is not None:
            rho = guard_state(v @ rho @ v.conj().T)
        if (n + 1) % sample_every == 0 or n + 1 == n_steps:
            rec.record((n + 1) * dt, rho)
    return rec.finish(method="collision", dt=dt, g=stepper.g, regime=model.discrete.regime,
                      model_hash=model_digest(model))


def free_evolution_frame(model: CascadeModel, dt: float, n_steps: int) -> list[TimedOperator | None]:
    """Per-carrier V(τ_k, 0) for k = 0 … n_steps, built from the free Hamiltonians."""
    frames: list[TimedOperator | None] = []
    for m, d in enumerate(model.carrier_dims):
        if model.free_hamiltonians is None or model.free_hamiltonians[m] is None:
            frames.append(None)
            continue
        v = np.eye(d, dtype=complex)
        samples = [v]
        for k in range(n_steps):
            v = qmath.expm_unitary(model.free_hamiltonian(m, k * dt), dt) @ v
            samples.append(v)
        frames.append(TimedOperator(np.array(samples), dt))
    return frames


def drift_frame(model: CascadeModel, g: float, dt: float, n_steps: int) -> list[TimedOperator | None]:
    """Per-carrier V^(k) = Π_j exp(-i g h_m^(j) dt) of a stability-enforced model."""
    frames: list[TimedOperator | None] = []
    for m, d in enumerate(model.carrier_dims):
        if not model.has_drift:
            frames.append(None)
            continue
        v = np.eye(d, dtype=complex)
        samples = [v]
        for k in range(n_steps):
            v = qmath.expm_unitary(model.drift_hamiltonian(m, k * dt), g * dt) @ v
            samples.append(v)
        frames.append(TimedOperator(np.array(samples), dt))
    return frames


def frame_transform(model: CascadeModel, frame) -> CascadeModel:
    """Conjugate carrier operators into the frame: Ā^(k,ℓ)_m = V_m(τ_k)† A^ℓ_m V_m(τ_k).

    ``frame`` holds one :class:`TimedOperator` of unitaries (or ``None`` for the
    identity) per carrier.  The returned model has time-indexed carrier
    operators and no free Hamiltonians; the environment side is untouched.
    """
    if len(frame) != model.n_carriers:
        raise DimensionError(f"frame has {len(frame)} entries for {model.n_carriers} carriers")
    for m, fam in enumerate(frame):
        if fam is None:
            continue
        for k, v in enumerate(fam.samples):
            if not qmath.is_unitary(v, tol=1e-10):
                raise NotUnitaryError(f"frame sample {k} of carrier {m} is not unitary")
    terms = []
    for term in model.coupling:
        timed = []
        for m, fam in enumerate(frame):
            if fam is None:
                timed.append(term.carrier_ops_timed[m] if term.is_timed(m) else None)
                continue
            samples = []
            for k, v in enumerate(fam.samples):
                a = term.carrier_op(m, k * fam.dt)
                samples.append(v.conj().T @ a @ v)
            timed.append(TimedOperator(np.array(samples), fam.dt))
        terms.append(replace(term, carrier_ops_timed=tuple(timed)))
    return replace(model, coupling=tuple(terms), free_hamiltonians=None)


def rotate_state(rho: np.ndarray, frame, model: CascadeModel, t: float) -> np.ndarray:
    """Map a frame state back to the lab: V(t) ρ̄ V(t)† with V = ⊗_m V_m(t)."""
    factors = [
        np.eye(d, dtype=complex) if fam is None else fam.at(t)
        for fam, d in zip(frame, model.carrier_dims)
    ]
    v = qmath.kron_all(factors)
    return v @ rho @ v.conj().T
