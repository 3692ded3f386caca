"""Problem description for cascade collisional models, plus validation.

Carrier indices are 0-based in this package: carrier ``m`` sees the
sub-environment after ``m`` damper applications, i.e. in state M^m(η).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import qmath
from .errors import DimensionError, StepIndexError

TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TimedOperator:
    """Operator family sampled on a uniform grid, piecewise constant from the left.

    Sample ``k`` holds on ``[k*dt, (k+1)*dt)``.  A single sample with
    ``dt = inf`` is a constant operator.
    """

    samples: np.ndarray
    dt: float = math.inf

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise DimensionError(f"timed operator samples must be (K, d, d), got {s.shape}")
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def index_at(self, t: float) -> int:
        if math.isinf(self.dt):
            return 0
        k = int(math.floor(t / self.dt + 1e-9))
        if k < 0 or k >= len(self.samples):
            raise StepIndexError(
                f"time {t} falls outside the sampled range [0, {len(self.samples) * self.dt})"
            )
        return k

    def at(self, t: float) -> np.ndarray:
        return self.samples[self.index_at(t)]


def op_at(op, t: float) -> np.ndarray:
    if isinstance(op, TimedOperator):
        return op.at(t)
    return op


@dataclass(frozen=True, eq=False)
class CouplingTerm:
    """One term A_1⊗B + … of the collision Hamiltonian, one carrier operator per carrier.

    ``env_ops_by_carrier`` overrides ``env_op`` per carrier; it is how a
    stability-enforced model stores its shifted environment operators.
    ``carrier_ops_timed`` (per carrier, ``None`` entries allowed) overrides
    ``carrier_ops`` for non-uniform couplings.
    """

    carrier_ops: tuple[np.ndarray, ...]
    env_op: np.ndarray
    env_ops_by_carrier: tuple[np.ndarray, ...] | None = None
    carrier_ops_timed: tuple[TimedOperator | None, ...] | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "carrier_ops", tuple(np.asarray(a, dtype=complex) for a in self.carrier_ops))
        object.__setattr__(self, "env_op", np.asarray(self.env_op, dtype=complex))
        if self.env_ops_by_carrier is not None:
            object.__setattr__(
                self, "env_ops_by_carrier",
                tuple(np.asarray(b, dtype=complex) for b in self.env_ops_by_carrier),
            )
        if self.carrier_ops_timed is not None:
            object.__setattr__(self, "carrier_ops_timed", tuple(self.carrier_ops_timed))

    def env_op_for(self, m: int) -> np.ndarray:
        if self.env_ops_by_carrier is not None:
            return self.env_ops_by_carrier[m]
        return self.env_op

    def carrier_op(self, m: int, t: float = 0.0) -> np.ndarray:
        if self.carrier_ops_timed is not None and self.carrier_ops_timed[m] is not None:
            return self.carrier_ops_timed[m].at(t)
        return self.carrier_ops[m]

    def is_timed(self, m: int) -> bool:
        return self.carrier_ops_timed is not None and self.carrier_ops_timed[m] is not None


@dataclass(frozen=True, eq=False)
class DamperMap:
    """CPTP map on the sub-environment, given by Kraus operators."""

    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "kraus", tuple(np.asarray(k, dtype=complex) for k in self.kraus))

    @classmethod
    def identity(cls, d: int) -> "DamperMap":
        return cls((np.eye(d, dtype=complex),))

    @classmethod
    def depolarizing(cls, d: int, p: float) -> "DamperMap":
        """x -> (1-p) x + p Tr(x) I/d, written with generalized Pauli (clock/shift) Kraus ops."""
        shift = np.roll(np.eye(d), 1, axis=0)
        clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
        ops = [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
               for a in range(d) for b in range(d)]
        w = [1 - p + p / d**2] + [p / d**2] * (d * d - 1)
        return cls(tuple(math.sqrt(wk) * op for wk, op in zip(w, ops)))

    def completeness_residual(self) -> float:
        d = self.kraus[0].shape[1]
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(d))))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return qmath.apply_kraus(self.kraus, x)

    def power(self, x: np.ndarray, k: int) -> np.ndarray:
        for _ in range(k):
            x = self.apply(x)
        return x


@dataclass(frozen=True)
class DiscreteSpec:
    dt: float
    n_steps: int
    regime: str = "dissipative"
    g: float | None = None

    def coupling_strength(self, gamma: float) -> float:
        if self.regime == "dissipative":
            return math.sqrt(gamma / self.dt)
        if self.g is None:
            raise ValueError("unitary-limit regime needs an explicit g")
        return self.g


@dataclass(frozen=True, eq=False)
class CascadeModel:
    """Full description of a cascade collisional model.

    ``drift_weights`` is set by stability enforcement: carrier ``m`` then
    carries the local collision term Σ_ℓ w[m, ℓ] A_m^ℓ ⊗ I_E on top of the
    (shifted) coupling, so the collision unitaries equal those of the
    original model.
    """

    carrier_dims: tuple[int, ...]
    env_dim: int
    eta: np.ndarray
    coupling: tuple[CouplingTerm, ...]
    damper: DamperMap
    gamma: float = 1.0
    free_hamiltonians: tuple[TimedOperator | np.ndarray | None, ...] | None = None
    discrete: DiscreteSpec | None = None
    drift_weights: np.ndarray | None = None
    carrier_labels: tuple[str, ...] = ()
    env_label: str = "E"

    def __post_init__(self):
        object.__setattr__(self, "carrier_dims", tuple(int(d) for d in self.carrier_dims))
        object.__setattr__(self, "env_dim", int(self.env_dim))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=complex))
        object.__setattr__(self, "coupling", tuple(self.coupling))
        if self.free_hamiltonians is not None:
            object.__setattr__(self, "free_hamiltonians", tuple(self.free_hamiltonians))
        if self.drift_weights is not None:
            object.__setattr__(self, "drift_weights", np.asarray(self.drift_weights, dtype=float))
        if not self.carrier_labels:
            object.__setattr__(
                self, "carrier_labels", tuple(f"S{m + 1}" for m in range(len(self.carrier_dims)))
            )

    @property
    def n_carriers(self) -> int:
        return len(self.carrier_dims)

    @property
    def n_terms(self) -> int:
        return len(self.coupling)

    @property
    def dim(self) -> int:
        return int(np.prod(self.carrier_dims))

    @cached_property
    def layout(self) -> qmath.SpaceLayout:
        return qmath.SpaceLayout(self.carrier_dims, self.carrier_labels)

    @cached_property
    def joint_layout(self) -> qmath.SpaceLayout:
        return qmath.SpaceLayout(
            self.carrier_dims + (self.env_dim,), self.carrier_labels + (self.env_label,)
        )

    @cached_property
    def env_states(self) -> tuple[np.ndarray, ...]:
        """M^m(η) for m = 0 … n_carriers-1."""
        states = [self.eta]
        for _ in range(1, self.n_carriers):
            states.append(self.damper.apply(states[-1]))
        return tuple(states)

    @property
    def is_time_dependent(self) -> bool:
        timed = any(c.is_timed(m) for c in self.coupling for m in range(self.n_carriers))
        if self.free_hamiltonians is not None:
            timed = timed or any(isinstance(h, TimedOperator) for h in self.free_hamiltonians)
        return timed

    @property
    def has_drift(self) -> bool:
        return self.drift_weights is not None and bool(np.any(self.drift_weights != 0))

    def g(self) -> float:
        if self.discrete is None:
            raise ValueError("model has no discrete block")
        return self.discrete.coupling_strength(self.gamma)

    def carrier_op(self, m: int, ell: int, t: float = 0.0) -> np.ndarray:
        return self.coupling[ell].carrier_op(m, t)

    def env_op(self, m: int, ell: int) -> np.ndarray:
        return self.coupling[ell].env_op_for(m)

    def drift_hamiltonian(self, m: int, t: float = 0.0) -> np.ndarray:
        h = np.zeros((self.carrier_dims[m],) * 2, dtype=complex)
        if self.drift_weights is not None:
            for ell in range(self.n_terms):
                w = self.drift_weights[m, ell]
                if w != 0:
                    h = h + w * self.carrier_op(m, ell, t)
        return h

    def free_hamiltonian(self, m: int, t: float = 0.0) -> np.ndarray | None:
        if self.free_hamiltonians is None or self.free_hamiltonians[m] is None:
            return None
        return op_at(self.free_hamiltonians[m], t)

    def collision_hamiltonian(self, m: int, t: float = 0.0) -> np.ndarray:
        """H_{S_m,E} on S_m⊗E (carrier factor left), including any enforcement drift."""
        h = np.zeros((self.carrier_dims[m] * self.env_dim,) * 2, dtype=complex)
        for ell in range(self.n_terms):
            h += qmath.kron(self.carrier_op(m, ell, t), self.env_op(m, ell))
        if self.has_drift:
            h += qmath.kron(self.drift_hamiltonian(m, t), np.eye(self.env_dim))
        return h

    def embedded_carrier_ops(self, t: float = 0.0) -> list[list[np.ndarray]]:
        """A_m^ℓ(t) lifted to the joint carrier space, indexed [m][ℓ]."""
        if not self.is_time_dependent:
            return self._embedded_constant
        return self._embed_at(t)

    @cached_property
    def _embedded_constant(self) -> list[list[np.ndarray]]:
        return self._embed_at(0.0)

    def _embed_at(self, t: float) -> list[list[np.ndarray]]:
        return [
            [qmath.embed(self.carrier_op(m, ell, t), self.layout, m) for ell in range(self.n_terms)]
            for m in range(self.n_carriers)
        ]

    def with_(self, **changes) -> "CascadeModel":
        return replace(self, **changes)

    def restrict(self, k: int) -> "CascadeModel":
        """Model of the first ``k`` carriers only."""
        if not 1 <= k <= self.n_carriers:
            raise IndexError(f"cannot restrict {self.n_carriers} carriers to {k}")
        terms = tuple(
            replace(
                c,
                carrier_ops=c.carrier_ops[:k],
                env_ops_by_carrier=None if c.env_ops_by_carrier is None else c.env_ops_by_carrier[:k],
                carrier_ops_timed=None if c.carrier_ops_timed is None else c.carrier_ops_timed[:k],
            )
            for c in self.coupling
        )
        return replace(
            self,
            carrier_dims=self.carrier_dims[:k],
            coupling=terms,
            free_hamiltonians=None if self.free_hamiltonians is None else self.free_hamiltonians[:k],
            drift_weights=None if self.drift_weights is None else self.drift_weights[:k],
            carrier_labels=self.carrier_labels[:k],
        )


@dataclass(frozen=True, eq=False)
class GeneratorBundle:
    """Precomputed coefficients of the continuous-limit cascade generator."""

    deltas: np.ndarray
    h_eff: tuple[np.ndarray, ...]
    gamma_local: tuple[np.ndarray, ...]
    gamma_cross: dict[tuple[int, int], np.ndarray]
    rates: tuple[tuple[np.ndarray, tuple[np.ndarray, ...]], ...]
    frame: tuple[np.ndarray, ...] | None = None


@dataclass(frozen=True)
class Violation:
    code: str
    residual: float
    message: str = ""
    where: str = ""

    def to_dict(self) -> dict:
        residual = None if math.isnan(self.residual) else self.residual
        return {"code": self.code, "residual": residual, "message": self.message, "where": self.where}


def _check_operator(op, dim: int, where: str, out: list[Violation]) -> None:
    op = np.asarray(op)
    if op.shape != (dim, dim):
        out.append(Violation("DIM_MISMATCH", float("nan"), f"expected ({dim}, {dim}), got {op.shape}", where))
        return
    res = qmath.hermiticity_residual(op)
    if res > TOL:
        out.append(Violation("NON_HERMITIAN", res, "operator is not Hermitian", where))


def validate_model(model: CascadeModel) -> list[Violation]:
    """Every violated model invariant, with its numeric residual.  Empty means valid."""
    out: list[Violation] = []
    n = model.n_carriers
    de = model.env_dim
    if n < 1:
        out.append(Violation("NO_CARRIERS", float(n), "model needs at least one carrier"))
    if any(d < 1 for d in model.carrier_dims) or de < 1:
        out.append(Violation("DIM_MISMATCH", float("nan"), "dimensions must be positive"))
        return out

    eta = model.eta
    if eta.shape != (de, de):
        out.append(Violation("DIM_MISMATCH", float("nan"), f"eta has shape {eta.shape}", "eta"))
    else:
        res = qmath.hermiticity_residual(eta)
        if res > TOL:
            out.append(Violation("ETA_NOT_HERMITIAN", res, "eta is not Hermitian", "eta"))
        else:
            tr = abs(np.trace(eta) - 1.0)
            if tr > TOL:
                out.append(Violation("ETA_TRACE", float(tr), "eta does not have unit trace", "eta"))
            lam = qmath.min_eigenvalue(eta)
            if lam < -TOL:
                out.append(Violation("ETA_NOT_PSD", float(-lam), "eta has a negative eigenvalue", "eta"))

    kraus = model.damper.kraus
    if not kraus or any(k.shape != (de, de) for k in kraus):
        out.append(Violation("DIM_MISMATCH", float("nan"), "Kraus operators must be env_dim square", "damper"))
    else:
        res = model.damper.completeness_residual()
        if res > TOL:
            out.append(Violation("KRAUS_INCOMPLETE", res, "sum of K^dag K differs from identity", "damper"))

    for ell, term in enumerate(model.coupling):
        if len(term.carrier_ops) != n:
            out.append(Violation(
                "TERM_COUNT", float(len(term.carrier_ops)),
                f"term {ell} has {len(term.carrier_ops)} carrier operators for {n} carriers",
                f"coupling[{ell}]",
            ))
            continue
        for m, a in enumerate(term.carrier_ops):
            _check_operator(a, model.carrier_dims[m], f"coupling[{ell}].carrier_ops[{m}]", out)
        if term.env_ops_by_carrier is not None:
            if len(term.env_ops_by_carrier) != n:
                out.append(Violation("TERM_COUNT", float(len(term.env_ops_by_carrier)),
                                     "env_ops_by_carrier needs one operator per carrier", f"coupling[{ell}]"))
            for m, b in enumerate(term.env_ops_by_carrier):
                _check_operator(b, de, f"coupling[{ell}].env_ops_by_carrier[{m}]", out)
        else:
            _check_operator(term.env_op, de, f"coupling[{ell}].env_op", out)
        if term.carrier_ops_timed is not None:
            for m, fam in enumerate(term.carrier_ops_timed):
                if fam is None:
                    continue
                for k, a in enumerate(fam.samples):
                    _check_operator(a, model.carrier_dims[m], f"coupling[{ell}].carrier_ops_timed[{m}][{k}]", out)

    if model.free_hamiltonians is not None:
        if len(model.free_hamiltonians) != n:
            out.append(Violation("TERM_COUNT", float(len(model.free_hamiltonians)),
                                 "free_hamiltonians needs one entry per carrier", "free_hamiltonians"))
        else:
            for m, h in enumerate(model.free_hamiltonians):
                if h is None:
                    continue
                samples = h.samples if isinstance(h, TimedOperator) else [h]
                for a in samples:
                    _check_operator(a, model.carrier_dims[m], f"free_hamiltonians[{m}]", out)

    if model.drift_weights is not None:
        w = model.drift_weights
        if w.shape != (n, model.n_terms):
            out.append(Violation("DIM_MISMATCH", float("nan"), f"drift_weights shape {w.shape}", "drift_weights"))

    if not (model.gamma >= 0 and math.isfinite(model.gamma)):
        out.append(Violation("GAMMA_NEGATIVE", float(model.gamma), "gamma must be finite and >= 0", "gamma"))

    disc = model.discrete
    if disc is not None:
        if not (disc.dt > 0 and math.isfinite(disc.dt)):
            out.append(Violation("DT_INVALID", float(disc.dt), "dt must be > 0", "discrete.dt"))
        if disc.n_steps < 0:
            out.append(Violation("N_STEPS_INVALID", float(disc.n_steps), "n_steps must be >= 0", "discrete.n_steps"))
        if disc.regime not in ("dissipative", "unitary-limit"):
            out.append(Violation("REGIME_INVALID", float("nan"), f"unknown regime {disc.regime!r}", "discrete.regime"))
        elif disc.regime == "dissipative" and disc.g is not None and disc.dt > 0:
            res = abs(disc.g - math.sqrt(model.gamma / disc.dt))
            if res > 1e-9:
                out.append(Violation("G_MISMATCH", res, "g must equal sqrt(gamma/dt)", "discrete.g"))
        elif disc.regime == "unitary-limit" and (disc.g is None or not disc.g > 0):
            out.append(Violation("G_MISSING", float("nan"), "unitary-limit regime needs g > 0", "discrete.g"))
    return out
