"""Continuous-limit cascade master equation built in closed form.

The generator is

    dρ/dt = Σ_m L_m(ρ) + Σ_{m<m'} D_{m,m'}(ρ)

with local Lindblad terms L_m and unidirectional cross terms D_{m,m'}.  The
coefficient tables already include the limit rate γ, so the right-hand side
carries no extra prefactor.  Carrier indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import qmath
from .errors import DimensionError, UnsupportedFrameError
from .model import CascadeModel, GeneratorBundle, TimedOperator

STABILITY_TOL = 1e-10
PSD_CLIP = 1e-10


def _check_carrier(model: CascadeModel, m: int) -> None:
    if not 0 <= m < model.n_carriers:
        raise IndexError(f"carrier index {m} out of range for {model.n_carriers} carriers")


def compute_delta(model: CascadeModel, m: int, ell: int) -> float:
    """Tr[B^(m,ℓ) M^m(η)]: first moment of term ℓ seen by carrier ``m``."""
    _check_carrier(model, m)
    if not 0 <= ell < model.n_terms:
        raise IndexError(f"term index {ell} out of range for {model.n_terms} terms")
    val = np.trace(model.env_op(m, ell) @ model.env_states[m])
    return float(val.real)


def delta_table(model: CascadeModel) -> np.ndarray:
    return np.array(
        [[compute_delta(model, m, ell) for ell in range(model.n_terms)] for m in range(model.n_carriers)],
        dtype=float,
    ).reshape(model.n_carriers, model.n_terms)


@dataclass(frozen=True)
class StabilityReport:
    satisfied: bool
    worst: tuple[int, int, float]
    deltas: np.ndarray
    tol: float = STABILITY_TOL

    def to_dict(self) -> dict:
        m, ell, val = self.worst
        return {
            "check": "stability",
            "status": "pass" if self.satisfied else "fail",
            "satisfied": self.satisfied,
            "worst": {"carrier": m, "term": ell, "abs_delta": val},
            "deltas": self.deltas.tolist(),
            "tolerance": self.tol,
        }


def check_stability(model: CascadeModel, tol: float = STABILITY_TOL) -> StabilityReport:
    """Is Tr[B^(m,ℓ) M^m(η)] zero for every carrier and term?"""
    deltas = delta_table(model)
    if deltas.size == 0:
        return StabilityReport(True, (0, 0, 0.0), deltas, tol)
    absd = np.abs(deltas)
    m, ell = np.unravel_index(int(np.argmax(absd)), absd.shape)
    worst = float(absd[m, ell])
    return StabilityReport(worst <= tol, (int(m), int(ell), worst), deltas, tol)


def enforce_stability(model: CascadeModel):
    """Shift every environment operator by its first moment, B^(m,ℓ) = B^(ℓ) - δ_m^ℓ I.

    Returns the rescaled model and the per-carrier drift Hamiltonians
    h_m = Σ_ℓ δ_m^ℓ A_m^ℓ.  The rescaled model keeps h_m ⊗ I inside its
    collision Hamiltonian, so discrete dynamics are unchanged; only the split
    into drift and coupling differs.  Time-indexed carrier operators give
    time-indexed drifts, returned as :class:`TimedOperator`.
    """
    report = check_stability(model, tol=0.0)
    n, nt = model.n_carriers, model.n_terms
    if report.worst[2] == 0.0:
        return model, [np.zeros((d, d), dtype=complex) for d in model.carrier_dims]
    deltas = report.deltas
    eye = np.eye(model.env_dim, dtype=complex)
    terms = []
    for ell, term in enumerate(model.coupling):
        shifted = tuple(term.env_op_for(m) - deltas[m, ell] * eye for m in range(n))
        terms.append(replace(term, env_ops_by_carrier=shifted))
    weights = deltas.copy()
    if model.drift_weights is not None:
        weights = weights + model.drift_weights
    new = replace(model, coupling=tuple(terms), drift_weights=weights)
    drift = []
    for m in range(n):
        timed = [model.coupling[ell].carrier_ops_timed[m] for ell in range(nt) if model.coupling[ell].is_timed(m)]
        if timed:
            fam = timed[0]
            samples = np.array([new.drift_hamiltonian(m, k * fam.dt) for k in range(len(fam.samples))])
            drift.append(TimedOperator(samples, fam.dt))
        else:
            drift.append(new.drift_hamiltonian(m))
    return new, drift


def compute_gamma_local(model: CascadeModel, m: int) -> np.ndarray:
    """γ_m[ℓ, ℓ'] = γ Tr[B^ℓ B^ℓ' M^m(η)] with carrier-indexed B's."""
    _check_carrier(model, m)
    xi = model.env_states[m]
    nt = model.n_terms
    out = np.zeros((nt, nt), dtype=complex)
    for a in range(nt):
        ba = model.env_op(m, a)
        for b in range(nt):
            out[a, b] = np.trace(ba @ model.env_op(m, b) @ xi)
    return model.gamma * out


def compute_gamma_cross(model: CascadeModel, m: int, mp: int) -> np.ndarray:
    """γ_{m,m'}[ℓ, ℓ'] = γ Tr[B^(m',ℓ') M^(m'-m)(B^(m,ℓ) M^m(η))].

    The damper acts on the non-Hermitian product B·state through the same
    Kraus sum.
    """
    _check_carrier(model, m)
    _check_carrier(model, mp)
    if mp <= m:
        raise IndexError(f"cross coefficients need m < m', got ({m}, {mp})")
    xi = model.env_states[m]
    nt = model.n_terms
    out = np.zeros((nt, nt), dtype=complex)
    for a in range(nt):
        evolved = model.damper.power(model.env_op(m, a) @ xi, mp - m)
        for b in range(nt):
            out[a, b] = np.trace(model.env_op(mp, b) @ evolved)
    return model.gamma * out


def build_effective_hamiltonian(model: CascadeModel, m: int, t: float = 0.0) -> np.ndarray:
    _check_carrier(model, m)
    h = np.zeros((model.carrier_dims[m],) * 2, dtype=complex)
    for ell in range(model.n_terms):
        d = compute_delta(model, m, ell)
        if d != 0.0:
            h = h + d * model.carrier_op(m, ell, t)
    return h


def _rates_from_gamma(gamma_m: np.ndarray, ops: list[np.ndarray]):
    w, v = qmath.eig_hermitian(gamma_m)
    if w.size and w[0] < -PSD_CLIP:
        raise ValueError(f"correlation matrix has eigenvalue {w[0]:.3e} < -{PSD_CLIP}")
    w = np.where(w <= 0, 0.0, w)
    lindblad_ops = []
    for k in range(len(w)):
        op = sum(np.conj(v[ell, k]) * ops[ell] for ell in range(len(ops)))
        lindblad_ops.append(np.asarray(op, dtype=complex))
    return w, tuple(lindblad_ops)


def diagonalize_rates(bundle: GeneratorBundle, model: CascadeModel, m: int, t: float = 0.0):
    """Decay rates r_k ≥ 0 and operators L_k = Σ_ℓ conj(v_k[ℓ]) A_m^ℓ on carrier ``m``.

    Σ_k r_k (L_k x L_k† - ½{L_k†L_k, x}) reproduces the local Lindblad term.
    """
    _check_carrier(model, m)
    ops = [model.carrier_op(m, ell, t) for ell in range(model.n_terms)]
    return _rates_from_gamma(bundle.gamma_local[m], ops)


def build_bundle(model: CascadeModel) -> GeneratorBundle:
    n = model.n_carriers
    gamma_local = tuple(compute_gamma_local(model, m) for m in range(n))
    gamma_cross = {(m, mp): compute_gamma_cross(model, m, mp) for m in range(n) for mp in range(m + 1, n)}
    rates = []
    for m in range(n):
        if model.n_terms == 0:
            rates.append((np.zeros(0), ()))
            continue
        ops = [model.carrier_op(m, ell) for ell in range(model.n_terms)]
        rates.append(_rates_from_gamma(gamma_local[m], ops))
    frame = tuple(model.drift_hamiltonian(m) for m in range(n)) if model.has_drift else None
    return GeneratorBundle(
        deltas=delta_table(model),
        h_eff=tuple(build_effective_hamiltonian(model, m) for m in range(n)),
        gamma_local=gamma_local,
        gamma_cross=gamma_cross,
        rates=tuple(rates),
        frame=frame,
    )


def _check_x(model: CascadeModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (model.dim, model.dim):
        raise DimensionError(f"expected a {model.dim}x{model.dim} carrier matrix, got {x.shape}")
    return x


def _local(gamma_m: np.ndarray, ops: list[np.ndarray], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    nt = len(ops)
    for a in range(nt):
        # sandwich A^ℓ' x A^ℓ weighted by γ[ℓ, ℓ']
        left = sum(gamma_m[a, b] * ops[b] for b in range(nt))
        out += left @ x @ ops[a]
        prod = ops[a] @ left
        out -= 0.5 * (prod @ x + x @ prod)
    return out


def _cross(gamma_mm: np.ndarray, ops_m: list[np.ndarray], ops_mp: list[np.ndarray], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    nt = len(ops_m)
    for b in range(nt):
        comm = x @ ops_mp[b] - ops_mp[b] @ x
        p = sum(gamma_mm[a, b] * ops_m[a] for a in range(nt))
        q = sum(np.conj(gamma_mm[a, b]) * ops_m[a] for a in range(nt))
        out += p @ comm - comm @ q
    return out


def apply_local_lindblad(bundle: GeneratorBundle, model: CascadeModel, m: int, x, t: float = 0.0) -> np.ndarray:
    """½ Σ γ_m[ℓ,ℓ'] (2 A^ℓ' x A^ℓ - A^ℓ A^ℓ' x - x A^ℓ A^ℓ'), operators lifted to all carriers."""
    _check_carrier(model, m)
    x = _check_x(model, x)
    if model.n_terms == 0:
        return np.zeros_like(x)
    ops = model.embedded_carrier_ops(t)[m]
    return _local(bundle.gamma_local[m], ops, x)


def apply_cross_term(bundle: GeneratorBundle, model: CascadeModel, m: int, mp: int, x, t: float = 0.0) -> np.ndarray:
    """Σ γ[ℓ,ℓ'] A_m^ℓ [x, A_m'^ℓ'] - Σ conj(γ[ℓ,ℓ']) [x, A_m'^ℓ'] A_m^ℓ."""
    _check_carrier(model, m)
    _check_carrier(model, mp)
    if mp <= m:
        raise IndexError(f"cross term needs m < m', got ({m}, {mp})")
    x = _check_x(model, x)
    if model.n_terms == 0:
        return np.zeros_like(x)
    ops = model.embedded_carrier_ops(t)
    return _cross(bundle.gamma_cross[(m, mp)], ops[m], ops[mp], x)


def apply_cascade_generator(bundle: GeneratorBundle, model: CascadeModel, x, t: float = 0.0) -> np.ndarray:
    """Σ_m L_m(x) + Σ_{m<m'} D_{m,m'}(x) with carrier operators taken at time ``t``."""
    x = _check_x(model, x)
    out = np.zeros_like(x)
    if model.n_terms == 0:
        return out
    ops = model.embedded_carrier_ops(t)
    n = model.n_carriers
    for m in range(n):
        out += _local(bundle.gamma_local[m], ops[m], x)
        for mp in range(m + 1, n):
            out += _cross(bundle.gamma_cross[(m, mp)], ops[m], ops[mp], x)
    return out


class CascadeGenerator:
    """Callable ``(x, t) -> dx/dt`` with operator combinations cached per time sample.

    Free carrier Hamiltonians, when the model has them, enter as -i[Σ h_m(t), x].
    """

    def __init__(self, bundle: GeneratorBundle, model: CascadeModel):
        self.bundle = bundle
        self.model = model
        self._cache_t = None
        self._cache = None

    def _prepare(self, t: float):
        model, bundle = self.model, self.bundle
        key = 0.0 if not model.is_time_dependent else t
        if self._cache is not None and self._cache_t == key:
            return self._cache
        ops = model.embedded_carrier_ops(t)
        n, nt = model.n_carriers, model.n_terms
        local = []
        for m in range(n):
            g = bundle.gamma_local[m]
            lefts = [sum(g[a, b] * ops[m][b] for b in range(nt)) for a in range(nt)]
            k = sum(ops[m][a] @ lefts[a] for a in range(nt))
            local.append((lefts, ops[m], k))
        cross = []
        for m in range(n):
            for mp in range(m + 1, n):
                g = bundle.gamma_cross[(m, mp)]
                if not np.any(g):
                    continue
                ps = [sum(g[a, b] * ops[m][a] for a in range(nt)) for b in range(nt)]
                qs = [sum(np.conj(g[a, b]) * ops[m][a] for a in range(nt)) for b in range(nt)]
                cross.append((ps, qs, ops[mp]))
        h = None
        if model.free_hamiltonians is not None:
            hs = [model.free_hamiltonian(m, t) for m in range(n)]
            if any(x is not None for x in hs):
                h = sum(qmath.embed(x, model.layout, m) for m, x in enumerate(hs) if x is not None)
        self._cache_t, self._cache = key, (local, cross, h)
        return self._cache

    def __call__(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        local, cross, h = self._prepare(t)
        out = np.zeros_like(x)
        for lefts, ops, k in local:
            for left, a in zip(lefts, ops):
                out += left @ x @ a
            out -= 0.5 * (k @ x + x @ k)
        for ps, qs, ops_mp in cross:
            for p, q, a in zip(ps, qs, ops_mp):
                comm = x @ a - a @ x
                out += p @ comm - comm @ q
        if h is not None:
            out += -1j * (h @ x - x @ h)
        return out


def require_commuting_frame(model: CascadeModel, tol: float = 1e-10) -> None:
    """Reject continuous-limit runs whose drift frame does not commute with the coupling.

    The drift frame exp(-i g h t) keeps g, which diverges in the limit, so the
    rotated operators only have a well-defined limit when [h_m, A_m^ℓ] = 0.
    """
    if not model.has_drift:
        return
    times = [0.0]
    for term in model.coupling:
        if term.carrier_ops_timed is not None:
            for fam in term.carrier_ops_timed:
                if fam is not None:
                    times = [k * fam.dt for k in range(len(fam.samples))]
    for t in times:
        for m in range(model.n_carriers):
            h = model.drift_hamiltonian(m, t)
            for ell in range(model.n_terms):
                a = model.carrier_op(m, ell, t)
                res = float(np.max(np.abs(h @ a - a @ h)))
                if res > tol:
                    raise UnsupportedFrameError(
                        f"drift on carrier {m} does not commute with coupling term {ell} "
                        f"(residual {res:.3e}); the continuous-limit frame is undefined"
                    )


def materialize_superoperator(fn, dim: int) -> np.ndarray:
    """Matrix of a linear map on dim×dim matrices in column-stacking convention."""
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for j in range(dim):
        for i in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            out[:, j * dim + i] = fn(e).reshape(-1, order="F")
    return out


def lindblad_from_rates(rates: np.ndarray, ops, x: np.ndarray, layout: qmath.SpaceLayout, m: int) -> np.ndarray:
    """Σ_k r_k (L_k x L_k† - ½{L_k†L_k, x}) with L_k lifted onto carrier ``m``."""
    out = np.zeros_like(x, dtype=complex)
    for r, op in zip(rates, ops):
        if r == 0:
            continue
        big = qmath.embed(op, layout, m)
        bd = big.conj().T
        out += r * (big @ x @ bd - 0.5 * (bd @ big @ x + x @ bd @ big))
    return out

