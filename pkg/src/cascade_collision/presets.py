"""Named illustrative models, returned as JSON model documents.

Qubit basis convention: index 0 is the excited state |e⟩, index 1 the ground
state |g⟩, so σ_z|g⟩ = -|g⟩ and σ₋ = |g⟩⟨e| = (σ_x - iσ_y)/2.
"""

from __future__ import annotations

import numpy as np

from .io import matrix_to_json
from .model import DamperMap

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)
GROUND = np.array([[0, 0], [0, 1]], dtype=complex)

NAMES = ("ad-qubit", "ad-cascade-2", "zdrift-qubit", "jc-cascade")


def annihilation(n: int) -> np.ndarray:
    """Truncated bosonic lowering operator on Fock states 0 … n-1."""
    return np.diag(np.sqrt(np.arange(1, n)), k=1).astype(complex)


def _doc(carrier_dims, env_dim, eta, terms, kraus, gamma, dt, n_steps, rho0, observables, labels=None):
    labels = labels or [f"S{m + 1}" for m in range(len(carrier_dims))]
    return {
        "carriers": [{"dim": d, "label": lab} for d, lab in zip(carrier_dims, labels)],
        "environment": {
            "dim": env_dim,
            "eta": matrix_to_json(eta),
            "damper_kraus": [matrix_to_json(k) for k in kraus],
        },
        "coupling": [
            {"carrier_ops": [matrix_to_json(a) for a in ops], "env_op": matrix_to_json(b)}
            for ops, b in terms
        ],
        "gamma": gamma,
        "discrete": {"dt": dt, "n_steps": n_steps, "regime": "dissipative"},
        "initial_state": matrix_to_json(rho0),
        "observables": [{"label": k, "matrix": matrix_to_json(v)} for k, v in observables],
    }


def ad_qubit(gamma: float = 1.0, dt: float = 1e-3, t_end: float = 1.0) -> dict:
    """Single qubit exchanging excitations with ground-state qubits: amplitude damping at rate γ."""
    terms = [([SX], SX / 2), ([SY], SY / 2)]
    obs = [("pop_e", EXCITED), ("pop_g", GROUND)]
    return _doc([2], 2, GROUND, terms, [I2], gamma, dt, int(round(t_end / dt)), EXCITED, obs)


def ad_cascade_2(gamma: float = 1.0, dt: float = 1e-3, t_end: float = 1.0, damper_p: float = 0.0) -> dict:
    """Two qubits in cascade through the same exchange coupling.

    ``damper_p`` > 0 makes the damper a depolarizing channel of that strength,
    which attenuates the cross-talk; 0 gives the identity damper.
    """
    terms = [([SX, SX], SX / 2), ([SY, SY], SY / 2)]
    kraus = [I2] if damper_p == 0 else list(DamperMap.depolarizing(2, damper_p).kraus)
    plus = np.full((2, 2), 0.5, dtype=complex)
    rho0 = np.kron(plus, GROUND)
    obs = [
        ("pop_e_1", np.kron(EXCITED, I2)),
        ("pop_e_2", np.kron(I2, EXCITED)),
        ("sx_1", np.kron(SX, I2)),
        ("sx_2", np.kron(I2, SX)),
        ("sy_2", np.kron(I2, SY)),
    ]
    return _doc([2, 2], 2, GROUND, terms, kraus, gamma, dt, int(round(t_end / dt)), rho0, obs)


def zdrift_qubit(gamma: float = 1.0, dt: float = 1e-3, t_end: float = 1.0) -> dict:
    """σ_x⊗σ_z coupling with environments in the σ_z = +1 state: stability is violated."""
    eta = np.array([[1, 0], [0, 0]], dtype=complex)
    terms = [([SX], SZ)]
    obs = [("sx", SX), ("sy", SY), ("sz", SZ)]
    return _doc([2], 2, eta, terms, [I2], gamma, dt, int(round(t_end / dt)), EXCITED, obs)


def jc_cascade(gamma: float = 1.0, dt: float = 1e-3, t_end: float = 1.0, n_fock: int = 4) -> dict:
    """Two Fock-truncated cavity modes crossed in turn by ground-state two-level atoms.

    The Jaynes-Cummings exchange a σ₊ + a† σ₋ is written in Hermitian pairs as
    (a + a†)⊗σ_x/2 + i(a - a†)⊗σ_y/2.
    """
    a = annihilation(n_fock)
    x = a + a.conj().T
    p = 1j * (a - a.conj().T)
    idn = np.eye(n_fock, dtype=complex)
    terms = [([x, x], SX / 2), ([p, p], SY / 2)]
    psi = np.zeros(n_fock, dtype=complex)
    psi[0] = psi[2] = 1 / np.sqrt(2)
    vac = np.zeros((n_fock, n_fock), dtype=complex)
    vac[0, 0] = 1
    rho0 = np.kron(np.outer(psi, psi.conj()), vac)
    num = a.conj().T @ a
    obs = [
        ("n_1", np.kron(num, idn)),
        ("n_2", np.kron(idn, num)),
        ("x_1", np.kron(x, idn)),
        ("x_2", np.kron(idn, x)),
    ]
    return _doc([n_fock, n_fock], 2, GROUND, terms, [I2], gamma, dt, int(round(t_end / dt)), rho0, obs)


def preset(name: str, **kwargs) -> dict:
    builders = {
        "ad-qubit": ad_qubit,
        "ad-cascade-2": ad_cascade_2,
        "zdrift-qubit": zdrift_qubit,
        "jc-cascade": jc_cascade,
    }
    try:
        builder = builders[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(NAMES)}") from None
    return builder(**kwargs)
