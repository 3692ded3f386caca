import math

import numpy as np
import pytest

from cascade_collision import qmath
from cascade_collision.collision import free_evolution_frame, frame_transform, rotate_state
from cascade_collision.errors import StabilityViolated, UnsupportedFrameError
from cascade_collision.generator import enforce_stability, materialize_superoperator
from cascade_collision.integrator import Trajectory, evolve_me, guard_state, normalize_observables, rk4_step
from cascade_collision.model import CascadeModel, CouplingTerm, DamperMap
from cascade_collision.presets import EXCITED, SX, SY, SZ

from conftest import load_preset

PLUS = np.full((2, 2), 0.5, dtype=complex)


def analytic_ad(t, rho0, gamma=1.0):
    """Amplitude damping: populations relax at γ, coherences at γ/2 (index 0 = excited)."""
    pe = rho0[0, 0] * math.exp(-gamma * t)
    coh = rho0[0, 1] * math.exp(-gamma * t / 2)
    return np.array([[pe, coh], [np.conj(coh), 1 - pe]])


def test_amplitude_damping_matches_closed_form():
    loaded = load_preset("ad-qubit")
    traj = evolve_me(None, loaded.model, PLUS, 2.0, 1e-3, sample_every=100)
    for t, rho in zip(traj.times, traj.states):
        np.testing.assert_allclose(rho, analytic_ad(t, PLUS), atol=1e-12)


def test_rk4_is_fourth_order():
    model = load_preset("ad-qubit").model
    errs = []
    for dt in (0.2, 0.1, 0.05):
        final = evolve_me(None, model, PLUS, 2.0, dt, sample_every=1000).final_state
        errs.append(qmath.trace_distance(final, analytic_ad(2.0, PLUS)))
    slope = np.polyfit(np.log([0.2, 0.1, 0.05]), np.log(errs), 1)[0]
    assert 3.7 <= slope <= 4.3


def test_rk4_step_equals_stability_polynomial(rng):
    # for a linear generator L one RK4 step is P(hL) with P(z) = 1 + z + z²/2 + z³/6 + z⁴/24
    h = qmath.random_hermitian(rng, 3)
    gen = lambda x, t: -1j * (h @ x - x @ h)
    sup = materialize_superoperator(lambda x: gen(x, 0.0), 3)
    step = 0.4
    z = step * sup
    poly = np.eye(9) + z + z @ z / 2 + z @ z @ z / 6 + z @ z @ z @ z / 24
    rho = qmath.random_density(rng, 3)
    expected = (poly @ rho.reshape(-1, order="F")).reshape(3, 3, order="F")
    np.testing.assert_allclose(rk4_step(gen, rho, 0.0, step), expected, atol=1e-14)
    with pytest.raises(ValueError):
        rk4_step(gen, rho, 0.0, 0.0)


def test_guard_state_only_renormalizes_large_drift():
    rho = np.diag([0.5 + 1e-13, 0.5]).astype(complex)
    np.testing.assert_array_equal(guard_state(rho), rho)
    np.testing.assert_allclose(np.trace(guard_state(np.diag([0.6, 0.6]))), 1.0)


def test_sampling_grid_and_metadata():
    loaded = load_preset("ad-qubit")
    traj = evolve_me(None, loaded.model, EXCITED, 0.025, 1e-3, loaded.observables, sample_every=10)
    np.testing.assert_allclose(traj.times, [0.0, 0.01, 0.02, 0.025])
    assert traj.metadata["method"] == "rk4"
    assert traj.metadata["frame"] == "lab"
    assert len(traj.metadata["model_hash"]) == 64
    with pytest.raises(ValueError):
        evolve_me(None, loaded.model, EXCITED, 0.0105, 1e-3)


def test_unstable_model_is_refused():
    loaded = load_preset("zdrift-qubit")
    with pytest.raises(StabilityViolated) as err:
        evolve_me(None, loaded.model, EXCITED, 0.1, 1e-3)
    assert err.value.code == "STABILITY_VIOLATED"


def test_noncommuting_enforced_model_is_refused():
    model = CascadeModel((2,), 2, EXCITED, (CouplingTerm((SX,), SZ), CouplingTerm((SY,), SX)), DamperMap.identity(2))
    enforced, _ = enforce_stability(model)
    with pytest.raises(UnsupportedFrameError):
        evolve_me(None, enforced, EXCITED, 0.1, 1e-3)


def test_free_hamiltonian_lab_versus_frame():
    """Lab ME with -i[h, ·] agrees with the interaction-frame ME to first order in dt."""
    loaded = load_preset("ad-cascade-2")
    h = (0.9 * SZ, 0.4 * SX)
    lab_model = loaded.model.with_(free_hamiltonians=h)
    t_end = 1.0
    lab = evolve_me(None, lab_model, loaded.initial_state, t_end, 1e-3, sample_every=1000).final_state
    errs = []
    for dt in (4e-3, 2e-3):
        n = int(round(t_end / dt))
        frame = free_evolution_frame(lab_model, dt, n)
        framed = evolve_me(None, frame_transform(lab_model, frame), loaded.initial_state, t_end, dt,
                           sample_every=10**6).final_state
        errs.append(qmath.trace_distance(rotate_state(framed, frame, lab_model, t_end), lab))
    assert errs[1] < 2e-2
    assert 1.5 <= errs[0] / errs[1] <= 2.5


def test_trajectory_csv_round_trips(tmp_path):
    traj = Trajectory(np.array([0.0, 0.1]), {"a": np.array([1 / 3, math.pi]), "b": np.array([-1e-300, 2.0])})
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,a,b"
    vals = [float(v) for v in lines[1].split(",")] + [float(v) for v in lines[2].split(",")]
    assert vals == [0.0, 1 / 3, -1e-300, 0.1, math.pi, 2.0]


def test_normalize_observables_forms():
    assert [k for k, _ in normalize_observables({"x": SX})] == ["x"]
    assert [k for k, _ in normalize_observables([("z", SZ), SX])] == ["z", "O1"]
    assert normalize_observables(None) == []
