import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation
from scipy.stats import spearmanr

from conftest import unit_cube
from ldrbm.errors import ConfigError, TensorError
from ldrbm.ep.ionic import PassiveModel
from ldrbm.ep.monodomain import (
    CONDUCTIVITY_PRESETS,
    ConductivitySpec,
    EPParams,
    EPState,
    Monodomain,
    assemble_conductivity,
    nodal_tensors,
    run_simulation,
    simulate,
    step,
)
from ldrbm.ep.stimulus import Stimulus, StimulusProtocol

VENT = CONDUCTIVITY_PRESETS["surrogate-ventricular"]


def random_frames(n, seed=0):
    return Rotation.random(n, random_state=seed).as_matrix()


def corner(radius=0.25, start=0.0):
    return StimulusProtocol((Stimulus(center=(0.0, 0.0, 0.0), radius=radius, start=start),))


# conductivity tensors


def test_isotropic_tensor_ignores_frames():
    D = nodal_tensors(random_frames(20), ConductivitySpec.isotropic(2.5))
    assert np.allclose(D, 2.5 * np.eye(3), atol=1e-14)


def test_tensor_eigenvalues():
    spec = CONDUCTIVITY_PRESETS["ventricular"]
    D = nodal_tensors(random_frames(50, 1), spec)
    ev = np.linalg.eigvalsh(D)
    assert np.allclose(ev, [0.16, 0.49, 1.07], atol=1e-13)


def test_tensor_axes():
    Q = random_frames(10, 2)
    spec = ConductivitySpec(3.0, 2.0, 1.0)
    D = nodal_tensors(Q, spec)
    f, n, s = Q[:, :, 0], Q[:, :, 1], Q[:, :, 2]
    assert np.allclose(np.einsum("nij,nj->ni", D, f), 3.0 * f)
    assert np.allclose(np.einsum("nij,nj->ni", D, s), 2.0 * s)
    assert np.allclose(np.einsum("nij,nj->ni", D, n), 1.0 * n)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rotation_congruence(seed):
    Q = random_frames(5, seed)
    R = Rotation.random(random_state=seed + 1).as_matrix()
    spec = CONDUCTIVITY_PRESETS["ventricular"]
    a = nodal_tensors(np.einsum("ij,njk->nik", R, Q), spec)
    b = np.einsum("ij,njk,lk->nil", R, nodal_tensors(Q, spec), R)
    assert np.allclose(a, b, atol=1e-13)


def test_element_tensors_are_spd(slab):
    D = assemble_conductivity(slab, random_frames(slab.n_nodes, 3), VENT)
    assert np.all(np.linalg.eigvalsh(D) > 0)


def test_tensor_errors(slab):
    Q = random_frames(slab.n_nodes)
    with pytest.raises(TensorError):
        assemble_conductivity(slab, None, VENT)
    with pytest.raises(TensorError):
        assemble_conductivity(slab, Q[:-1], VENT)
    bad = Q.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(TensorError):
        assemble_conductivity(slab, bad, VENT)
    bad = Q.copy()
    bad[0] *= 2.0
    with pytest.raises(TensorError, match="orthonormal"):
        assemble_conductivity(slab, bad, VENT)
    with pytest.raises(ConfigError):
        ConductivitySpec(1.0, 0.0, 1.0)


def test_params_validation():
    for kw in ({"dt": 0.0}, {"bdf_order": 4}, {"T_end": -1.0}, {"mass": "diagonal"}, {"chi": 0.0}):
        with pytest.raises(ConfigError):
            EPParams(**kw)
    assert EPParams(dt=0.05, T_end=10.0).n_steps == 200


# time stepping


def test_rest_stays_at_rest(slab):
    res = run_simulation(slab, None, ConductivitySpec.isotropic(4.0), "surrogate-ventricular", StimulusProtocol(), EPParams(T_end=100.0))
    u0 = res.final.u
    assert np.max(np.abs(u0 - (-85.0))) < 0.01
    assert not res.activated.any()


@pytest.mark.parametrize("mass", ["consistent", "lumped"])
def test_no_flux_conserves_charge(slab, mass):
    p = EPParams(dt=0.1, T_end=5.0, mass=mass, solver_tol=1e-13)
    D = assemble_conductivity(slab, None, ConductivitySpec.isotropic(1.0))
    model = Monodomain(slab, D, PassiveModel(g=0.0), p)
    u = -85.0 + 30.0 * np.exp(-np.sum(slab.nodes**2, axis=1) / 0.1)
    state = EPState(u=u, w=np.empty((0, slab.n_nodes)), history=[u])
    ones = np.ones(slab.n_nodes)
    q0 = ones @ model.M @ u
    res = simulate(model, state)
    assert abs(ones @ model.M @ res.final.u - q0) / abs(q0) < 1e-8
    # and the peak has spread out
    assert np.ptp(res.final.u) < np.ptp(u)


def _decay_error(order, dt, T=4.0, g=0.5, e=-80.0, u0=-40.0):
    """Uniform passive decay from an exact start-up history, so the
    measured error is the scheme's own."""
    m = unit_cube()
    p = EPParams(dt=dt, bdf_order=order, T_end=T, solver_tol=1e-14)
    D = np.broadcast_to(np.eye(3), (1, 3, 3)).copy()
    model = Monodomain(m, D, PassiveModel(g=g, e_rest=e), p)

    def exact(t):
        return np.full(8, e + (u0 - e) * np.exp(-g * t))

    t0 = (order - 1) * dt
    hist = [exact(t0 - k * dt) for k in range(order)]
    state = EPState(u=hist[0], w=np.empty((0, 8)), history=hist, time=t0, step=order - 1)
    res = simulate(model, state)
    assert res.final.time == pytest.approx(T)
    return abs(res.final.u[0] - exact(T)[0])


@pytest.mark.parametrize("order", [1, 2, 3])
def test_bdf_convergence_order(order):
    errs = [_decay_error(order, dt) for dt in (0.2, 0.1, 0.05)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates.min() > order - 0.5


def test_without_diffusion_only_stimulated_nodes_fire(slab):
    p = EPParams(T_end=20.0)
    D = np.zeros((slab.n_elements, 3, 3))
    proto = corner()
    model = Monodomain(slab, D, "surrogate-ventricular", p, proto)
    res = simulate(model)
    stim = np.zeros(slab.n_nodes, bool)
    stim[proto.stimuli[0].nodes(slab.nodes)] = True
    assert stim.sum() > 0
    assert np.array_equal(res.activated, stim)


def test_corner_wave_is_monotone_in_distance(slab):
    p = EPParams(T_end=60.0, stop_when_activated=True)
    res = run_simulation(slab, None, ConductivitySpec.isotropic(2.0), "surrogate-ventricular", corner(), p)
    assert res.activated.all()
    assert np.nanmax(res.activation) <= p.T_end
    r = np.linalg.norm(slab.nodes, axis=1)
    out = r > 0.3
    assert spearmanr(r[out], res.activation[out]).statistic > 0.99


def test_snapshots_do_not_change_results(slab):
    spec = ConductivitySpec.isotropic(2.0)
    a = run_simulation(slab, None, spec, "surrogate-ventricular", corner(), EPParams(T_end=15.0))
    b = run_simulation(slab, None, spec, "surrogate-ventricular", corner(), EPParams(T_end=15.0, snapshot_every=2.5))
    assert np.array_equal(a.activation, b.activation, equal_nan=True)
    assert [round(t, 9) for t, _ in b.snapshots] == [2.5 * k for k in range(1, 7)]
    assert not a.snapshots


def test_functional_step_matches_model(slab):
    p = EPParams(T_end=1.0)
    D = assemble_conductivity(slab, None, ConductivitySpec.isotropic(2.0))
    model = Monodomain(slab, D, "surrogate-ventricular", p, corner())
    s0 = model.initial_state()
    a = step(s0, p, corner(), "surrogate-ventricular", model=model)
    b = step(s0, p, corner(), "surrogate-ventricular", mesh=slab, D=D)
    assert np.array_equal(a.u, b.u)
    # history grows to the BDF order and stays there
    c = step(a, p, None, None, model=model)
    assert len(c.history) == 3
    assert len(step(c, p, None, None, model=model).history) == 3


def test_early_stop_keeps_activation(slab):
    spec = ConductivitySpec.isotropic(2.0)
    full = run_simulation(slab, None, spec, "surrogate-ventricular", corner(), EPParams(T_end=60.0))
    short = run_simulation(slab, None, spec, "surrogate-ventricular", corner(), EPParams(T_end=60.0, stop_when_activated=True))
    assert short.final.time < 60.0
    assert np.array_equal(full.activation, short.activation)
