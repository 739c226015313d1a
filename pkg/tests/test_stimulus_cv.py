from types import SimpleNamespace

import numpy as np
import pytest

from ldrbm.errors import ConfigError, FitError, MeasurementError
from ldrbm.ep.cv import fit_conductivity, measure_cv, slab_cv
from ldrbm.ep.heart import atrioventricular_gap, simulate_heart
from ldrbm.ep.monodomain import ConductivitySpec, EPParams, run_simulation
from ldrbm.ep.stimulus import (
    CHAMBER_SITES,
    STIM_AMPLITUDE,
    STIM_DURATION,
    STIM_RADIUS,
    Stimulus,
    StimulusProtocol,
    face_stimulus,
    la_schedule,
    whole_heart_schedule,
)
from ldrbm.generators import generate_slab

SITES = {s: np.zeros(3) for ch in CHAMBER_SITES.values() for s in ch}
THIN = (1.5, 0.1, 0.1)


@pytest.fixture(scope="module")
def thin():
    return generate_slab(THIN, 0.05)


# stimuli and schedules


def test_defaults():
    s = Stimulus()
    assert (s.radius, s.duration, s.amplitude) == (STIM_RADIUS, STIM_DURATION, STIM_AMPLITUDE) == (0.25, 3.0, 50000.0)
    assert s.active(0.0) and s.active(2.999) and not s.active(3.0)
    for kw in ({"radius": 0.0}, {"duration": -1.0}, {"center": (0, 0)}, {"box": ((0, 0, 1), (1, 1, 0))}):
        with pytest.raises(ConfigError):
            Stimulus(**kw)


def test_ball_and_box_nodes(slab):
    ball = Stimulus(center=(0.0, 0.0, 0.0), radius=0.15).nodes(slab.nodes)
    assert np.all(np.linalg.norm(slab.nodes[ball], axis=1) <= 0.15)
    face = face_stimulus(slab).nodes(slab.nodes)
    assert np.allclose(np.unique(slab.nodes[face, 0]), [0.0, 0.1])


def test_whole_heart_times():
    p = whole_heart_schedule(SITES)
    starts = {s.name: s.start for s in p}
    assert starts == {
        "SAN": 0.0, "BB": 28.0, "FO": 42.0, "CSM": 80.0,
        "lv-septal": 160.0, "lv-lateral": 160.0, "rv-septal": 165.0, "rv-lateral": 165.0,
    }
    assert all(s.chamber for s in p)


def test_single_chamber_schedule():
    p = whole_heart_schedule(SITES, ("la",))
    assert {s.name for s in p} == {"BB", "FO", "CSM"}
    assert len(whole_heart_schedule(SITES).for_chamber("ventricles")) == 4


def test_la_schedule():
    assert {s.name: s.start for s in la_schedule(SITES)} == {"BB": 0.0, "FO": 14.0, "CSM": 52.0}


def test_schedule_errors():
    with pytest.raises(ConfigError, match="FO"):
        whole_heart_schedule({k: v for k, v in SITES.items() if k != "FO"}, ("la",))
    with pytest.raises(ConfigError):
        whole_heart_schedule(SITES, ("aorta",))
    with pytest.raises(ConfigError):
        whole_heart_schedule(SITES, times={"LV": 50.0})


def test_protocol_shift():
    p = la_schedule(SITES).shifted(5.0)
    assert [s.start for s in p] == [5.0, 19.0, 57.0]
    assert p.end == 60.0


# conduction velocity


def test_synthetic_map():
    x = np.linspace(0.0, 2.0, 41)
    pts = np.column_stack([x, np.zeros_like(x), np.zeros_like(x)])
    assert measure_cv(pts, x / 0.06) == pytest.approx(60.0, rel=1e-12)
    assert measure_cv(x, 5.0 + x / 0.12) == pytest.approx(120.0, rel=1e-12)


def test_measurement_errors():
    x = np.linspace(0.0, 1.0, 11)
    t = x / 0.06
    with pytest.raises(MeasurementError, match="never activated"):
        measure_cv(x, np.where(x > 0.5, np.nan, t))
    with pytest.raises(MeasurementError, match="monotone"):
        measure_cv(x, t[::-1])
    with pytest.raises(MeasurementError):
        measure_cv(x, t[:-1])
    with pytest.raises(MeasurementError):
        measure_cv(np.zeros(5), np.arange(5.0))


def test_velocity_scales_with_root_sigma(thin):
    a = slab_cv(1.0, "surrogate-ventricular", mesh=thin)
    b = slab_cv(2.0, "surrogate-ventricular", mesh=thin)
    assert b / a == pytest.approx(np.sqrt(2.0), rel=0.05)


def test_anisotropy_ordering(thin):
    spec = ConductivitySpec(4.0, 1.0, 0.25)
    proto = StimulusProtocol((face_stimulus(thin),))
    p = EPParams(T_end=150.0, stop_when_activated=True)
    v = {}
    # frame columns are [f, n, s]; choose which one points along x
    for name, cols in (("f", (0, 1, 2)), ("s", (1, 2, 0)), ("n", (2, 0, 1))):
        Q = np.broadcast_to(np.eye(3)[:, cols], (thin.n_nodes, 3, 3))
        res = run_simulation(thin, Q, spec, "surrogate-ventricular", proto, p)
        v[name] = measure_cv(thin.nodes, res.activation)
    assert v["f"] > v["s"] > v["n"]
    assert v["f"] / v["s"] == pytest.approx(2.0, rel=0.1)


def test_fit_stops_when_already_matched(thin):
    v = slab_cv(2.0, "surrogate-ventricular", mesh=thin)
    r = fit_conductivity(v, "f", sigma0=2.0, h=0.05, lengths=THIN)
    assert r.converged and r.iterations == 1 and r.sigma == 2.0


def test_fit_converges():
    r = fit_conductivity(40.0, "s", sigma0=1.0, h=0.05, lengths=THIN, rtol=0.01)
    assert abs(r.cv - 40.0) < 0.4
    assert r.iterations <= 5
    assert len(r.trace) == r.iterations


def test_fit_errors():
    with pytest.raises(FitError):
        fit_conductivity(-1.0)
    with pytest.raises(FitError):
        fit_conductivity(60.0, "x")
    with pytest.raises(FitError) as exc:
        fit_conductivity(60.0, sigma0=0.2, h=0.05, lengths=THIN, max_iter=1, rtol=1e-6)
    assert len(exc.value.trace) == 1


# chambers on a shared clock


def test_chamber_starts_at_its_first_stimulus(thin):
    p = EPParams(T_end=200.0, stop_when_activated=True)
    spec = ConductivitySpec.isotropic(2.0)
    stim = face_stimulus(thin)
    late = StimulusProtocol((Stimulus(center=stim.center, box=stim.box, start=12.0, chamber="ventricles"),))
    runs = simulate_heart({"ventricles": thin}, {}, p, late, {"ventricles": "surrogate-ventricular"}, {"ventricles": spec})
    ref = run_simulation(thin, None, spec, "surrogate-ventricular", StimulusProtocol((stim,)), p)
    assert np.allclose(runs["ventricles"].activation, ref.activation + 12.0, atol=1e-9)
    assert runs["ventricles"].result.log[0][0] == pytest.approx(12.05)


def test_gap():
    run = lambda *a: SimpleNamespace(activation=np.array(a, dtype=float))  # noqa: E731
    runs = {"ra": run(0, 40), "la": run(30, 70), "ventricles": run(160, 200)}
    assert atrioventricular_gap(runs) == 90.0
    runs["la"] = run(30, np.nan)
    assert np.isnan(atrioventricular_gap(runs))
