import numpy as np
import pytest

from ldrbm.errors import ConfigError, SchemaError
from ldrbm.experiments import helix_band, septum_and_free_wall
from ldrbm.frames import orthonormality_error
from ldrbm.mesh import Mesh
from ldrbm.metrics import fiber_diff
from ldrbm.ventricular import VentricularAngles, generate_ventricular_fibers, helix_angle


@pytest.fixture(scope="module")
def fibers(biv):
    return {m: generate_ventricular_fibers(biv, m, "ideal") for m in "RBD"}


@pytest.mark.parametrize("m", "RBD")
def test_frames_valid(fibers, m):
    r = fibers[m]
    assert orthonormality_error(r.frames) < 1e-8
    et = r.transmural / np.linalg.norm(r.transmural, axis=1, keepdims=True)
    assert np.max(np.abs(np.einsum("ij,ij->i", r.fiber, et))) < 1e-6


@pytest.mark.parametrize("m", "RBD")
def test_mean_helix_angles(biv, fibers, m):
    r = fibers[m]
    band = helix_band(biv)
    lv, epi = biv.tag_nodes("lv"), biv.tag_nodes("epi")
    left = np.asarray(r.fields["xi"]) >= 0
    ha = helix_angle(r.frames, r.transmural)
    assert abs(ha[lv[band[lv]]].mean() - 60.0) < 3.0
    assert abs(ha[epi[band[epi] & left[epi]]].mean() + 60.0) < 3.0


def test_rossi_endocardial_angle_exact(biv, fibers):
    # R-RBM uses one transmural field, so pure endocardial nodes carry the
    # endocardial angle up to the helix measurement
    r = fibers["R"]
    lv = biv.tag_nodes("lv")
    lv = lv[helix_band(biv)[lv]]
    assert np.max(np.abs(helix_angle(r.frames, r.transmural)[lv] - 60.0)) < 3.0


def test_zero_angles_leave_frame_unrotated(biv):
    r = generate_ventricular_fibers(biv, "D", VentricularAngles.zero())
    assert np.all(r.fields["alpha"] == 0.0)
    # f is the longitudinal axis: orthogonal to the transmural direction and
    # to the normal (apico-basal) axis of the unrotated frame
    et = r.transmural
    assert np.max(np.abs(np.einsum("ij,ij->i", r.fiber, et))) < 1e-10
    assert np.max(np.abs(np.einsum("ij,ij->i", r.fiber, r.crossfiber))) < 1e-10
    assert np.allclose(r.sheet, et, atol=1e-10)


@pytest.mark.parametrize("m", "RBD")
def test_left_right_partition_matches_angles(fibers, m):
    r = fibers[m]
    left = np.asarray(r.fields["xi"]) >= 0
    a = VentricularAngles()
    alpha = r.fields["alpha"]
    lo_l, hi_l = sorted((a.alpha_epi_l, a.alpha_endo_l))
    lo_r, hi_r = sorted((a.alpha_epi_r, a.alpha_endo_r))
    # septal nodes of B may take the negated endocardial value
    lo_l, lo_r = min(lo_l, -a.alpha_endo_l), min(lo_r, -a.alpha_endo_r)
    assert np.all((alpha[left] >= lo_l - 1e-9) & (alpha[left] <= hi_l + 1e-9))
    assert np.all((alpha[~left] >= lo_r - 1e-9) & (alpha[~left] <= hi_r + 1e-9))


def test_bayer_septal_law(fibers):
    f = fibers["B"].fields
    septum = f["septum"].astype(bool)
    left = np.asarray(f["xi"]) >= 0
    sel = septum & left
    depth = 1.0 - np.clip(f["phi_l"][sel], 0.0, 1.0)
    assert np.allclose(f["alpha"][sel], 60.0 * (1.0 - 2.0 * depth))


def test_bayer_and_doste_agree_on_free_wall(fibers):
    _, free = septum_and_free_wall(fibers["B"].fields)
    d = fiber_diff(fibers["B"].frames, fibers["D"].frames)
    assert np.median(d[free]) < 0.1


def test_differences_concentrate_in_septum(fibers):
    septum, free = septum_and_free_wall(fibers["B"].fields)
    for a, b in ("RB", "RD"):
        d = fiber_diff(fibers[a].frames, fibers[b].frames)
        assert d[septum].mean() > 3.0 * d[free].mean()


def test_method_names(biv):
    a = generate_ventricular_fibers(biv, "D")
    b = generate_ventricular_fibers(biv, "D-RBM")
    assert np.array_equal(a.frames, b.frames)
    with pytest.raises(ConfigError):
        generate_ventricular_fibers(biv, "X")
    with pytest.raises(ConfigError):
        generate_ventricular_fibers(biv, "D", "nope")


def test_angle_validation():
    with pytest.raises(ConfigError):
        VentricularAngles(alpha_endo_l=400.0)
    with pytest.raises(ConfigError):
        VentricularAngles(alpha_epi_ot=0.0)


def test_outflow_angles_change_only_near_outflow(biv):
    a = generate_ventricular_fibers(biv, "D", "ideal")
    b = generate_ventricular_fibers(biv, "D", "realistic")
    changed = np.abs(a.fields["alpha"] - b.fields["alpha"]) > 1e-9
    w = np.where(np.asarray(a.fields["xi"]) >= 0, a.fields["w_l"], a.fields["w_r"])
    assert changed.any()
    assert np.all(w[changed] < 0.5)


def test_missing_tag_is_schema_error(biv):
    keep = biv.facet_tags != biv.tags["pv"]
    tags = {k: v for k, v in biv.tags.items() if k != "pv"}
    groups = {"rv": ("rs", "rv-s")}
    m = Mesh(biv.nodes, biv.elements, biv.facets[keep], biv.facet_tags[keep], tags, groups, biv.landmarks)
    with pytest.raises(SchemaError, match="TagSchema"):
        generate_ventricular_fibers(m, "D")


def test_deterministic(biv, fibers):
    again = generate_ventricular_fibers(biv, "B", "ideal")
    assert np.array_equal(again.frames, fibers["B"].frames)
