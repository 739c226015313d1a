import numpy as np
import pytest
from conftest import unit_cube

from ldrbm.errors import GeometryError, ParseError, SchemaError
from ldrbm.generators import (
    generate_four_chamber,
    generate_ideal_atrium,
    generate_ideal_biventricle,
    generate_slab,
)
from ldrbm.mesh import Mesh, TagSchema, load_fields, load_mesh, read_vtk, save_fields


def tag_partition_error(mesh):
    total = sum(mesh.tag_area(name) for name in mesh.tags)
    return abs(total - mesh.boundary_area()) / mesh.boundary_area()


def test_single_hex_cube_roundtrip(tmp_path):
    m = unit_cube().validate()
    assert (m.n_nodes, m.n_elements, len(m.facets)) == (8, 1, 6)
    save_fields(m, {}, tmp_path / "cube.vtk")
    back = load_mesh(tmp_path / "cube.vtk")
    assert back.same_as(m)


def test_untagged_face_is_a_schema_error(tmp_path):
    m = unit_cube()
    save_fields(m, {}, tmp_path / "cube.vtk")
    text = (tmp_path / "cube.vtk").read_text().splitlines()
    # boundary_tag block: element (-1) then six facet ids; untag the last one
    i = text.index("LOOKUP_TABLE default")
    text[i + 7] = "-1"
    (tmp_path / "cube.vtk").write_text("\n".join(text) + "\n")
    with pytest.raises(SchemaError):
        load_mesh(tmp_path / "cube.vtk")


def test_missing_face_tag_detected_by_validate():
    m = unit_cube()
    cut = Mesh(m.nodes, m.elements, m.facets[:5], m.facet_tags[:5], m.tags)
    with pytest.raises(SchemaError, match="carry no tag"):
        cut.validate()


def test_inverted_element_rejected():
    m = unit_cube()
    bad = Mesh(m.nodes, m.elements[:, [4, 5, 6, 7, 0, 1, 2, 3]], m.facets, m.facet_tags, m.tags)
    with pytest.raises(GeometryError):
        bad.validate()


def test_malformed_file(tmp_path):
    p = tmp_path / "x.vtk"
    p.write_text("not a vtk file\n")
    with pytest.raises(ParseError):
        read_vtk(p)


def test_missing_sidecar(tmp_path):
    save_fields(unit_cube(), {}, tmp_path / "c.vtk")
    (tmp_path / "c.tags").unlink()
    with pytest.raises(SchemaError, match="sidecar"):
        load_mesh(tmp_path / "c.vtk")


def test_field_roundtrip(tmp_path, slab):
    rng = np.random.default_rng(0)
    u = rng.normal(size=slab.n_nodes)
    Q = np.linalg.qr(rng.normal(size=(slab.n_nodes, 3, 3)))[0]
    labels = rng.integers(0, 5, slab.n_nodes)
    save_fields(slab, {"u": u, "frames": Q, "label": labels, "one": np.ones(slab.n_nodes)}, tmp_path / "s.vtk")
    mesh, f = read_vtk(tmp_path / "s.vtk")
    assert mesh.same_as(slab)
    assert np.max(np.abs(f["u"] - u)) <= 1e-12
    assert np.max(np.abs(f["fiber"] - Q[:, :, 0])) <= 1e-12
    assert np.max(np.abs(f["crossfiber"] - Q[:, :, 1])) <= 1e-12
    assert np.max(np.abs(f["sheet"] - Q[:, :, 2])) <= 1e-12
    assert np.array_equal(f["label"], labels)
    assert np.all(f["one"] == 1.0)
    for k in ("fiber", "crossfiber", "sheet"):
        assert np.allclose(np.linalg.norm(f[k], axis=1), 1.0)
    assert set(load_fields(tmp_path / "s.vtk")) == {"u", "fiber", "crossfiber", "sheet", "label", "one"}


def test_landmarks_survive_roundtrip(tmp_path, biv):
    save_fields(biv, {}, tmp_path / "b.vtk")
    back = load_mesh(tmp_path / "b.vtk")
    assert back.same_as(biv)
    assert set(back.landmarks) == set(biv.landmarks)
    for k, v in biv.landmarks.items():
        assert np.array_equal(back.landmarks[k], v)


def test_slab_counts():
    # 2.0/0.035, 0.7/0.035 and 0.3/0.035 round to 57, 20 and 9 elements
    m = generate_slab((2.0, 0.7, 0.3), 0.035)
    counts = [len(np.unique(np.round(m.nodes[:, i], 9))) for i in range(3)]
    assert counts == [58, 21, 10]
    assert m.n_elements == 57 * 20 * 9
    assert generate_slab((1.0, 1.0, 1.0), 1.0).n_nodes == 8


def test_slab_face_tags(slab):
    x = slab.nodes[:, 0]
    for name, pos in (("x0", x.min()), ("x1", x.max())):
        nodes = slab.tag_nodes(name)
        assert np.allclose(x[nodes], pos)
    on_x0 = np.all(np.isclose(x[slab.facets], x.min()), axis=1)
    assert np.all(slab.facet_tags[on_x0] == slab.tags["x0"])


def test_slab_rejects_bad_extent():
    with pytest.raises(GeometryError):
        generate_slab((1.0, -1.0, 1.0), 0.1)


@pytest.mark.parametrize("name", ["slab", "biv", "la", "ra"])
def test_tag_partition(name, request):
    assert tag_partition_error(request.getfixturevalue(name)) < 1e-10


def test_biventricle_tags(biv):
    biv.validate()
    lv, epi = biv.facet_mask("lv"), biv.facet_mask("epi")
    assert not np.any(lv & epi)
    base = biv.facet_mask("rings")
    z = biv.nodes[biv.facets[base]][:, :, 2]
    assert np.allclose(z, biv.landmarks["base-height"][0])
    for m in ("R", "B", "D"):
        TagSchema.for_method(m).check(biv)


def test_septal_tag_lies_near_left_ventricle(biv):
    # rs facets are right-endocardial facets close to the left endocardium
    from scipy.spatial import cKDTree

    lv_pts = biv.nodes[biv.tag_nodes("lv")]
    tree = cKDTree(lv_pts)
    d_rs = tree.query(biv.facet_centers()[biv.facet_mask("rs")])[0]
    d_rvs = tree.query(biv.facet_centers()[biv.facet_mask("rv-s")])[0]
    assert d_rs.max() < d_rvs.min() + 0.2
    assert np.median(d_rs) < np.median(d_rvs)


def test_atrial_schemas(la, ra):
    TagSchema.for_method("LA").check(la)
    TagSchema.for_method("RA").check(ra)
    for t in TagSchema.for_method("RA").required_tags:
        assert len(ra.tag_nodes(t)) > 0


def test_tricuspid_halves_disjoint(ra):
    s, f = ra.facet_mask("tv-s"), ra.facet_mask("tv-f")
    assert s.any() and f.any() and not np.any(s & f)


def test_atrial_wall_thickness(la):
    # distance from inner to outer surface along the radial direction
    c = la.landmarks["center"]
    r = np.linalg.norm(la.nodes - c, axis=1)
    inner = r[la.tag_nodes("endo")].mean()
    outer = r[la.tag_nodes("epi")].mean()
    assert abs((outer - inner) - 0.2) <= 0.1


def test_generators_are_deterministic():
    a = generate_ideal_biventricle(h=0.2)
    b = generate_ideal_biventricle(h=0.2)
    assert a.same_as(b) and np.array_equal(a.nodes, b.nodes)
    assert generate_ideal_atrium("RA", h=0.15).same_as(generate_ideal_atrium("RA", h=0.15))


def test_four_chamber_is_disjoint():
    m = generate_four_chamber(h_ventricles=0.25, h_atria=0.2)
    assert set(m) == {"ventricles", "ra", "la"}
    boxes = {k: (v.nodes.min(0), v.nodes.max(0)) for k, v in m.items()}
    lo_v, hi_v = boxes["ventricles"]
    for k in ("ra", "la"):
        # atria sit above the base plane
        assert boxes[k][0][2] > hi_v[2]
    ra, la = boxes["ra"], boxes["la"]
    assert ra[0][0] > la[1][0] or la[0][0] > ra[1][0]
