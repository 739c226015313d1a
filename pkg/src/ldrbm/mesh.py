"""Hexahedral mesh model, tag schemas and VTK legacy ASCII I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem
from .errors import DimensionError, GeometryError, ParseError, SchemaError

VTK_HEX = 12
VTK_QUAD = 9


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable labelled hexahedral mesh.

    ``tags`` maps atomic tag names to ids; every boundary facet carries one
    id. ``groups`` maps derived names (``rv``, ``rings``, ...) to tuples of
    atomic names. ``landmarks`` holds named points and directions used by
    stimulus protocols and diagnostics.
    """

    nodes: np.ndarray
    elements: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    tags: dict
    groups: dict = field(default_factory=dict)
    landmarks: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        conv = {
            "nodes": np.ascontiguousarray(self.nodes, dtype=np.float64).reshape(-1, 3),
            "elements": np.ascontiguousarray(self.elements, dtype=np.int64).reshape(-1, 8),
            "facets": np.ascontiguousarray(self.facets, dtype=np.int64).reshape(-1, 4),
            "facet_tags": np.ascontiguousarray(self.facet_tags, dtype=np.int32).ravel(),
        }
        for k, v in conv.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)
        object.__setattr__(self, "tags", {str(k): int(v) for k, v in self.tags.items()})
        object.__setattr__(
            self, "groups", {str(k): tuple(str(x) for x in v) for k, v in self.groups.items()}
        )
        lm = {}
        for k, v in self.landmarks.items():
            a = np.array(v, dtype=np.float64).ravel()
            a.setflags(write=False)
            lm[str(k)] = a
        object.__setattr__(self, "landmarks", lm)
        if len(self.facets) != len(self.facet_tags):
            raise DimensionError("facets and facet_tags differ in length")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    # tags

    def has_tag(self, name):
        return name in self.tags or name in self.groups

    def tag_ids(self, name):
        if name in self.tags:
            return (self.tags[name],)
        if name in self.groups:
            ids = []
            for member in self.groups[name]:
                ids.extend(self.tag_ids(member))
            return tuple(sorted(set(ids)))
        raise SchemaError(f"unknown tag '{name}'; available: {sorted(self.tags) + sorted(self.groups)}")

    def facet_mask(self, *names):
        ids = set()
        for n in names:
            ids.update(self.tag_ids(n))
        return np.isin(self.facet_tags, sorted(ids))

    def tag_nodes(self, *names):
        return np.unique(self.facets[self.facet_mask(*names)])

    # geometry

    def facet_centers(self):
        return self.nodes[self.facets].mean(axis=1)

    def facet_vector_areas(self):
        p = self.nodes[self.facets]
        return 0.5 * np.cross(p[:, 2] - p[:, 0], p[:, 3] - p[:, 1])

    def facet_areas(self):
        return np.linalg.norm(self.facet_vector_areas(), axis=1)

    def tag_area(self, *names):
        return float(self.facet_areas()[self.facet_mask(*names)].sum())

    def boundary_faces(self):
        """Faces of the element set that belong to exactly one element."""
        if "boundary" not in self._cache:
            faces = self.elements[:, fem.HEX_FACES].reshape(-1, 4)
            key = np.sort(faces, axis=1)
            _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
            self._cache["boundary"] = faces[counts[inv.ravel()] == 1]
        return self._cache["boundary"]

    def boundary_area(self):
        p = self.nodes[self.boundary_faces()]
        return float(np.linalg.norm(0.5 * np.cross(p[:, 2] - p[:, 0], p[:, 3] - p[:, 1]), axis=1).sum())

    # cached FE operators

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def stiffness(self):
        return self._cached("K", lambda: fem.stiffness(self.nodes, self.elements))

    def mass(self):
        return self._cached("M", lambda: fem.mass(self.nodes, self.elements))

    def lumped_mass(self):
        return self._cached("ML", lambda: fem.lumped_mass(self.nodes, self.elements))

    def element_volumes(self):
        return self._cached("vol", lambda: fem.element_volumes(self.nodes, self.elements))

    def gradient_operator(self):
        return self._cached("Gc", lambda: fem.center_gradient_operator(self.nodes, self.elements))

    def node_neighbors(self):
        """CSR adjacency of nodes sharing an element."""
        return self._cached("adj", lambda: _node_adjacency(self))

    # validation

    def validate(self):
        n = self.n_nodes
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= n):
            bad = np.where((self.elements < 0) | (self.elements >= n))[0][0]
            raise GeometryError(f"element {bad} references a node outside [0, {n})")
        if self.facets.size and (self.facets.min() < 0 or self.facets.max() >= n):
            raise GeometryError("facet references a node outside the node range")
        dets = fem.jacobian_dets(self.nodes, self.elements)
        bad = np.where(dets.min(axis=1) <= 0.0)[0]
        if len(bad):
            raise GeometryError(
                f"element {bad[0]} is inverted or degenerate (min det J = {dets[bad[0]].min():.3e})"
                + (f"; {len(bad) - 1} more" if len(bad) > 1 else "")
            )
        known = set(self.tags.values())
        unknown = sorted(set(np.unique(self.facet_tags).tolist()) - known)
        if unknown:
            raise SchemaError(f"facets carry ids {unknown} that are not in the tag map")
        if len(set(self.tags.values())) != len(self.tags):
            raise SchemaError("tag map is not a bijection")
        bkey = np.sort(self.boundary_faces(), axis=1)
        fkey = np.sort(self.facets, axis=1)
        if len(np.unique(fkey, axis=0)) != len(fkey):
            raise SchemaError("a boundary face carries more than one tag")
        b = {tuple(r) for r in bkey.tolist()}
        f = {tuple(r) for r in fkey.tolist()}
        if f - b:
            raise SchemaError(f"{len(f - b)} tagged facets are not faces of exactly one element")
        if b - f:
            raise SchemaError(f"{len(b - f)} boundary faces carry no tag")
        for g, members in self.groups.items():
            for m in members:
                self.tag_ids(m)
        return self

    def same_as(self, other, atol=0.0):
        return (
            self.nodes.shape == other.nodes.shape
            and np.allclose(self.nodes, other.nodes, rtol=0, atol=atol)
            and np.array_equal(self.elements, other.elements)
            and np.array_equal(self.facets, other.facets)
            and np.array_equal(self.facet_tags, other.facet_tags)
            and self.tags == other.tags
            and self.groups == other.groups
        )


def _node_adjacency(mesh):
    import scipy.sparse as sp

    e = mesh.elements
    rows = np.repeat(e, 8, axis=1).ravel()
    cols = np.tile(e, (1, 8)).ravel()
    A = sp.coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    A.sum_duplicates()
    return A


# ---------------------------------------------------------------------------
# tag schemas

SCHEMAS = {
    "R-RBM": ("epi", "lv", "rs", "rv-s", "base"),
    "B-RBM": ("epi", "lv", "rv", "rings", "la-apex"),
    "D-RBM": ("epi", "lv", "rv", "mv", "av", "tv", "pv", "la-apex", "ra-apex"),
    "ATRIAL-LA": ("epi", "endo", "appendage", "mv", "lpv", "rpv"),
    "ATRIAL-RA": ("epi", "endo", "appendage", "icv", "scv", "cs", "tv-s", "tv-f", "top-epi", "top-endo"),
}

# names that may be replaced by the union of their members
_ALTERNATIVES = {"rings": ("mv", "av", "tv", "pv"), "base": ("mv", "av", "tv", "pv")}

METHOD_ALIASES = {
    "R": "R-RBM",
    "B": "B-RBM",
    "D": "D-RBM",
    "LA": "ATRIAL-LA",
    "RA": "ATRIAL-RA",
}


@dataclass(frozen=True)
class TagSchema:
    method: str
    required_tags: tuple

    @classmethod
    def for_method(cls, method):
        m = METHOD_ALIASES.get(method, method)
        if m not in SCHEMAS:
            raise SchemaError(f"unknown method '{method}'; expected one of {sorted(SCHEMAS)}")
        return cls(m, SCHEMAS[m])

    def missing(self, mesh):
        out = []
        for t in self.required_tags:
            if mesh.has_tag(t) and len(mesh.tag_ids(t)):
                continue
            alt = _ALTERNATIVES.get(t)
            if alt and all(mesh.has_tag(a) for a in alt):
                continue
            out.append(t)
        return out

    def check(self, mesh):
        miss = self.missing(mesh)
        if miss:
            raise SchemaError(
                f"mesh does not satisfy TagSchema {self.method}: missing {miss} "
                f"(required {list(self.required_tags)})"
            )
        return True


def resolve_union(mesh, names):
    """Names that exist in the mesh, expanding rings/base alternatives."""
    out = []
    for n in names:
        if mesh.has_tag(n):
            out.append(n)
        elif n in _ALTERNATIVES:
            out.extend(a for a in _ALTERNATIVES[n] if mesh.has_tag(a))
    return out


# ---------------------------------------------------------------------------
# VTK legacy ASCII


def sidecar_path(path):
    return Path(path).with_suffix(".tags")


def _fmt(a):
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(a))


def _fmt_int(a):
    return "\n".join(" ".join(str(int(v)) for v in row) for row in np.atleast_2d(a))


def frame_arrays(name, frames):
    """Split an (N, 3, 3) frame field into named vector arrays."""
    prefix = "" if name in ("frames", "frame") else f"{name}_"
    return {
        f"{prefix}fiber": frames[:, :, 0],
        f"{prefix}sheet": frames[:, :, 2],
        f"{prefix}crossfiber": frames[:, :, 1],
    }


def write_tag_map(mesh, path):
    lines = ["# boundary tag map: name = id", "# groups list member ids"]
    for name, tid in sorted(mesh.tags.items(), key=lambda kv: kv[1]):
        lines.append(f"{name} = {tid}")
    for name in sorted(mesh.groups):
        lines.append(f"{name} = " + ", ".join(str(i) for i in mesh.tag_ids(name)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_tag_map(path):
    tags, group_ids = {}, {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'name = id'", i, path)
        name, val = (s.strip() for s in line.split("=", 1))
        try:
            ids = [int(v) for v in val.split(",")]
        except ValueError:
            raise ParseError(f"non-integer id '{val}'", i, path) from None
        if not name:
            raise ParseError("empty tag name", i, path)
        if len(ids) == 1 and "," not in val:
            tags[name] = ids[0]
        else:
            group_ids[name] = ids
    by_id = {v: k for k, v in tags.items()}
    groups = {}
    for g, ids in group_ids.items():
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ParseError(f"group '{g}' references unknown ids {missing}", None, path)
        groups[g] = tuple(by_id[i] for i in ids)
    return tags, groups


def save_fields(mesh, fields, path, title="ldrbm"):
    """Write mesh and nodal fields to a legacy ASCII VTK file plus tag sidecar.

    Scalars are (N,), vectors (N, 3) and frame fields (N, 3, 3); frame
    fields are written as ``fiber``, ``sheet`` and ``crossfiber`` arrays.
    Integer arrays are written as int.
    """
    n = mesh.n_nodes
    arrays = {}
    for name, val in (fields or {}).items():
        a = np.asarray(val)
        if a.shape[0] != n:
            raise DimensionError(f"field '{name}' has {a.shape[0]} entries, mesh has {n} nodes")
        if a.ndim == 3 and a.shape[1:] == (3, 3):
            arrays.update(frame_arrays(name, a))
        elif a.ndim == 1 or (a.ndim == 2 and a.shape[1] == 3):
            arrays[name] = a
        else:
            raise DimensionError(f"field '{name}' has unsupported shape {a.shape}")
    for name in arrays:
        if any(c.isspace() for c in name):
            raise DimensionError(f"field name '{name}' contains whitespace")

    E, F = mesh.n_elements, len(mesh.facets)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    if mesh.landmarks:
        out.append(f"FIELD FieldData {len(mesh.landmarks)}")
        for k in sorted(mesh.landmarks):
            v = mesh.landmarks[k]
            out.append(f"landmark:{k} {len(v)} 1 double")
            out.append(_fmt(v[None]))
    out.append(f"POINTS {n} double")
    out.append(_fmt(mesh.nodes))
    out.append(f"CELLS {E + F} {9 * E + 5 * F}")
    if E:
        out.append(_fmt_int(np.hstack([np.full((E, 1), 8), mesh.elements])))
    if F:
        out.append(_fmt_int(np.hstack([np.full((F, 1), 4), mesh.facets])))
    out.append(f"CELL_TYPES {E + F}")
    out.append("\n".join([str(VTK_HEX)] * E + [str(VTK_QUAD)] * F))
    out.append(f"CELL_DATA {E + F}")
    out.append("SCALARS boundary_tag int 1")
    out.append("LOOKUP_TABLE default")
    out.append("\n".join(["-1"] * E + [str(int(t)) for t in mesh.facet_tags]))
    if arrays:
        out.append(f"POINT_DATA {n}")
        for name, a in arrays.items():
            integer = np.issubdtype(a.dtype, np.integer) or a.dtype == bool
            if a.ndim == 1:
                out.append(f"SCALARS {name} {'int' if integer else 'double'} 1")
                out.append("LOOKUP_TABLE default")
                out.append("\n".join(str(int(v)) for v in a) if integer else "\n".join(f"{v:.17g}" for v in a))
            else:
                out.append(f"VECTORS {name} double")
                out.append(_fmt(a.astype(np.float64)))
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    write_tag_map(mesh, sidecar_path(path))


class _Tokens:
    def __init__(self, text, path):
        self.lines = text.splitlines()
        self.path = path
        self.li = 0
        self.buf = []

    def next_line(self):
        """Next non-empty line as a list of words."""
        while self.li < len(self.lines):
            self.li += 1
            words = self.lines[self.li - 1].split()
            if words:
                return words
        return None

    def values(self, count, conv, what):
        out = []
        start = self.li + 1
        while len(out) < count:
            if self.li >= len(self.lines):
                raise ParseError(f"unexpected end of file while reading {what}", self.li, self.path)
            self.li += 1
            words = self.lines[self.li - 1].split()
            try:
                out.extend(conv(w) for w in words)
            except ValueError:
                raise ParseError(f"malformed value in {what}", self.li, self.path) from None
        if len(out) != count:
            raise ParseError(f"{what}: expected {count} values, got {len(out)}", start, self.path)
        return out

    def error(self, msg):
        return ParseError(msg, self.li, self.path)


def read_vtk(path):
    """Read a file written by :func:`save_fields` (or any compatible legacy
    unstructured grid). Returns ``(mesh, fields)`` where fields holds the
    point-data arrays by name."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(str(exc), None, path) from None
    tk = _Tokens(text, path)
    head = tk.next_line()
    if not head or not " ".join(head).lower().startswith("# vtk datafile"):
        raise ParseError("missing '# vtk DataFile' header", 1, path)
    tk.li += 1  # title line
    fmt = tk.next_line()
    if not fmt or fmt[0].upper() != "ASCII":
        raise ParseError("only ASCII legacy files are supported", tk.li, path)
    ds = tk.next_line()
    if not ds or ds[0].upper() != "DATASET" or len(ds) < 2 or ds[1].upper() != "UNSTRUCTURED_GRID":
        raise ParseError("expected DATASET UNSTRUCTURED_GRID", tk.li, path)

    nodes = cells = types = None
    cell_arrays, point_arrays, landmarks = {}, {}, {}
    section = None
    n_section = 0
    while True:
        words = tk.next_line()
        if words is None:
            break
        key = words[0].upper()
        try:
            if key == "FIELD":
                nfa = int(words[2])
                for _ in range(nfa):
                    hdr = tk.next_line()
                    if hdr is None or len(hdr) < 4:
                        raise tk.error("malformed FIELD array header")
                    name, nc, nt = hdr[0], int(hdr[1]), int(hdr[2])
                    vals = np.array(tk.values(nc * nt, float, name))
                    if section is None and name.startswith("landmark:"):
                        landmarks[name[len("landmark:"):]] = vals
                    elif section == "point":
                        point_arrays[name] = vals.reshape(nt, nc) if nc > 1 else vals
                    elif section == "cell":
                        cell_arrays[name] = vals.reshape(nt, nc) if nc > 1 else vals
            elif key == "POINTS":
                n = int(words[1])
                nodes = np.array(tk.values(3 * n, float, "POINTS")).reshape(n, 3)
            elif key == "CELLS":
                ncell, size = int(words[1]), int(words[2])
                cells = tk.values(size, int, "CELLS")
                cells_n = ncell
            elif key == "CELL_TYPES":
                types = np.array(tk.values(int(words[1]), int, "CELL_TYPES"))
            elif key == "CELL_DATA":
                section, n_section = "cell", int(words[1])
            elif key == "POINT_DATA":
                section, n_section = "point", int(words[1])
            elif key == "SCALARS":
                name = words[1]
                dtype = words[2].lower() if len(words) > 2 else "float"
                nc = int(words[3]) if len(words) > 3 else 1
                lut = tk.next_line()
                if lut is None or lut[0].upper() != "LOOKUP_TABLE":
                    raise tk.error("expected LOOKUP_TABLE after SCALARS")
                conv = int if dtype in ("int", "long", "short", "char", "unsigned_int", "unsigned_char") else float
                vals = np.array(tk.values(n_section * nc, conv, name))
                if nc > 1:
                    vals = vals.reshape(n_section, nc)
                (cell_arrays if section == "cell" else point_arrays)[name] = vals
            elif key in ("VECTORS", "NORMALS"):
                name = words[1]
                vals = np.array(tk.values(3 * n_section, float, name)).reshape(n_section, 3)
                (cell_arrays if section == "cell" else point_arrays)[name] = vals
            else:
                raise tk.error(f"unexpected keyword '{words[0]}'")
        except (IndexError, ValueError):
            raise tk.error(f"malformed '{words[0]}' line") from None

    if nodes is None or cells is None or types is None:
        raise ParseError("file lacks POINTS, CELLS or CELL_TYPES", None, path)
    if len(types) != cells_n:
        raise ParseError("CELL_TYPES count differs from CELLS count", None, path)
    conn, pos = [], 0
    for i in range(cells_n):
        if pos >= len(cells):
            raise ParseError(f"CELLS list truncated at cell {i}", None, path)
        k = cells[pos]
        conn.append(cells[pos + 1 : pos + 1 + k])
        pos += k + 1
    hex_idx = [i for i, t in enumerate(types) if t == VTK_HEX]
    quad_idx = [i for i, t in enumerate(types) if t == VTK_QUAD]
    other = sorted(set(types.tolist()) - {VTK_HEX, VTK_QUAD})
    if other:
        raise ParseError(f"unsupported cell types {other}; only hexahedra and quads", None, path)
    elements = np.array([conn[i] for i in hex_idx], dtype=np.int64).reshape(-1, 8)
    facets = np.array([conn[i] for i in quad_idx], dtype=np.int64).reshape(-1, 4)
    if "boundary_tag" not in cell_arrays:
        raise SchemaError(f"{path}: missing integer cell-data array 'boundary_tag'")
    btag = np.asarray(cell_arrays["boundary_tag"]).astype(np.int64)
    ftags = btag[quad_idx] if len(quad_idx) else np.zeros(0, dtype=np.int64)
    untagged = np.where(ftags < 0)[0]
    if len(untagged):
        raise SchemaError(f"{path}: boundary facet {untagged[0]} carries no tag")

    side = sidecar_path(path)
    if side.exists():
        tags, groups = read_tag_map(side)
    else:
        raise SchemaError(f"{path}: tag map sidecar {side} not found")
    # unknown ids are preserved under a synthetic name
    for t in sorted(set(ftags.tolist()) - set(tags.values())):
        tags[f"tag{t}"] = int(t)
    mesh = Mesh(nodes, elements, facets, ftags, tags, groups, landmarks)
    mesh.validate()
    return mesh, point_arrays


def load_mesh(path):
    return read_vtk(path)[0]


def load_fields(path):
    return read_vtk(path)[1]
