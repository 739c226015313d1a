"""Acceptance experiments on the idealized geometries.

Each ``criterion_<n>`` method runs one experiment, writes its primary
outputs (CSV, text) under ``<outdir>/c<n>/`` and returns an
:class:`Outcome`. Wall-clock timings are returned but never written, so the
files of two runs can be compared byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .atrial import LA_BUNDLES, RA_BUNDLES, generate_atrial_fibers
from .ep.cv import fit_conductivity, slab_cv
from .ep.heart import atrioventricular_gap, simulate_heart
from .ep.monodomain import CONDUCTIVITY_PRESETS, ConductivitySpec, EPParams, run_simulation
from .ep.stimulus import Stimulus, StimulusProtocol, la_schedule, sites_from_meshes
from .frames import orthonormality_error
from .generators import generate_four_chamber, generate_ideal_atrium, generate_ideal_biventricle, generate_slab, ring_tangent
from .laplace import DirichletSpec, LaplaceSolution, solve_laplace
from .metrics import activation_diff, fiber_diff
from .ventricular import generate_ventricular_fibers, helix_angle

LAPLACE_TOL = 1e-10
VENTRICLE_H = 0.1
ATRIUM_H = 0.05
BIV_STIMULI = ("lv-septal", "lv-lateral", "rv-septal", "rv-lateral")
RINGS = {"LA": ("mv", "lpv", "rpv"), "RA": ("tv-s", "tv-f", "icv", "scv")}


@dataclass
class Outcome:
    criterion: int
    title: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"criterion {self.criterion:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}: {self.detail}"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


def tree_digest(root):
    """{relative path: sha256} for every file under ``root``."""
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def helix_band(mesh, fraction=0.1):
    """Nodes farther than ``fraction`` of the apex-base distance from both
    ends."""
    z = mesh.nodes[:, 2]
    top = mesh.landmarks["base-height"][0]
    bottom = mesh.landmarks["apex-height"][0]
    L = top - bottom
    return (z > bottom + fraction * L) & (z < top - fraction * L)


def septum_and_free_wall(bayer_fields):
    """Septal nodes (both endocardial distances above 0.05) and left free
    wall nodes (left side, outside the septum, away from the right
    endocardium)."""
    f = bayer_fields
    septum = np.minimum(f["phi_l"], f["phi_r"]) > 0.05
    free = (np.asarray(f["xi"]) >= 0) & ~septum & (np.asarray(f["phi_r"]) < 0.02)
    return np.asarray(septum), np.asarray(free)


class Suite:
    """Shares meshes and fiber fields between criteria of one run."""

    def __init__(self, outdir):
        self.out = Path(outdir)
        self._cache = {}

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def biventricle(self):
        return self._get("biv", lambda: generate_ideal_biventricle(h=VENTRICLE_H))

    def ventricular(self, method):
        return self._get(("vf", method), lambda: generate_ventricular_fibers(self.biventricle(), method, "ideal", tol=LAPLACE_TOL))

    def atrium(self, side):
        return self._get(("atrium", side), lambda: generate_ideal_atrium(side, h=ATRIUM_H))

    def atrial(self, side):
        return self._get(("af", side), lambda: generate_atrial_fibers(self.atrium(side), side, "ideal", tol=LAPLACE_TOL))

    def run(self, which=range(1, 10)):
        return [getattr(self, f"criterion_{i}")() for i in which]

    # --- 1 ------------------------------------------------------------
    def criterion_1(self):
        t0 = time.perf_counter()
        slab = generate_slab((2.0, 0.7, 0.3), 0.05)
        t = time.perf_counter()
        u = solve_laplace(slab, DirichletSpec.of(("x0", 0.0), ("x1", 1.0)), tol=LAPLACE_TOL)
        t_slab = time.perf_counter() - t
        x = slab.nodes[:, 0]
        err = float(np.max(np.abs(u - (x - x.min()) / np.ptp(x))))
        rows = []
        for name, fields_ in self._ldrbm_fields():
            for k, v in fields_.items():
                if isinstance(v, LaplaceSolution) and np.isfinite(v.bounds[0]):
                    lo, hi = v.bounds
                    ok = v.min() >= lo - LAPLACE_TOL and v.max() <= hi + LAPLACE_TOL
                    rows.append((name, k, float(v.min()), float(v.max()), lo, hi, ok))
        fine = generate_ideal_biventricle(h=0.05)
        t = time.perf_counter()
        solve_laplace(fine, DirichletSpec.of((("lv", "la-apex"), 2.0), (("rv", "ra-apex"), -1.0), ("epi", 0.0)), tol=LAPLACE_TOL)
        t_biv = time.perf_counter() - t
        write_rows(self.out / "c1" / "slab.csv", ["x", "u"], zip(x, u))
        write_rows(self.out / "c1" / "maximum_principle.csv", ["source", "field", "min", "max", "lo", "hi", "ok"], rows)
        mp = all(r[-1] for r in rows)
        passed = err < 1e-10 and mp and max(t_slab, t_biv) < 10.0
        detail = (
            f"slab L_inf {err:.1e} (< 1e-10); maximum principle on {len(rows)} solves {'holds' if mp else 'VIOLATED'}; "
            f"solve time slab {t_slab:.2f} s, biventricle h=0.05 ({fine.n_nodes} nodes) {t_biv:.2f} s (< 10 s)"
        )
        return Outcome(1, "Laplace exactness", passed, detail, {"linf": err, "mp": mp, "t_slab": t_slab, "t_biv": t_biv}, time.perf_counter() - t0)

    def _ldrbm_fields(self):
        for m in "RBD":
            yield f"{m}-RBM", self.ventricular(m).fields
        for side in ("LA", "RA"):
            yield side, self.atrial(side).fields

    # --- 2 ------------------------------------------------------------
    def criterion_2(self):
        t0 = time.perf_counter()
        rows = []
        for m in "RBD":
            r = self.ventricular(m)
            f = r.fiber
            et = r.transmural / np.linalg.norm(r.transmural, axis=1, keepdims=True)
            rows.append((f"{m}-RBM", orthonormality_error(r.frames), float(np.max(np.abs(np.einsum("ij,ij->i", f, et))))))
        for side in ("LA", "RA"):
            rows.append((side, orthonormality_error(self.atrial(side).frames), np.nan))
        write_rows(self.out / "c2" / "frames.csv", ["source", "orthonormality", "f_dot_transmural"], rows)
        orth = max(r[1] for r in rows)
        ft = max(r[2] for r in rows if np.isfinite(r[2]))
        passed = orth < 1e-8 and ft < 1e-6
        detail = f"max |Q^T Q - I| {orth:.1e} (< 1e-8), max |f.grad phi|/|grad phi| {ft:.1e} (< 1e-6) over R, B, D, LA, RA"
        return Outcome(2, "Frame validity", passed, detail, {"orth": orth, "ft": ft}, time.perf_counter() - t0)

    # --- 3 ------------------------------------------------------------
    def criterion_3(self):
        t0 = time.perf_counter()
        mesh = self.biventricle()
        band = helix_band(mesh)
        lv = mesh.tag_nodes("lv")
        epi = mesh.tag_nodes("epi")
        rows = []
        worst = 0.0
        for m in "RBD":
            r = self.ventricular(m)
            ha = helix_angle(r.frames, r.transmural)
            left = np.asarray(r.fields["xi"]) >= 0
            endo_n = lv[band[lv]]
            epi_n = epi[band[epi] & left[epi]]
            for where, nodes, target in (("endo", endo_n, 60.0), ("epi", epi_n, -60.0)):
                a = ha[nodes]
                q = np.percentile(a, [5, 50, 95])
                rows.append((f"{m}-RBM", where, len(nodes), float(a.mean()), *q, target))
                worst = max(worst, abs(float(a.mean()) - target))
        write_rows(self.out / "c3" / "helix.csv", ["method", "surface", "nodes", "mean", "q05", "q50", "q95", "target"], rows)
        means = ", ".join(f"{r[0][0]} {r[1]} {r[3]:+.1f}" for r in rows)
        return Outcome(3, "Angle recovery", worst < 3.0, f"mean helix angle {means} (targets +60/-60, max error {worst:.2f} < 3 deg)", {"worst": worst}, time.perf_counter() - t0)

    # --- 4 ------------------------------------------------------------
    def criterion_4(self):
        t0 = time.perf_counter()
        rows, rings, empty, partition = [], [], [], True
        for side in ("LA", "RA"):
            mesh = self.atrium(side)
            r = self.atrial(side)
            labels = RA_BUNDLES if side == "RA" else LA_BUNDLES
            counts = r.counts()
            partition &= bool(np.isin(r.bundle, [int(b) for b in labels]).all()) and sum(counts.values()) == mesh.n_nodes
            for name, c in counts.items():
                rows.append((side, name, c))
                if c == 0:
                    empty.append(f"{side}:{name}")
            for ring in RINGS[side]:
                nodes = mesh.tag_nodes(ring)
                T = ring_tangent(mesh, "tv" if ring.startswith("tv") else ring, mesh.nodes[nodes])
                frac = float(np.mean(np.abs(np.einsum("ij,ij->i", r.fiber[nodes], T)) > 0.9))
                rings.append((side, ring, len(nodes), frac))
        write_rows(self.out / "c4" / "bundles.csv", ["side", "bundle", "nodes"], rows)
        write_rows(self.out / "c4" / "circularity.csv", ["side", "ring", "nodes", "fraction_aligned"], rings)
        low = [f"{s}:{g} {f:.2f}" for s, g, _, f in rings if f < 0.9]
        passed = partition and not empty and not low
        detail = (
            f"partition {'exact' if partition else 'BROKEN'}; empty labels: {', '.join(empty) or 'none'}; "
            f"rings below 90% aligned: {', '.join(low) or 'none'}"
        )
        return Outcome(4, "Atrial bundle partition", passed, detail, {"empty": empty, "low": low}, time.perf_counter() - t0)

    # --- 5 ------------------------------------------------------------
    def criterion_5(self):
        t0 = time.perf_counter()
        rows, ok = [], True
        for model, targets in (("surrogate-ventricular", ((60.0, "f"), (40.0, "s"), (20.0, "n"))), ("surrogate-atrial", ((120.0, "f"), (40.0, "s")))):
            for v, d in targets:
                r = fit_conductivity(v, d, ionic=model)
                err = abs(r.cv - v) / v
                ok &= r.converged and err < 0.01
                rows.append((model, d, v, r.sigma, r.cv, r.iterations, err))
        cv_ttp = slab_cv(1.07, "ttp", h=0.035, dt=0.05)
        ttp_ok = abs(cv_ttp - 60.0) / 60.0 <= 0.10
        rows.append(("ttp", "f", 60.0, 1.07, cv_ttp, 0, abs(cv_ttp - 60.0) / 60.0))
        write_rows(self.out / "c5" / "fits.csv", ["model", "direction", "target_cm_s", "sigma_mS_cm", "cv_cm_s", "iterations", "rel_error"], rows)
        fits = ", ".join(f"{r[2]:g}->{r[4]:.2f}" for r in rows[:-1])
        detail = f"surrogate fits {fits} cm/s (within 1%); TTP sigma_f=1.07 gives {cv_ttp:.1f} cm/s (60 +/- 10%)"
        return Outcome(5, "CV fitting", ok and ttp_ok, detail, {"ttp_cv": cv_ttp}, time.perf_counter() - t0)

    # --- 6 ------------------------------------------------------------
    def criterion_6(self):
        t0 = time.perf_counter()
        mesh = generate_slab((2.0, 0.7, 0.3), 0.035)
        frames = np.broadcast_to(np.eye(3), (mesh.n_nodes, 3, 3))
        spec = CONDUCTIVITY_PRESETS["ventricular"]
        protocol = StimulusProtocol((Stimulus(center=(0.0, 0.0, 0.0), box=((0.0, 0.0, 0.0), (0.15, 0.15, 0.15)), name="corner"),))
        L = np.ptp(mesh.nodes, axis=0)
        _, idx = cKDTree(mesh.nodes).query(np.linspace(0.0, 1.0, 60)[:, None] * L)
        act = {}
        for order, dt in ((3, 0.05), (1, 0.01)):
            params = EPParams(dt=dt, bdf_order=order, T_end=300.0, stop_when_activated=True)
            act[order] = run_simulation(mesh, frames, spec, "ttp", protocol, params).activation[idx]
        d = np.abs(act[3] - act[1])
        s = np.linalg.norm(mesh.nodes[idx], axis=1)
        write_rows(self.out / "c6" / "diagonal.csv", ["distance_cm", "bdf3_dt0.05", "bdf1_dt0.01", "abs_diff"], zip(s, act[3], act[1], d))
        dmax = float(np.max(d)) if np.all(np.isfinite(d)) else np.inf
        return Outcome(6, "BDF3 vs BDF1", dmax < 2.0, f"TTP slab diagonal, max |A_BDF3 - A_BDF1| = {dmax:.2f} ms over 60 points (< 2 ms)", {"max": dmax}, time.perf_counter() - t0)

    # --- 7 ------------------------------------------------------------
    def criterion_7(self):
        t0 = time.perf_counter()
        mesh = self.biventricle()
        F = {m: self.ventricular(m).frames for m in "RBD"}
        septum, free = septum_and_free_wall(self.ventricular("B").fields)
        rows, ratios = [], {}
        for a, b in ("RB", "RD", "BD"):
            d = fiber_diff(F[a], F[b])
            ratios[a + b] = float(d[septum].mean() / d[free].mean())
            rows.append((a + b, float(d[septum].mean()), float(d[free].mean()), ratios[a + b]))
        write_rows(self.out / "c7" / "fiber_diff.csv", ["pair", "septum_mean", "lv_free_wall_mean", "ratio"], rows)
        protocol = StimulusProtocol(tuple(Stimulus(center=mesh.landmarks[k], name=k) for k in BIV_STIMULI))
        spec = CONDUCTIVITY_PRESETS["surrogate-ventricular"]
        params = EPParams(T_end=300.0, stop_when_activated=True)
        A = {m: run_simulation(mesh, F[m], spec, "surrogate-ventricular", protocol, params).activation for m in "RBD"}
        write_rows(self.out / "c7" / "activation.csv", ["A_R", "A_B", "A_D"], zip(A["R"], A["B"], A["D"]))
        M = {}
        for a, b in ("RB", "RD", "BD"):
            r = activation_diff(A[a], A[b])
            M[a + b] = r.M_pct
        write_rows(self.out / "c7" / "activation_diff.csv", ["pair", "M_pct"], sorted(M.items()))
        fib_ok = ratios["RB"] >= 3.0 and ratios["RD"] >= 3.0
        act_ok = M["BD"] < M["RB"] and M["BD"] < M["RD"]
        detail = (
            f"septum/free-wall diff ratio RB {ratios['RB']:.1f}, RD {ratios['RD']:.1f} (>= 3); "
            f"M% RB {100 * M['RB']:.1f}, RD {100 * M['RD']:.1f}, BD {100 * M['BD']:.1f} (BD smallest)"
        )
        return Outcome(7, "Method comparison", fib_ok and act_ok, detail, {"ratios": ratios, "M": M}, time.perf_counter() - t0)

    # --- 8 ------------------------------------------------------------
    def criterion_8(self):
        t0 = time.perf_counter()
        mesh = self.atrium("LA")
        protocol = la_schedule(sites_from_meshes({"la": mesh}))
        params = EPParams(T_end=300.0, stop_when_activated=True)
        fib = run_simulation(mesh, self.atrial("LA").frames, CONDUCTIVITY_PRESETS["surrogate-atrial"], "surrogate-atrial", protocol, params)
        iso = run_simulation(mesh, None, CONDUCTIVITY_PRESETS["surrogate-atrial-isotropic"], "surrogate-atrial", protocol, params)
        d = activation_diff(fib.activation, iso.activation)
        write_rows(self.out / "c8" / "activation.csv", ["A_fiber", "A_isotropic", "abs_diff"], zip(fib.activation, iso.activation, d.delta))
        detail = f"max |A_fiber - A_iso| = {d.M:.1f} ms, {100 * d.M_pct:.1f}% of total activation {d.A_max:.1f} ms (> 10%)"
        return Outcome(8, "Fiber vs isotropic (LA)", d.M_pct > 0.10, detail, {"M_pct": d.M_pct}, time.perf_counter() - t0)

    # --- 9 ------------------------------------------------------------
    def criterion_9(self):
        t0 = time.perf_counter()
        meshes = generate_four_chamber(h_ventricles=VENTRICLE_H, h_atria=ATRIUM_H)
        frames = {
            "ventricles": generate_ventricular_fibers(meshes["ventricles"], "D", "ideal", tol=LAPLACE_TOL).frames,
            "ra": generate_atrial_fibers(meshes["ra"], "RA", "ideal", tol=LAPLACE_TOL).frames,
            "la": generate_atrial_fibers(meshes["la"], "LA", "ideal", tol=LAPLACE_TOL).frames,
        }
        params = EPParams(T_end=500.0, stop_when_activated=True)
        runs = simulate_heart(meshes, frames, params)
        rows = []
        for ch, r in runs.items():
            a = r.activation
            write_rows(self.out / "c9" / f"activation_{ch}.csv", ["activation_ms"], ((v,) for v in a))
            rows.append((ch, len(a), int(np.sum(np.isfinite(a))), float(np.nanmin(a)), float(np.nanmax(a))))
        write_rows(self.out / "c9" / "chambers.csv", ["chamber", "nodes", "activated", "first_ms", "last_ms"], rows)
        gap = atrioventricular_gap(runs)
        complete = all(r[1] == r[2] for r in rows) and max(r[4] for r in rows) <= params.T_end
        passed = bool(np.isfinite(gap) and gap > 0 and complete)
        atria_end = max(r[4] for r in rows if r[0] != "ventricles")
        v_start = min(r[3] for r in rows if r[0] == "ventricles")
        detail = (
            f"atria done at {atria_end:.1f} ms, first ventricular activation {v_start:.1f} ms (gap {gap:.1f} ms); "
            f"all nodes activated by {max(r[4] for r in rows):.1f} ms (<= 500)"
        )
        return Outcome(9, "Whole-heart schedule", passed, detail, {"gap": gap}, time.perf_counter() - t0)


def determinism(outdir_a, outdir_b, which=range(1, 10)):
    """Run the criteria a second time into ``outdir_b`` and compare every
    output file with the first run in ``outdir_a``."""
    t0 = time.perf_counter()
    Suite(outdir_b).run(which)
    a, b = tree_digest(outdir_a), tree_digest(outdir_b)
    differ = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    passed = not differ and len(a) > 0
    detail = f"{len(a)} output files, {len(differ)} differ" + (f" ({', '.join(differ[:5])})" if differ else "")
    return Outcome(10, "Determinism", passed, detail, {"differ": differ}, time.perf_counter() - t0)
