"""Command-line driver.

    ldrbm gen-geometry    --preset ideal-biventricle --output out/
    ldrbm generate-fibers --preset fibers-d --output out/
    ldrbm simulate        --config run.ini --output out/
    ldrbm compare         --config cmp.ini
    ldrbm fit-cv          --preset fit-ventricular
    ldrbm reproduce       --criterion 7

Exit codes: 0 success, 1 acceptance criterion failed (reproduce only),
2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import platform
import sys
from pathlib import Path

from .errors import InputError, LdrbmError

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
VERSION = "0.1.0"

log = logging.getLogger("ldrbm")


# ---------------------------------------------------------------------------
# building blocks


def _geometry(cfg):
    """{name: mesh}; single-mesh geometries use the key ``mesh``."""
    from .generators import generate_four_chamber, generate_ideal_atrium, generate_ideal_biventricle, generate_slab
    from .mesh import load_mesh

    path = cfg.get("geometry", "file")
    if path is not None:
        return {"mesh": load_mesh(path)}
    gen = cfg.get("geometry", "generator")
    h = cfg.get_float("geometry", "h")
    if gen == "slab":
        return {"mesh": generate_slab(cfg.get_floats("geometry", "lengths", 3, (2.0, 0.7, 0.3)), h or 0.035)}
    if gen == "biventricle":
        return {"mesh": generate_ideal_biventricle(h=h or 0.1)}
    if gen in ("la", "ra"):
        return {"mesh": generate_ideal_atrium(gen.upper(), h=h or 0.05)}
    return generate_four_chamber(h_ventricles=h or 0.1, h_atria=cfg.get_float("geometry", "h_atria", 0.05))


def _chamber_kind(name, cfg):
    if name in ("ventricles", "ra", "la"):
        return {"ventricles": "biventricle", "ra": "ra", "la": "la"}[name]
    return cfg.get("geometry", "generator")


def _angles(cfg):
    from dataclasses import replace

    from .ventricular import ANGLE_PRESETS
    from .errors import ConfigError

    name = cfg.get("fibers", "angles", "ideal")
    if name not in ANGLE_PRESETS:
        raise ConfigError(f"[fibers] angles '{name}' is not one of {', '.join(sorted(ANGLE_PRESETS))}")
    over = {**cfg.prefixed("fibers", "alpha_"), **cfg.prefixed("fibers", "beta_")}
    return replace(ANGLE_PRESETS[name], **over)


def _taus(cfg):
    from dataclasses import replace

    from .atrial import get_taus

    return replace(get_taus(cfg.get("fibers", "taus", "ideal")), **cfg.prefixed("fibers", "tau_"))


def _fibers(cfg, name, mesh, tol):
    """(frames or None, fields dict) for one chamber."""
    import numpy as np

    from .atrial import generate_atrial_fibers
    from .errors import ConfigError
    from .mesh import load_fields
    from .ventricular import generate_ventricular_fibers

    path = cfg.get("fibers", "file")
    if path is not None:
        arr = load_fields(path)
        missing = [k for k in ("fiber", "crossfiber", "sheet") if k not in arr]
        if missing:
            raise ConfigError(f"[fibers] file '{path}' lacks arrays {missing}")
        return np.stack([arr["fiber"], arr["crossfiber"], arr["sheet"]], axis=2), {}
    method = cfg.get("fibers", "method", "none")
    if method == "none":
        return None, {}
    if method == "auto":
        kind = _chamber_kind(name, cfg)
        method = {"biventricle": "D", "la": "LA", "ra": "RA"}.get(kind)
        if method is None:
            raise ConfigError(f"[fibers] method 'auto' has no default for geometry '{kind}'")
    if method in ("LA", "RA"):
        r = generate_atrial_fibers(mesh, method, _taus(cfg), tol=tol)
        return r.frames, dict(r.fields)
    r = generate_ventricular_fibers(mesh, method, _angles(cfg), tol=tol)
    return r.frames, dict(r.fields)


def _conductivity(cfg, chamber=None):
    from .ep.monodomain import CONDUCTIVITY_PRESETS, ConductivitySpec
    from .errors import ConfigError

    preset = cfg.get("conductivity", "preset")
    if preset is None and cfg.get("conductivity", "sigma_f") is None:
        preset = {"ventricles": "surrogate-ventricular", "ra": "surrogate-atrial", "la": "surrogate-atrial"}.get(chamber)
        if preset is None:
            raise ConfigError("[conductivity] needs 'preset' or 'sigma_f'")
    if preset is not None:
        if preset not in CONDUCTIVITY_PRESETS:
            raise ConfigError(f"[conductivity] preset '{preset}' is not one of {', '.join(sorted(CONDUCTIVITY_PRESETS))}")
        return CONDUCTIVITY_PRESETS[preset]
    sf = cfg.get_float("conductivity", "sigma_f")
    if cfg.get_bool("conductivity", "isotropic"):
        return ConductivitySpec.isotropic(sf)
    return ConductivitySpec(sf, cfg.get_float("conductivity", "sigma_s", sf), cfg.get_float("conductivity", "sigma_n", sf))


def _params(cfg):
    from .ep.monodomain import EPParams

    return EPParams(
        dt=cfg.get_float("numerics", "dt", 0.05),
        bdf_order=cfg.get_int("numerics", "bdf_order", 3),
        T_end=cfg.get_float("numerics", "T_end", 500.0),
        snapshot_every=cfg.get_float("numerics", "snapshot_every"),
        solver_tol=cfg.get_float("numerics", "tol", 1e-10),
        mass=cfg.get("numerics", "mass", "consistent"),
        stop_when_activated=cfg.get_bool("numerics", "stop_when_activated"),
    )


def _protocol(cfg, meshes):
    from .ep.stimulus import (
        STIM_AMPLITUDE,
        STIM_DURATION,
        STIM_RADIUS,
        WHOLE_HEART_TIMES,
        Stimulus,
        StimulusProtocol,
        face_stimulus,
        la_schedule,
        sites_from_meshes,
        whole_heart_schedule,
    )
    from .errors import ConfigError

    kind = cfg.get("stimulus", "protocol", "landmarks")
    radius = cfg.get_float("stimulus", "radius", STIM_RADIUS)
    duration = cfg.get_float("stimulus", "duration", STIM_DURATION)
    amplitude = cfg.get_float("stimulus", "amplitude", STIM_AMPLITUDE)
    if kind == "face":
        mesh = next(iter(meshes.values()))
        return StimulusProtocol((face_stimulus(mesh, duration=duration, amplitude=amplitude),))
    if kind == "landmarks":
        mesh = next(iter(meshes.values()))
        names = cfg.get_words("stimulus", "sites")
        if not names:
            raise ConfigError("[stimulus] protocol 'landmarks' needs 'sites'")
        out = []
        for n in names:
            if n not in mesh.landmarks:
                raise ConfigError(f"[stimulus] site '{n}' is not a landmark of this mesh; available: {', '.join(sorted(mesh.landmarks))}")
            out.append(Stimulus(center=mesh.landmarks[n], radius=radius, duration=duration, amplitude=amplitude, name=n, start=cfg.get_float("stimulus", f"time_{n}", 0.0)))
        return StimulusProtocol(tuple(out))
    if kind == "la":
        mesh = next(iter(meshes.values()))
        return la_schedule(sites_from_meshes({"la": mesh}), radius=radius, duration=duration, amplitude=amplitude)
    times = {k: cfg.get_float("stimulus", f"time_{k}", v) for k, v in WHOLE_HEART_TIMES.items()}
    return whole_heart_schedule(sites_from_meshes(meshes), tuple(meshes), times=times, radius=radius, duration=duration, amplitude=amplitude)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg, outputs, extra=None):
    """Plain-text provenance: configuration, versions and output hashes."""
    import numpy
    import scipy

    lines = [
        "# ldrbm run manifest",
        f"command = {cfg.command}",
        f"source = {cfg.source}",
        f"ldrbm = {VERSION}",
        f"python = {platform.python_version()}",
        f"numpy = {numpy.__version__}",
        f"scipy = {scipy.__version__}",
        f"threads = {cfg.threads if cfg.threads is not None else 'default'}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    lines.append("")
    lines.append("[config]")
    lines.append(cfg.to_text())
    lines.append("[outputs]")
    for p in sorted(outputs, key=str):
        lines.append(f"{Path(p).name} = sha256:{_sha256(p)}")
    path = cfg.output / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_generate_geometry(cfg):
    from .mesh import save_fields

    outputs = []
    for name, mesh in _geometry(cfg).items():
        p = cfg.output / f"{name}.vtk"
        save_fields(mesh, {}, p)
        outputs += [p, p.with_suffix(".tags")]
        print(f"{p}: {mesh.n_nodes} nodes, {mesh.n_elements} elements, tags {', '.join(sorted(mesh.tags))}")
    write_manifest(cfg, outputs)
    return EXIT_OK


def cmd_generate_fibers(cfg):
    from .mesh import save_fields

    tol = cfg.get_float("numerics", "tol", 1e-10)
    outputs = []
    for name, mesh in _geometry(cfg).items():
        frames, fields_ = _fibers(cfg, name, mesh, tol)
        if frames is None:
            from .errors import ConfigError

            raise ConfigError("[fibers] method is 'none'; nothing to generate")
        data = {"frames": frames, **{k: v for k, v in fields_.items()}}
        p = cfg.output / ("fibers.vtk" if name == "mesh" else f"fibers_{name}.vtk")
        save_fields(mesh, data, p)
        outputs += [p, p.with_suffix(".tags")]
        print(f"{p}: frames and {len(fields_)} fields on {mesh.n_nodes} nodes")
    write_manifest(cfg, outputs)
    return EXIT_OK


def cmd_simulate(cfg):
    import numpy as np

    from .ep.cv import measure_cv
    from .ep.heart import atrioventricular_gap, simulate_heart
    from .ep.monodomain import run_simulation
    from .experiments import write_rows
    from .mesh import save_fields

    meshes = _geometry(cfg)
    tol = cfg.get_float("numerics", "tol", 1e-10)
    params = _params(cfg)
    protocol = _protocol(cfg, meshes)
    ionic_name = cfg.get("ionic", "model")
    outputs = []
    frames = {}
    for name, mesh in meshes.items():
        frames[name] = _fibers(cfg, name, mesh, tol)[0]
    if len(meshes) > 1:
        ionic = {k: ionic_name for k in meshes} if ionic_name else None
        cond = {k: _conductivity(cfg, k) for k in meshes}
        runs = {k: r.result for k, r in simulate_heart(meshes, frames, params, protocol, ionic, cond).items()}
        print(f"atrioventricular gap {atrioventricular_gap(runs):.2f} ms")
    else:
        from .errors import ConfigError

        if ionic_name is None:
            raise ConfigError("[ionic] model is required")
        (name, mesh), = meshes.items()
        runs = {name: run_simulation(mesh, frames[name], _conductivity(cfg), ionic_name, protocol, params)}
    extra = {}
    for name, res in runs.items():
        mesh = meshes[name]
        suffix = "" if name == "mesh" else f"_{name}"
        data = {"activation": np.where(np.isfinite(res.activation), res.activation, -1.0)}
        if frames[name] is not None:
            data["frames"] = frames[name]
        p = cfg.output / f"activation{suffix}.vtk"
        save_fields(mesh, data, p)
        c = cfg.output / f"activation{suffix}.csv"
        write_rows(c, ["node", "activation_ms"], enumerate(res.activation))
        lg = cfg.output / f"log{suffix}.csv"
        res.write_log(lg)
        outputs += [p, p.with_suffix(".tags"), c, lg]
        if res.snapshots:
            s = cfg.output / f"snapshots{suffix}.vtk"
            save_fields(mesh, {f"u_{t:09.3f}ms": u for t, u in res.snapshots}, s)
            outputs.append(s)
        act = res.activation
        n_act = int(np.sum(np.isfinite(act)))
        print(f"{name}: {n_act}/{len(act)} nodes activated, total activation time {res.total_time:.2f} ms")
        extra[f"activated{suffix}"] = f"{n_act}/{len(act)}"
        if cfg.get("stimulus", "protocol") == "face":
            cv = measure_cv(mesh.nodes, act, axis=0)
            r = cfg.output / "cv.csv"
            write_rows(r, ["axis", "cv_cm_s"], [("x", cv)])
            outputs.append(r)
            print(f"conduction velocity {cv:.2f} cm/s")
    write_manifest(cfg, outputs, extra)
    return EXIT_OK


def cmd_compare(cfg):
    import numpy as np

    from .errors import ConfigError
    from .experiments import write_rows
    from .mesh import read_vtk, save_fields
    from .metrics import activation_diff, display_mask, fiber_diff, histogram, summary, write_histogram_csv, write_summary_csv

    kind = cfg.get("compare", "kind", "fibers")
    mesh, fa = read_vtk(cfg.get("compare", "a"))
    mesh_b, fb = read_vtk(cfg.get("compare", "b"))
    if mesh.n_nodes != mesh_b.n_nodes:
        raise ConfigError(f"[compare] inputs have {mesh.n_nodes} and {mesh_b.n_nodes} nodes")
    key = cfg.get("compare", "field", "fiber" if kind == "fibers" else "activation")
    for src, arr in (("a", fa), ("b", fb)):
        if key not in arr:
            raise ConfigError(f"[compare] input {src} has no array '{key}'; available: {', '.join(sorted(arr))}")
    outputs = []
    if kind == "fibers":
        d = fiber_diff(fa[key], fb[key])
        data = {"diff": d, "diff_display": display_mask(d)}
        upper = None
    else:
        A1 = np.where(fa[key] < 0, np.nan, fa[key])
        A2 = np.where(fb[key] < 0, np.nan, fb[key])
        r = activation_diff(A1, A2)
        d = r.delta
        data = {"delta": d}
        upper = r.M if r.M > 0 else None
        m = cfg.output / "activation_diff.csv"
        write_rows(m, ["M_ms", "M_pct", "A_max_ms", "argmax"], [(r.M, r.M_pct, r.A_max, r.argmax)])
        outputs.append(m)
        print(f"M = {r.M:.3f} ms, M% = {100 * r.M_pct:.2f}%")
    p = cfg.output / "compare.vtk"
    save_fields(mesh, data, p)
    s = cfg.output / "summary.csv"
    stats = summary(d)
    write_summary_csv(s, {kind: stats})
    h = cfg.output / "histogram.csv"
    write_histogram_csv(h, *histogram(d, upper))
    outputs += [p, p.with_suffix(".tags"), s, h]
    print(", ".join(f"{k} {v:.4g}" for k, v in stats.items()))
    write_manifest(cfg, outputs)
    return EXIT_OK


def cmd_fit_cv(cfg):
    from .ep.cv import fit_conductivity
    from .experiments import write_rows

    model = cfg.get("fit", "model", "surrogate-ventricular")
    targets = cfg.get_floats("fit", "targets")
    dirs = cfg.get_words("fit", "directions", ("f",) * len(targets))
    rows = []
    for v, d in zip(targets, dirs):
        r = fit_conductivity(
            v,
            d,
            ionic=model,
            h=cfg.get_float("fit", "h", 0.035),
            dt=cfg.get_float("fit", "dt", 0.05),
            sigma0=cfg.get_float("fit", "sigma0", 1.0),
            rtol=cfg.get_float("fit", "rtol", 0.01),
        )
        rows.append((model, d, v, r.sigma, r.cv, r.iterations))
        print(f"{model} {d}: target {v:g} cm/s -> sigma {r.sigma:.6g} mS/cm ({r.cv:.3f} cm/s, {r.iterations} iterations)")
    p = cfg.output / "fits.csv"
    write_rows(p, ["model", "direction", "target_cm_s", "sigma_mS_cm", "cv_cm_s", "iterations"], rows)
    write_manifest(cfg, [p])
    return EXIT_OK


def cmd_reproduce(args):
    from .experiments import Suite, determinism

    out = Path(args.output or "acceptance")
    which = list(range(1, 11)) if args.criterion == "all" else [int(args.criterion)]
    base = [i for i in which if i <= 9] or list(range(1, 10))
    suite = Suite(out / "run1")
    outcomes = suite.run(base)
    if 10 in which:
        outcomes.append(determinism(out / "run1", out / "run2", base))
    ok = True
    for o in outcomes:
        if o.criterion in which:
            print(o.line())
            ok &= o.passed
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "gen-geometry": cmd_generate_geometry,
    "generate-fibers": cmd_generate_fibers,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "fit-cv": cmd_fit_cv,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ldrbm", description="Rule-based fiber generation and cardiac electrophysiology")
    parser.add_argument("--version", action="version", version=f"ldrbm {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--preset", help="named configuration preset")
        p.add_argument("--output", help="output directory")
        p.add_argument("--threads", type=int, help="worker threads for the numerical libraries")
        p.add_argument("--verbose", action="store_true")
    p = sub.add_parser("reproduce", help="run acceptance experiments")
    p.add_argument("--criterion", default="all", choices=[str(i) for i in range(1, 11)] + ["all"])
    p.add_argument("--output", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    sub.add_parser("presets", help="list configuration presets")
    return parser


def _limits(threads):
    if threads is None:
        from contextlib import nullcontext

        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            from .config import PRESETS, load_config

            for name in sorted(PRESETS):
                print(f"{name:24s} {load_config(preset=name).command}")
            return EXIT_OK
        if args.threads is not None and args.threads < 1:
            parser.error("--threads must be at least 1")
        if args.command == "reproduce":
            with _limits(args.threads):
                return cmd_reproduce(args)
        from .config import load_config

        cfg = load_config(args.config, args.preset, args.output, args.threads)
        if cfg.command != args.command:
            parser.error(f"configuration is for '{cfg.command}', not '{args.command}'")
        cfg.output.mkdir(parents=True, exist_ok=True)
        with _limits(cfg.threads):
            return COMMANDS[args.command](cfg)
    except InputError as exc:
        print(f"ldrbm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LdrbmError as exc:
        print(f"ldrbm: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
