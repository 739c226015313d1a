"""Monodomain model with semi-implicit BDF time stepping.

    chi C_m du/dt - div(D grad u) + chi I_ion(u, w) = I_app
    dw/dt = G(u, w)

Units: cm, ms, mV, mS/cm, uF/cm^2, uA/cm^2 (membrane) and uA/cm^3 (applied).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import LinearOperator, cg

from .. import fem
from ..errors import ConfigError, DivergenceError, SolverError, TensorError
from ..frames import orthonormality_error
from .ionic import get_ionic
from .stimulus import StimulusProtocol

log = logging.getLogger(__name__)

# du/dt ~ (sum_j a_j u^{n+1-j}) / dt
BDF = {
    1: np.array([1.0, -1.0]),
    2: np.array([1.5, -2.0, 0.5]),
    3: np.array([11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0]),
}
# u* ~ u^{n+1} from the history, same order
EXTRAPOLATION = {
    1: np.array([1.0]),
    2: np.array([2.0, -1.0]),
    3: np.array([3.0, -3.0, 1.0]),
}

ACTIVATION_THRESHOLD = -40.0  # mV


@dataclass(frozen=True)
class ConductivitySpec:
    sigma_f: float
    sigma_s: float
    sigma_n: float

    def __post_init__(self):
        vals = (self.sigma_f, self.sigma_s, self.sigma_n)
        if not all(np.isfinite(v) and v > 0 for v in vals):
            raise ConfigError(f"conductivities must be positive and finite, got {vals}")

    @classmethod
    def isotropic(cls, sigma):
        return cls(sigma, sigma, sigma)

    @property
    def is_isotropic(self):
        return self.sigma_f == self.sigma_s == self.sigma_n


# published TTP/CRN values and surrogate fits, mS/cm
CONDUCTIVITY_PRESETS = {
    "ventricular": ConductivitySpec(1.07, 0.49, 0.16),
    "atrial": ConductivitySpec(7.00, 0.77, 0.77),
    "atrial-isotropic": ConductivitySpec.isotropic(7.0),
    # fitted with the surrogate models to 60/40/20 and 120/40 cm/s
    "surrogate-ventricular": ConductivitySpec(4.259, 1.856, 0.4327),
    "surrogate-atrial": ConductivitySpec(17.318, 1.8736, 1.8736),
    "surrogate-atrial-isotropic": ConductivitySpec.isotropic(17.318),
}


def nodal_tensors(frames, spec, check=True):
    """D = sf f f^T + ss s s^T + sn n n^T per node. Frame columns are
    ``[f, n, s]``."""
    Q = np.asarray(frames, dtype=np.float64)
    if check:
        if not np.all(np.isfinite(Q)):
            raise TensorError("frame field contains non-finite entries")
        err = orthonormality_error(Q)
        if err > 1e-6:
            raise TensorError(f"frame field is not orthonormal (max |Q^T Q - I| = {err:.2e})")
    lam = np.array([spec.sigma_f, spec.sigma_n, spec.sigma_s])
    return np.einsum("nik,k,njk->nij", Q, lam, Q)


def assemble_conductivity(mesh, frames, spec):
    """Element-constant conductivity tensors, (E, 3, 3).

    Each element takes the mean of its eight nodal tensors, which keeps the
    result SPD and avoids averaging sign-ambiguous frames directly.
    ``frames=None`` is allowed for isotropic specs.
    """
    if frames is None:
        if not spec.is_isotropic:
            raise TensorError("anisotropic conductivity needs a frame field")
        return np.broadcast_to(spec.sigma_f * np.eye(3), (mesh.n_elements, 3, 3)).copy()
    frames = np.asarray(frames)
    if frames.shape != (mesh.n_nodes, 3, 3):
        raise TensorError(f"frame field has shape {frames.shape}, expected ({mesh.n_nodes}, 3, 3)")
    Dn = nodal_tensors(frames, spec)
    return Dn[mesh.elements].mean(axis=1)


@dataclass(frozen=True)
class EPParams:
    C_m: float = 1.0  # uF/cm^2
    chi: float = 1400.0  # 1/cm
    dt: float = 0.05  # ms
    bdf_order: int = 3
    T_end: float = 500.0  # ms
    snapshot_every: float | None = None  # ms
    solver_tol: float = 1e-10
    # "consistent" or "lumped"; used for du/dt, I_ion and I_app alike so
    # that without diffusion every node follows its own cell model
    mass: str = "consistent"
    # end the run once every node has activated, no stimulus is pending and
    # no upstroke has been seen for ``settle`` ms
    stop_when_activated: bool = False
    settle: float = 5.0

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if self.bdf_order not in BDF:
            raise ConfigError(f"bdf_order must be 1, 2 or 3, got {self.bdf_order}")
        if not self.T_end > 0:
            raise ConfigError("T_end must be positive")
        if self.C_m <= 0 or self.chi <= 0:
            raise ConfigError("C_m and chi must be positive")
        if self.mass not in ("lumped", "consistent"):
            raise ConfigError(f"mass must be 'lumped' or 'consistent', got {self.mass!r}")

    @property
    def n_steps(self):
        return int(round(self.T_end / self.dt))


@dataclass
class EPState:
    u: np.ndarray
    w: np.ndarray
    history: list  # previous potentials, newest first; history[0] is u
    time: float = 0.0
    step: int = 0


@dataclass
class Monodomain:
    """Assembled operators for one mesh, conductivity field and model."""

    mesh: object
    D: np.ndarray
    ionic: object
    params: EPParams
    protocol: StimulusProtocol = field(default_factory=StimulusProtocol)

    def __post_init__(self):
        self.ionic = get_ionic(self.ionic)
        self.K = fem.stiffness(self.mesh.nodes, self.mesh.elements, self.D)
        self.ML = self.mesh.lumped_mass()
        if self.params.mass == "consistent":
            self.M = self.mesh.mass()
            self._apply_mass = self.M.dot
        else:
            self.M = diags(self.ML).tocsr()
            self._apply_mass = lambda v: self.ML * v
        self._systems = {}
        self._stim_nodes = [s.nodes(self.mesh.nodes) for s in self.protocol]

    def system(self, order):
        if order not in self._systems:
            p = self.params
            c = BDF[order][0] * p.chi * p.C_m / p.dt
            A = (self.K + c * self.M).tocsr()
            d = A.diagonal()
            if np.any(d <= 0):
                raise SolverError("monodomain system has a non-positive diagonal")
            inv = 1.0 / d
            M = LinearOperator(A.shape, matvec=lambda r: inv * r, dtype=float)
            self._systems[order] = (A, M)
        return self._systems[order]

    def initial_state(self):
        u, w = self.ionic.resting_state(self.mesh.n_nodes)
        return EPState(u=u, w=w, history=[u.copy()])

    def applied(self, t):
        """Nodal applied current (uA/cm^3) at time ``t``."""
        I = np.zeros(self.mesh.n_nodes)
        for s, nodes in zip(self.protocol, self._stim_nodes):
            if s.active(t):
                I[nodes] += s.amplitude
        return I

    def step(self, state):
        """Advance one step. Returns (new state, CG iterations)."""
        p = self.params
        order = min(p.bdf_order, len(state.history))
        a = BDF[order]
        hist = state.history[:order]
        u_star = sum(c * h for c, h in zip(EXTRAPOLATION[order], hist))
        w_new = self.ionic.advance(u_star, state.w, p.dt)
        I_ion = self.ionic.current(u_star, w_new)
        t_new = state.time + p.dt
        # stimulus sampled over the step being taken
        I_app = self.applied(state.time)
        past = sum(c * h for c, h in zip(a[1:], hist))
        rhs = self._apply_mass(-p.chi * p.C_m / p.dt * past - p.chi * I_ion + I_app)
        A, M = self.system(order)
        count = [0]

        def cb(_):
            count[0] += 1

        u_new, info = cg(A, rhs, x0=u_star, rtol=p.solver_tol, atol=0.0, M=M, maxiter=1000, callback=cb)
        if info != 0:
            raise SolverError(f"CG failed at t = {t_new:.3f} ms (info {info})", iterations=count[0])
        if not np.all(np.isfinite(u_new)):
            raise DivergenceError(f"non-finite potential at t = {t_new:.3f} ms", time=t_new)
        history = [u_new] + state.history[: max(p.bdf_order, 1) - 1]
        new = EPState(u=u_new, w=w_new, history=history, time=t_new, step=state.step + 1)
        return new, count[0]


def step(state, params, stimuli, ionic, model=None, mesh=None, D=None):
    """Functional form of :meth:`Monodomain.step`. Pass an assembled
    ``model`` to avoid re-assembly; otherwise ``mesh`` and ``D`` are used."""
    if model is None:
        model = Monodomain(mesh, D, ionic, params, stimuli)
    return model.step(state)[0]


@dataclass
class SimulationResult:
    activation: np.ndarray  # ms, NaN where the node never activated
    max_dudt: np.ndarray
    snapshots: list  # (time, u)
    log: list  # (time, min u, max u, iterations)
    final: EPState

    @property
    def activated(self):
        return np.isfinite(self.activation)

    @property
    def total_time(self):
        a = self.activation[self.activated]
        return float(a.max() - a.min()) if len(a) else np.nan

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["time_ms", "u_min_mV", "u_max_mV", "cg_iterations"])
            for t, lo, hi, it in self.log:
                wr.writerow([f"{t:.4f}", f"{lo:.6f}", f"{hi:.6f}", it])


def simulate(model, state=None, log_every=1):
    """Time loop from ``state`` (default: rest at t = 0) to ``T_end``. Activation time is the time of the largest backward
    difference (u^{n+1} - u^n)/dt seen, first occurrence kept; nodes whose
    potential never exceeds the activation threshold are reported as NaN."""
    p = model.params
    state = state or model.initial_state()
    n = model.mesh.n_nodes
    best = np.full(n, -np.inf)
    act = np.full(n, np.nan)
    crossed = state.u > ACTIVATION_THRESHOLD
    snaps = []
    logrows = []
    snap_stride = None if not p.snapshot_every else max(1, int(round(p.snapshot_every / p.dt)))
    warned = False
    last_rise = state.time
    stim_end = model.protocol.end
    n_steps = int(round((p.T_end - state.time) / p.dt))
    for k in range(n_steps):
        u_old = state.u
        state, its = model.step(state)
        dudt = (state.u - u_old) / p.dt
        up = dudt > best
        best[up] = dudt[up]
        act[up] = state.time
        if up.any():
            last_rise = state.time if np.any(dudt[up] > 1.0) else last_rise
        crossed |= state.u > ACTIVATION_THRESHOLD
        lo, hi = float(state.u.min()), float(state.u.max())
        if not warned and (lo < -100.0 or hi > 60.0):
            log.warning("potential left [-100, 60] mV at t = %.2f ms (min %.1f, max %.1f)", state.time, lo, hi)
            warned = True
        if k % log_every == 0:
            logrows.append((state.time, lo, hi, its))
        if snap_stride and state.step % snap_stride == 0:
            snaps.append((state.time, state.u.copy()))
        if p.stop_when_activated and crossed.all() and state.time >= stim_end and state.time - last_rise >= p.settle:
            break
    act = np.where(crossed, act, np.nan)
    return SimulationResult(activation=act, max_dudt=best, snapshots=snaps, log=logrows, final=state)


def run_simulation(mesh, frames, spec, ionic, protocol, params):
    D = assemble_conductivity(mesh, frames, spec)
    model = Monodomain(mesh, D, ionic, params, protocol)
    return simulate(model)
