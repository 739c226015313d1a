"""Ionic models behind one interface.

Potentials in mV, time in ms, currents per unit membrane capacitance
(uA/uF, i.e. uA/cm^2 at C_m = 1 uF/cm^2). State arrays are (n_states, N)
so each variable is a contiguous row.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.optimize import fsolve


class IonicModel:
    """Base class. Subclasses define ``state_names``, ``gates`` (indices of
    state rows advanced by Rush-Larsen), ``initial`` (u, w) guesses and the
    three kernels ``current``, ``gate_inf_tau`` and ``other_rates``."""

    name = "base"
    state_names: tuple = ()
    gates: tuple = ()
    initial: tuple = (0.0, ())
    # resting potential is found by Newton from ``initial`` when True
    solve_rest = False
    # state row held fixed during that solve (charge conservation makes the
    # equilibria a one-parameter family; its equation is then redundant)
    rest_pinned = None

    @property
    def n_states(self):
        return len(self.state_names)

    def current(self, u, w):
        raise NotImplementedError

    def gate_inf_tau(self, u, w):
        """Steady states and time constants of the gate rows, each
        (len(gates), N)."""
        return np.empty((0, len(u))), np.ones((0, len(u)))

    def other_rates(self, u, w):
        """Rates of the non-gate rows, (n_states - len(gates), N)."""
        return np.empty((0, len(u)))

    @cached_property
    def _others(self):
        return tuple(i for i in range(self.n_states) if i not in self.gates)

    def rates(self, u, w):
        """Full state rate G(u, w), shape (n_states, N)."""
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        w = np.asarray(w, dtype=np.float64).reshape(self.n_states, len(u))
        G = np.empty_like(w)
        if self.gates:
            inf, tau = self.gate_inf_tau(u, w)
            G[list(self.gates)] = (inf - w[list(self.gates)]) / tau
        if self._others:
            G[list(self._others)] = self.other_rates(u, w)
        return G

    def advance(self, u, w, dt):
        """One explicit step of the state ODEs at frozen ``u``: Rush-Larsen
        for gates, forward Euler for everything else."""
        out = np.empty_like(w)
        if self.gates:
            g = list(self.gates)
            inf, tau = self.gate_inf_tau(u, w)
            out[g] = inf + (w[g] - inf) * np.exp(-dt / tau)
        if self._others:
            o = list(self._others)
            out[o] = w[o] + dt * self.other_rates(u, w)
        return out

    def _full_rhs(self, y):
        u, w = y[:1], y[1:, None]
        return np.concatenate([-self.current(u, w), self.rates(u, w)[:, 0]])

    @cached_property
    def rest(self):
        """Resting (u0, w0) with w0 of shape (n_states,)."""
        u0, w0 = self.initial
        y0 = np.concatenate([[u0], np.asarray(w0, dtype=np.float64)])
        if self.solve_rest:
            if self.rest_pinned is None:
                y0 = fsolve(self._full_rhs, y0, xtol=1e-13)
            else:
                k = 1 + self.rest_pinned
                keep = np.arange(len(y0)) != k

                def f(z):
                    y = y0.copy()
                    y[keep] = z
                    return self._full_rhs(y)[keep]

                y0[keep] = fsolve(f, y0[keep], xtol=1e-13)
        return float(y0[0]), y0[1:].copy()

    def resting_state(self, n):
        u0, w0 = self.rest
        return np.full(n, u0), np.repeat(w0[:, None], n, axis=1)


class PassiveModel(IonicModel):
    """Linear leak ``g (u - e_rest)``; no state."""

    name = "passive"

    def __init__(self, g=0.1, e_rest=-85.0):
        self.g = float(g)
        self.e_rest = float(e_rest)
        self.initial = (self.e_rest, ())

    def current(self, u, w):
        return self.g * (u - self.e_rest)


class Surrogate(IonicModel):
    """Two-variable phenomenological model (Mitchell-Schaeffer type) on a
    dimensionless potential ``v = (u - v_rest) / v_range``.

    Parameters are tuned for a fast upstroke, a plateau-free action
    potential of ventricular or atrial duration and a resting state that is
    an exact fixed point (v = 0, h = 1).
    """

    state_names = ("h",)
    gates = (0,)

    def __init__(self, tau_in=0.3, tau_out=6.0, tau_open=120.0, tau_close=150.0, v_gate=0.13, v_rest=-85.0, v_range=100.0, name="surrogate"):
        self.tau_in = tau_in
        self.tau_out = tau_out
        self.tau_open = tau_open
        self.tau_close = tau_close
        self.v_gate = v_gate
        self.v_rest = v_rest
        self.v_range = v_range
        self.name = name
        self.initial = (v_rest, (1.0,))

    def _v(self, u):
        return (u - self.v_rest) / self.v_range

    def current(self, u, w):
        v = self._v(u)
        h = w[0]
        return -self.v_range * (h * v * v * (1.0 - v) / self.tau_in - v / self.tau_out)

    def gate_inf_tau(self, u, w):
        below = self._v(u) < self.v_gate
        inf = np.where(below, 1.0, 0.0)
        tau = np.where(below, self.tau_open, self.tau_close)
        return inf[None], tau[None]


def ventricular_surrogate():
    return Surrogate(tau_close=150.0, name="surrogate-ventricular")


def atrial_surrogate():
    return Surrogate(tau_close=90.0, tau_open=100.0, name="surrogate-atrial")


def _exp(x):
    return np.exp(np.clip(x, -700.0, 700.0))


class TenTusscher(IonicModel):
    """ten Tusscher-Panfilov 2006 human ventricular model, epicardial cell.

    State: Ki, Nai, Cai, CaSR, CaSS, R', then the gates Xr1, Xr2, Xs, m, h,
    j, d, f, f2, fCass, s, r.
    """

    name = "ttp"
    state_names = ("Ki", "Nai", "Cai", "CaSR", "CaSS", "Rp", "Xr1", "Xr2", "Xs", "m", "h", "j", "d", "f", "f2", "fCass", "s", "r")
    gates = tuple(range(6, 18))
    initial = (
        -85.23,
        (136.89, 8.604, 0.000126, 3.64, 0.00036, 0.9073, 0.00621, 0.4712, 0.0095, 0.00172, 0.7444, 0.7045, 3.373e-5, 0.7888, 0.9755, 0.9953, 0.999998, 2.42e-8),
    )
    solve_rest = True
    rest_pinned = 0

    R, F, T = 8314.472, 96485.3415, 310.0
    Cm, V_c, V_sr, V_ss = 0.185, 0.016404, 0.001094, 0.00005468
    Ko, Nao, Cao = 5.4, 140.0, 2.0
    g_K1, g_Kr, g_Ks, pKNa = 5.405, 0.153, 0.392, 0.03
    g_Na, g_bna, g_CaL, g_bca, g_to = 14.838, 0.00029, 0.0000398, 0.000592, 0.294
    g_pCa, K_pCa, g_pK = 0.1238, 0.0005, 0.0146
    P_NaK, K_mK, K_mNa = 2.724, 1.0, 40.0
    K_NaCa, gamma, alpha, Km_Nai, Km_Ca, K_sat = 1000.0, 0.35, 2.5, 87.5, 1.38, 0.1
    Buf_c, K_buf_c, Buf_sr, K_buf_sr, Buf_ss, K_buf_ss = 0.2, 0.001, 10.0, 0.3, 0.4, 0.00025
    V_rel, k1p, k2p, k3, k4, EC, max_sr, min_sr = 0.102, 0.15, 0.045, 0.06, 0.005, 1.5, 2.5, 1.0
    V_leak, V_xfer, Vmax_up, K_up = 0.00036, 0.0038, 0.006375, 0.00025

    def _currents(self, V, w):
        Ki, Nai, Cai, CaSR, CaSS = w[0], w[1], w[2], w[3], w[4]
        Xr1, Xr2, Xs, m, h, j, d, f, f2, fCass, s, r = w[6:18]
        RTF = self.R * self.T / self.F
        E_Na = RTF * np.log(self.Nao / Nai)
        E_K = RTF * np.log(self.Ko / Ki)
        E_Ks = RTF * np.log((self.Ko + self.pKNa * self.Nao) / (Ki + self.pKNa * Nai))
        E_Ca = 0.5 * RTF * np.log(self.Cao / Cai)
        a_K1 = 0.1 / (1.0 + _exp(0.06 * (V - E_K - 200.0)))
        b_K1 = (3.0 * _exp(0.0002 * (V - E_K + 100.0)) + _exp(0.1 * (V - E_K - 10.0))) / (1.0 + _exp(-0.5 * (V - E_K)))
        sk = np.sqrt(self.Ko / 5.4)
        I = {}
        I["K1"] = self.g_K1 * sk * a_K1 / (a_K1 + b_K1) * (V - E_K)
        I["to"] = self.g_to * r * s * (V - E_K)
        I["Kr"] = self.g_Kr * sk * Xr1 * Xr2 * (V - E_K)
        I["Ks"] = self.g_Ks * Xs * Xs * (V - E_Ks)
        z = 2.0 * (V - 15.0) / RTF
        # removable singularity at V = 15
        zs = np.where(np.abs(z) < 1e-6, 1e-6, z)
        I["CaL"] = self.g_CaL * d * f * f2 * fCass * 2.0 * self.F * zs * (0.25 * CaSS * _exp(zs) - self.Cao) / (_exp(zs) - 1.0)
        I["Na"] = self.g_Na * m**3 * h * j * (V - E_Na)
        I["bNa"] = self.g_bna * (V - E_Na)
        I["bCa"] = self.g_bca * (V - E_Ca)
        vf = V / RTF
        I["NaK"] = self.P_NaK * self.Ko / (self.Ko + self.K_mK) * Nai / (Nai + self.K_mNa) / (1.0 + 0.1245 * _exp(-0.1 * vf) + 0.0353 * _exp(-vf))
        I["NaCa"] = (
            self.K_NaCa
            * (_exp(self.gamma * vf) * Nai**3 * self.Cao - _exp((self.gamma - 1.0) * vf) * self.Nao**3 * Cai * self.alpha)
            / ((self.Km_Nai**3 + self.Nao**3) * (self.Km_Ca + self.Cao) * (1.0 + self.K_sat * _exp((self.gamma - 1.0) * vf)))
        )
        I["pCa"] = self.g_pCa * Cai / (Cai + self.K_pCa)
        I["pK"] = self.g_pK * (V - E_K) / (1.0 + _exp((25.0 - V) / 5.98))
        return I

    def current(self, u, w):
        return sum(self._currents(u, w).values())

    def gate_inf_tau(self, V, w):
        CaSS = w[4]
        n = len(V)
        inf = np.empty((12, n))
        tau = np.empty((12, n))
        inf[0] = 1.0 / (1.0 + _exp((-26.0 - V) / 7.0))
        tau[0] = 450.0 / (1.0 + _exp((-45.0 - V) / 10.0)) * 6.0 / (1.0 + _exp((V + 30.0) / 11.5))
        inf[1] = 1.0 / (1.0 + _exp((V + 88.0) / 24.0))
        tau[1] = 3.0 / (1.0 + _exp((-60.0 - V) / 20.0)) * 1.12 / (1.0 + _exp((V - 60.0) / 20.0))
        inf[2] = 1.0 / (1.0 + _exp((-5.0 - V) / 14.0))
        tau[2] = 1400.0 / np.sqrt(1.0 + _exp((5.0 - V) / 6.0)) / (1.0 + _exp((V - 35.0) / 15.0)) + 80.0
        inf[3] = 1.0 / (1.0 + _exp((-56.86 - V) / 9.03)) ** 2
        tau[3] = 1.0 / (1.0 + _exp((-60.0 - V) / 5.0)) * (0.1 / (1.0 + _exp((V + 35.0) / 5.0)) + 0.1 / (1.0 + _exp((V - 50.0) / 200.0)))
        hinf = 1.0 / (1.0 + _exp((V + 71.55) / 7.43)) ** 2
        low = V < -40.0
        a_h = np.where(low, 0.057 * _exp(-(V + 80.0) / 6.8), 0.0)
        b_h = np.where(low, 2.7 * _exp(0.079 * V) + 3.1e5 * _exp(0.3485 * V), 0.77 / (0.13 * (1.0 + _exp(-(V + 10.66) / 11.1))))
        inf[4] = hinf
        tau[4] = 1.0 / (a_h + b_h)
        a_j = np.where(low, (-2.5428e4 * _exp(0.2444 * V) - 6.948e-6 * _exp(-0.04391 * V)) * (V + 37.78) / (1.0 + _exp(0.311 * (V + 79.23))), 0.0)
        b_j = np.where(
            low,
            0.02424 * _exp(-0.01052 * V) / (1.0 + _exp(-0.1378 * (V + 40.14))),
            0.6 * _exp(0.057 * V) / (1.0 + _exp(-0.1 * (V + 32.0))),
        )
        inf[5] = hinf
        tau[5] = 1.0 / (a_j + b_j)
        inf[6] = 1.0 / (1.0 + _exp((-8.0 - V) / 7.5))
        tau[6] = (1.4 / (1.0 + _exp((-35.0 - V) / 13.0)) + 0.25) * 1.4 / (1.0 + _exp((V + 5.0) / 5.0)) + 1.0 / (1.0 + _exp((50.0 - V) / 20.0))
        inf[7] = 1.0 / (1.0 + _exp((V + 20.0) / 7.0))
        tau[7] = 1102.5 * _exp(-((V + 27.0) ** 2) / 225.0) + 200.0 / (1.0 + _exp((13.0 - V) / 10.0)) + 180.0 / (1.0 + _exp((V + 30.0) / 10.0)) + 20.0
        inf[8] = 0.67 / (1.0 + _exp((V + 35.0) / 7.0)) + 0.33
        tau[8] = 562.0 * _exp(-((V + 27.0) ** 2) / 240.0) + 31.0 / (1.0 + _exp((25.0 - V) / 10.0)) + 80.0 / (1.0 + _exp((V + 30.0) / 10.0))
        c = (CaSS / 0.05) ** 2
        inf[9] = 0.6 / (1.0 + c) + 0.4
        tau[9] = 80.0 / (1.0 + c) + 2.0
        inf[10] = 1.0 / (1.0 + _exp((V + 20.0) / 5.0))
        tau[10] = 85.0 * _exp(-((V + 45.0) ** 2) / 320.0) + 5.0 / (1.0 + _exp((V - 20.0) / 5.0)) + 3.0
        inf[11] = 1.0 / (1.0 + _exp((20.0 - V) / 6.0))
        tau[11] = 9.5 * _exp(-((V + 40.0) ** 2) / 1800.0) + 0.8
        return inf, tau

    def other_rates(self, V, w):
        Cai, CaSR, CaSS, Rp = w[2], w[3], w[4], w[5]
        I = self._currents(V, w)
        kcasr = self.max_sr - (self.max_sr - self.min_sr) / (1.0 + (self.EC / CaSR) ** 2)
        k1 = self.k1p / kcasr
        k2 = self.k2p * kcasr
        O = k1 * CaSS**2 * Rp / (self.k3 + k1 * CaSS**2)
        I_rel = self.V_rel * O * (CaSR - CaSS)
        I_up = self.Vmax_up / (1.0 + self.K_up**2 / Cai**2)
        I_leak = self.V_leak * (CaSR - Cai)
        I_xfer = self.V_xfer * (CaSS - Cai)
        bc = 1.0 / (1.0 + self.Buf_c * self.K_buf_c / (Cai + self.K_buf_c) ** 2)
        bsr = 1.0 / (1.0 + self.Buf_sr * self.K_buf_sr / (CaSR + self.K_buf_sr) ** 2)
        bss = 1.0 / (1.0 + self.Buf_ss * self.K_buf_ss / (CaSS + self.K_buf_ss) ** 2)
        cf = self.Cm / (self.V_c * self.F)
        out = np.empty((6, len(V)))
        out[0] = -(I["K1"] + I["to"] + I["Kr"] + I["Ks"] + I["pK"] - 2.0 * I["NaK"]) * cf
        out[1] = -(I["Na"] + I["bNa"] + 3.0 * I["NaK"] + 3.0 * I["NaCa"]) * cf
        out[2] = bc * ((I_leak - I_up) * self.V_sr / self.V_c + I_xfer - (I["bCa"] + I["pCa"] - 2.0 * I["NaCa"]) * cf / 2.0)
        out[3] = bsr * (I_up - I_rel - I_leak)
        out[4] = bss * (-I["CaL"] * self.Cm / (2.0 * self.V_ss * self.F) + I_rel * self.V_sr / self.V_ss - I_xfer * self.V_c / self.V_ss)
        out[5] = -k2 * CaSS * Rp + self.k4 * (1.0 - Rp)
        return out


class Courtemanche(IonicModel):
    """Courtemanche-Ramirez-Nattel 1998 human atrial model.

    Currents are computed for the whole cell (C = 100 pF) so the
    concentration balances keep their original scaling, and returned per
    unit capacitance.
    """

    name = "crn"
    state_names = ("m", "h", "j", "oa", "oi", "ua", "ui", "xr", "xs", "d", "f", "f_Ca", "u", "v", "w", "Nai", "Cai", "Ki", "Ca_rel", "Ca_up")
    gates = tuple(range(15))
    initial = (
        -81.18,
        (0.002908, 0.9649, 0.9775, 0.03043, 0.9992, 0.004966, 0.9986, 3.296e-05, 0.01869, 0.0001367, 0.9996, 0.7755, 0.0, 1.0, 0.9992, 11.17, 0.0001013, 139.0, 1.488, 1.488),
    )
    solve_rest = True

    Cm = 100.0
    R, F, T = 8.3143, 96.4867, 310.0
    CMDN_max, CSQN_max, Km_CMDN, Km_CSQN, Km_TRPN, TRPN_max = 0.05, 10.0, 0.00238, 0.8, 0.0005, 0.07
    I_up_max, K_up, tau_f_Ca, tau_tr, Ca_up_max, K_rel, tau_u = 0.005, 0.00092, 2.0, 180.0, 15.0, 30.0, 8.0
    Ca_o, K_o, Na_o = 1.8, 5.4, 140.0
    g_Ca_L, I_NaCa_max, K_mCa, K_mNa, K_sat, gamma = 0.12375, 1600.0, 1.38, 87.5, 0.1, 0.35
    g_B_Ca, g_B_K, g_B_Na, g_Na = 0.001131, 0.0, 6.744375e-04, 7.8
    V_cell = 20100.0
    g_Kr, i_CaP_max, g_Ks = 0.0294117649999999994, 0.275, 0.12941175999999999
    Km_K_o, Km_Na_i, i_NaK_max = 1.5, 10.0, 0.59933874
    g_K1, K_Q10, g_to = 0.09, 3.0, 0.1652

    V_i = V_cell * 0.68
    V_rel = 0.0048 * V_cell
    V_up = 0.0552 * V_cell
    sigma = (np.exp(Na_o / 67.3) - 1.0) / 7.0

    def _currents(self, V, w):
        m, h, j, oa, oi, ua, ui, xr, xs, d, f, fCa, u, v, ww, Nai, Cai, Ki, Ca_rel, Ca_up = w
        RTF = self.R * self.T / self.F
        Cm = self.Cm
        E_K = RTF * np.log(self.K_o / Ki)
        E_Na = RTF * np.log(self.Na_o / Nai)
        E_Ca = 0.5 * RTF * np.log(self.Ca_o / Cai)
        I = {}
        I["rel"] = self.K_rel * u**2 * v * ww * (Ca_rel - Cai)
        I["tr"] = (Ca_up - Ca_rel) / self.tau_tr
        I["up_leak"] = self.I_up_max * Ca_up / self.Ca_up_max
        I["up"] = self.I_up_max / (1.0 + self.K_up / Cai)
        I["CaP"] = Cm * self.i_CaP_max * Cai / (0.0005 + Cai)
        f_NaK = 1.0 / (1.0 + 0.1245 * _exp(-0.1 * V / RTF) + 0.0365 * self.sigma * _exp(-V / RTF))
        I["NaK"] = Cm * self.i_NaK_max * f_NaK / (1.0 + (self.Km_Na_i / Nai) ** 1.5) * self.K_o / (self.K_o + self.Km_K_o)
        I["K1"] = Cm * self.g_K1 * (V - E_K) / (1.0 + _exp(0.07 * (V + 80.0)))
        I["to"] = Cm * self.g_to * oa**3 * oi * (V - E_K)
        g_Kur = 0.005 + 0.05 / (1.0 + _exp((V - 15.0) / -13.0))
        I["Kur"] = Cm * g_Kur * ua**3 * ui * (V - E_K)
        I["CaL"] = Cm * self.g_Ca_L * d * f * fCa * (V - 65.0)
        g = self.gamma
        I["NaCa"] = (
            Cm
            * self.I_NaCa_max
            * (_exp(g * V / RTF) * Nai**3 * self.Ca_o - _exp((g - 1.0) * V / RTF) * self.Na_o**3 * Cai)
            / ((self.K_mNa**3 + self.Na_o**3) * (self.K_mCa + self.Ca_o) * (1.0 + self.K_sat * _exp((g - 1.0) * V / RTF)))
        )
        I["B_K"] = Cm * self.g_B_K * (V - E_K)
        I["Kr"] = Cm * self.g_Kr * xr * (V - E_K) / (1.0 + _exp((V + 15.0) / 22.4))
        I["Ks"] = Cm * self.g_Ks * xs**2 * (V - E_K)
        I["B_Ca"] = Cm * self.g_B_Ca * (V - E_Ca)
        I["B_Na"] = Cm * self.g_B_Na * (V - E_Na)
        I["Na"] = Cm * self.g_Na * m**3 * h * j * (V - E_Na)
        return I

    _MEMBRANE = ("Na", "K1", "to", "Kur", "Kr", "Ks", "B_Na", "B_Ca", "NaK", "CaP", "NaCa", "CaL")

    def current(self, u, w):
        I = self._currents(u, w)
        return sum(I[k] for k in self._MEMBRANE) / self.Cm

    def gate_inf_tau(self, V, w):
        n = len(V)
        inf = np.empty((15, n))
        tau = np.empty((15, n))
        # m
        dm = V + 47.13
        a_m = np.where(np.abs(dm) < 1e-10, 3.2, 0.32 * dm / (1.0 - _exp(-0.1 * np.where(np.abs(dm) < 1e-10, 1.0, dm))))
        b_m = 0.08 * _exp(-V / 11.0)
        inf[0], tau[0] = a_m / (a_m + b_m), 1.0 / (a_m + b_m)
        low = V < -40.0
        a_h = np.where(low, 0.135 * _exp((V + 80.0) / -6.8), 0.0)
        b_h = np.where(low, 3.56 * _exp(0.079 * V) + 310000.0 * _exp(0.35 * V), 1.0 / (0.13 * (1.0 + _exp((V + 10.66) / -11.1))))
        inf[1], tau[1] = a_h / (a_h + b_h), 1.0 / (a_h + b_h)
        a_j = np.where(low, (-127140.0 * _exp(0.2444 * V) - 3.474e-05 * _exp(-0.04391 * V)) * (V + 37.78) / (1.0 + _exp(0.311 * (V + 79.23))), 0.0)
        b_j = np.where(
            low,
            0.1212 * _exp(-0.01052 * V) / (1.0 + _exp(-0.1378 * (V + 40.14))),
            0.3 * _exp(-2.535e-07 * V) / (1.0 + _exp(-0.1 * (V + 32.0))),
        )
        inf[2], tau[2] = a_j / (a_j + b_j), 1.0 / (a_j + b_j)
        # transient outward and ultrarapid K gates share the activation rates
        x = V + 10.0
        a_oa = 0.65 / (_exp(x / -8.5) + _exp((x - 40.0) / -59.0))
        b_oa = 0.65 / (2.5 + _exp((x + 72.0) / 17.0))
        inf[3], tau[3] = 1.0 / (1.0 + _exp((x + 10.47) / -17.54)), 1.0 / (a_oa + b_oa) / self.K_Q10
        a_oi = 1.0 / (18.53 + _exp((x + 103.7) / 10.95))
        b_oi = 1.0 / (35.56 + _exp((x - 8.74) / -7.44))
        inf[4], tau[4] = 1.0 / (1.0 + _exp((x + 33.1) / 5.3)), 1.0 / (a_oi + b_oi) / self.K_Q10
        inf[5], tau[5] = 1.0 / (1.0 + _exp((x + 20.3) / -9.6)), tau[3]
        a_ui = 1.0 / (21.0 + _exp((x - 195.0) / -28.0))
        b_ui = 1.0 / _exp((x - 168.0) / -16.0)
        inf[6], tau[6] = 1.0 / (1.0 + _exp((x - 109.45) / 27.48)), 1.0 / (a_ui + b_ui) / self.K_Q10
        dx = V + 14.1
        sx = np.where(np.abs(dx) < 1e-10, 1.0, dx)
        a_xr = np.where(np.abs(dx) < 1e-10, 0.0015, 0.0003 * sx / (1.0 - _exp(sx / -5.0)))
        dy = V - 3.3328
        sy = np.where(np.abs(dy) < 1e-10, 1.0, dy)
        b_xr = np.where(np.abs(dy) < 1e-10, 3.7836118e-04, 7.3898e-05 * sy / (_exp(sy / 5.1237) - 1.0))
        inf[7], tau[7] = 1.0 / (1.0 + _exp(dx / -6.5)), 1.0 / (a_xr + b_xr)
        ds = V - 19.9
        ss = np.where(np.abs(ds) < 1e-10, 1.0, ds)
        a_xs = np.where(np.abs(ds) < 1e-10, 0.00068, 4e-05 * ss / (1.0 - _exp(ss / -17.0)))
        b_xs = np.where(np.abs(ds) < 1e-10, 0.000315, 3.5e-05 * ss / (_exp(ss / 9.0) - 1.0))
        inf[8], tau[8] = (1.0 + _exp(ds / -12.7)) ** -0.5, 0.5 / (a_xs + b_xs)
        dd = V + 10.0
        sd = np.where(np.abs(dd) < 1e-10, 1.0, dd)
        inf[9] = 1.0 / (1.0 + _exp(dd / -8.0))
        tau[9] = np.where(
            np.abs(dd) < 1e-10,
            4.579 / (1.0 + _exp(dd / -6.24)),
            (1.0 - _exp(sd / -6.24)) / (0.035 * sd * (1.0 + _exp(sd / -6.24))),
        )
        ef = _exp(-(V + 28.0) / 6.9)
        inf[10], tau[10] = ef / (1.0 + ef), 9.0 / (0.0197 * _exp(-(0.0337**2) * (V + 10.0) ** 2) + 0.02)
        Cai = w[16]
        inf[11], tau[11] = 1.0 / (1.0 + Cai / 0.00035), np.full(n, self.tau_f_Ca)
        I = self._currents(V, w)
        Fn = 1000.0 * (1e-15 * self.V_rel * I["rel"] - 1e-15 / (2.0 * self.F) * (0.5 * I["CaL"] - 0.2 * I["NaCa"]))
        su = 1.0 / (1.0 + _exp(-(Fn - 3.4175e-13) / 1.367e-15))
        inf[12], tau[12] = su, np.full(n, self.tau_u)
        inf[13], tau[13] = 1.0 - 1.0 / (1.0 + _exp(-(Fn - 6.835e-14) / 1.367e-15)), 1.91 + 2.09 * su
        dw = V - 7.9
        sw = np.where(np.abs(dw) < 1e-10, 1.0, dw)
        inf[14] = 1.0 - 1.0 / (1.0 + _exp(-(V - 40.0) / 17.0))
        tau[14] = np.where(np.abs(dw) < 1e-10, 6.0 * 0.2 / 1.3, 6.0 * (1.0 - _exp(-sw / 5.0)) / ((1.0 + 0.3 * _exp(-sw / 5.0)) * sw))
        return inf, tau

    def other_rates(self, V, w):
        Cai, Ca_rel = w[16], w[18]
        I = self._currents(V, w)
        VF = self.V_i * self.F
        out = np.empty((5, len(V)))
        out[0] = (-3.0 * I["NaK"] - (3.0 * I["NaCa"] + I["B_Na"] + I["Na"])) / VF
        B1 = (2.0 * I["NaCa"] - (I["CaP"] + I["CaL"] + I["B_Ca"])) / (2.0 * VF) + (self.V_up * (I["up_leak"] - I["up"]) + I["rel"] * self.V_rel) / self.V_i
        B2 = 1.0 + self.TRPN_max * self.Km_TRPN / (Cai + self.Km_TRPN) ** 2 + self.CMDN_max * self.Km_CMDN / (Cai + self.Km_CMDN) ** 2
        out[1] = B1 / B2
        out[2] = (2.0 * I["NaK"] - (I["K1"] + I["to"] + I["Kur"] + I["Kr"] + I["Ks"] + I["B_K"])) / VF
        out[3] = (I["tr"] - I["rel"]) / (1.0 + self.CSQN_max * self.Km_CSQN / (Ca_rel + self.Km_CSQN) ** 2)
        out[4] = I["up"] - (I["up_leak"] + I["tr"] * self.V_rel / self.V_up)
        return out


IONIC_MODELS = {
    "surrogate-ventricular": ventricular_surrogate,
    "surrogate-atrial": atrial_surrogate,
    "ttp": TenTusscher,
    "crn": Courtemanche,
    "passive": PassiveModel,
}


def get_ionic(name):
    from ..errors import ConfigError

    if isinstance(name, IonicModel):
        return name
    key = str(name).lower()
    if key not in IONIC_MODELS:
        raise ConfigError(f"unknown ionic model '{name}'; expected one of {sorted(IONIC_MODELS)}")
    return IONIC_MODELS[key]()
