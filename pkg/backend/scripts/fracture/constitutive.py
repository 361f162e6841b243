"""Mix-mode cohesive fracture interface law.

One softening parameter, the history-maximum norm of inelastic relative
displacement ``u_ieff``, drives both the tensile strength and the cohesion
down linearly. A micro damage variable degrades the normal and shear
stiffness, but only while the interface is in tension; a closed interface
keeps its initial stiffness.

Everything here is a pure function of its inputs. All functions accept plain
floats or numpy arrays (one entry per integration point) and broadcast
elementwise, so the patch rigs and the solver share a single implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

# Below this tan(phi) the hyperbolic surface degenerates; use |tau| <= c instead.
TRESCA_TAN_THRESHOLD = 1e-6


class ConstitutiveError(ValueError):
    """Invalid material parameters or non-finite interface input."""


@dataclass(frozen=True)
class MaterialParams:
    """Bulk and interface constants, strict SI (Pa, m, kg, rad)."""

    rho: float
    youngs: float
    poisson: float
    friction_angle: float
    dilation_angle: float
    kn0: float
    ks0: float
    sigma_t0: float
    c0: float
    w_sigma: float
    w_c: float
    eta: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ConstitutiveError(f"{f.name} must be finite, got {value!r}")
        for name in ("rho", "youngs", "kn0", "ks0", "sigma_t0", "c0", "w_sigma", "w_c"):
            if getattr(self, name) <= 0.0:
                raise ConstitutiveError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConstitutiveError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not 0.0 <= self.friction_angle < math.pi / 2:
            raise ConstitutiveError(f"friction_angle must lie in [0, pi/2), got {self.friction_angle!r}")
        if not 0.0 <= self.dilation_angle < math.pi / 2:
            raise ConstitutiveError(f"dilation_angle must lie in [0, pi/2), got {self.dilation_angle!r}")
        if not -1.0 < self.poisson < 0.5:
            raise ConstitutiveError(f"poisson must lie in (-1, 0.5), got {self.poisson!r}")

    @property
    def fracture_energy_mode_i(self) -> float:
        """G_f^I in J/m², from w_sigma = 2 G_f^I / sigma_t0."""
        return self.sigma_t0 * self.w_sigma / 2.0

    @property
    def fracture_energy_mode_ii(self) -> float:
        """G_f^II in J/m², from w_c = 2 G_f^II / c0."""
        return self.c0 * self.w_c / 2.0

    @property
    def w_max(self) -> float:
        return max(self.w_sigma, self.w_c)

    def with_friction(self, friction_angle: float) -> "MaterialParams":
        return replace(self, friction_angle=float(friction_angle))


# Transjurane sandstone, used for the tension and direct-shear patch tests.
TRANSJURANE_SANDSTONE = MaterialParams(
    rho=2600.0,
    youngs=12.5e9,
    poisson=0.3,
    friction_angle=math.radians(41.0),
    dilation_angle=math.radians(10.0),
    kn0=2.2321e14,
    ks0=6.573e13,
    sigma_t0=2.8e6,
    c0=8.5e6,
    w_sigma=2.8e-5,
    w_c=1.205e-5,
)

# Gosford sandstone, used for the uniaxial compression specimen.
GOSFORD_SANDSTONE = MaterialParams(
    rho=2600.0,
    youngs=7.0e9,
    poisson=0.25,
    friction_angle=math.radians(40.0),
    dilation_angle=math.radians(5.0),
    kn0=6.0e12,
    ks0=3.0e12,
    sigma_t0=6.0e6,
    c0=15.0e6,
    w_sigma=1.0e-4,
    w_c=1.5e-4,
)


@dataclass(frozen=True)
class InterfaceState:
    """Per integration point history. Fields are floats or equal-shape arrays.

    ``ui_n``/``ui_s`` accumulate the inelastic components (plastic plus
    fracturing); ``alpha`` is the integrity in effect for the current
    tractions and ``dissipated`` the energy per unit area spent so far.
    """

    u_n: np.ndarray | float = 0.0
    u_s: np.ndarray | float = 0.0
    up_n: np.ndarray | float = 0.0
    up_s: np.ndarray | float = 0.0
    ui_n: np.ndarray | float = 0.0
    ui_s: np.ndarray | float = 0.0
    u_ieff: np.ndarray | float = 0.0
    damage: np.ndarray | float = 0.0
    alpha: np.ndarray | float = 1.0
    sigma_n: np.ndarray | float = 0.0
    tau: np.ndarray | float = 0.0
    broken: np.ndarray | bool = False
    dissipated: np.ndarray | float = 0.0

    @classmethod
    def virgin(cls, count: int | None = None) -> "InterfaceState":
        """An undamaged, unloaded state; ``count`` gives an array batch."""
        if count is None:
            return cls()
        z = np.zeros(int(count))
        return cls(
            u_n=z.copy(), u_s=z.copy(), up_n=z.copy(), up_s=z.copy(),
            ui_n=z.copy(), ui_s=z.copy(), u_ieff=z.copy(), damage=z.copy(),
            alpha=np.ones(int(count)), sigma_n=z.copy(), tau=z.copy(),
            broken=np.zeros(int(count), dtype=bool), dissipated=z.copy(),
        )

    def take(self, index) -> "InterfaceState":
        """Subset of an array batch (slice, mask or index array)."""
        return InterfaceState(**{f.name: np.asarray(getattr(self, f.name))[index] for f in fields(self)})

    @staticmethod
    def concat(parts: list["InterfaceState"]) -> "InterfaceState":
        return InterfaceState(**{
            f.name: np.concatenate([np.atleast_1d(getattr(p, f.name)) for p in parts])
            for f in fields(InterfaceState)
        })


@dataclass(frozen=True)
class TractionResult:
    sigma_n: np.ndarray | float
    tau: np.ndarray | float
    yielded: np.ndarray | bool
    d_dissipated: np.ndarray | float


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


def inelastic_norm(up_plus_uf_n, up_plus_uf_s):
    """Euclidean norm of the inelastic displacement components."""
    n = np.asarray(up_plus_uf_n, dtype=float)
    s = np.asarray(up_plus_uf_s, dtype=float)
    return _scalar_or_array(np.sqrt(n * n + s * s))


def _linear_softening(initial: float, w: float, u_ieff):
    u = np.asarray(u_ieff, dtype=float)
    value = np.where(u >= w, 0.0, initial * (1.0 - u / w))
    return _scalar_or_array(np.maximum(value, 0.0))


def tensile_strength(p: MaterialParams, u_ieff):
    """sigma_t0 (1 - u_ieff / w_sigma), zero from w_sigma on."""
    return _linear_softening(p.sigma_t0, p.w_sigma, u_ieff)


def cohesion(p: MaterialParams, u_ieff):
    """c0 (1 - u_ieff / w_c), zero from w_c on."""
    return _linear_softening(p.c0, p.w_c, u_ieff)


def degraded_normal_stiffness(p: MaterialParams, u_ieff):
    """Secant normal stiffness k_ns = st / (st / kn0 + (1 - eta) u_ieff).

    The 0/0 limit once the tensile strength is exhausted is taken as 0.
    """
    u = np.asarray(u_ieff, dtype=float)
    st = np.asarray(tensile_strength(p, u), dtype=float)
    denom = st / p.kn0 + (1.0 - p.eta) * u
    safe = np.where(st > 0.0, denom, 1.0)
    return _scalar_or_array(np.where(st > 0.0, st / safe, 0.0))


def damage(p: MaterialParams, u_ieff):
    """D = 1 - k_ns / kn0, clipped to [0, 1]."""
    k = np.asarray(degraded_normal_stiffness(p, u_ieff), dtype=float)
    return _scalar_or_array(np.clip(1.0 - k / p.kn0, 0.0, 1.0))


def integrity(damage_value, sigma_n):
    """alpha = 1 - D in tension, 1 in compression and at exactly zero traction."""
    d = np.asarray(damage_value, dtype=float)
    s = np.asarray(sigma_n, dtype=float)
    return _scalar_or_array(np.where(s > 0.0, 1.0 - d, 1.0))


def failure_function(sigma_n, tau, sigma_t, c, phi):
    """Hyperbolic failure surface; f >= 0 means yield.

    f = tau^2 - 2 c tan(phi) (sigma_t - sigma) - tan^2(phi) (sigma^2 - sigma_t^2),
    or tau^2 - c^2 once tan(phi) drops below TRESCA_TAN_THRESHOLD.
    """
    s = np.asarray(sigma_n, dtype=float)
    t = np.asarray(tau, dtype=float)
    st = np.asarray(sigma_t, dtype=float)
    cc = np.asarray(c, dtype=float)
    tan_phi = np.asarray(np.tan(phi), dtype=float)
    hyperbolic = t * t - 2.0 * cc * tan_phi * (st - s) - tan_phi * tan_phi * (s * s - st * st)
    tresca = t * t - cc * cc
    return _scalar_or_array(np.where(tan_phi < TRESCA_TAN_THRESHOLD, tresca, hyperbolic))


def shear_strength(sigma_n, sigma_t, c, phi):
    """Largest admissible |tau| at normal traction sigma_n.

    The hyperbola keeps its apex at sigma_t only while c >= sigma_t tan(phi);
    past that the apex moves to c / tan(phi) and the branch reduces to the
    Mohr-Coulomb line |tau| <= c - sigma tan(phi). Zero beyond the apex.
    """
    s = np.asarray(sigma_n, dtype=float)
    st = np.asarray(sigma_t, dtype=float)
    cc = np.asarray(c, dtype=float)
    tan_phi = float(np.tan(phi))
    if tan_phi < TRESCA_TAN_THRESHOLD:
        return _scalar_or_array(np.where(s <= st, cc, 0.0) * np.ones_like(s))
    apex = np.minimum(st, cc / tan_phi)
    line = cc - s * tan_phi
    offset = cc - apex * tan_phi
    squared = np.maximum(line * line - offset * offset, 0.0)
    return _scalar_or_array(np.where(s < apex, np.sqrt(squared), 0.0))


def yield_function(sigma_n, tau, sigma_t, c, phi):
    """Composite yield measure in Pa: tension cut-off and shear branch.

    Positive outside the admissible region, non-decreasing as sigma_t and c
    soften for any traction with sigma_n <= sigma_t.
    """
    s = np.asarray(sigma_n, dtype=float)
    t = np.asarray(tau, dtype=float)
    return _scalar_or_array(np.maximum(s - np.asarray(sigma_t, dtype=float),
                                       np.abs(t) - shear_strength(s, sigma_t, c, phi)))


def _tractions(p: MaterialParams, u_n, u_s, up_n, up_s, ui_s, dmg):
    """Tractions with alpha taken from the sign of the opening at full stiffness.

    A closed interface (alpha = 1) cannot express fracturing slip through the
    stiffness, so its shear anchor is the whole inelastic slip.
    """
    opening = p.kn0 * (u_n - up_n)
    is_open = opening > 0.0
    alpha = np.where(is_open, 1.0 - dmg, 1.0)
    sigma = alpha * opening
    uf_s = ui_s - up_s
    tau = np.where(is_open, alpha * p.ks0 * (u_s - up_s), p.ks0 * (u_s - up_s - uf_s))
    return sigma, tau, alpha


def elastic_trial(state: InterfaceState, p: MaterialParams, du_n, du_s) -> TractionResult:
    """Tractions after an increment with frozen history (no yield check)."""
    u_n = np.asarray(state.u_n, dtype=float) + np.asarray(du_n, dtype=float)
    u_s = np.asarray(state.u_s, dtype=float) + np.asarray(du_s, dtype=float)
    sigma, tau, _ = _tractions(
        p, u_n, u_s,
        np.asarray(state.up_n, dtype=float), np.asarray(state.up_s, dtype=float),
        np.asarray(state.ui_s, dtype=float), np.asarray(state.damage, dtype=float),
    )
    return TractionResult(
        sigma_n=_scalar_or_array(sigma),
        tau=_scalar_or_array(tau),
        yielded=np.zeros(np.shape(sigma), dtype=bool) if np.ndim(sigma) else False,
        d_dissipated=_scalar_or_array(np.zeros_like(sigma)),
    )


def _check_finite(**values) -> None:
    for name, value in values.items():
        if not np.all(np.isfinite(np.asarray(value, dtype=float))):
            raise ConstitutiveError(f"{name} must be finite")


_RETURN_MAX_ITER = 100
_BRACKET_MAX_DOUBLINGS = 200
# Softening this close to w_max counts as exhausted (relative).
_EXHAUSTED_FRACTION = 1.0 - 1.0e-6


class _Relaxation:
    """History and tractions of the yielded points as a function of the
    inelastic multiplier lam, booked along a fixed unit direction (m_n, m_s)."""

    def __init__(self, p: MaterialParams, u_n, u_s, up_n, up_s, ui_n, ui_s, u_ieff, dmg, m_n, m_s):
        self.p = p
        self.tan_dil = math.tan(p.dilation_angle)
        self.u_n, self.u_s = u_n, u_s
        self.up_n, self.up_s = up_n, up_s
        self.ui_n, self.ui_s = ui_n, ui_s
        self.u_ieff, self.dmg = u_ieff, dmg
        self.m_n, self.m_s = m_n, m_s

    def history(self, lam):
        p = self.p
        dui_n = lam * self.m_n
        dui_s = lam * self.m_s
        dup_s = p.eta * dui_s
        dilation = self.tan_dil * np.abs(dup_s)
        up_n = self.up_n + p.eta * dui_n + dilation
        up_s = self.up_s + dup_s
        ui_n = self.ui_n + dui_n + dilation
        ui_s = self.ui_s + dui_s
        u_ieff = np.maximum(self.u_ieff, np.sqrt(ui_n * ui_n + ui_s * ui_s))
        u_ieff = np.where(u_ieff >= _EXHAUSTED_FRACTION * p.w_max, np.maximum(u_ieff, p.w_max), u_ieff)
        dmg = np.maximum(self.dmg, np.asarray(damage(p, u_ieff), dtype=float))
        return up_n, up_s, ui_n, ui_s, u_ieff, dmg

    def residual(self, lam):
        """(yield measure, fully-softened flag) after booking lam."""
        p = self.p
        up_n, up_s, _, ui_s, u_ieff, dmg = self.history(lam)
        sig, tau, _ = _tractions(p, self.u_n, self.u_s, up_n, up_s, ui_s, dmg)
        st = tensile_strength(p, u_ieff)
        c = cohesion(p, u_ieff)
        return (np.asarray(yield_function(sig, tau, st, c, p.friction_angle), dtype=float),
                u_ieff >= p.w_max)


def _solve_multiplier(relax: _Relaxation, f0, lam_guess, lam_max, tol_f):
    """Smallest lam in [0, lam_max] that brings the tractions back onto the surface.

    The yield measure is not monotone in lam: on the open side it turns
    positive again once the cohesion is spent, and it is identically zero on
    the fully-softened plateau. The bracket grows upward from half the
    elastic estimate by doubling and closes on the first sign change. Inside
    it: Illinois regula falsi, or bisection while the upper end sits on the
    plateau.
    """
    a = np.zeros_like(f0)
    fa = f0.copy()
    b = np.minimum(np.maximum(0.5 * lam_guess, 1e-12 * lam_max), lam_max)
    fb, pb = relax.residual(b)
    for _ in range(_BRACKET_MAX_DOUBLINGS):
        grow = (fb > 0.0) & (b < lam_max)
        if not np.any(grow):
            break
        a = np.where(grow, b, a)
        fa = np.where(grow, fb, fa)
        b = np.where(grow, np.minimum(2.0 * b, lam_max), b)
        f_up, p_up = relax.residual(b)
        fb = np.where(grow, f_up, fb)
        pb = np.where(grow, p_up, pb)
    # Still outside at lam_max (plastic closure under eta > 0): take the full softening.
    done = fb > 0.0
    hit = np.zeros_like(done)
    lam_hit = b.copy()
    side = np.zeros(f0.shape, dtype=int)
    tol_x = 1e-13 * np.maximum(lam_max, 1e-300)

    for _ in range(_RETURN_MAX_ITER):
        if np.all(done):
            break
        use_mid = pb | (fb >= 0.0)
        denom = np.where(use_mid, -1.0, fb - fa)
        secant = b - fb * (b - a) / denom
        cand = np.where(use_mid, 0.5 * (a + b), np.clip(secant, a, b))
        f, plateau = relax.residual(cand)
        live = ~done
        right = live & (f > 0.0)
        left = live & ~(f > 0.0)

        fb = np.where(right & (side == 1), 0.5 * fb, fb)
        fa = np.where(left & (side == -1), 0.5 * fa, fa)
        a = np.where(right, cand, a)
        fa = np.where(right, f, fa)
        b = np.where(left, cand, b)
        fb = np.where(left, f, fb)
        pb = np.where(left, plateau, pb)
        side = np.where(right, 1, np.where(left, -1, side))

        close = live & ~plateau & (np.abs(f) <= tol_f)
        lam_hit = np.where(close, cand, lam_hit)
        hit |= close
        done |= close | (live & ((b - a) <= tol_x))

    return np.where(hit, lam_hit, b)


def update_interface(state: InterfaceState, p: MaterialParams, du_n, du_s,
                     n_substeps: int = 1) -> tuple[InterfaceState, TractionResult]:
    """Advance the interface by a relative displacement increment.

    The increment is split into ``n_substeps`` equal parts; a part that
    crosses the contact switch (u_n = up_n) is cut there in two. Each part
    takes an elastic trial. A trial outside the current surface is projected onto it
    (sigma clamped at the tension cut-off, tau scaled at fixed sigma onto the
    shear branch); the projection gap, measured in compliance, gives the
    direction of the inelastic displacement. Its size is then solved for so
    that the tractions re-evaluated with the softened strengths and the new
    damage lie on the shrunken surface. Inelastic displacement is split into
    plastic (eta) and fracturing (1 - eta) parts, with dilational plastic
    opening tan(d) |plastic slip|.
    """
    if int(n_substeps) < 1:
        raise ConstitutiveError(f"n_substeps must be >= 1, got {n_substeps!r}")
    _check_finite(du_n=du_n, du_s=du_s, u_n=state.u_n, u_s=state.u_s)
    n = int(n_substeps)

    shape = np.broadcast_shapes(np.shape(state.u_n), np.shape(du_n), np.shape(du_s))

    def field(value):
        return np.broadcast_to(np.asarray(value, dtype=float), shape).astype(float).reshape(-1)

    u_n = field(state.u_n)
    u_s = field(state.u_s)
    up_n = field(state.up_n)
    up_s = field(state.up_s)
    ui_n = field(state.ui_n)
    ui_s = field(state.ui_s)
    u_ieff = field(state.u_ieff)
    dmg = field(state.damage)
    step_n = field(du_n) / n
    step_s = field(du_s) / n

    tol_f = 1e-8 * (p.sigma_t0 + p.c0)
    yielded_any = np.zeros(u_n.shape, dtype=bool)
    d_total = np.zeros(u_n.shape)
    everywhere = np.arange(u_n.size)

    def advance(sel, target_n, target_s):
        """Move the points ``sel`` to the given relative displacement and return-map."""
        u_n[sel] = target_n
        u_s[sel] = target_s
        sig_tr, tau_tr, alpha = _tractions(p, u_n[sel], u_s[sel], up_n[sel], up_s[sel], ui_s[sel], dmg[sel])
        st = np.asarray(tensile_strength(p, u_ieff[sel]), dtype=float)
        c = np.asarray(cohesion(p, u_ieff[sel]), dtype=float)
        f_tr = np.asarray(yield_function(sig_tr, tau_tr, st, c, p.friction_angle), dtype=float)
        yielded = f_tr > 0.0
        if not np.any(yielded):
            return

        idx = sel[yielded]
        s_tr, t_tr, al = sig_tr[yielded], tau_tr[yielded], alpha[yielded]
        st, c = st[yielded], c[yielded]
        sig_p = np.minimum(s_tr, st)
        tau_p = np.sign(t_tr) * np.minimum(np.abs(t_tr), shear_strength(sig_p, st, c, p.friction_angle))

        gap_n = (s_tr - sig_p) / p.kn0
        gap_s = (t_tr - tau_p) / p.ks0
        gap = np.sqrt(gap_n * gap_n + gap_s * gap_s)
        m_n = gap_n / gap
        m_s = gap_s / gap
        lam_guess = gap / np.where(al > 0.0, al, 1.0)

        is_open = p.kn0 * (u_n[idx] - up_n[idx]) > 0.0
        reach = p.w_max + np.sqrt(ui_n[idx] ** 2 + ui_s[idx] ** 2)
        lam_max = np.where(is_open, reach, np.abs(t_tr) / p.ks0)
        lam_guess = np.minimum(lam_guess, lam_max)

        relax = _Relaxation(p, u_n[idx], u_s[idx], up_n[idx], up_s[idx], ui_n[idx], ui_s[idx],
                            u_ieff[idx], dmg[idx], m_n, m_s)
        lam = _solve_multiplier(relax, f_tr[yielded], lam_guess, lam_max, tol_f)
        h_up_n, h_up_s, h_ui_n, h_ui_s, h_u, h_dmg = relax.history(lam)
        sig_f, tau_f, _ = _tractions(p, u_n[idx], u_s[idx], h_up_n, h_up_s, h_ui_s, h_dmg)

        dui_n = lam * m_n
        dui_s = lam * m_s
        work = 0.5 * ((sig_p + sig_f) * dui_n + (tau_p + tau_f) * dui_s)
        d_total[idx] += np.maximum(work, 0.0)

        up_n[idx], up_s[idx] = h_up_n, h_up_s
        ui_n[idx], ui_s[idx] = h_ui_n, h_ui_s
        u_ieff[idx], dmg[idx] = h_u, h_dmg
        yielded_any[idx] = True

    for _ in range(n):
        before = u_n - up_n
        after = before + step_n
        end_n = u_n + step_n
        end_s = u_s + step_s
        # A substep that opens or closes the interface stops at the contact
        # switch first, so the regime change happens at u_n = up_n.
        crossing = ((before > 0.0) & (after < 0.0)) | ((before < 0.0) & (after > 0.0))
        if not np.any(crossing):
            advance(everywhere, end_n, end_s)
            continue
        theta = np.where(crossing, -before / np.where(crossing, step_n, 1.0), 1.0)
        first_n = np.where(crossing, up_n, end_n)
        first_s = np.where(crossing, u_s + theta * step_s, end_s)
        advance(everywhere, first_n, first_s)
        rest = np.flatnonzero(crossing)
        advance(rest, end_n[rest], end_s[rest])

    sigma, tau, alpha = _tractions(p, u_n, u_s, up_n, up_s, ui_s, dmg)
    st = np.asarray(tensile_strength(p, u_ieff), dtype=float)
    c = np.asarray(cohesion(p, u_ieff), dtype=float)
    broken = (u_ieff >= p.w_max) & (st <= 0.0) & (c <= 0.0)
    broken = broken | np.broadcast_to(np.asarray(state.broken, dtype=bool), shape).reshape(-1)
    dissipated = field(state.dissipated) + d_total

    def out(arr):
        arr = np.asarray(arr).reshape(shape)
        return arr[()] if arr.ndim == 0 else arr

    new_state = InterfaceState(
        u_n=out(u_n), u_s=out(u_s), up_n=out(up_n), up_s=out(up_s),
        ui_n=out(ui_n), ui_s=out(ui_s), u_ieff=out(u_ieff), damage=out(dmg),
        alpha=out(alpha), sigma_n=out(sigma), tau=out(tau),
        broken=out(broken), dissipated=out(dissipated),
    )
    result = TractionResult(
        sigma_n=new_state.sigma_n,
        tau=new_state.tau,
        yielded=out(yielded_any),
        d_dissipated=out(d_total),
    )
    return new_state, result
