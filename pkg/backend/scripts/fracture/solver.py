"""Explicit dynamic-relaxation solver for meshed specimens.

Particles are linear-elastic constant-strain triangles (plane strain, small
strain). Interfaces carry cohesive tractions from the constitutive law at two
integration points each, with tributary length L/2. Nodes are integrated with
central differences and force-proportional local damping; the platens are
velocity boundary conditions.

Interface updates can be spread over a thread pool. Each chunk is a pure
function of its slice and the nodal scatter is a single ``np.add.at`` in a
fixed order, so the output does not depend on the number of workers.
"""

from __future__ import annotations

import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .constitutive import ConstitutiveError, InterfaceState, MaterialParams, update_interface
from .mesher import Mesh, boundary_sets

_SCRIPTS_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if _SCRIPTS_DIR not in sys.path:
    sys.path.append(_SCRIPTS_DIR)

try:
    from curves import COMPRESSION_COLUMNS, CurveRecord  # type: ignore
except Exception:  # pragma: no cover
    from scripts.curves import COMPRESSION_COLUMNS, CurveRecord  # type: ignore

logger = logging.getLogger(__name__)

# Any node faster than this multiple of the platen speed means the scheme diverged.
_BLOWUP_SPEED_FACTOR = 1.0e4


class SolverError(RuntimeError):
    """Numerical failure during a run."""


@dataclass(frozen=True)
class SolverConfig:
    damping_coefficient: float = 0.8
    timestep_safety: float = 0.1
    loading_velocity: float = 0.1
    max_steps: int = 600_000
    quasi_static_tolerance: float = 1.0e-3
    output_interval: int = 1000
    snapshot_interval: int = 0
    peak_drop_fraction: float = 0.3
    max_displacement: float = 0.0
    glued_platens: bool = True
    n_substeps: int = 1
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.damping_coefficient < 1.0:
            raise ValueError(f"damping_coefficient must lie in [0, 1), got {self.damping_coefficient!r}")
        if not 0.0 < self.timestep_safety <= 1.0:
            raise ValueError(f"timestep_safety must lie in (0, 1], got {self.timestep_safety!r}")
        if not (math.isfinite(self.loading_velocity) and self.loading_velocity >= 0.0):
            raise ValueError(f"loading_velocity must be finite and >= 0, got {self.loading_velocity!r}")
        if not self.quasi_static_tolerance > 0.0:
            raise ValueError(f"quasi_static_tolerance must be > 0, got {self.quasi_static_tolerance!r}")
        if not 0.0 <= self.peak_drop_fraction < 1.0:
            raise ValueError(f"peak_drop_fraction must lie in [0, 1), got {self.peak_drop_fraction!r}")
        if not self.max_displacement >= 0.0:
            raise ValueError(f"max_displacement must be >= 0, got {self.max_displacement!r}")
        for name in ("max_steps", "output_interval", "n_substeps", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)!r}")
        if int(self.snapshot_interval) < 0:
            raise ValueError(f"snapshot_interval must be >= 0, got {self.snapshot_interval!r}")


@dataclass
class DynamicState:
    positions: np.ndarray
    velocities: np.ndarray
    forces: np.ndarray
    interfaces: InterfaceState
    time: float = 0.0
    step: int = 0
    external_work: float = 0.0


def plane_strain_matrix(youngs: float, poisson: float) -> np.ndarray:
    """Elastic matrix for (eps_xx, eps_yy, gamma_xy)."""
    scale = youngs / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return scale * np.array([
        [1.0 - poisson, poisson, 0.0],
        [poisson, 1.0 - poisson, 0.0],
        [0.0, 0.0, 0.5 - poisson],
    ])


class Assembly:
    """Mesh and material with everything the time loop reuses precomputed."""

    def __init__(self, mesh: Mesh, params: MaterialParams):
        self.mesh = mesh
        self.params = params
        self.reference = mesh.nodes.copy()
        tri = mesh.triangles
        self.triangles = tri
        p = mesh.nodes[tri]  # (T, 3, 2)
        x, y = p[..., 0], p[..., 1]
        area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
        if np.any(area <= 0.0):
            bad = int(np.flatnonzero(area <= 0.0)[0])
            raise SolverError(f"element {bad} has non-positive reference area {area[bad]!r}")
        self.area = area
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        B = np.zeros((tri.shape[0], 3, 6))
        B[:, 0, 0::2] = b
        B[:, 1, 1::2] = c
        B[:, 2, 0::2] = c
        B[:, 2, 1::2] = b
        self.B = B / (2.0 * area)[:, None, None]
        self.D = plane_strain_matrix(params.youngs, params.poisson)

        mass = np.zeros(mesh.n_nodes)
        np.add.at(mass, tri.ravel(), np.repeat(params.rho * area / 3.0, 3))
        if np.any(mass <= 0.0):
            raise SolverError("mesh has nodes without mass")
        self.mass = mass

        # Integration points: ip = 2 * interface + endpoint.
        self.ip_a = mesh.nodes_a.reshape(-1)
        self.ip_b = mesh.nodes_b.reshape(-1)
        self.ip_normal = np.repeat(mesh.normals, 2, axis=0)
        self.ip_tangent = np.repeat(mesh.tangents, 2, axis=0)
        self.ip_trib = np.repeat(0.5 * mesh.lengths, 2)

    @property
    def n_ips(self) -> int:
        return int(self.ip_a.shape[0])

    def node_stiffness(self) -> np.ndarray:
        """Per-node bound on the stiffness seen by either dof (row sums of |K|)."""
        K = np.einsum("tji,jk,tkl->til", self.B, self.D, self.B) * self.area[:, None, None]
        rows = np.zeros((self.mesh.n_nodes, 2))
        np.add.at(rows, self.triangles.ravel(), np.abs(K).sum(axis=2).reshape(-1, 2))
        if self.n_ips:
            p = self.params
            n, t = self.ip_normal, self.ip_tangent
            G = (p.kn0 * np.einsum("ni,nj->nij", n, n) + p.ks0 * np.einsum("ni,nj->nij", t, t))
            ip_rows = 2.0 * np.abs(G).sum(axis=2) * self.ip_trib[:, None]
            np.add.at(rows, self.ip_a, ip_rows)
            np.add.at(rows, self.ip_b, ip_rows)
        return rows.max(axis=1)


def critical_timestep(node_mass, node_stiffness, safety: float = 1.0) -> float:
    """safety * min 2 sqrt(m / k) over nodes."""
    m = np.asarray(node_mass, dtype=float)
    k = np.asarray(node_stiffness, dtype=float)
    if m.size == 0 or np.any(m <= 0.0):
        raise SolverError("critical timestep needs strictly positive masses")
    if np.any(k <= 0.0):
        raise SolverError("critical timestep needs strictly positive stiffnesses")
    if not 0.0 < safety <= 1.0:
        raise SolverError(f"timestep safety must lie in (0, 1], got {safety!r}")
    return float(safety * np.min(2.0 * np.sqrt(m / k)))


def stable_timestep(mesh: Mesh, params: MaterialParams, safety: float) -> float:
    """Largest stable step of the mesh scaled by the safety factor."""
    asm = Assembly(mesh, params)
    return critical_timestep(asm.mass, asm.node_stiffness(), safety)


def initial_state(asm: Assembly) -> DynamicState:
    n = asm.mesh.n_nodes
    return DynamicState(
        positions=asm.reference.copy(),
        velocities=np.zeros((n, 2)),
        forces=np.zeros((n, 2)),
        interfaces=InterfaceState.virgin(asm.n_ips),
    )


def _element_stress(asm: Assembly, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = (positions - asm.reference)[asm.triangles].reshape(-1, 6)
    strain = np.einsum("tij,tj->ti", asm.B, u)
    return strain, strain @ asm.D.T


def element_forces(state: DynamicState, asm: Assembly) -> np.ndarray:
    """Internal nodal forces of the constant-strain triangles (per unit thickness)."""
    p = state.positions[asm.triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    if np.any(area <= 0.0):
        bad = int(np.flatnonzero(area <= 0.0)[0])
        raise SolverError(
            f"element {bad} (particle {int(asm.mesh.triangle_particle[bad])}) inverted at step "
            f"{state.step}: area {area[bad]!r} m2"
        )
    _, stress = _element_stress(asm, state.positions)
    fe = -asm.area[:, None] * np.einsum("tji,tj->ti", asm.B, stress)
    forces = np.zeros_like(state.positions)
    np.add.at(forces, asm.triangles.ravel(), fe.reshape(-1, 2))
    return forces


def _relative_displacement(state: DynamicState, asm: Assembly) -> tuple[np.ndarray, np.ndarray]:
    disp = state.positions - asm.reference
    d = disp[asm.ip_b] - disp[asm.ip_a]
    u_n = d[:, 0] * asm.ip_normal[:, 0] + d[:, 1] * asm.ip_normal[:, 1]
    u_s = d[:, 0] * asm.ip_tangent[:, 0] + d[:, 1] * asm.ip_tangent[:, 1]
    return u_n, u_s


def _chunks(count: int, workers: int) -> list[slice]:
    bounds = np.linspace(0, count, max(1, min(workers, count)) + 1).astype(int)
    return [slice(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def interface_forces(state: DynamicState, asm: Assembly, n_substeps: int = 1,
                     pool: ThreadPoolExecutor | None = None,
                     workers: int = 1) -> tuple[np.ndarray, InterfaceState]:
    """Advance every integration point and turn its tractions into nodal forces.

    Face a (lower particle) receives +(sigma n + tau t) L/2, face b the opposite.
    """
    forces = np.zeros_like(state.positions)
    if asm.n_ips == 0:
        return forces, state.interfaces
    u_n, u_s = _relative_displacement(state, asm)
    du_n = u_n - state.interfaces.u_n
    du_s = u_s - state.interfaces.u_s
    params = asm.params

    def advance(part: slice) -> InterfaceState:
        try:
            new, _ = update_interface(state.interfaces.take(part), params, du_n[part], du_s[part], n_substeps)
        except ConstitutiveError as exc:
            bad = np.flatnonzero(~(np.isfinite(du_n[part]) & np.isfinite(du_s[part])))
            ip = (part.start or 0) + (int(bad[0]) if bad.size else 0)
            raise SolverError(f"interface {ip // 2} (endpoint {ip % 2}) at step {state.step}: {exc}") from exc
        return new

    parts = _chunks(asm.n_ips, workers if pool is not None else 1)
    if pool is None or len(parts) == 1:
        updated = [advance(part) for part in parts]
    else:
        updated = list(pool.map(advance, parts))
    new_state = updated[0] if len(updated) == 1 else InterfaceState.concat(updated)

    sigma = np.asarray(new_state.sigma_n, dtype=float)
    tau = np.asarray(new_state.tau, dtype=float)
    f = (sigma[:, None] * asm.ip_normal + tau[:, None] * asm.ip_tangent) * asm.ip_trib[:, None]
    np.add.at(forces, np.concatenate([asm.ip_a, asm.ip_b]), np.concatenate([f, -f]))
    return forces, new_state


@dataclass(frozen=True)
class BoundaryConditions:
    """Prescribed velocity per dof where ``fixed`` is set."""

    fixed: np.ndarray   # (N, 2) bool
    values: np.ndarray  # (N, 2) m/s
    top: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def free(cls, n_nodes: int) -> "BoundaryConditions":
        return cls(np.zeros((n_nodes, 2), dtype=bool), np.zeros((n_nodes, 2)))


def platen_conditions(mesh: Mesh, cfg: SolverConfig, direction: str = "compression") -> BoundaryConditions:
    """Bottom platen fixed vertically, top platen driven at the loading velocity.

    All copies of the bottom-left corner are also held horizontally; glued
    platens hold the top row horizontally as well.
    """
    if direction not in ("compression", "tension"):
        raise ValueError(f"direction must be 'compression' or 'tension', got {direction!r}")
    sets = boundary_sets(mesh)
    fixed = np.zeros((mesh.n_nodes, 2), dtype=bool)
    values = np.zeros((mesh.n_nodes, 2))
    fixed[sets["bottom"], 1] = True
    fixed[np.intersect1d(sets["bottom"], sets["left"]), 0] = True
    sign = -1.0 if direction == "compression" else 1.0
    fixed[sets["top"], 1] = True
    values[sets["top"], 1] = sign * cfg.loading_velocity
    if cfg.glued_platens:
        fixed[sets["top"], 0] = True
        fixed[sets["bottom"], 0] = True
    return BoundaryConditions(fixed, values, sets["top"])


def step(state: DynamicState, asm: Assembly, cfg: SolverConfig, dt: float,
         bc: BoundaryConditions, pool: ThreadPoolExecutor | None = None) -> DynamicState:
    """One damped central-difference step; ``forces`` holds the internal forces."""
    f_int, interfaces = interface_forces(state, asm, cfg.n_substeps, pool, cfg.workers)
    f_int += element_forces(state, asm)
    v = state.velocities
    damped = f_int - cfg.damping_coefficient * np.abs(f_int) * np.sign(v)
    velocities = v + damped / asm.mass[:, None] * dt
    velocities = np.where(bc.fixed, bc.values, velocities)
    positions = state.positions + velocities * dt
    # Work done by the platens on the specimen; reaction = -f_int on driven dofs.
    work = -float(np.sum(np.where(bc.fixed, f_int * velocities, 0.0))) * dt
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
        raise SolverError(f"non-finite nodal state at step {state.step + 1}")
    return DynamicState(
        positions=positions,
        velocities=velocities,
        forces=f_int,
        interfaces=interfaces,
        time=state.time + dt,
        step=state.step + 1,
        external_work=state.external_work + work,
    )


def strain_energy(state: DynamicState, asm: Assembly) -> float:
    """Elastic energy in the triangles and the interfaces, J per metre thickness."""
    strain, stress = _element_stress(asm, state.positions)
    bulk = 0.5 * float(np.sum(asm.area * np.sum(strain * stress, axis=1)))
    if asm.n_ips == 0:
        return bulk
    p = asm.params
    s = state.interfaces
    alpha = np.asarray(s.alpha, dtype=float)
    sigma = np.asarray(s.sigma_n, dtype=float)
    tau = np.asarray(s.tau, dtype=float)
    live = alpha > 0.0
    safe = np.where(live, alpha, 1.0)
    ip = np.where(live, (sigma * sigma / p.kn0 + tau * tau / p.ks0) / (2.0 * safe), 0.0)
    return bulk + float(np.sum(ip * asm.ip_trib))


def relative_kinetic_energy(state: DynamicState, asm: Assembly, platen_velocity: float) -> float:
    """Kinetic energy of the velocity left after removing the homogeneous platen field v y / H."""
    y = asm.reference[:, 1]
    affine = platen_velocity * y / asm.mesh.height
    vx = state.velocities[:, 0]
    vy = state.velocities[:, 1] - affine
    return 0.5 * float(np.sum(asm.mass * (vx * vx + vy * vy)))


@dataclass(frozen=True)
class Snapshot:
    step: int
    time: float
    rows: np.ndarray  # id, mid x, mid y, D, u_ieff, broken


@dataclass
class SolverResult:
    curve: CurveRecord
    snapshots: list
    state: DynamicState
    dt: float
    terminated_by: str


def interface_summary(state: DynamicState, asm: Assembly) -> np.ndarray:
    """Per interface: id, midpoint x, y, max D, max u_ieff, broken (both endpoints)."""
    count = asm.mesh.n_interfaces
    s = state.interfaces
    dmg = np.asarray(s.damage, dtype=float).reshape(count, 2).max(axis=1)
    u = np.asarray(s.u_ieff, dtype=float).reshape(count, 2).max(axis=1)
    broken = np.asarray(s.broken, dtype=bool).reshape(count, 2).all(axis=1)
    mid = asm.mesh.interface_midpoints()
    return np.column_stack([np.arange(count, dtype=float), mid[:, 0], mid[:, 1], dmg, u, broken.astype(float)])


def _platen_stress(state: DynamicState, asm: Assembly, bc: BoundaryConditions, sign: float) -> float:
    return sign * float(np.sum(state.forces[bc.top, 1])) / asm.mesh.width


def run_uniaxial(mesh: Mesh, params: MaterialParams, cfg: SolverConfig,
                 direction: str = "compression") -> SolverResult:
    """Drive the top platen until the stress drops past the peak or max_steps.

    Stress is positive in the loading sense (compression positive for
    compression runs). Rows are sampled every ``output_interval`` steps and at
    termination.
    """
    asm = Assembly(mesh, params)
    bc = platen_conditions(mesh, cfg, direction)
    dt = critical_timestep(asm.mass, asm.node_stiffness(), cfg.timestep_safety)
    sign = 1.0 if direction == "compression" else -1.0
    # Homogeneous field has the top moving at -v (compression) or +v.
    platen_vy = -sign * cfg.loading_velocity
    state = initial_state(asm)
    logger.info(
        "%s run: %d nodes, %d interfaces, dt=%.4g s, v=%g m/s, max_steps=%d",
        direction, mesh.n_nodes, mesh.n_interfaces, dt, cfg.loading_velocity, cfg.max_steps,
    )

    rows: list[list[float]] = []
    snapshots: list[Snapshot] = []
    peak = 0.0
    terminated_by = "max_steps"
    speed_limit = _BLOWUP_SPEED_FACTOR * max(cfg.loading_velocity, 1.0e-3)

    def sample(s: DynamicState) -> list[float]:
        disp = cfg.loading_velocity * s.time
        u = np.asarray(s.interfaces.u_ieff, dtype=float).reshape(-1, 2)
        broken = np.asarray(s.interfaces.broken, dtype=bool).reshape(-1, 2)
        work = max(s.external_work, strain_energy(s, asm))
        ratio = relative_kinetic_energy(s, asm, platen_vy) / work if work > 0.0 else 0.0
        max_damage = float(np.max(s.interfaces.damage)) if asm.n_ips else 0.0
        return [s.step, s.time, disp, disp / mesh.height, _platen_stress(s, asm, bc, sign),
                int(np.count_nonzero(u.max(axis=1) > 0.0)) if asm.n_ips else 0,
                int(np.count_nonzero(broken.all(axis=1))) if asm.n_ips else 0,
                max_damage, ratio]

    rows.append(sample(state))
    workers = max(1, int(cfg.workers))
    with ThreadPoolExecutor(max_workers=workers) if workers > 1 else nullcontext() as pool:
        while state.step < cfg.max_steps:
            state = step(state, asm, cfg, dt, bc, pool)
            speed = float(np.max(np.abs(state.velocities))) if mesh.n_nodes else 0.0
            if speed > speed_limit:
                raise SolverError(
                    f"energy blow-up at step {state.step}: node speed {speed:.3g} m/s; "
                    f"reduce timestep_safety (now {cfg.timestep_safety})"
                )
            stress = _platen_stress(state, asm, bc, sign)
            peak = max(peak, stress)
            done = None
            if cfg.peak_drop_fraction > 0.0 and peak > 0.0 and stress < cfg.peak_drop_fraction * peak:
                done = "peak_drop"
            elif cfg.max_displacement > 0.0 and cfg.loading_velocity * state.time >= cfg.max_displacement:
                done = "max_displacement"
            if state.step % cfg.output_interval == 0 or done or state.step == cfg.max_steps:
                rows.append(sample(state))
                logger.debug("step %d: stress %.6g Pa, peak %.6g Pa", state.step, stress, peak)
            if cfg.snapshot_interval and (state.step % cfg.snapshot_interval == 0 or done):
                snapshots.append(Snapshot(state.step, state.time, interface_summary(state, asm)))
            if done:
                terminated_by = done
                break

    logger.info("%s run finished after %d steps (%s), peak %.6g Pa", direction, state.step, terminated_by, peak)
    curve = CurveRecord(COMPRESSION_COLUMNS, np.asarray(rows, dtype=float),
                        dissipated=float(np.sum(np.asarray(state.interfaces.dissipated) * asm.ip_trib))
                        if asm.n_ips else 0.0,
                        kind="compression")
    return SolverResult(curve, snapshots, state, dt, terminated_by)


def run_compression(mesh: Mesh, params: MaterialParams, cfg: SolverConfig) -> SolverResult:
    return run_uniaxial(mesh, params, cfg, "compression")


def series_modulus(params: MaterialParams, particle_size: float, pattern: str = "structured-quad") -> float:
    """Uniaxial modulus of bulk and interface compliance in series.

    Under a uniform axial stress S an interface family of normal n and
    length L per area A adds (L / A) S (n_y^4 / kn0 + n_x^2 n_y^2 / ks0) of
    axial strain. Square cells of size h have one load-normal edge per cell,
    1 / (kn0 h); crossed triangles add both diagonals,
    (1 / kn0 + 1 / ks0) / (sqrt(2) h). Edges parallel to the load add nothing.
    """
    if pattern not in ("structured-quad", "crossed-triangle"):
        raise ValueError(f"no series estimate for pattern {pattern!r}")
    h = float(particle_size)
    if not h > 0.0:
        raise ValueError(f"particle_size must be > 0, got {particle_size!r}")
    compliance = (1.0 - params.poisson ** 2) / params.youngs + 1.0 / (params.kn0 * h)
    if pattern == "crossed-triangle":
        compliance += (1.0 / params.kn0 + 1.0 / params.ks0) / (math.sqrt(2.0) * h)
    return 1.0 / compliance

