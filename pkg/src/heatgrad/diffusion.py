"""Frame-bundle simulation of L-diffusions with stochastic parallel transport.

The generator is ``L = Lap/2 + Z``.  One Euler step moves the position along
the geodesic with initial velocity ``U (sqrt(dt) xi) + Z(X) dt`` where the
columns of ``U`` are a parallel-transported g-orthonormal frame (the lift to
the orthonormal frame bundle); the frame rides along the same geodesic and is
re-orthonormalized each step.  The damping matrix ``Q`` solves

    dQ/ds = -1/2 (Ric - 2 grad Z)_{frame} Q,      Q_0 = id,

integrated with an explicit midpoint rule; ``(Ric - 2 grad Z)_{frame}`` is
the curvature form pulled back through the moving frame, which for the
constant-curvature models with zero drift is exactly ``(n-1) kappa id``.

Randomness is counter-based: path ``p`` of a run with seed ``s`` reads its
Gaussian increments from an own Philox stream keyed ``(s, p)``, consumed in
fixed blocks of ``NOISE_BLOCK`` steps.  A path's increments therefore depend
only on ``(seed, path index, step index)`` and never on chunking, execution
order or worker count.

Domain exits are detected on the time grid without interpolation, so exit
times carry an O(sqrt(dt)) bias; the acceptance tolerances budget for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
from numpy.random import Generator, Philox

from .fields import DriftField
from .geometry import (
    DomainSpec,
    GeometryError,
    ManifoldModel,
    _rk4_geodesic,
    distance,
    domain_bounds,
    validate_domain,
)

__all__ = [
    "SimulationError",
    "FramePath",
    "LocalizationProcess",
    "CutoffPhi",
    "cutoff_phi",
    "build_h",
    "step_diffusion",
    "simulate_path",
    "run_paths",
    "CHUNK",
    "NOISE_BLOCK",
]

CHUNK = 8192  # paths per vectorized chunk; fixed so reductions never reorder
NOISE_BLOCK = 512  # steps per RNG block; fixed so streams never re-align

_PHI_FLOOR = 1e-8  # clamp before inverting phi^{-2}; active only within O(dt) of exit


class SimulationError(RuntimeError):
    """Simulation precondition or chart-validity failure."""


# ---------------------------------------------------------------------------
# Stored single trajectories
# ---------------------------------------------------------------------------


@dataclass
class FramePath:
    """One stored trajectory of the frame-bundle diffusion.

    ``positions[k]`` is the chart point at time ``k dt``; ``frames[k]`` the
    g-orthonormal frame (columns = transported basis); ``noise[k]`` the
    frame-coordinate Gaussian increment ``sqrt(dt) xi`` used for step ``k``;
    ``q_matrices[k]`` the damping matrix at time ``k dt``.  ``tau`` is the
    first grid time outside the domain (``inf`` if none within the horizon);
    storage ends at ``min(tau, horizon)``.
    """

    model: ManifoldModel
    drift_name: str
    dt: float
    seed: int
    path_index: int
    times: np.ndarray
    positions: np.ndarray
    frames: np.ndarray
    noise: np.ndarray
    q_matrices: np.ndarray
    tau: float
    domain: Optional[DomainSpec] = None

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


@dataclass
class LocalizationProcess:
    """Realized localization data ``(phi, c, sigma(t), h, hdot)`` on a path.

    ``h = h1(h0(s))`` where ``h0`` is the running integral of ``phi^{-2}``
    and ``h1(s) = 1 - c/(1-e^{-ct}) * int_0^s e^{-cr} dr``; ``hdot`` is the
    chain-rule derivative, zero from ``sigma(t)`` (the time-change horizon)
    and from the exit time onward.
    """

    c_phi: float
    horizon: float
    sigma_t: float
    h: np.ndarray
    hdot: np.ndarray

    def hdot_sq_integral(self, dt: float) -> float:
        return float(np.sum(self.hdot**2) * dt)


# ---------------------------------------------------------------------------
# Cutoff function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffPhi:
    """Cosine cutoff on a geodesic ball: ``phi(p) = cos(pi rho(x,p) / 2r)``.

    ``c`` is the closed-form bound

        c(phi) = pi/(2r) (2 sup|Z| + sqrt((n-1) K0^-)) + pi^2 (n+3)/(4 r^2),

    evaluated from the curvature/drift bounds of the ball.
    """

    model: ManifoldModel
    center: np.ndarray
    radius: float
    c: float

    def __call__(self, p: np.ndarray, clamp: bool = False) -> np.ndarray:
        rho = distance(self.model, np.broadcast_to(self.center, np.shape(p)), p)
        if not clamp and np.any(rho > self.radius * (1 + 1e-12)):
            raise GeometryError("point outside the cutoff ball")
        val = np.cos(0.5 * math.pi * np.minimum(rho, self.radius) / self.radius)
        return np.maximum(val, _PHI_FLOOR) if clamp else val


def cutoff_phi(
    model: ManifoldModel,
    center,
    radius: float,
    p=None,
    Z: Optional[DriftField] = None,
):
    """Cutoff object for the ball ``B(center, radius)``; with ``p`` given,
    returns ``(phi(p), c)`` instead."""
    from .bounds import cutoff_constant

    center = np.asarray(center, dtype=float)
    ball = DomainSpec(center=tuple(center), inner_radius=0.0, outer_radius=radius)
    b = domain_bounds(model, ball, Z)
    c = cutoff_constant(model.dim, radius, b.K0_minus, b.supZ)
    obj = CutoffPhi(model=model, center=center, radius=radius, c=c)
    if p is None:
        return obj
    return obj(np.asarray(p, dtype=float)), c


def _h1dot(r: np.ndarray, c: float, t: float) -> np.ndarray:
    """Derivative of h1: -c e^{-cr} / (1 - e^{-ct})."""
    return -c * np.exp(-c * r) / (1.0 - math.exp(-c * t))


def _h1(r: np.ndarray, c: float, t: float) -> np.ndarray:
    return 1.0 - (1.0 - np.exp(-c * np.minimum(r, t))) / (1.0 - math.exp(-c * t))


def build_h(path: FramePath, ball_radius: float, horizon: float) -> LocalizationProcess:
    """Localization process for a stored path on the ball around its start.

    The time change ``sigma(t)`` is realized discretely by accumulating
    ``phi^{-2}(X_s) dt`` until it reaches the horizon; ``phi`` is clamped
    below before inversion.  ``h`` and ``hdot`` are forced to zero from the
    exit step onward (the discrete surrogate of the almost-sure blow-up of
    ``phi^{-2}`` at the boundary).
    """
    if path.domain is not None and ball_radius > path.domain.outer_radius:
        raise SimulationError("localization ball exceeds the path's domain")
    phi_obj = cutoff_phi(path.model, path.positions[0], ball_radius)
    c, t = phi_obj.c, horizon
    m = path.n_steps
    phi = phi_obj(path.positions, clamp=True)
    inv2 = phi**-2
    # left-point time-change clock r_k = sum_{j<k} phi^{-2}(X_j) dt
    r = np.zeros(m + 1)
    r[1:] = np.cumsum(inv2[:-1]) * path.dt
    h = _h1(r, c, t)
    hdot = np.where(r[:-1] < t, _h1dot(r[:-1], c, t) * inv2[:-1], 0.0)
    crossings = np.flatnonzero(r >= t)
    sigma_t = min(
        float(crossings[0] * path.dt) if crossings.size else horizon,
        path.tau,
        horizon,
    )
    if np.isfinite(path.tau):
        cut = int(round(path.tau / path.dt))
        h[cut:] = 0.0
        hdot[cut:] = 0.0
    return LocalizationProcess(c_phi=c, horizon=horizon, sigma_t=sigma_t, h=h, hdot=hdot)


# ---------------------------------------------------------------------------
# One step of the frame-bundle scheme
# ---------------------------------------------------------------------------


def _frame_pullback_ricciZ(model, Z, X, U):
    """(Ric - 2 grad Z) pulled back through the frame: an (B, n, n) matrix.

    For g-orthonormal U and constant curvature, the Ricci part is exactly
    (n-1) kappa * id; only the drift term needs matrix work.
    """
    n = model.dim
    base = (n - 1) * model.sectional_curvature
    if Z is None:
        return base  # scalar multiple of the identity
    lam2 = model.conformal_factor(X) ** 2
    dz = Z.covariant_deriv(X)  # endomorphism [k, j]
    m = np.einsum("bka,bkj,bjc->bac", U, dz, U) * lam2[:, None, None]
    out = -2.0 * m
    idx = np.arange(n)
    out[:, idx, idx] += base
    return out


def _advance_q(Q, m_old, m_new, dt):
    """Explicit midpoint step of dQ/ds = -1/2 M Q with M averaged at the
    step endpoints; matches exp(-dt M / 2) to O(dt^3)."""
    if np.isscalar(m_old) and np.isscalar(m_new):
        m = 0.5 * (m_old + m_new)
        return Q * (1.0 - 0.5 * m * dt + 0.125 * (m * dt) ** 2)
    mm = 0.5 * (m_old + m_new)
    half = np.einsum("bij,bjk->bik", mm, Q)
    return Q - 0.5 * dt * half + 0.125 * dt * dt * np.einsum("bij,bjk->bik", mm, half)


def step_diffusion(
    model: ManifoldModel,
    Z: Optional[DriftField],
    state: tuple[np.ndarray, np.ndarray, np.ndarray],
    dt: float,
    noise: np.ndarray,
    geo_substeps: int = 1,
):
    """Advance one Euler step of the frame-bundle scheme.

    ``state = (X, U, Q)`` with batch leading axis; ``noise`` is a standard
    Gaussian array in the moving frame.  Returns the next ``(X, U, Q)``.
    """
    if dt <= 0:
        raise SimulationError("dt must be positive")
    X, U, Q = state
    disp = np.einsum("bia,ba->bi", U, noise) * math.sqrt(dt)
    if Z is not None:
        disp = disp + Z.value(X) * dt
    m_old = _frame_pullback_ricciZ(model, Z, X, U)
    if model.is_flat:
        Xn = model.wrap(X + disp)
        Un = U
    else:
        Xn, _, Un = _rk4_geodesic(model, X, disp, U, geo_substeps)
    m_new = _frame_pullback_ricciZ(model, Z, Xn, Un)
    Qn = _advance_q(Q, m_old, m_new, dt)
    return Xn, Un, Qn


def _initial_frame(model: ManifoldModel, x0: np.ndarray, batch: int) -> np.ndarray:
    lam0 = float(model.conformal_factor(x0))
    return np.broadcast_to(np.eye(model.dim) / lam0, (batch, model.dim, model.dim)).copy()


def _chart_guard_limit(model: ManifoldModel) -> float:
    """Chart-coordinate radius beyond which simulation must not proceed."""
    if model.kind == "sphere":
        return float(model.chart_radius_of_geodesic(math.pi * model.radius * 0.92))
    if model.kind == "hyperbolic":
        return 1.0 - 1e-6
    return math.inf


# ---------------------------------------------------------------------------
# Stored single-path simulation
# ---------------------------------------------------------------------------


def _check_sim_preconditions(model, x0, dom, dt):
    model.check_points(x0)
    if dom is not None:
        validate_domain(model, dom)
        rho0 = float(distance(model, x0, dom.center_array))
        if rho0 >= dom.outer_radius:
            raise SimulationError("start point must lie inside the domain")
        limit = 1e-2 * min(1.0, dom.r0**2)
        if dt > limit * (1 + 1e-9):
            raise SimulationError(
                f"dt={dt} too coarse for this domain (needs dt <= {limit:.3g})"
            )


def simulate_path(
    model: ManifoldModel,
    Z: Optional[DriftField],
    x0,
    dom: Optional[DomainSpec],
    dt: float,
    horizon: float,
    seed: int,
    path_index: int = 0,
    geo_substeps: int = 1,
) -> FramePath:
    """Simulate and store one trajectory up to ``min(tau, horizon)``."""
    x0 = np.asarray(x0, dtype=float)
    _check_sim_preconditions(model, x0, dom, dt)
    n_steps = max(1, int(round(horizon / dt)))
    dt_eff = horizon / n_steps
    n = model.dim
    gen = Generator(Philox(key=[seed, path_index]))
    guard = _chart_guard_limit(model)

    X = x0[None, :].copy()
    U = _initial_frame(model, x0, 1)
    Q = np.eye(n)[None, :, :].copy()
    xs = [x0.copy()]
    us = [U[0].copy()]
    qs = [Q[0].copy()]
    dbs = []
    tau = math.inf
    k = 0
    while k < n_steps:
        blk = min(NOISE_BLOCK, n_steps - k)
        noise = gen.standard_normal((blk, n))
        for j in range(blk):
            Xn, Un, Qn = step_diffusion(model, Z, (X, U, Q), dt_eff, noise[j][None, :], geo_substeps)
            if not float(np.linalg.norm(Xn[0])) <= guard:
                if dom is not None:
                    raise SimulationError("path left the chart before leaving the domain")
                k = n_steps  # freeze: whole-manifold path hit the chart guard
                break
            X, U, Q = Xn, Un, Qn
            dbs.append(noise[j] * math.sqrt(dt_eff))
            xs.append(X[0].copy())
            us.append(U[0].copy())
            qs.append(Q[0].copy())
            k += 1
            if dom is not None:
                rho = float(distance(model, X[0], dom.center_array))
                if rho >= dom.outer_radius:
                    tau = k * dt_eff
                    break
        if math.isfinite(tau):
            break
    m = len(xs) - 1
    return FramePath(
        model=model,
        drift_name=getattr(Z, "name", "zero") if Z is not None else "zero",
        dt=dt_eff,
        seed=seed,
        path_index=path_index,
        times=np.arange(m + 1) * dt_eff,
        positions=np.asarray(xs),
        frames=np.asarray(us),
        noise=np.asarray(dbs) if dbs else np.zeros((0, n)),
        q_matrices=np.asarray(qs),
        tau=tau,
        domain=dom,
    )


# ---------------------------------------------------------------------------
# Chunked batch engine
# ---------------------------------------------------------------------------


@dataclass
class ChunkResult:
    """Per-path outputs of one simulated chunk."""

    x_final: np.ndarray  # (B, n) position at t ^ tau (frozen at exit)
    exited: np.ndarray  # (B,) bool: tau <= horizon
    tau: np.ndarray  # (B,) grid exit time, inf if none
    weight_int: Optional[np.ndarray] = None  # (B, n) int w(s) Q^T dB, frame coords
    hdot_sq_int: Optional[np.ndarray] = None  # (B,) int hdot^2 ds
    node_vals: Optional[np.ndarray] = None  # (B, m) node functional values
    n_chart_guard: int = 0


def _simulate_chunk(
    model: ManifoldModel,
    Z: Optional[DriftField],
    x0: np.ndarray,
    dom: Optional[DomainSpec],
    dt: float,
    n_steps: int,
    seed: int,
    first_path: int,
    batch: int,
    weight: str,
    localizer: Optional[CutoffPhi],
    node_indices: Optional[np.ndarray],
    node_fn: Optional[Callable],
    geo_substeps: int,
) -> ChunkResult:
    n = model.dim
    B = batch
    need_q = weight != "none"
    gens = [Generator(Philox(key=[seed, p])) for p in range(first_path, first_path + B)]
    guard = _chart_guard_limit(model)
    center = dom.center_array if dom is not None else None

    X = np.broadcast_to(x0, (B, n)).copy()
    U = _initial_frame(model, x0, B)
    Q = np.broadcast_to(np.eye(n), (B, n, n)).copy() if need_q else None
    alive = np.ones(B, dtype=bool)
    tau = np.full(B, math.inf)
    x_final = X.copy()
    n_guard = 0

    W = np.zeros((B, n)) if need_q else None
    H2 = np.zeros(B) if weight == "localized" else None
    R = np.zeros(B) if weight == "localized" else None
    if weight == "localized":
        horizon = n_steps * dt
    nodes = None
    node_pos = 0
    if node_indices is not None:
        nodes = np.zeros((B, len(node_indices)))
        while node_pos < len(node_indices) and node_indices[node_pos] == 0:
            nodes[:, node_pos] = node_fn(X)
            node_pos += 1

    sqdt = math.sqrt(dt)
    const_curv_scalar = Z is None  # frame pullback is a scalar then
    k = 0
    while k < n_steps and (alive.any()):
        blk = min(NOISE_BLOCK, n_steps - k)
        idx_alive = np.flatnonzero(alive)
        noise = np.zeros((B, blk, n))
        for i in idx_alive:
            noise[i] = gens[i].standard_normal((blk, n))
        for j in range(blk):
            act = alive
            xi = noise[:, j, :]
            # Ito weight uses the pre-step state
            if need_q:
                db = xi * sqdt
                qtdb = np.einsum("bij,bi->bj", Q, db)
                if weight == "plain":
                    w = act.astype(float)
                elif weight == "localized":
                    phi = localizer(X, clamp=True)
                    inv2 = phi**-2
                    wgt = np.where(R < horizon, _h1dot(R, localizer.c, horizon) * inv2, 0.0)
                    wgt = np.where(act, wgt, 0.0)
                    H2 += wgt**2 * dt
                    R = np.where(act, R + inv2 * dt, R)
                    w = wgt
                W += w[:, None] * qtdb

            disp = np.einsum("bia,ba->bi", U, xi) * sqdt
            if Z is not None:
                disp = disp + Z.value(X) * dt
            if const_curv_scalar:
                m_old = (n - 1) * model.sectional_curvature
            else:
                m_old = _frame_pullback_ricciZ(model, Z, X, U)
            if model.is_flat:
                Xn = model.wrap(X + disp)
                Un = U
            else:
                Xn, _, Un = _rk4_geodesic(model, X, disp, U, geo_substeps)

            # ~(norm <= guard) also catches NaN from a blown-up RK4 stage
            guard_hit = act & ~(np.linalg.norm(Xn, axis=-1) <= guard)
            if guard_hit.any():
                if dom is not None:
                    raise SimulationError(
                        "a path left the chart before leaving the domain"
                    )
                n_guard += int(np.count_nonzero(guard_hit))
                x_final[guard_hit] = X[guard_hit]
                alive = alive & ~guard_hit
                act = alive

            commit = act
            X = np.where(commit[:, None], Xn, X)
            U = np.where(commit[:, None, None], Un, U)
            if need_q:
                if const_curv_scalar:
                    m = m_old
                    fac = 1.0 - 0.5 * m * dt + 0.125 * (m * dt) ** 2
                    Q = np.where(commit[:, None, None], Q * fac, Q)
                else:
                    m_new = _frame_pullback_ricciZ(model, Z, X, U)
                    Qn = _advance_q(Q, m_old, m_new, dt)
                    Q = np.where(commit[:, None, None], Qn, Q)
            k += 1

            if dom is not None:
                rho = distance(model, X, np.broadcast_to(center, X.shape))
                exiting = commit & (rho >= dom.outer_radius)
                if exiting.any():
                    tau[exiting] = k * dt
                    x_final[exiting] = X[exiting]
                    alive = alive & ~exiting

            if nodes is not None:
                while node_pos < len(node_indices) and node_indices[node_pos] == k:
                    vals = node_fn(X)
                    nodes[:, node_pos] = np.where(alive, vals, 0.0)
                    node_pos += 1
            if not alive.any():
                break
    x_final[alive] = X[alive]
    return ChunkResult(
        x_final=x_final,
        exited=np.isfinite(tau),
        tau=tau,
        weight_int=W,
        hdot_sq_int=H2,
        node_vals=nodes,
        n_chart_guard=n_guard,
    )


def run_paths(
    model: ManifoldModel,
    Z: Optional[DriftField],
    x0,
    dom: Optional[DomainSpec],
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    weight: str = "none",
    ball_radius: Optional[float] = None,
    node_indices=None,
    node_fn: Optional[Callable] = None,
    geo_substeps: int = 1,
    workers: int = 1,
) -> Iterator[ChunkResult]:
    """Simulate ``n_paths`` trajectories in fixed chunks, yielding per-chunk
    results in chunk order (so any reduction is worker-count independent).

    ``weight`` selects the stochastic-integral accumulator: ``"plain"`` for
    ``int Q^T dB``, ``"localized"`` for ``int hdot(s) Q^T dB`` with the
    cutoff/time-change construction on the ball of radius ``ball_radius``
    around ``x0``, or ``"none"``.
    """
    x0 = np.asarray(x0, dtype=float)
    _check_sim_preconditions(model, x0, dom, dt)
    if n_paths < 1:
        raise SimulationError("need at least one path")
    if weight not in ("none", "plain", "localized"):
        raise SimulationError(f"unknown weight mode {weight!r}")
    localizer = None
    if weight == "localized":
        if ball_radius is None:
            raise SimulationError("localized weight needs a ball radius")
        localizer = cutoff_phi(model, x0, ball_radius, Z=Z)
    n_steps = max(1, int(round(horizon / dt)))
    dt_eff = horizon / n_steps
    if node_indices is not None:
        node_indices = np.asarray(node_indices, dtype=int)
        if np.any(node_indices < 0) or np.any(node_indices > n_steps):
            raise SimulationError("node indices outside the time grid")

    starts = list(range(0, n_paths, CHUNK))

    def job(start):
        return _simulate_chunk(
            model, Z, x0, dom, dt_eff, n_steps, seed, start,
            min(CHUNK, n_paths - start), weight, localizer,
            node_indices, node_fn, geo_substeps,
        )

    if workers <= 1 or len(starts) == 1:
        for s in starts:
            yield job(s)
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job, s) for s in starts]
        for fut in futures:  # futures list is in chunk order
            yield fut.result()
