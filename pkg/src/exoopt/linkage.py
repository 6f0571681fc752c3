"""Planar multi-loop linkage plant: posture solving, torque transmission by
virtual work, the exoskeleton design problems, and a brute-force grid search.

Topology (a documented surrogate; the original device's closure equations are
not public, so this module reconstructs a mechanism with the same interface):

* Ground carries the mount K, the actuator base O (horizontal prismatic axis),
  and the pivot H at distance ``kh`` from K along the bracket direction.
* Body 1 is a rigid bar B-C-D (lengths ``bc``, ``cd``) with a perpendicular
  arm C -> I (length ``ci``, 90-degree elbow at C) whose tip rides the
  proximal phalanx through a pin-in-slot slider (travel ``c1``).
* Body 2 is a rigid bar D-E-F (lengths ``de``, ``ef``) pinned to body 1 at D,
  with a perpendicular arm E -> J (length ``ej``, 90-degree elbow at E) riding
  the middle phalanx (travel ``c2``), and a second perpendicular arm F -> G
  (length ``fg``, 90-degree elbow at F).
* Link K-B (length ``bk``) grounds body 1; link G-H (length ``gh``) tethers
  body 2 to the ground pivot H; link A-B (length ``ab``) couples body 1 to
  the actuator slider A = O + s * x_hat, whose travel s is the actuator
  length |OA| (torques below are for a unit actuator force, in N*mm).

The finger is modeled as two phalanx segments hinged at the MCP (origin) and
PIP joints, flexing downward; prescribing both joint angles leaves the five
posture unknowns (B, psi1, psi2, s) exactly determined by the five loop-closure
residuals below.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .core import (
    SOLVER_FAILURE_VIOLATION,
    Bounds,
    Evaluation,
    Individual,
    ObjectiveSpec,
)

VARIABLE_NAMES = ("BC", "CD", "DE", "EF", "FG", "GH", "BK", "CI", "EJ")
LOWER_BOUNDS = np.array([38.0, 10.0, 15.0, 15.0, 27.0, 64.0, 20.0, 10.0, 20.0])
UPPER_BOUNDS = np.array([60.0, 30.0, 51.0, 51.0, 56.0, 100.0, 50.0, 17.0, 50.0])
# Six-variable mode freezes the three mounting links at the midpoint of
# their nine-variable design ranges.
FIXED_SIX_VARIABLE_LINKS = {"BK": 35.0, "CI": 13.5, "EJ": 35.0}


class NonConvergent(RuntimeError):
    """Posture solver failed to reach tolerance."""


class BranchFlip(RuntimeError):
    """Solution jumped beyond the continuity threshold from its warm start."""


@dataclass
class MechanismConfig:
    """Fixed geometry of the surrogate linkage (all lengths in mm)."""

    llx: float = 20.0  # horizontal mount offset between K and the actuator base O
    ab: float = 20.0
    kh: float = 72.0
    mount_k: tuple = (-44.0, -3.0)
    actuator_drop: float = -31.0  # O sits this far below K (minus llx horizontally)
    bracket_angle_deg: float = 2.0  # direction of K -> H
    g_arm_side: float = -1.0  # which side of body 2 the F -> G elbow points to
    proximal_length: float = 45.0
    middle_length: float = 25.0
    solver_tol: float = 1e-9
    solver_max_iter: int = 100
    continuity_threshold: float = 25.0  # mm of point travel allowed per warm-started step

    @property
    def k_point(self) -> np.ndarray:
        return np.asarray(self.mount_k, dtype=float)

    @property
    def o_point(self) -> np.ndarray:
        return self.k_point + np.array([-self.llx, -self.actuator_drop])

    @property
    def h_point(self) -> np.ndarray:
        a = math.radians(self.bracket_angle_deg)
        return self.k_point + self.kh * np.array([math.cos(a), math.sin(a)])

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"schema": "mechanism-config/1", **asdict(self)}, fh, indent=2)

    @classmethod
    def from_json(cls, path) -> "MechanismConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.pop("schema", None)
        data["mount_k"] = tuple(data["mount_k"])
        return cls(**data)


@dataclass
class SweepSpec:
    """Finger-joint sweep: MCP 0..80 deg with PIP advancing proportionally to 90."""

    steps: int = 100
    mcp_max_deg: float = 80.0
    pip_max_deg: float = 90.0

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("sweep needs at least 2 steps")

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        mcp = np.linspace(0.0, math.radians(self.mcp_max_deg), self.steps)
        pip = mcp * (self.pip_max_deg / self.mcp_max_deg)
        return mcp, pip


@dataclass
class PostureSolution:
    points: dict
    c1: float
    c2: float
    actuator_length: float
    residual_norm: float


@dataclass
class TransmissionResult:
    """Sweep outcome for one genome.

    Per-step torques are signed (N*mm for a 1 N actuator force); the aggregate
    tau values are means of per-step magnitudes.  ``lx`` is the actuator
    excursion max|OA| - min|OA| over the sweep.
    """

    tau_mcp_steps: np.ndarray
    tau_pip_steps: np.ndarray
    tau_mcp: float
    tau_pip: float
    lx: float
    c1_min: float
    c1_max: float
    c2_min: float
    c2_max: float


def damped_newton(x0: np.ndarray, residual_fn, jacobian_fn=None, tol: float = 1e-9,
                  max_iter: int = 100, active=None):
    """Batched damped Newton with backtracking on the residual norm.

    x0: (n, d) initial guesses.  ``residual_fn(x, rows)`` maps the (k, d)
    states belonging to row indices ``rows`` (into x0) to (k, d) residuals;
    ``jacobian_fn(x, rows)`` likewise to (k, d, d), defaulting to central
    finite differences.  The iteration keeps only unresolved rows in play, so
    a few slow rows do not drag whole-batch work along.  Returns
    (x, converged_mask).
    """
    x = np.array(x0, dtype=float, copy=True)
    n, d = x.shape
    if jacobian_fn is None:
        jacobian_fn = lambda xx, rows: _fd_jacobian(lambda z: residual_fn(z, rows), xx)
    idx = np.arange(n) if active is None else np.nonzero(np.asarray(active, bool))[0]
    converged = np.zeros(n, dtype=bool)
    if idx.size == 0:
        return x, converged
    xi = x[idx]
    ri = residual_fn(xi, idx)
    normi = np.max(np.abs(ri), axis=1)

    def retire(done, ok):
        nonlocal idx, xi, ri, normi
        x[idx[done]] = xi[done]
        converged[idx[done]] = ok[done]
        keep = ~done
        idx, xi, ri, normi = idx[keep], xi[keep], ri[keep], normi[keep]

    ok = np.isfinite(normi) & (normi <= tol)
    retire(ok | ~np.isfinite(normi), ok)
    for _ in range(max_iter):
        if idx.size == 0:
            break
        jac = jacobian_fn(xi, idx)
        step = np.zeros_like(xi)
        try:
            step = np.linalg.solve(jac, -ri[..., None])[..., 0]
            solvable = np.ones(idx.size, dtype=bool)
        except np.linalg.LinAlgError:
            solvable = np.abs(np.linalg.det(jac)) > 1e-14
            if np.any(solvable):
                step[solvable] = np.linalg.solve(
                    jac[solvable], -ri[solvable][..., None])[..., 0]
        scale = np.where(solvable, 1.0, 0.0)
        improved = np.zeros(idx.size, dtype=bool)
        trying = solvable.copy()
        for _halving in range(12):
            if not np.any(trying):
                break
            rows = np.nonzero(trying)[0]
            cand = xi[rows] + scale[rows, None] * step[rows]
            cres = residual_fn(cand, idx[rows])
            cnorm = np.max(np.abs(cres), axis=1)
            good = np.isfinite(cnorm) & (cnorm < normi[rows])
            gi = rows[good]
            xi[gi] = cand[good]
            ri[gi] = cres[good]
            normi[gi] = cnorm[good]
            improved[gi] = True
            trying[gi] = False
            scale[rows[~good]] *= 0.5
        ok = improved & (normi <= tol)
        # retire converged rows and rows that stalled (singular Jacobian or
        # no backtracking step improved the residual)
        retire(ok | ~improved, ok)
    if idx.size:
        retire(np.ones(idx.size, dtype=bool), normi <= tol)
    return x, converged


def _fd_jacobian(residual_fn, x, h=1e-7):
    n, d = x.shape
    jac = np.empty((n, d, d))
    for k in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[:, k] += h
        xm[:, k] -= h
        jac[:, :, k] = (residual_fn(xp) - residual_fn(xm)) / (2 * h)
    return jac


class LinkageSolver:
    """Vectorized posture solver for a batch of genomes sharing one config.

    State vector per genome: (Bx, By, psi1, psi2, s).  Planar points are
    carried as complex numbers internally (rotation by 90 degrees is a
    multiply by 1j; the dot product of v with a unit direction w is
    Re(v * conj(w))).
    """

    def __init__(self, config: MechanismConfig, lengths: np.ndarray):
        lengths = np.atleast_2d(np.asarray(lengths, dtype=float))
        if lengths.shape[1] != 9:
            raise ValueError("expected 9 link lengths per genome")
        self.config = config
        self.lengths = lengths
        self.bc = lengths[:, 0]
        self.cd = lengths[:, 1]
        self.de = lengths[:, 2]
        self.ef = lengths[:, 3]
        self.fg = lengths[:, 4]
        self.gh = lengths[:, 5]
        self.bk = lengths[:, 6]
        self.ci = lengths[:, 7]
        self.ej = lengths[:, 8]
        self.n = lengths.shape[0]
        self.kz = complex(*config.k_point)
        self.oz = complex(*config.o_point)
        self.hz = complex(*config.h_point)

    def _frames(self, theta_mcp, theta_pip):
        """Unit direction / normal of each phalanx and the PIP point, as
        scalar complex numbers (the finger flexes downward)."""
        t1 = -float(theta_mcp)
        t2 = t1 - float(theta_pip)
        u1 = complex(math.cos(t1), math.sin(t1))
        u2 = complex(math.cos(t2), math.sin(t2))
        return u1, u2, 1j * u1, 1j * u2, self.config.proximal_length * u1

    def _geometry(self, x, rows=slice(None)):
        b = x[:, 0] + 1j * x[:, 1]
        e1 = np.exp(1j * x[:, 2])
        e2 = np.exp(1j * x[:, 3])
        c = b + self.bc[rows] * e1
        d = c + self.cd[rows] * e1
        i_pt = c - 1j * self.ci[rows] * e1
        e_pt = d + self.de[rows] * e2
        f = e_pt + self.ef[rows] * e2
        j = e_pt - 1j * self.ej[rows] * e2
        g = f + 1j * self.config.g_arm_side * self.fg[rows] * e2
        a = self.oz + x[:, 4]
        return b, e1, e2, c, d, i_pt, e_pt, f, j, g, a

    def residuals(self, x, frames, rows=slice(None)):
        u1, u2, n1, n2, pip_z = frames
        b, e1, e2, c, d, i_pt, e_pt, f, j, g, a = self._geometry(x, rows)
        res = np.empty((x.shape[0], 5))
        res[:, 0] = np.abs(b - self.kz) - self.bk[rows]
        res[:, 1] = (i_pt * np.conj(n1)).real
        res[:, 2] = ((j - pip_z) * np.conj(n2)).real
        res[:, 3] = np.abs(g - self.hz) - self.gh[rows]
        res[:, 4] = np.abs(a - b) - self.config.ab
        return res

    def jacobian(self, x, frames, rows=slice(None)):
        u1, u2, n1, n2, pip_z = frames
        b, e1, e2, c, d, i_pt, e_pt, f, j, g, a = self._geometry(x, rows)
        bc, cd, de, ef = self.bc[rows], self.cd[rows], self.de[rows], self.ef[rows]
        jac = np.zeros((x.shape[0], 5, 5))

        bk_vec = b - self.kz
        bk_hat = bk_vec / np.maximum(np.abs(bk_vec), 1e-12)
        jac[:, 0, 0] = bk_hat.real
        jac[:, 0, 1] = bk_hat.imag

        # d(I)/dpsi1 = bc*rot90(e1) + ci*e1
        di_dpsi1 = (1j * bc + self.ci[rows]) * e1
        jac[:, 1, 0] = n1.real
        jac[:, 1, 1] = n1.imag
        jac[:, 1, 2] = (di_dpsi1 * np.conj(n1)).real

        dj_dpsi1 = 1j * (bc + cd) * e1
        dj_dpsi2 = (1j * de + self.ej[rows]) * e2
        jac[:, 2, 0] = n2.real
        jac[:, 2, 1] = n2.imag
        jac[:, 2, 2] = (dj_dpsi1 * np.conj(n2)).real
        jac[:, 2, 3] = (dj_dpsi2 * np.conj(n2)).real

        gh_vec = g - self.hz
        gh_hat = gh_vec / np.maximum(np.abs(gh_vec), 1e-12)
        # d(rot90(e2))/dpsi2 = -e2
        dg_dpsi2 = (1j * (de + ef) - self.config.g_arm_side * self.fg[rows]) * e2
        jac[:, 3, 0] = gh_hat.real
        jac[:, 3, 1] = gh_hat.imag
        jac[:, 3, 2] = (dj_dpsi1 * np.conj(gh_hat)).real
        jac[:, 3, 3] = (dg_dpsi2 * np.conj(gh_hat)).real

        ab_vec = a - b
        ab_hat = ab_vec / np.maximum(np.abs(ab_vec), 1e-12)
        jac[:, 4, 0] = -ab_hat.real
        jac[:, 4, 1] = -ab_hat.imag
        jac[:, 4, 4] = ab_hat.real
        return jac

    def initial_guess(self, theta_mcp, theta_pip, deltas=None):
        """Constructive cold-start guess by scanning the body-1 tilt offset.

        For a trial tilt delta of body 1 relative to the proximal phalanx,
        four of the five closure residuals have closed-form roots (B from the
        slider line intersected with the bk circle, psi2 from the middle
        slider, s from the actuator circle); the scan keeps, per genome, the
        delta minimizing the remaining tether residual.  Returns (guess,
        valid) where invalid rows found no real root at any delta.
        """
        if deltas is None:
            deltas = np.linspace(-0.9, 0.9, 19)
        t1 = float(theta_mcp)
        u1, u2, n1, n2, pip_z = self._frames(theta_mcp, theta_pip)
        dot = lambda v, w: (v * np.conj(w)).real
        best = np.zeros((self.n, 5))
        best_r4 = np.full(self.n, np.inf)
        for delta in deltas:
            psi1 = -t1 + delta
            e1 = complex(math.cos(psi1), math.sin(psi1))
            r1 = 1j * e1
            # slider 1: (B + bc e1 - ci r1) . n1 = 0  ->  B . n1 = line_offset
            line_offset = self.ci * dot(r1, n1) - self.bc * dot(e1, n1)
            dk = dot(self.kz, n1) - line_offset
            ok_b = np.abs(dk) <= self.bk
            alpha = dot(self.kz, u1) - np.sqrt(np.maximum(self.bk**2 - dk**2, 0.0))
            b = alpha * u1 + line_offset * n1
            d = b + (self.bc + self.cd) * e1
            # slider 2: de sin(gamma) - ej cos(gamma) = -(D - P) . n2
            radius = np.hypot(self.de, self.ej)
            rhs = -dot(d - pip_z, n2)
            ok_j = np.abs(rhs) <= radius
            phi = np.arctan2(self.ej, self.de)
            asn = np.arcsin(np.clip(rhs / radius, -1.0, 1.0))
            g1 = asn + phi
            g2 = math.pi - asn + phi
            gamma = np.where(np.cos(g1) > 0, g1, g2)  # forward branch (c2 > 0)
            psi2 = -(t1 + float(theta_pip)) + gamma
            e2 = np.exp(1j * psi2)
            f = d + (self.de + self.ef) * e2
            g_pt = f + 1j * self.config.g_arm_side * self.fg * e2
            r4 = np.abs(np.abs(g_pt - self.hz) - self.gh)
            r4 = np.where(ok_b & ok_j, r4, np.inf)
            update = r4 < best_r4
            if np.any(update):
                dy = b.imag - self.oz.imag
                s = b.real - self.oz.real - np.sqrt(
                    np.maximum(self.config.ab**2 - dy**2, 1.0))
                cand = np.column_stack([b.real, b.imag, np.full(self.n, psi1), psi2, s])
                best[update] = cand[update]
                best_r4[update] = r4[update]
        return best, np.isfinite(best_r4)

    def solve(self, theta_mcp, theta_pip, guess, active=None):
        """Solve the closure residuals for every (active) genome at one posture."""
        frames = self._frames(theta_mcp, theta_pip)
        return damped_newton(
            guess,
            lambda xx, rows: self.residuals(xx, frames, rows),
            lambda xx, rows: self.jacobian(xx, frames, rows),
            tol=self.config.solver_tol,
            max_iter=self.config.solver_max_iter,
            active=active,
        )

    def solve_with_retries(self, theta_mcp, theta_pip, active=None):
        """Cold-start solve, retrying denser tilt-scan grids per unconverged genome."""
        if active is None:
            active = np.ones(self.n, dtype=bool)
        guess, valid = self.initial_guess(theta_mcp, theta_pip)
        x, ok = self.solve(theta_mcp, theta_pip, guess, active=active & valid)
        converged = active & valid & ok
        todo = active & ~converged
        if np.any(todo):
            # denser tilt scans for the holdouts only, on a subset solver
            rows = np.nonzero(todo)[0]
            sub = LinkageSolver(self.config, self.lengths[rows])
            for deltas in (np.linspace(-1.3, 1.3, 53), np.linspace(-0.3, 0.3, 61)):
                g2, v2 = sub.initial_guess(theta_mcp, theta_pip, deltas)
                x2, ok2 = sub.solve(theta_mcp, theta_pip, g2, active=v2)
                hit = v2 & ok2
                if np.any(hit):
                    x[rows[hit]] = x2[hit]
                    converged[rows[hit]] = True
                rows = rows[~hit]
                if rows.size == 0:
                    break
                sub = LinkageSolver(self.config, self.lengths[rows])
        return x, converged

    def actuator_sensitivities(self, x, theta_mcp, theta_pip, active=None):
        """d|OA|/d(theta_mcp) and d|OA|/d(theta_pip) at a solved posture.

        Implicit differentiation of the closure residuals: dx/dtheta_j =
        -J^-1 dr/dtheta_j, using the same Jacobian as the Newton iteration.
        Only the slider rows r2, r3 depend on the joint angles; their partial
        derivatives reduce to the slider travels themselves.  Returns
        (ds_dmcp, ds_dpip, ok) in mm per radian.
        """
        t1, t2 = float(theta_mcp), float(theta_pip)
        c1, c2, _ = self.outputs(x, t1, t2)
        jac = self.jacobian(x, self._frames(t1, t2))
        rhs = np.zeros((self.n, 5, 2))
        rhs[:, 1, 0] = c1
        rhs[:, 2, 0] = c2 + self.config.proximal_length * math.cos(t2)
        rhs[:, 2, 1] = c2
        if active is None:
            active = np.ones(self.n, dtype=bool)
        ds_dmcp = np.full(self.n, np.nan)
        ds_dpip = np.full(self.n, np.nan)
        ok = np.zeros(self.n, dtype=bool)
        dets = np.zeros(self.n)
        dets[active] = np.abs(np.linalg.det(jac[active]))
        good = active & (dets > 1e-14)
        if np.any(good):
            sens = np.linalg.solve(jac[good], -rhs[good])
            ds_dmcp[good] = sens[:, 4, 0]
            ds_dpip[good] = sens[:, 4, 1]
            ok[good] = True
        return ds_dmcp, ds_dpip, ok

    def outputs(self, x, theta_mcp, theta_pip):
        """Slider travels and actuator length for a solved state."""
        u1, u2, n1, n2, pip_z = self._frames(theta_mcp, theta_pip)
        b, e1, e2, c, d, i_pt, e_pt, f, j, g, a = self._geometry(x)
        c1 = (i_pt * np.conj(u1)).real
        c2 = ((j - pip_z) * np.conj(u2)).real
        return c1, c2, x[:, 4]

    def point_map(self, x, theta_mcp, theta_pip) -> dict:
        u1, u2, n1, n2, pip_z = self._frames(theta_mcp, theta_pip)
        b, e1, e2, c, d, i_pt, e_pt, f, j, g, a = self._geometry(x)

        def xy(z):
            z = np.broadcast_to(np.asarray(z, dtype=complex), (self.n,))
            return np.stack([z.real, z.imag], axis=-1)

        return {
            "O": xy(self.oz), "K": xy(self.kz), "H": xy(self.hz),
            "G": xy(g),
            "A": xy(a), "B": xy(b), "C": xy(c), "D": xy(d), "E": xy(e_pt),
            "F": xy(f), "I": xy(i_pt), "J": xy(j),
            "MCP": np.zeros((self.n, 2)),
            "PIP": xy(pip_z),
        }


def solve_posture(config: MechanismConfig, lengths, theta_mcp: float, theta_pip: float,
                  guess: PostureSolution | None = None) -> PostureSolution:
    """Solve a single posture; raises NonConvergent / BranchFlip on failure."""
    solver = LinkageSolver(config, np.atleast_2d(lengths))
    if guess is None:
        x, ok = solver.solve_with_retries(theta_mcp, theta_pip)
    else:
        x0 = np.array([[guess.points["B"][0], guess.points["B"][1],
                        guess.points["psi1"], guess.points["psi2"],
                        guess.actuator_length]])
        x, ok = solver.solve(theta_mcp, theta_pip, x0)
        if ok[0]:
            jump = float(np.linalg.norm(x[0, 0:2] - x0[0, 0:2]))
            if jump > config.continuity_threshold:
                raise BranchFlip(f"posture jumped {jump:.1f} mm from the warm start")
    if not ok[0]:
        raise NonConvergent("loop closure did not converge")
    res = solver.residuals(x, solver._frames(theta_mcp, theta_pip))
    c1, c2, s = solver.outputs(x, theta_mcp, theta_pip)
    pts = {name: arr[0].copy() for name, arr in solver.point_map(x, theta_mcp, theta_pip).items()}
    pts["psi1"] = float(x[0, 2])
    pts["psi2"] = float(x[0, 3])
    return PostureSolution(
        points=pts,
        c1=float(c1[0]),
        c2=float(c2[0]),
        actuator_length=float(s[0]),
        residual_norm=float(np.max(np.abs(res[0]))),
    )


# Finite-difference step for virtual-work torques (rad).
TORQUE_FD_STEP = 1e-5
ACTUATOR_FORCE_N = 1.0


class SweepFailure:
    """Per-genome failure record from a batched sweep."""

    def __init__(self, n):
        self.failed = np.zeros(n, dtype=bool)
        self.fail_step = np.full(n, -1, dtype=int)

    def mark(self, mask, step):
        newly = mask & ~self.failed
        self.failed |= newly
        self.fail_step[newly] = step


def sweep_transmission_batch(config: MechanismConfig, lengths: np.ndarray,
                             sweep: SweepSpec | None = None):
    """Sweep all genomes through the finger-closing motion.

    Returns (results, failures): per-genome TransmissionResult values (entries
    for failed genomes hold NaNs) and the SweepFailure record.
    """
    sweep = sweep or SweepSpec()
    lengths = np.atleast_2d(np.asarray(lengths, dtype=float))
    solver = LinkageSolver(config, lengths)
    n = solver.n
    mcp, pip = sweep.angles()
    steps = sweep.steps
    fail = SweepFailure(n)

    s_main = np.full((steps, n), np.nan)
    c1_main = np.full((steps, n), np.nan)
    c2_main = np.full((steps, n), np.nan)
    tau_mcp = np.full((steps, n), np.nan)
    tau_pip = np.full((steps, n), np.nan)

    x = None
    for i in range(steps):
        alive = ~fail.failed
        if not np.any(alive):
            break
        if x is None:
            x, ok = solver.solve_with_retries(mcp[i], pip[i], active=alive)
            fail.mark(alive & ~ok, i)
        else:
            prev = x.copy()
            x, ok = solver.solve(mcp[i], pip[i], x, active=alive)
            jump = np.linalg.norm(x[:, 0:2] - prev[:, 0:2], axis=1)
            flipped = alive & ok & (jump > config.continuity_threshold)
            fail.mark(alive & (~ok | flipped), i)
        alive = ~fail.failed
        c1, c2, s = solver.outputs(x, mcp[i], pip[i])
        s_main[i, alive] = s[alive]
        c1_main[i, alive] = c1[alive]
        c2_main[i, alive] = c2[alive]

        # virtual work: tau_j = F * d|OA| / d theta_j
        dmcp, dpip, ok = solver.actuator_sensitivities(x, mcp[i], pip[i], active=alive)
        fail.mark(alive & ~ok, i)
        alive = ~fail.failed
        tau_mcp[i, alive] = ACTUATOR_FORCE_N * dmcp[alive]  # N*mm
        tau_pip[i, alive] = ACTUATOR_FORCE_N * dpip[alive]

    results = []
    for g in range(n):
        if fail.failed[g]:
            results.append(TransmissionResult(
                tau_mcp_steps=tau_mcp[:, g], tau_pip_steps=tau_pip[:, g],
                tau_mcp=math.nan, tau_pip=math.nan, lx=math.nan,
                c1_min=math.nan, c1_max=math.nan, c2_min=math.nan, c2_max=math.nan))
        else:
            results.append(TransmissionResult(
                tau_mcp_steps=tau_mcp[:, g],
                tau_pip_steps=tau_pip[:, g],
                tau_mcp=float(np.mean(np.abs(tau_mcp[:, g]))),
                tau_pip=float(np.mean(np.abs(tau_pip[:, g]))),
                lx=float(np.max(s_main[:, g]) - np.min(s_main[:, g])),
                c1_min=float(np.min(c1_main[:, g])),
                c1_max=float(np.max(c1_main[:, g])),
                c2_min=float(np.min(c2_main[:, g])),
                c2_max=float(np.max(c2_main[:, g])),
            ))
    return results, fail


def sweep_transmission(config: MechanismConfig, lengths,
                       sweep: SweepSpec | None = None) -> TransmissionResult:
    """Single-genome sweep; raises NonConvergent annotated with the failing step."""
    results, fail = sweep_transmission_batch(config, np.atleast_2d(lengths), sweep)
    if fail.failed[0]:
        raise NonConvergent(f"sweep failed at step {fail.fail_step[0]}")
    return results[0]


# --- the optimization problems -------------------------------------------------

RATIO_CAP = 1.0e6  # stands in for an unbounded torque ratio when tau_pip ~ 0


def _torque_ratio(tau_mcp: float, tau_pip: float) -> float:
    if tau_pip <= 0.0:
        return RATIO_CAP
    return min(tau_mcp / tau_pip, RATIO_CAP)


def torque_balance_distance(tau_mcp: float, tau_pip: float) -> float:
    """Distance of the torque ratio from 1, symmetric in the two torques."""
    if tau_mcp <= 0.0 or tau_pip <= 0.0:
        return RATIO_CAP
    if tau_mcp >= tau_pip:
        return abs(tau_mcp / tau_pip - 1.0)
    return abs(tau_pip / tau_mcp - 1.0)


class UhexProblem:
    """Exoskeleton linkage design problem over link lengths.

    mode: "soop" (maximize force transmission, torque-ratio constraints),
    "soop_con7" (soop plus the actuator-excursion cap Lx <= 50), or
    "moop" (adds torque-balance and actuator-excursion objectives and drops
    the corresponding constraints).  link_count 6 holds BK/CI/EJ at the
    midpoint of their design ranges.
    """

    SLIDER_1_MAX = 35.0
    SLIDER_2_MAX = 45.0
    RATIO_MIN = 1.0 / 15.0
    RATIO_MAX = 15.0
    LX_MAX = 50.0

    def __init__(self, mode: str = "soop", link_count: int = 9,
                 config: MechanismConfig | None = None, sweep: SweepSpec | None = None):
        if mode not in ("soop", "soop_con7", "moop"):
            raise ValueError(f"unknown mode: {mode}")
        if link_count not in (6, 9):
            raise ValueError("link_count must be 6 or 9")
        self.mode = mode
        self.link_count = link_count
        self.config = config or MechanismConfig()
        self.sweep = sweep or SweepSpec()
        if link_count == 9:
            self.bounds = Bounds(LOWER_BOUNDS, UPPER_BOUNDS)
        else:
            self.bounds = Bounds(LOWER_BOUNDS[:6], UPPER_BOUNDS[:6])
        if mode == "moop":
            self.objective_spec = ObjectiveSpec(("max", "min", "min"))
        else:
            self.objective_spec = ObjectiveSpec(("max",))
        self.constraint_names = ["c1_low", "c1_high", "c2_low", "c2_high"]
        scales = [self.SLIDER_1_MAX, self.SLIDER_1_MAX, self.SLIDER_2_MAX, self.SLIDER_2_MAX]
        if mode in ("soop", "soop_con7"):
            self.constraint_names += ["ratio_low", "ratio_high"]
            scales += [self.RATIO_MAX, self.RATIO_MAX]
        if mode == "soop_con7":
            self.constraint_names += ["lx_high"]
            scales += [self.LX_MAX]
        self.constraint_names += ["solver"]
        scales += [SOLVER_FAILURE_VIOLATION]
        self.violation_scales = np.array(scales)

    def full_lengths(self, genomes: np.ndarray) -> np.ndarray:
        genomes = np.atleast_2d(np.asarray(genomes, dtype=float))
        if self.link_count == 9:
            return genomes
        fixed = np.array([FIXED_SIX_VARIABLE_LINKS[k] for k in ("BK", "CI", "EJ")])
        return np.hstack([genomes, np.tile(fixed, (genomes.shape[0], 1))])

    def evaluate(self, genome) -> Evaluation:
        return self.evaluate_batch(np.atleast_2d(genome))[0]

    def evaluate_batch(self, genomes: np.ndarray) -> list:
        results, fail = sweep_transmission_batch(
            self.config, self.full_lengths(genomes), self.sweep)
        return [self._to_evaluation(r, bool(f)) for r, f in zip(results, fail.failed)]

    def _to_evaluation(self, tr: TransmissionResult, failed: bool) -> Evaluation:
        ncon = len(self.constraint_names)
        if failed:
            violations = np.zeros(ncon)
            violations[-1] = SOLVER_FAILURE_VIOLATION
            nobj = self.objective_spec.count
            return Evaluation(
                objectives=np.full(nobj, 1.0e6),
                violations=violations,
                aux={"failed": True},
            )

        violations = [
            max(0.0, -tr.c1_min),
            max(0.0, tr.c1_max - self.SLIDER_1_MAX),
            max(0.0, -tr.c2_min),
            max(0.0, tr.c2_max - self.SLIDER_2_MAX),
        ]
        ratio = _torque_ratio(tr.tau_mcp, tr.tau_pip)
        if self.mode in ("soop", "soop_con7"):
            violations.append(max(0.0, self.RATIO_MIN - ratio))
            violations.append(max(0.0, ratio - self.RATIO_MAX))
        if self.mode == "soop_con7":
            violations.append(max(0.0, tr.lx - self.LX_MAX))
        violations.append(0.0)  # solver slot

        force_transmission = math.sqrt(max(tr.tau_mcp + tr.tau_pip, 0.0))
        aux = {
            "tau_mcp": tr.tau_mcp,
            "tau_pip": tr.tau_pip,
            "Lx": tr.lx,
            "c1_min": tr.c1_min,
            "c1_max": tr.c1_max,
            "c2_min": tr.c2_min,
            "c2_max": tr.c2_max,
        }
        if self.mode == "moop":
            reported = np.array([
                force_transmission,
                torque_balance_distance(tr.tau_mcp, tr.tau_pip),
                tr.lx,
            ])
        else:
            reported = np.array([force_transmission])
        return Evaluation(
            objectives=self.objective_spec.to_canonical(reported),
            violations=np.array(violations),
            aux=aux,
        )


def brute_force_grid(problem, resolution: int, chunk: int = 4096) -> Individual:
    """Exhaustive evaluation over a uniform grid (endpoints included).

    resolution = points per axis; resolution 1 evaluates the box midpoint.
    Returns the Deb-best individual.
    """
    from .ea import _deb_key

    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    bounds = problem.bounds
    if resolution == 1:
        axes = [np.array([(lo + hi) / 2.0]) for lo, hi in zip(bounds.lower, bounds.upper)]
    else:
        axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(bounds.lower, bounds.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    scales = getattr(problem, "violation_scales", None)
    key = _deb_key(scales)
    best = None
    for start in range(0, grid.shape[0], chunk):
        block = grid[start:start + chunk]
        for genome, ev in zip(block, problem.evaluate_batch(block)):
            ind = Individual(genome=genome.copy(), evaluation=ev)
            if best is None or key(ind) < key(best):
                best = ind
    return best
