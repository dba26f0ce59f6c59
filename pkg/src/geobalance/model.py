"""Linear rotating shallow-water model: balance initialisation and time stepping.

Semi-discrete system, with M_u, M_eta, G, C from :mod:`geobalance.assembly`::

    M_u du/dt + f C u = -g G eta
    M_eta deta/dt     = Dbar G^T u
"""
import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import spaces
from .assembly import assemble

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    f: float
    g: float
    Dbar: float = 1.0
    dt: float = 0.01
    nsteps: int = 1000

    def __post_init__(self):
        if self.f < 0:
            raise ValueError("f must be >= 0")
        if self.g <= 0 or self.Dbar <= 0:
            raise ValueError("g and Dbar must be positive")
        if self.dt == 0:
            raise ValueError("dt must be nonzero")
        if self.nsteps < 0:
            raise ValueError("nsteps must be >= 0")


def params_from_ro_fr(Ro, Fr, dt=0.01, nsteps=1000):
    """Unit length and velocity scales: f = 1/Ro, g = 1/Fr**2, Dbar = 1."""
    if Ro <= 0 or Fr <= 0:
        raise ValueError("Ro and Fr must be positive")
    return ModelParams(f=1.0 / Ro, g=1.0 / Fr**2, Dbar=1.0, dt=dt, nsteps=nsteps)


@dataclass
class State:
    u: np.ndarray
    eta: np.ndarray
    time: float = 0.0

    def copy(self):
        return State(self.u.copy(), self.eta.copy(), self.time)


def zero_state(pair):
    return State(np.zeros(pair.V.ndof), np.zeros(pair.H.ndof))


def balanced_velocity(pair, eta, params):
    """Pointwise u = (g/f) grad-perp(eta), interpolated into V."""
    if not pair.is_embedding:
        raise ValueError(f"pair {pair.name} does not satisfy both embedding conditions")
    if params.f <= 0:
        raise ValueError("balanced states need f > 0")
    grad = spaces.gradient_into(pair, eta)
    return (params.g / params.f) * spaces.perp(grad)


def random_boundary_zero_eta(pair, seed):
    rng = np.random.default_rng(seed)
    eta = rng.uniform(-1.0, 1.0, pair.H.ndof)
    eta[pair.H.boundary_dofs] = 0.0
    return eta


def random_balanced_state(pair, params, seed, eta=None):
    """Random geostrophically balanced state with eta = 0 on the boundary.

    ``eta`` may be passed to balance a given field instead of a random one.
    """
    if eta is None:
        eta = random_boundary_zero_eta(pair, seed)
    eta = np.asarray(eta, dtype=float)
    return State(balanced_velocity(pair, eta, params), eta.copy())


def project_balanced(pair, eta, params, ops=None):
    """Solve f C u = -g G eta for u (discrete balance in the M_u sense)."""
    if params.f == 0:
        raise SolverError("discrete balance is singular for f = 0")
    ops = assemble(pair) if ops is None else ops
    return spla.spsolve((params.f * ops.C.matrix).tocsc(), -params.g * (ops.G @ eta))


def balance_residual(ops, params, state):
    return params.f * (ops.C @ state.u) + params.g * (ops.G @ state.eta)


def energy(ops, params, state):
    return 0.5 * state.u @ (ops.Mu @ state.u) + 0.5 * params.g / params.Dbar * state.eta @ (ops.Meta @ state.eta)


class MidpointSolver:
    """Implicit midpoint stepper with a single factorisation per setup.

    ``method`` is ``"direct"`` (sparse LU, default) or ``"iterative"``
    (ILU-preconditioned GMRES to relative tolerance ``tol``, at most
    ``maxiter`` iterations, default 10 * ndof).
    """

    def __init__(self, pair, params, method="direct", tol=1e-12, ops=None, maxiter=None):
        if method not in ("direct", "iterative"):
            raise ValueError(f"unknown solver {method!r}")
        self.pair, self.params, self.method, self.tol = pair, params, method, tol
        self.maxiter = maxiter
        self.ops = assemble(pair) if ops is None else ops
        o, p = self.ops, params
        a = 0.5 * p.dt
        fC, gG, DGt = p.f * o.C.matrix, p.g * o.G.matrix, p.Dbar * o.G.T
        self.lhs = sp.bmat([[o.Mu.matrix + a * fC, a * gG], [-a * DGt, o.Meta.matrix]], format="csc")
        self.rhs = sp.bmat([[o.Mu.matrix - a * fC, -a * gG], [a * DGt, o.Meta.matrix]], format="csr")
        self.nu = pair.V.ndof
        if method == "direct":
            self._lu = spla.splu(self.lhs)
        else:
            self._ilu = spla.spilu(self.lhs, drop_tol=1e-5, fill_factor=20)
            self._prec = spla.LinearOperator(self.lhs.shape, self._ilu.solve)
        self.iterations = 0

    def solve(self, b):
        if self.method == "direct":
            return self._lu.solve(b)
        n = self.lhs.shape[0]
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(self.lhs, b, rtol=self.tol, atol=0.0, restart=200,
                             maxiter=self.maxiter or 10 * n,
                             M=self._prec, callback=cb, callback_type="pr_norm")
        self.iterations = count[0]
        if info != 0:
            res = np.linalg.norm(self.lhs @ x - b) / max(np.linalg.norm(b), 1e-300)
            raise SolverError(f"GMRES did not converge (info={info}, relative residual {res:.3e})")
        return x

    def advance(self, u, eta):
        x = np.concatenate([u, eta])
        y = self.solve(self.rhs @ x)
        return y[: self.nu], y[self.nu:]


def step_implicit_midpoint(pair, params, state, solver=None):
    solver = MidpointSolver(pair, params) if solver is None else solver
    u, eta = solver.advance(state.u, state.eta)
    return State(u, eta, state.time + params.dt)


def _rel_drift(x, x0):
    scale = np.max(np.abs(x0))
    d = np.max(np.abs(x - x0)) if len(x) else 0.0
    return d / scale if scale > 0 else d


@dataclass
class Diagnostics:
    step: list = field(default_factory=list)
    time: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    div_inf: list = field(default_factory=list)
    eta_drift: list = field(default_factory=list)
    u_drift: list = field(default_factory=list)

    COLUMNS = ("step", "time", "energy", "div_inf", "eta_drift", "u_drift")

    def append(self, **row):
        for k in self.COLUMNS:
            getattr(self, k).append(row[k])

    def rows(self):
        return list(zip(*(getattr(self, k) for k in self.COLUMNS)))

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    @property
    def max_eta_drift(self):
        return max(self.eta_drift, default=0.0)

    @property
    def max_u_drift(self):
        return max(self.u_drift, default=0.0)


def run(pair, params, state, sink=None, solver=None, snapshot_every=0):
    """Advance ``params.nsteps`` steps, returning (final state, diagnostics).

    ``sink(step, state)`` is called for step 0 and every ``snapshot_every``
    steps when both are given.
    """
    solver = MidpointSolver(pair, params) if solver is None else solver
    ops = solver.ops
    u0, eta0 = state.u.copy(), state.eta.copy()
    diag = Diagnostics()
    if sink is not None and snapshot_every:
        sink(0, state)
    u, eta, t = state.u, state.eta, state.time
    for n in range(1, params.nsteps + 1):
        u, eta = solver.advance(u, eta)
        t = state.time + n * params.dt
        cur = State(u, eta, t)
        diag.append(
            step=n,
            time=t,
            energy=energy(ops, params, cur),
            div_inf=float(np.max(np.abs(ops.G.T @ u))) if len(u) else 0.0,
            eta_drift=_rel_drift(eta, eta0),
            u_drift=_rel_drift(u, u0),
        )
        if sink is not None and snapshot_every and n % snapshot_every == 0:
            sink(n, cur)
    log.debug("run finished: %d steps, final eta drift %.3e", params.nsteps, diag.eta_drift[-1] if diag.step else 0)
    return State(u, eta, t), diag


def reversed_params(params):
    return replace(params, dt=-params.dt)
