"""Quantitative checks of the discrete gradient, inf-sup, Poisson and spectral properties."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from . import spaces
from .assembly import assemble, inverse_velocity_mass
from .elements import MAX_QUADRATURE_DEGREE, quadrature
from .mesh import generate_square_mesh
from .model import MidpointSolver, ModelParams, State, random_balanced_state

DENSE_LIMIT_H = 2000
DENSE_LIMIT_TOTAL = 4000


def _l2_error(mesh, diff_at, rule):
    """sqrt of the integral of |diff|^2 where diff_at gives (ntri, nq[, 2]) values."""
    _, det, _ = mesh.jacobians()
    d = diff_at(rule.points)
    sq = d**2 if d.ndim == 2 else np.sum(d**2, axis=-1)
    return math.sqrt(float(np.einsum("q,e,eq->", rule.weights, np.abs(det), sq)))


def discrete_gradient(pair, eta, ops=None):
    """q in V with M_u q = G eta."""
    ops = assemble(pair) if ops is None else ops
    return spla.spsolve(ops.Mu.matrix.tocsc(), ops.G @ eta)


def gradient_norm(pair, eta):
    rule = quadrature(2 * max(pair.H.degree - 1, 1))
    return _l2_error(pair.mesh, lambda q: spaces.element_gradients(pair.H, eta, q), rule)


def pointwise_gradient_error(pair, eta, ops=None):
    """L2 distance between the discrete gradient and the true elementwise gradient."""
    q = discrete_gradient(pair, eta, ops)
    deg = 2 * max(pair.V.degree, pair.H.degree - 1, 1)
    rule = quadrature(min(deg, MAX_QUADRATURE_DEGREE))

    def diff(pts):
        return spaces.element_values(pair.V, q, pts) - spaces.element_gradients(pair.H, eta, pts)

    return _l2_error(pair.mesh, diff, rule)


def _deflated_min_eig(A, M):
    """Smallest eigenvalue of (A, M) on the M-orthogonal complement of constants."""
    c = M @ np.ones(M.shape[0])
    Z = sla.null_space(c[None, :])
    w = sla.eigh(Z.T @ A @ Z, Z.T @ M @ Z, eigvals_only=True, subset_by_index=[0, 0])
    return float(w[0])


def _check_dense(pair):
    if pair.H.ndof > DENSE_LIMIT_H:
        raise ValueError(f"H has {pair.H.ndof} DOFs; dense eigensolve limited to {DENSE_LIMIT_H}")


def schur_matrix(pair, ops=None):
    """Dense G^T M_u^{-1} G."""
    ops = assemble(pair) if ops is None else ops
    Minv = inverse_velocity_mass(pair, ops.Mu)
    return (ops.G.T @ (Minv @ ops.G.matrix)).toarray()


def laplacian_min_eig(pair, ops=None):
    """Smallest nonzero generalised eigenvalue of (K, M_eta)."""
    _check_dense(pair)
    ops = assemble(pair) if ops is None else ops
    return _deflated_min_eig(ops.K.toarray(), ops.Meta.toarray())


def infsup_constant(pair, ops=None):
    """Discrete inf-sup constant over mean-zero pressure fields.

    The supremum over V is attained at w = M_u^{-1} G phi, so beta^2 is the
    smallest eigenvalue of (G^T M_u^{-1} G, M_eta) with constants deflated.
    """
    _check_dense(pair)
    ops = assemble(pair) if ops is None else ops
    lam = _deflated_min_eig(schur_matrix(pair, ops), ops.Meta.toarray())
    return math.sqrt(max(lam, 0.0))


def poisson_sparsity_check(pair, ops=None):
    """Max-norm of G^T M_u^{-1} G - K (absolute)."""
    ops = assemble(pair) if ops is None else ops
    Minv = inverse_velocity_mass(pair, ops.Mu)
    D = (ops.G.T @ (Minv @ ops.G.matrix)) - ops.K.matrix
    return float(abs(D).max()) if D.nnz else 0.0


@dataclass
class InfSupReport:
    pair: str
    h: list = field(default_factory=list)
    n: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    lambda_min: list = field(default_factory=list)
    embeds_gradient: bool = True

    @property
    def beta_ratio(self):
        return max(self.beta) / min(self.beta)

    def bound_holds(self, tol=1e-10):
        return all(b >= math.sqrt(lam) - tol for b, lam in zip(self.beta, self.lambda_min))

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "n", "h", "beta_h", "lambda_min_h", "sqrt_lambda_min_h"])
        for n, h, b, lam in zip(self.n, self.h, self.beta, self.lambda_min):
            w.writerow([self.pair, n, repr(h), repr(b), repr(lam), repr(math.sqrt(lam))])


def infsup_sweep(pair_name, ns=(4, 8, 16), perturb=0.0, seed=0):
    rep = InfSupReport(pair_name)
    for n in ns:
        pair = spaces.make_pair(pair_name, generate_square_mesh(n, perturb, seed))
        ops = assemble(pair)
        rep.embeds_gradient = pair.embeds_gradient
        rep.n.append(n)
        rep.h.append(pair.mesh.h)
        rep.beta.append(infsup_constant(pair, ops))
        rep.lambda_min.append(laplacian_min_eig(pair, ops))
    return rep


@dataclass
class SpectrumReport:
    omega: np.ndarray  # sorted imaginary parts
    max_real: float
    zero_modes: int
    balanced_residual: float  # max ||B x|| / ||B||_2 over the sampled balanced states
    operator_norm: float

    @property
    def max_abs_omega(self):
        return float(np.max(np.abs(self.omega)))

    def smallest_nonzero(self):
        a = np.abs(self.omega)
        nz = a[a >= 1e-10 * a.max()]
        return float(nz.min()) if len(nz) else 0.0

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "omega"])
        for i, om in enumerate(self.omega):
            w.writerow([i, repr(float(om))])


def spectrum_matrices(pair, params, ops=None):
    """Block operator B and energy matrix M with B skew: B x = mu M x.

    The continuity row is scaled by g/Dbar so that B is skew-symmetric.
    """
    ops = assemble(pair) if ops is None else ops
    f, g, D = params.f, params.g, params.Dbar
    C, G = ops.C.toarray(), ops.G.toarray()
    nu, nh = G.shape
    B = np.zeros((nu + nh, nu + nh))
    B[:nu, :nu] = -f * C
    B[:nu, nu:] = -g * G
    B[nu:, :nu] = g * G.T
    M = np.zeros_like(B)
    M[:nu, :nu] = ops.Mu.toarray()
    M[nu:, nu:] = (g / D) * ops.Meta.toarray()
    return B, M


def compute_spectrum(pair, params, n_balanced=5, seed=0, ops=None):
    ops = assemble(pair) if ops is None else ops
    if pair.V.ndof + pair.H.ndof > DENSE_LIMIT_TOTAL:
        raise ValueError("system too large for a dense eigensolve")
    B, M = spectrum_matrices(pair, params, ops)
    L = np.linalg.cholesky(M)
    S = sla.solve_triangular(L, sla.solve_triangular(L, B.T, lower=True).T, lower=True)
    mu = sla.eigvals(S)
    absmax = float(np.max(np.abs(mu)))
    omega = np.sort(mu.imag)
    zero = int(np.sum(np.abs(mu) < 1e-10 * absmax))
    bnorm = float(np.linalg.norm(B, 2))
    resid = 0.0
    if pair.is_embedding and params.f > 0:
        for k in range(n_balanced):
            st = random_balanced_state(pair, params, seed + k)
            x = np.concatenate([st.u, st.eta])
            resid = max(resid, float(np.linalg.norm(B @ x)) / (bnorm * np.linalg.norm(x)))
    return SpectrumReport(omega, float(np.max(np.abs(mu.real))) / absmax, zero, resid, bnorm)


@dataclass
class ConvergenceReport:
    pair: str
    n: list = field(default_factory=list)
    h: list = field(default_factory=list)
    err_u: list = field(default_factory=list)
    err_eta: list = field(default_factory=list)
    init_err_eta: list = field(default_factory=list)
    nsteps: list = field(default_factory=list)

    @staticmethod
    def _slope(h, e):
        return float(np.polyfit(np.log(h), np.log(e), 1)[0])

    @property
    def order_eta(self):
        return self._slope(self.h, self.err_eta)

    @property
    def order_u(self):
        return self._slope(self.h, self.err_u)

    @property
    def order_init_eta(self):
        return self._slope(self.h, self.init_err_eta)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "n", "h", "nsteps", "err_u", "err_eta", "init_err_eta"])
        for row in zip(self.n, self.h, self.nsteps, self.err_u, self.err_eta, self.init_err_eta):
            w.writerow([self.pair, row[0], repr(row[1]), row[2]] + [repr(v) for v in row[3:]])


class StandingWave:
    """Closed-basin mode of the non-rotating equations on the unit square."""

    def __init__(self, g=1.0, Dbar=1.0):
        self.g, self.Dbar = g, Dbar
        self.omega = math.pi * math.sqrt(2.0 * g * Dbar)

    def eta(self, x, y, t):
        return np.cos(np.pi * x) * np.cos(np.pi * y) * np.cos(self.omega * t)

    def u(self, x, y, t):
        a = self.g * np.pi / self.omega * np.sin(self.omega * t)
        return a * np.sin(np.pi * x) * np.cos(np.pi * y), a * np.cos(np.pi * x) * np.sin(np.pi * y)

    def initial_state(self, pair):
        eta = spaces.interpolate_scalar(pair.H, lambda x, y: self.eta(x, y, 0.0))
        u = spaces.interpolate_vector(pair.V, lambda x, y: self.u(x, y, 0.0))
        return State(u, eta)

    def errors(self, pair, state, t):
        mesh = pair.mesh
        rule = quadrature(MAX_QUADRATURE_DEGREE)

        def d_eta(pts):
            xy = mesh.map_points(pts)
            return spaces.element_values(pair.H, state.eta, pts) - self.eta(xy[..., 0], xy[..., 1], t)

        def d_u(pts):
            xy = mesh.map_points(pts)
            ux, uy = self.u(xy[..., 0], xy[..., 1], t)
            return spaces.element_values(pair.V, state.u, pts) - np.stack([ux, uy], axis=-1)

        return _l2_error(mesh, d_u, rule), _l2_error(mesh, d_eta, rule)


def convergence_study(pair_name, ns=(4, 8, 16), T=0.5, g=1.0, Dbar=1.0, perturb=0.0, seed=0, dt_factor=0.1):
    """Standing-wave study with f = 0; dt = dt_factor * h**2, adjusted to hit T."""
    wave = StandingWave(g, Dbar)
    rep = ConvergenceReport(pair_name)
    for n in ns:
        mesh = generate_square_mesh(n, perturb, seed)
        pair = spaces.make_pair(pair_name, mesh)
        h = mesh.h
        nsteps = max(1, math.ceil(T / (dt_factor * h * h)))
        params = ModelParams(f=0.0, g=g, Dbar=Dbar, dt=T / nsteps, nsteps=nsteps)
        state = wave.initial_state(pair)
        _, e0 = wave.errors(pair, state, 0.0)
        solver = MidpointSolver(pair, params)
        u, eta = state.u, state.eta
        for _ in range(nsteps):
            u, eta = solver.advance(u, eta)
        eu, ee = wave.errors(pair, State(u, eta, T), T)
        rep.n.append(n)
        rep.h.append(h)
        rep.nsteps.append(nsteps)
        rep.err_u.append(eu)
        rep.err_eta.append(ee)
        rep.init_err_eta.append(e0)
    return rep
