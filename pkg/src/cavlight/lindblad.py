"""Liouvillian construction, steady states, and master-equation evolution.

Vectorization is column-stacking throughout: vec(rho) stacks columns
(Fortran order), so vec(A rho B) = (B^T kron A) vec(rho).  The convention is
recorded on every Superoperator so downstream code can detect mismatches.

Time-dependent models carry scalar coefficient functions on fixed operator
terms; a collapse operator may itself be a sum of such terms (needed for the
capture cascade, whose jump operator mixes two modes with time-dependent
weights).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    ConvergenceError,
    DimensionError,
    NonUniqueSteadyStateError,
    StiffnessError,
)
from .qcore import DensityMatrix, Operator

# Above this superoperator nnz estimate the evolution engine falls back to
# matrix-form products instead of materializing kron factors (memory guard).
MAX_SUPEROP_NNZ = 1.2e8


def vec(mat):
    return np.asarray(mat).flatten(order="F")


def unvec(v, dim):
    return np.asarray(v).reshape(dim, dim, order="F")


def _normalize_terms(terms, space, what):
    out = []
    if isinstance(terms, Operator):
        terms = [terms]
    for term in terms:
        if isinstance(term, Operator):
            op, fn = term, None
        else:
            op, fn = term
        if op.space.factors != space.factors:
            raise DimensionError(f"{what} term acts on a different space")
        out.append((op, fn))
    return out


class LindbladModel:
    """Hamiltonian terms + collapse operators acting on one space.

    hamiltonian: Operator, or list of Operator / (Operator, coeff_fn).
    collapse_ops: list where each entry is an Operator, an (Operator, fn)
    pair, or a list of such pairs (a sum defining one collapse operator).
    """

    def __init__(self, space, hamiltonian, collapse_ops=(), check_hermitian=True):
        self.space = space
        self.meta = {}
        self.h_terms = _normalize_terms(hamiltonian, space, "Hamiltonian")
        self.collapse_terms = []
        for entry in collapse_ops:
            if isinstance(entry, Operator):
                entry = [(entry, None)]
            elif isinstance(entry, tuple):
                entry = [entry]
            self.collapse_terms.append(_normalize_terms(entry, space, "collapse"))
        if check_hermitian:
            h_static = self.h_static_matrix()
            if h_static is not None:
                dev = _spnorm(h_static - h_static.conj().T)
                ref = max(_spnorm(h_static), 1.0)
                if dev > 1e-12 * ref:
                    raise ValueError(
                        f"static Hamiltonian part is not Hermitian (dev {dev:.2e})"
                    )

    @property
    def dim(self):
        return self.space.dim

    @property
    def is_static(self):
        if any(fn is not None for _, fn in self.h_terms):
            return False
        return all(fn is None for terms in self.collapse_terms for _, fn in terms)

    def h_static_matrix(self):
        mats = [op.csr() for op, fn in self.h_terms if fn is None]
        if not mats:
            return None
        out = mats[0].copy()
        for m in mats[1:]:
            out = out + m
        return out

    def h_matrix(self, t=None):
        out = None
        for op, fn in self.h_terms:
            term = op.csr() if fn is None else op.csr() * complex(fn(t))
            out = term if out is None else out + term
        if out is None:
            out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        return out

    def collapse_matrices(self, t=None):
        mats = []
        for terms in self.collapse_terms:
            c = None
            for op, fn in terms:
                term = op.csr() if fn is None else op.csr() * complex(fn(t))
                c = term if c is None else c + term
            mats.append(c)
        return mats

    def _require_time(self, t):
        if not self.is_static and t is None:
            raise ValueError("model has time-dependent coefficients; t is required")


def _spnorm(mat):
    return spla.norm(mat) if sp.issparse(mat) else np.linalg.norm(mat)


@dataclass
class Superoperator:
    matrix: sp.csr_matrix
    vectorization: str
    dim: int

    def __call__(self, rho_mat):
        return unvec(self.matrix @ vec(rho_mat), self.dim)


def _dissipator_super(c_left, c_right=None):
    """Superoperator of the cross dissipator built from jump parts
    (c_left, c_right): c_l rho c_r^dag - (1/2){c_r^dag c_l, rho}."""
    if c_right is None:
        c_right = c_left
    D = c_left.shape[0]
    eye = sp.identity(D, dtype=complex, format="csr")
    cdc = (c_right.conj().T @ c_left).tocsr()
    out = sp.kron(c_right.conj(), c_left, format="csr")
    out = out - 0.5 * sp.kron(eye, cdc, format="csr")
    out = out - 0.5 * sp.kron(cdc.T, eye, format="csr")
    return out.tocsr()


def _hamiltonian_super(h):
    D = h.shape[0]
    eye = sp.identity(D, dtype=complex, format="csr")
    return (-1j * (sp.kron(eye, h, format="csr") - sp.kron(h.T, eye, format="csr"))).tocsr()


def liouvillian(model, t=None):
    """Sparse matrix representation of the generator at time t."""
    model._require_time(t)
    L = _hamiltonian_super(model.h_matrix(t))
    for c in model.collapse_matrices(t):
        L = L + _dissipator_super(c.tocsr())
    return Superoperator(L.tocsr(), "column-stacking", model.dim)


def expect(op, rho):
    """Tr(op rho); rho may be a DensityMatrix or raw matrix."""
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if isinstance(rho, DensityMatrix) and isinstance(op, Operator):
        if op.space.factors != rho.space.factors:
            raise DimensionError("operator and state act on different spaces")
    omat = op.csr() if isinstance(op, Operator) else op
    if sp.issparse(omat):
        return complex(omat.multiply(mat.T).sum())
    return complex(np.sum(np.asarray(omat) * mat.T))


# ---------------------------------------------------------------------------
# steady states
# ---------------------------------------------------------------------------

def _postprocess_steady(x, model, L, tol):
    rho = unvec(x, model.dim)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-300:
        raise ConvergenceError("steady-state solve returned a traceless matrix")
    rho = rho / tr
    v = vec(rho)
    residual = np.linalg.norm(L @ v) / np.linalg.norm(v)
    if residual > tol:
        raise ConvergenceError(
            f"steady-state residual {residual:.3e} exceeds tolerance {tol:.1e}",
            residual=residual,
        )
    return DensityMatrix(model.space, rho, validate=True), residual


def _null_space_dimension(L, dim):
    """Dense SVD null-space count; only used for small systems."""
    sv = np.linalg.svd(L.toarray(), compute_uv=False)
    scale = sv[0] if sv[0] > 0 else 1.0
    return int(np.sum(sv < 1e-12 * scale * max(dim, 10)))


def steady_state(model, method="direct", tol=1e-8, maxiter=200, x0=None,
                 checkpoint=None):
    """Null vector of the Liouvillian, normalized to unit trace.

    direct: trace-augmented sparse solve (robust normalization of the
    one-dimensional null space).  iterative: shift-invert power iteration,
    for systems whose factorization fits but whose direct residual polishing
    benefits from repetition, with an ILU+LGMRES fallback if full
    factorization runs out of memory.
    """
    if not model.is_static:
        raise ValueError("steady_state requires a static model")
    if not model.collapse_terms:
        raise NonUniqueSteadyStateError(
            "model has no dissipation; every Hamiltonian eigenprojector is steady"
        )
    D = model.dim
    L = liouvillian(model).matrix
    N = D * D

    if D <= 64 and _null_space_dimension(L, D) > 1:
        raise NonUniqueSteadyStateError(
            "Liouvillian null space has dimension > 1; steady state not unique"
        )

    trace_idx = np.arange(D) * (D + 1)
    if method == "direct":
        w = np.mean(np.abs(L.diagonal())) or 1.0
        aug = sp.csr_matrix(
            (np.full(D, w, dtype=complex), (np.zeros(D, dtype=int), trace_idx)),
            shape=(N, N),
        )
        b = np.zeros(N, dtype=complex)
        b[0] = w
        try:
            x = spla.spsolve((L + aug).tocsc(), b)
        except RuntimeError as exc:  # singular factor => degenerate manifold
            raise NonUniqueSteadyStateError(
                f"direct steady-state factorization failed: {exc}"
            ) from exc
        return _postprocess_steady(x, model, L, tol)[0]

    if method != "iterative":
        raise ValueError(f"unknown steady-state method {method!r}")

    # shift-invert power iteration
    scale = np.mean(np.abs(L.diagonal())) or 1.0
    sigma = 1e-12 * scale
    x = vec(np.eye(D, dtype=complex) / D) if x0 is None else np.asarray(x0, complex)
    shifted = (L - sigma * sp.identity(N, dtype=complex, format="csr")).tocsc()
    solve = None
    try:
        lu = spla.splu(shifted)
        solve = lu.solve
    except (MemoryError, RuntimeError):
        ilu = spla.spilu(shifted, drop_tol=1e-5, fill_factor=60)
        M = spla.LinearOperator((N, N), ilu.solve)

        def solve(rhs):
            y, info = spla.lgmres(shifted, rhs, M=M, rtol=1e-12, atol=0.0,
                                  maxiter=1000)
            if info != 0:
                raise ConvergenceError(
                    f"inner LGMRES failed to converge (info={info})"
                )
            return y

    residual = np.inf
    for it in range(maxiter):
        x = solve(x)
        x = x / np.linalg.norm(x)
        residual = np.linalg.norm(L @ x)
        if checkpoint is not None:
            checkpoint(it, x, residual)
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"power iteration did not reach tol={tol:.1e} after {maxiter} "
            f"iterations (residual {residual:.3e})",
            residual=residual,
        )
    return _postprocess_steady(x, model, L, tol)[0]


# ---------------------------------------------------------------------------
# time evolution
# ---------------------------------------------------------------------------

def _const_one(_t):
    return 1.0


class _SuperEngine:
    """RHS as one static superoperator plus coefficient-weighted pieces."""

    def __init__(self, model, dtype=np.complex128):
        self.dtype = dtype
        static = None
        pieces = []

        def add(mat, fn):
            nonlocal static
            if fn is None:
                static = mat if static is None else static + mat
            else:
                pieces.append((fn, mat.astype(dtype)))

        for op, fn in model.h_terms:
            add(_hamiltonian_super(op.csr()), fn)
        for terms in model.collapse_terms:
            for opk, fnk in terms:
                for opl, fnl in terms:
                    if fnk is None and fnl is None:
                        g = None
                    else:
                        fk = fnk or _const_one
                        fl = fnl or _const_one
                        g = (lambda t, fk=fk, fl=fl:
                             complex(fk(t)) * np.conj(complex(fl(t))))
                    add(_dissipator_super(opk.csr(), opl.csr()), g)
        N = model.dim ** 2
        if static is None:
            static = sp.csr_matrix((N, N), dtype=complex)
        static = static.tocsr().astype(dtype)
        static.sort_indices()
        self.static = static
        self.pieces = pieces
        self.nnz = static.nnz + sum(p.nnz for _, p in pieces)

    def rhs(self, t, v):
        out = self.static @ v
        for fn, piece in self.pieces:
            out += fn(t) * (piece @ v)
        return out

    def spectral_radius_estimate(self, seed=7, iters=30):
        rng = np.random.default_rng(seed)
        N = self.static.shape[0]
        v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        v /= np.linalg.norm(v)
        lam = 0.0
        mats = [self.static] + [p for _, p in self.pieces]
        for _ in range(iters):
            w = mats[0] @ v
            for m in mats[1:]:
                w += m @ v
            lam = np.linalg.norm(w)
            if lam == 0:
                return 0.0
            v = w / lam
        return float(lam)


class _ApplyEngine:
    """Matrix-form RHS for systems too large for explicit kron factors."""

    def __init__(self, model, dtype=np.complex128):
        self.dtype = dtype
        self.model = model
        self.dim = model.dim
        self.h_static = model.h_static_matrix()
        if self.h_static is not None:
            self.h_static = self.h_static.astype(dtype)
        self.h_dynamic = [(op.csr().astype(dtype), fn)
                          for op, fn in model.h_terms if fn is not None]
        self.collapse = []
        for terms in model.collapse_terms:
            self.collapse.append([(op.csr().astype(dtype), fn) for op, fn in terms])

    def rhs(self, t, v):
        D = self.dim
        rho = unvec(v, D)
        h = self.h_static
        for op, fn in self.h_dynamic:
            term = op * complex(fn(t))
            h = term if h is None else h + term
        out = np.zeros_like(rho)
        if h is not None:
            # rho @ h computed as (h.T @ rho.T).T to keep the sparse factor left
            out += -1j * (h @ rho - (h.T @ rho.T).T)
        for terms in self.collapse:
            c = None
            for op, fn in terms:
                term = op if fn is None else op * complex(fn(t))
                c = term if c is None else c + term
            crho = c @ rho
            out += (c.conj() @ crho.T).T
            cdc = (c.conj().T @ c).tocsr()
            out -= 0.5 * (cdc @ rho)
            out -= 0.5 * (cdc.T @ rho.T).T
        return vec(out)

    def spectral_radius_estimate(self, seed=7, iters=30):
        rng = np.random.default_rng(seed)
        N = self.dim ** 2
        v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = self.rhs(0.0, v)
            lam = np.linalg.norm(w)
            if lam == 0:
                return 0.0
            v = w / lam
        return float(lam)


def _estimate_super_nnz(model):
    D = model.dim
    total = 0
    for op, _fn in model.h_terms:
        total += 2 * op.csr().nnz * D
    for terms in model.collapse_terms:
        n = sum(op.csr().nnz for op, _ in terms)
        total += n * n + 4 * n * D
    return total


def make_engine(model, dtype=np.complex128, force=None):
    if force == "apply":
        return _ApplyEngine(model, dtype)
    if force == "super" or _estimate_super_nnz(model) <= MAX_SUPEROP_NNZ:
        return _SuperEngine(model, dtype)
    return _ApplyEngine(model, dtype)


def _integrate(engine, y0, t_grid, rtol, atol, method, specrad_safety=0.8,
               h=None, progress=None):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if len(t_grid) == 1:
        return y0[None, :].copy()

    if method == "rk4":
        if h is not None:
            h_max = float(h)
        else:
            specrad = engine.spectral_radius_estimate()
            if specrad <= 0:
                return np.broadcast_to(y0, (len(t_grid), y0.size)).copy()
            h_max = specrad_safety * 2.82 / specrad
        out = np.empty((len(t_grid), y0.size), dtype=np.complex128)
        out[0] = y0
        # fixed-step path runs in the engine's dtype (complex64 is an option
        # for the stability-limited full-atom runs)
        y = y0.astype(getattr(engine, "dtype", np.complex128)).copy()
        rhs = engine.rhs
        t = 0.0
        for i in range(1, len(t_grid)):
            seg = t_grid[i] - t_grid[i - 1]
            n_sub = max(1, int(np.ceil(seg / h_max)))
            h = seg / n_sub
            for _ in range(n_sub):
                k1 = rhs(t, y)
                k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
                k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
                k4 = rhs(t + h, y + h * k3)
                y += (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
                t += h
            t = t_grid[i]
            out[i] = y
            if progress is not None:
                progress(t)
        return out

    scipy_method = {"adaptive": "RK45", "RK45": "RK45", "DOP853": "DOP853"}[method]
    sol = solve_ivp(
        engine.rhs, (t_grid[0], t_grid[-1]), y0.astype(np.complex128),
        method=scipy_method, t_eval=t_grid, rtol=rtol,
        atol=(1e-2 * rtol if atol is None else atol),
    )
    if not sol.success:
        t_fail = sol.t[-1] if len(sol.t) else t_grid[0]
        if "step size" in sol.message.lower():
            raise StiffnessError(
                f"integrator step underflow near t = {t_fail:.6g} us: {sol.message}",
                t=t_fail,
            )
        raise ConvergenceError(f"integration failed: {sol.message}")
    return sol.y.T


def propagate_matrix(model, x0, t_grid, rtol=1e-8, atol=None, method="adaptive",
                     engine=None, h=None, progress=None):
    """Evolve a raw (possibly non-Hermitian) matrix under the generator.

    Used by correlation functions, which propagate operator-weighted states.
    """
    if engine is None:
        engine = make_engine(model)
    y0 = vec(np.asarray(x0, dtype=complex))
    ys = _integrate(engine, y0, t_grid, rtol, atol, method, h=h,
                    progress=progress)
    D = model.dim
    return [unvec(y, D) for y in ys]


def evolve(model, rho0, t_grid, rtol=1e-8, atol=None, method="adaptive",
           engine=None, h=None, progress=None):
    """Snapshots of the density matrix at the requested times.

    Adaptive by default (relative tolerance 1e-8); "rk4" selects the
    fixed-step path sized from the generator's spectral-radius estimate,
    which is what the stability-limited full-atom runs use.
    """
    if isinstance(rho0, DensityMatrix):
        if rho0.space.factors != model.space.factors:
            raise DimensionError("initial state space does not match model")
        x0 = rho0.matrix
    else:
        x0 = np.asarray(rho0, dtype=complex)
    mats = propagate_matrix(model, x0, t_grid, rtol, atol, method,
                            engine=engine, h=h, progress=progress)
    drift = max(abs(np.trace(m).real - 1.0) for m in mats)
    if drift > 1e-7:
        warnings.warn(
            f"trace drift {drift:.2e} exceeds 1e-7 over the requested horizon",
            stacklevel=2,
        )
    return [DensityMatrix(model.space, m, validate=False) for m in mats]
