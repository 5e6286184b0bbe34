"""Hilbert-space composition and elementary operator algebra.

Composite spaces are ordered lists of labeled factors; the tensor layout is
always the Kronecker product in factor order (first factor = slowest index),
and that ordering is part of every file's metadata.  All angular frequencies
are stored in rad/us; time grids in us.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import DimensionError, UnknownLabelError

# Matrices at or below this total dimension are kept dense; larger ones sparse.
# Both storages must agree to 1e-12 (tested), so this is purely a speed knob.
SPARSE_THRESHOLD = 256

TWO_PI = 2.0 * np.pi


def mhz(value):
    """Convert a frequency quoted in 2*pi*MHz into rad/us."""
    return TWO_PI * np.asarray(value, dtype=float)


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered composite of labeled factors."""

    factors: tuple

    def __post_init__(self):
        factors = tuple((str(lbl), int(dim)) for lbl, dim in self.factors)
        labels = [lbl for lbl, _ in factors]
        if len(set(labels)) != len(labels):
            raise DimensionError(f"duplicate factor labels in {labels}")
        for lbl, dim in factors:
            if dim < 1:
                raise DimensionError(f"factor {lbl!r} has dimension {dim} < 1")
        object.__setattr__(self, "factors", factors)

    @property
    def dim(self):
        d = 1
        for _, n in self.factors:
            d *= n
        return d

    @property
    def labels(self):
        return tuple(lbl for lbl, _ in self.factors)

    def dim_of(self, label):
        for lbl, n in self.factors:
            if lbl == label:
                return n
        raise UnknownLabelError(label)

    def index_of(self, label):
        for i, (lbl, _) in enumerate(self.factors):
            if lbl == label:
                return i
        raise UnknownLabelError(label)

    def extended(self, label, dim):
        """New space with one more factor appended."""
        return HilbertSpace(self.factors + ((label, dim),))

    def __repr__(self):
        body = " ⊗ ".join(f"{lbl}({n})" for lbl, n in self.factors)
        return f"HilbertSpace[{body}]"


def single_space(label, dim):
    return HilbertSpace(((label, dim),))


class Operator:
    """A linear operator on a HilbertSpace, dense or sparse storage.

    units is a tag, either "angular-frequency" or "dimensionless"; it is
    bookkeeping only and never rescales the matrix.
    """

    __slots__ = ("space", "matrix", "units")

    def __init__(self, space, matrix, units="angular-frequency"):
        if sp.issparse(matrix):
            mat = matrix.tocsr()
        else:
            mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (space.dim, space.dim):
            raise DimensionError(
                f"matrix shape {mat.shape} does not match space dim {space.dim}"
            )
        if not sp.issparse(mat) and space.dim > SPARSE_THRESHOLD:
            mat = sp.csr_matrix(mat)
        if units not in ("angular-frequency", "dimensionless"):
            raise ValueError(f"unknown units tag {units!r}")
        self.space = space
        self.matrix = mat
        self.units = units

    # -- storage helpers -------------------------------------------------
    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    def dense(self):
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def csr(self):
        return self.matrix if self.is_sparse else sp.csr_matrix(self.matrix)

    # -- algebra ---------------------------------------------------------
    def _like(self, matrix):
        return Operator(self.space, matrix, self.units)

    def _check(self, other):
        if self.space.factors != other.space.factors:
            raise DimensionError("operators act on different spaces")

    def __add__(self, other):
        self._check(other)
        return self._like(self.matrix + other.matrix)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.matrix - other.matrix)

    def __mul__(self, scalar):
        return self._like(self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.matrix)

    def __matmul__(self, other):
        self._check(other)
        return self._like(self.matrix @ other.matrix)

    def dag(self):
        return self._like(self.matrix.conj().T)

    def is_hermitian(self, tol=1e-12):
        d = self.matrix - self.matrix.conj().T
        nrm = sp.linalg.norm(d) if sp.issparse(d) else np.linalg.norm(d)
        ref = sp.linalg.norm(self.matrix) if self.is_sparse else np.linalg.norm(self.matrix)
        return nrm <= tol * max(ref, 1.0)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Operator({self.space!r}, {kind}, units={self.units})"


class DensityMatrix:
    """Hermitian, unit-trace state on a HilbertSpace (dense storage)."""

    __slots__ = ("space", "matrix")

    HERM_TOL = 1e-10
    TRACE_TOL = 1e-8
    EIG_TOL = -1e-8

    def __init__(self, space, matrix, validate=True):
        mat = np.asarray(matrix, dtype=complex)
        if sp.issparse(matrix):
            mat = matrix.toarray().astype(complex)
        if mat.shape != (space.dim, space.dim):
            raise DimensionError(
                f"matrix shape {mat.shape} does not match space dim {space.dim}"
            )
        if validate:
            herm = np.linalg.norm(mat - mat.conj().T)
            if herm > self.HERM_TOL * max(np.linalg.norm(mat), 1.0):
                raise ValueError(f"density matrix not Hermitian (dev {herm:.2e})")
            tr = np.trace(mat).real
            if abs(tr - 1.0) > self.TRACE_TOL:
                raise ValueError(f"density matrix trace {tr} != 1")
            wmin = la.eigvalsh(mat)[0]
            if wmin < self.EIG_TOL:
                raise ValueError(f"density matrix has eigenvalue {wmin:.2e} < 0")
        self.space = space
        self.matrix = mat

    def trace(self):
        return np.trace(self.matrix).real

    def purity(self):
        return float(np.real(np.sum(self.matrix * self.matrix.T)))

    def __repr__(self):
        return f"DensityMatrix({self.space!r})"


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------

def fock_ops(n_max, label="cavity"):
    """Annihilation and number operators on a Fock space truncated at n_max.

    Basis states are |0>, ..., |n_max>; a has sqrt(n) on the (n-1, n)
    positions, so truncated-Fock identities like [a, a^dag] = 1 hold exactly
    below the top level.
    """
    if n_max < 1:
        raise DimensionError(f"n_max must be >= 1, got {n_max}")
    dim = n_max + 1
    space = single_space(label, dim)
    a = np.zeros((dim, dim), dtype=complex)
    n = np.arange(1, dim)
    a[n - 1, n] = np.sqrt(n)
    number = np.diag(np.arange(dim, dtype=float)).astype(complex)
    return Operator(space, a), Operator(space, number)


def spin_ops(F, label="spin"):
    """Standard spin-F operators plus the xz/yz quadrupoles.

    Basis ordered m = F, F-1, ..., -F.  Quadrupoles use the symmetrized
    product Q_ij = S_i S_j + S_j S_i (no trace subtraction); only the xz/yz
    components are consumed downstream, for which a trace term would cancel
    anyway.  Returns a dict with keys Sz, Sp, Sm, Sx, Sy, Qxz, Qyz.
    """
    twoF = 2.0 * F
    if abs(twoF - round(twoF)) > 1e-12 or F < 0.5:
        raise ValueError(f"F must be a half-integer >= 1/2, got {F}")
    F = round(twoF) / 2.0
    dim = int(round(twoF)) + 1
    space = single_space(label, dim)
    m = F - np.arange(dim)
    Sz = np.diag(m).astype(complex)
    # S+|F,m> = sqrt(F(F+1) - m(m+1)) |F,m+1>; row index of m+1 is idx-1
    Sp = np.zeros((dim, dim), dtype=complex)
    for i in range(1, dim):
        mm = m[i]
        Sp[i - 1, i] = np.sqrt(F * (F + 1) - mm * (mm + 1))
    Sm = Sp.conj().T
    Sx = 0.5 * (Sp + Sm)
    Sy = -0.5j * (Sp - Sm)
    Qxz = Sx @ Sz + Sz @ Sx
    Qyz = Sy @ Sz + Sz @ Sy
    out = {"Sz": Sz, "Sp": Sp, "Sm": Sm, "Sx": Sx, "Sy": Sy, "Qxz": Qxz, "Qyz": Qyz}
    return {k: Operator(space, v) for k, v in out.items()}


def identity_op(space):
    if space.dim > SPARSE_THRESHOLD:
        return Operator(space, sp.identity(space.dim, dtype=complex, format="csr"))
    return Operator(space, np.eye(space.dim, dtype=complex))


def embed(op, target, factor_label):
    """Lift a single-factor operator into a composite space by Kronecker
    products with identities, following the target's fixed factor order."""
    idx = target.index_of(factor_label)
    if op.space.dim != target.factors[idx][1]:
        raise DimensionError(
            f"operator dim {op.space.dim} does not match factor "
            f"{factor_label!r} dim {target.factors[idx][1]}"
        )
    left = 1
    for _, n in target.factors[:idx]:
        left *= n
    right = 1
    for _, n in target.factors[idx + 1:]:
        right *= n
    use_sparse = target.dim > SPARSE_THRESHOLD
    core = op.csr() if use_sparse else op.dense()
    if use_sparse:
        mat = sp.kron(sp.identity(left, dtype=complex, format="csr"), core, format="csr")
        mat = sp.kron(mat, sp.identity(right, dtype=complex, format="csr"), format="csr")
    else:
        mat = np.kron(np.kron(np.eye(left), core), np.eye(right))
    return Operator(target, mat, op.units)


def displacement(n_max, alpha, label="cavity"):
    """Displacement unitary D(alpha) on a truncated Fock space.

    Exact within truncation tolerance; warns when |alpha|^2 crowds the
    truncation edge.
    """
    if n_max < 1:
        raise DimensionError(f"n_max must be >= 1, got {n_max}")
    if abs(alpha) ** 2 > n_max / 4.0:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha)**2:.2f} is large for n_max = {n_max}; "
            "displacement may be inaccurate near the truncation edge",
            stacklevel=2,
        )
    a, _ = fock_ops(n_max, label)
    gen = alpha * a.dense().conj().T - np.conj(alpha) * a.dense()
    return Operator(a.space, la.expm(gen), units="dimensionless")


def _traced_dims(space, keep_label):
    idx = space.index_of(keep_label)
    dims = [n for _, n in space.factors]
    return idx, dims


def partial_trace(rho, keep_label):
    """Reduce a DensityMatrix to a single named factor."""
    idx, dims = _traced_dims(rho.space, keep_label)
    n = len(dims)
    tensor = rho.matrix.reshape(dims + dims)
    # trace out everything but `idx`, starting from the highest axis so the
    # remaining axis numbers stay valid
    for ax in reversed(range(n)):
        if ax == idx:
            continue
        tensor = np.trace(tensor, axis1=ax, axis2=ax + (tensor.ndim // 2))
    keep_dim = dims[idx]
    reduced = tensor.reshape(keep_dim, keep_dim)
    out_space = single_space(keep_label, keep_dim)
    return DensityMatrix(out_space, reduced, validate=False)


def partial_trace_matrix(mat, space, keep_label):
    """partial_trace for a raw matrix (no state validation)."""
    idx, dims = _traced_dims(space, keep_label)
    n = len(dims)
    tensor = np.asarray(mat).reshape(dims + dims)
    for ax in reversed(range(n)):
        if ax == idx:
            continue
        tensor = np.trace(tensor, axis1=ax, axis2=ax + (tensor.ndim // 2))
    keep_dim = dims[idx]
    return tensor.reshape(keep_dim, keep_dim)
