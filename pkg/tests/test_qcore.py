import numpy as np
import pytest
import scipy.linalg as la

import cavlight.qcore as qc
from cavlight.errors import DimensionError, UnknownLabelError
from cavlight.qcore import (
    DensityMatrix,
    HilbertSpace,
    displacement,
    embed,
    fock_ops,
    partial_trace,
    single_space,
    spin_ops,
)


def test_fock_ladder_elements():
    a, n = fock_ops(2)
    A = a.dense()
    # a|1> = |0>, a|2> = sqrt(2)|1>
    assert A[0, 1] == pytest.approx(1.0)
    assert A[1, 2] == pytest.approx(np.sqrt(2))
    assert np.count_nonzero(A) == 2
    assert np.allclose(np.diag(n.dense()).real, [0, 1, 2])


def test_fock_commutator_below_truncation():
    a, _ = fock_ops(12)
    A = a.dense()
    comm = A @ A.conj().T - A.conj().T @ A
    # canonical on every level except the truncation edge
    assert np.allclose(np.diag(comm)[:-1], 1.0, atol=1e-14)


def test_fock_invalid_dimension():
    with pytest.raises(DimensionError):
        fock_ops(0)


def test_spin_half_matrices():
    ops = spin_ops(0.5)
    assert np.allclose(ops["Sz"].dense(), np.diag([0.5, -0.5]))
    assert np.allclose(ops["Sp"].dense(), [[0, 1], [0, 0]])
    assert np.allclose(ops["Sm"].dense(), [[0, 0], [1, 0]])


def test_spin_one_raising_element():
    ops = spin_ops(1)
    # S+|1,-1> = sqrt(2)|1,0>; m ordering is (1, 0, -1)
    assert ops["Sp"].dense()[1, 2] == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize("F", [0.5, 1, 1.5, 2, 2.5, 4, 4.5])
def test_spin_algebra(F):
    ops = spin_ops(F)
    Sx, Sy, Sz = (ops[k].dense() for k in ("Sx", "Sy", "Sz"))
    assert np.allclose(Sx @ Sy - Sy @ Sx, 1j * Sz, atol=1e-12)
    S2 = Sx @ Sx + Sy @ Sy + Sz @ Sz
    assert np.allclose(S2, F * (F + 1) * np.eye(int(2 * F + 1)), atol=1e-12)


def test_spin_quadrupole_convention():
    ops = spin_ops(1.5)
    Sx, Sy, Sz = (ops[k].dense() for k in ("Sx", "Sy", "Sz"))
    assert np.allclose(ops["Qxz"].dense(), Sx @ Sz + Sz @ Sx)
    assert np.allclose(ops["Qyz"].dense(), Sy @ Sz + Sz @ Sy)
    assert np.allclose(ops["Qxz"].dense(), ops["Qxz"].dense().conj().T)


def test_spin_invalid_F():
    with pytest.raises(ValueError):
        spin_ops(0.7)


def test_embed_kron_oracle():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    target = HilbertSpace((("left", 3), ("right", 3)))
    opA = qc.Operator(single_space("left", 3), A)
    opB = qc.Operator(single_space("right", 3), B)
    ea = embed(opA, target, "left")
    eb = embed(opB, target, "right")
    # (A kron I)(I kron B) = A kron B, against the dense oracle
    assert np.allclose((ea @ eb).dense(), np.kron(A, B), atol=1e-13)


def test_embed_disjoint_factors_commute():
    space = HilbertSpace((("atom", 2), ("cavity", 4)))
    a, _ = fock_ops(3, "cavity")
    sz = spin_ops(0.5, "atom")["Sz"]
    ea = embed(a, space, "cavity")
    es = embed(sz, space, "atom")
    comm = (ea @ es - es @ ea).dense()
    assert np.allclose(comm, 0, atol=1e-14)


def test_embed_identity_and_errors():
    space = HilbertSpace((("atom", 2), ("cavity", 3)))
    ident = qc.identity_op(single_space("atom", 2))
    assert np.allclose(embed(ident, space, "atom").dense(), np.eye(6))
    with pytest.raises(UnknownLabelError):
        embed(ident, space, "nope")
    with pytest.raises(DimensionError):
        embed(ident, space, "cavity")


def test_embed_preserves_spectrum():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((3, 3))
    h = h + h.T
    space = HilbertSpace((("x", 3), ("y", 4)))
    op = qc.Operator(single_space("x", 3), h)
    big = embed(op, space, "x").dense()
    w_small = np.sort(la.eigvalsh(h))
    w_big = np.sort(la.eigvalsh(big))
    assert np.allclose(w_big, np.repeat(w_small, 4), atol=1e-12)


def test_displacement_identity_and_mean():
    D0 = displacement(10, 0.0)
    assert np.allclose(D0.dense(), np.eye(11), atol=1e-14)
    n_max = 30
    D = displacement(n_max, 0.5)
    a, _ = fock_ops(n_max)
    vac = np.zeros(n_max + 1)
    vac[0] = 1.0
    coh = D.dense() @ vac
    mean_a = coh.conj() @ a.dense() @ coh
    assert mean_a == pytest.approx(0.5, abs=1e-10)


def test_displacement_inverse_matrix_exponential_oracle():
    n_max = 40
    rng = np.random.default_rng(5)
    for _ in range(3):
        alpha = (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)) * 1.4
        a, _ = fock_ops(n_max)
        gen = alpha * a.dense().conj().T - np.conj(alpha) * a.dense()
        oracle = la.expm(gen)
        D = displacement(n_max, alpha)
        assert np.allclose(D.dense(), oracle, atol=1e-12)
        prod = (displacement(n_max, alpha) @ displacement(n_max, -alpha)).dense()
        assert np.allclose(prod, np.eye(n_max + 1), atol=1e-8)


def test_displacement_warns_near_truncation():
    with pytest.warns(UserWarning):
        displacement(4, 2.0)


def _rand_dm(rng, dim):
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


def test_partial_trace_product_state():
    rng = np.random.default_rng(7)
    ra = _rand_dm(rng, 4)
    rb = _rand_dm(rng, 3)
    space = HilbertSpace((("A", 4), ("B", 3)))
    rho = DensityMatrix(space, np.kron(ra, rb))
    red = partial_trace(rho, "A")
    assert np.allclose(red.matrix, ra, atol=1e-12)
    assert red.trace() == pytest.approx(1.0, abs=1e-12)


def test_partial_trace_bell_state():
    space = HilbertSpace((("A", 2), ("B", 2)))
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1 / np.sqrt(2)
    rho = DensityMatrix(space, np.outer(psi, psi.conj()))
    red = partial_trace(rho, "B")
    assert np.allclose(red.matrix, np.eye(2) / 2, atol=1e-12)


def test_partial_trace_contraction_oracle():
    rng = np.random.default_rng(13)
    space = HilbertSpace((("A", 4), ("B", 3)))
    rho = DensityMatrix(space, _rand_dm(rng, 12))
    red = partial_trace(rho, "A").matrix
    # explicit sum over the traced index
    t = rho.matrix.reshape(4, 3, 4, 3)
    oracle = np.einsum("ikjk->ij", t)
    assert np.allclose(red, oracle, atol=1e-12)
    red_b = partial_trace(rho, "B").matrix
    oracle_b = np.einsum("kikj->ij", t)
    assert np.allclose(red_b, oracle_b, atol=1e-12)


def test_partial_trace_three_factors():
    rng = np.random.default_rng(17)
    space = HilbertSpace((("A", 2), ("B", 3), ("C", 2)))
    rho = DensityMatrix(space, _rand_dm(rng, 12))
    red = partial_trace(rho, "B").matrix
    t = rho.matrix.reshape(2, 3, 2, 2, 3, 2)
    oracle = np.einsum("aibajb->ij", t)
    assert np.allclose(red, oracle, atol=1e-12)
    assert np.trace(red).real == pytest.approx(1.0, abs=1e-12)


def test_partial_trace_positivity():
    rng = np.random.default_rng(19)
    space = HilbertSpace((("A", 3), ("B", 5)))
    rho = DensityMatrix(space, _rand_dm(rng, 15))
    red = partial_trace(rho, "A").matrix
    assert la.eigvalsh(red)[0] >= -1e-12


def test_dense_sparse_paths_identical(monkeypatch):
    # force the sparse path and compare against dense on the same inputs
    rng = np.random.default_rng(23)
    h = rng.standard_normal((6, 6))
    h = h + h.T
    space = single_space("x", 6)
    dense_op = qc.Operator(space, h)
    monkeypatch.setattr(qc, "SPARSE_THRESHOLD", 2)
    big = HilbertSpace((("x", 6), ("y", 5)))
    sparse_emb = embed(qc.Operator(space, h), big, "x")
    monkeypatch.setattr(qc, "SPARSE_THRESHOLD", 256)
    dense_emb = embed(dense_op, big, "x")
    assert sparse_emb.is_sparse and not dense_emb.is_sparse
    assert np.allclose(sparse_emb.dense(), dense_emb.dense(), atol=1e-12)


def test_space_label_validation():
    with pytest.raises(DimensionError):
        HilbertSpace((("a", 2), ("a", 3)))
    with pytest.raises(DimensionError):
        HilbertSpace((("a", 0),))


def test_density_matrix_validation():
    space = single_space("x", 2)
    with pytest.raises(ValueError):
        DensityMatrix(space, np.array([[1.0, 0.5], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        DensityMatrix(space, np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        DensityMatrix(space, np.diag([1.5, -0.5]))
