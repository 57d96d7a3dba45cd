import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kirchhoff_qp.decay import (
    DecayMatrix, box_indices, interpolation_check, invert_dense, power_check,
    real_basis_transform, sobolev_check,
)
from kirchhoff_qp.errors import DomainError, Singular
from kirchhoff_qp.fourier import TorusFunction as TF, sobolev_norm

IDX = box_indices(1, 1, (3, 3))


def banded(rng, idx, b):
    n = len(idx)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    D = np.max(np.abs(idx[:, None, :] - idx[None, :, :]), axis=2)
    return DecayMatrix(1, 1, idx, idx, np.where(D <= b, A, 0))


def single(idx, r, c, v):
    E = np.zeros((len(idx), len(idx)), complex)
    E[r, c] = v
    return DecayMatrix(1, 1, idx, idx, E)


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0, 3.5])
def test_multiplication_norm_equals_sobolev(rng, s):
    a = TF.random(rng, 1, 1, (3, 3), decay=1)
    M = DecayMatrix.multiplication(a, box_indices(1, 1, (6, 6), exclude_j0=False))
    assert M.decay_norm(s) == pytest.approx(sobolev_norm(a, s), rel=1e-12)


@pytest.mark.parametrize("s", [0.0, 2.0, 5.0])
def test_diagonal_norm(rng, s):
    vals = rng.standard_normal(len(IDX))
    M = DecayMatrix.diagonal(1, 1, IDX, vals)
    assert M.decay_norm(s) == pytest.approx(np.max(np.abs(vals)))


@pytest.mark.parametrize("r,c", [(0, 5), (3, 40), (17, 2)])
def test_single_entry_norm(r, c):
    M = single(IDX, r, c, 2.0 - 1.0j)
    k = max(1, int(np.max(np.abs(IDX[r] - IDX[c]))))
    assert M.decay_norm(2.5) == pytest.approx(abs(2 - 1j) * k ** 2.5)


def test_empty_norms():
    M = DecayMatrix(1, 1, [], [], np.zeros((0, 0)))
    assert M.decay_norm(2) == 0 and M.operator_norm() == 0


def test_norm_at_zero_dominates_single_entry_probes(rng):
    M = banded(rng, IDX, 3)
    assert M.decay_norm(0) >= np.max(np.abs(M.entries))


def test_immutable():
    M = DecayMatrix.identity(1, 1, IDX)
    with pytest.raises(AttributeError):
        M.entries = None
    with pytest.raises(ValueError):
        M.entries[0, 0] = 2


@pytest.mark.parametrize("s", [2.0, 3.0, 4.0])
def test_interpolation_identity_factor(rng, s):
    M1 = banded(rng, IDX, 2)
    lhs, rhs = interpolation_check(M1, DecayMatrix.identity(1, 1, IDX), s, 2.0)
    assert lhs == pytest.approx(M1.decay_norm(s))
    assert lhs <= rhs


def test_interpolation_single_entries_closed_form():
    # entries at differences k1 = r1 - c1 and k2 = c1 - c2 multiply to k1 + k2
    a, b, c = 10, 24, 31
    M1, M2 = single(IDX, a, b, 3.0), single(IDX, b, c, -0.5j)
    k = max(1, int(np.max(np.abs(IDX[a] - IDX[c]))))
    lhs, _ = interpolation_check(M1, M2, 2.0, 2.0)
    assert lhs == pytest.approx(1.5 * k ** 2)


def test_algebra_randomized_4_pow_s():
    # C(s) = 4^s: the randomized oracle over banded matrices
    rng = np.random.default_rng(7)
    for t in range(100):
        s0, s = 2.0, 2.0 + t % 3
        M1, M2 = banded(rng, IDX, 1 + t % 4), banded(rng, IDX, 1 + t % 4)
        lhs, rhs = interpolation_check(M1, M2, s, s0, C=4.0 ** s)
        assert lhs <= rhs


def test_algebra_counterexample_for_relative_constant():
    # with C(s) = 4^(s - s0) the inequality fails at s = s0 for two
    # shift matrices: |M1 M2|_s = 2^s but rhs = 1 * 1
    idx = box_indices(1, 1, (3, 3))
    pos = {tuple(k): i for i, k in enumerate(idx)}
    E = np.zeros((len(idx), len(idx)))
    for k, i in pos.items():
        nb = (k[0] + 1, k[1])
        if nb in pos:
            E[pos[nb], i] = 1.0
    M = DecayMatrix(1, 1, idx, idx, E)
    lhs, rhs = interpolation_check(M, M, 2.0, 2.0)
    assert lhs == pytest.approx(4.0) and rhs == pytest.approx(1.0)


def test_sobolev_randomized_4_pow_s():
    rng = np.random.default_rng(8)
    for t in range(100):
        s0, s = 2.0, 2.0 + t % 3
        M = banded(rng, IDX, 1 + t % 4)
        h = TF.random(rng, 1, 1, (3, 3))
        lhs, rhs = sobolev_check(M, h, s, s0, C=4.0 ** s)
        assert lhs <= rhs


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_power_randomized(n):
    rng = np.random.default_rng(100 + n)
    for t in range(25):
        M = banded(rng, IDX, 1 + t % 4)
        lhs, rhs = power_check(M, n, 2.0 + t % 3, 2.0, C=4.0 ** (2.0 + t % 3))
        assert lhs <= rhs


def test_apply_identity(rng):
    h = TF.random(rng, 1, 1, (3, 3))
    out = DecayMatrix.identity(1, 1, box_indices(1, 1, (3, 3), exclude_j0=False)).apply(h)
    assert np.allclose(out.coeffs, h.coeffs)


def test_apply_diagonal_single_mode():
    vals = np.arange(1, len(IDX) + 1, dtype=float)
    D = DecayMatrix.diagonal(1, 1, IDX, vals)
    i = 20
    h = TF.from_modes(1, 1, (3, 3), {((int(IDX[i][0]),), (int(IDX[i][1]),)): 2.0},
                      real=False)
    out = D.apply(h)
    assert out.coeff((int(IDX[i][0]),), (int(IDX[i][1]),)) == pytest.approx(2.0 * vals[i])
    assert np.count_nonzero(out.coeffs) == 1


def test_apply_support_mismatch():
    h = TF.from_modes(1, 1, (3, 3), {((1,), (0,)): 1.0})
    with pytest.raises(IndexError):
        DecayMatrix.identity(1, 1, IDX).apply(h)


def test_submatrix_far_center():
    M = DecayMatrix.identity(1, 1, IDX)
    sub = M.submatrix((100, 100), 2)
    assert sub.shape == (0, 0)


def test_submatrix_large_N():
    M = DecayMatrix.identity(1, 1, IDX)
    sub = M.submatrix((0, 1), 50)
    assert np.array_equal(sub.rows, IDX) and np.array_equal(sub.entries, M.entries)


def test_submatrix_bruteforce():
    amb = [(l, j) for l in range(-3, 4) for j in range(-3, 4) if j != 0]
    want = sorted(k for k in amb if max(abs(k[0]), abs(k[1] - 1)) <= 1)
    M = DecayMatrix.identity(1, 1, IDX)
    got = sorted(tuple(int(v) for v in k) for k in M.submatrix((0, 1), 1).rows)
    assert got == want == [(-1, 1), (-1, 2), (0, 1), (0, 2), (1, 1), (1, 2)]


def test_restrict_missing_index():
    with pytest.raises(IndexError):
        DecayMatrix.identity(1, 1, IDX).restrict([(9, 9)])


def test_invert_diagonal(rng):
    vals = 1 + rng.random(len(IDX)) * 5
    inv = invert_dense(DecayMatrix.diagonal(1, 1, IDX, vals))
    assert np.allclose(np.diag(inv.entries), 1 / vals)


def test_invert_neumann(rng):
    A = banded(rng, IDX, 2) * 0.01
    I = DecayMatrix.identity(1, 1, IDX)
    q = np.linalg.norm(A.entries, 2)
    assert q < 0.5
    inv = invert_dense(I + A).entries
    series = sum(np.linalg.matrix_power(-A.entries, n) for n in range(12))
    tail = q ** 12 / (1 - q)
    assert np.linalg.norm(inv - series, 2) <= tail


def test_invert_singular():
    E = np.eye(len(IDX))
    E[3] = 0
    E[4] = 0
    with pytest.raises(Singular):
        invert_dense(DecayMatrix(1, 1, IDX, IDX, E))


def test_invert_nonsquare():
    with pytest.raises(DomainError):
        invert_dense(DecayMatrix(1, 1, IDX[:3], IDX[:4], np.ones((3, 4))))


def test_csv_roundtrip(rng):
    M = banded(rng, IDX[:10], 2)
    text = M.to_csv(header_comment="probe")
    assert text.startswith("# probe\nell_row0,j_row0,ell_col0,j_col0,re,im\n")
    back = DecayMatrix.from_csv(text, 1, 1)
    sub = M.restrict(back.rows, back.cols)
    assert np.array_equal(sub.entries, back.entries)
    buf = io.StringIO()
    M.to_csv(buf)
    assert buf.getvalue() == M.to_csv()


def test_real_basis_symmetric_for_hermitian(rng):
    a = TF.random(rng, 1, 1, (2, 2))
    M = DecayMatrix.multiplication(a, IDX)
    A = M.real_basis()
    assert np.max(np.abs(A.imag)) < 1e-12
    assert np.allclose(A.real, A.real.T)
    Q = real_basis_transform(IDX)
    assert np.allclose(Q.conj().T @ Q, np.eye(len(IDX)))


def test_matmul_index_mismatch():
    with pytest.raises(DomainError):
        DecayMatrix.identity(1, 1, IDX[:3]) @ DecayMatrix.identity(1, 1, IDX[:4])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 4))
def test_norm_monotone_in_s(seed, s):
    M = banded(np.random.default_rng(seed), IDX, 2)
    assert M.decay_norm(s) <= M.decay_norm(s + 0.5) * (1 + 1e-12)
    # Schur: ||M||_0 <= sum_k [M(k)] <= sqrt(#k) |M|_0
    nk = len(M.decay_profile()[1])
    assert M.operator_norm() <= np.sqrt(nk) * M.decay_norm(0) * (1 + 1e-12)
