import numpy as np
import pytest
import scipy.sparse as sp

from jbmir.dot import DiffusionModel, DotOperator, OpticsGeometry, assemble_system, dot_fidelity_gradient, dot_forward
from jbmir.grid import GridGeometry, disk_mask
from jbmir.phantom import builtin_phantom, rasterize


@pytest.fixture(scope="module")
def small():
    g = GridGeometry(nx=32, ny=32, h=0.5, disk_radius=8.0)
    return g, DotOperator(g)


@pytest.fixture(scope="module")
def full():
    g = GridGeometry()
    return g, DotOperator(g)


def test_optode_layout():
    o = OpticsGeometry()
    np.testing.assert_allclose(np.rad2deg(o.source_angles), 22.5 * np.arange(16))
    np.testing.assert_allclose(np.rad2deg(o.detector_angles), 11.25 + 22.5 * np.arange(16))
    assert not set(np.round(np.rad2deg(o.source_angles), 6)) & set(np.round(np.rad2deg(o.detector_angles), 6))


def test_model_validation():
    with pytest.raises(ValueError):
        DiffusionModel(D=0.0)
    with pytest.raises(ValueError):
        DiffusionModel(mu_floor=0.0)
    with pytest.raises(ValueError):
        OpticsGeometry(amplitudes=(1.0, 2.0))


def test_interior_stencil(small):
    g, op = small
    D, mu = op.model.D, 0.02
    A = op.assemble(np.full(g.shape, mu)).tocsr()
    # a cell with all four neighbours inside the disk
    i, j = 16, 16
    k = op.index[i, j]
    row = A.getrow(k).toarray().ravel()
    assert row[k] == pytest.approx(4 * D / g.h**2 + mu, rel=1e-14)
    for di, dj in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        assert row[op.index[i + di, j + dj]] == pytest.approx(-D / g.h**2, rel=1e-14)
    assert np.count_nonzero(row) == 5


def test_symmetric_m_matrix(small, rng):
    g, _ = small
    D = rng.uniform(0.1, 2.0, g.shape)
    op = DotOperator(g, D_field=D)
    A = op.assemble(rng.uniform(0.001, 0.05, g.shape)).tocsr()
    assert abs(A - A.T).max() == 0
    assert np.all(A.diagonal() > 0)
    off = A - sp.diags(A.diagonal())
    assert off.max() <= 0


def test_assemble_system_rejects_low_mu(small):
    g, _ = small
    model = DiffusionModel()
    A, B = assemble_system(model, np.full(g.shape, 0.01), g)
    assert A.shape[0] == B.shape[0] == disk_mask(g).sum()
    with pytest.raises(ValueError):
        assemble_system(model, np.full(g.shape, 1e-9), g)


def test_switched_off_source(small):
    g, _ = small
    amps = np.ones(16)
    amps[3] = 0.0
    op = DotOperator(g, OpticsGeometry(amplitudes=tuple(amps)))
    M, U = dot_forward(op, np.full(g.shape, 0.01))
    assert not np.any(M[3]) and not np.any(U[3])
    assert np.all(np.any(np.delete(M, 3, axis=0), axis=1))


def test_mirror_symmetry(full):
    g, op = full
    M = op.forward(np.full(g.shape, 0.01))
    s = np.arange(16)
    # reflecting y -> -y maps source k to -k and detector d to 15 - d
    R = M[(-s) % 16][:, 15 - s]
    assert np.abs(M - R).max() <= 1e-8 * np.abs(M).max()


def test_quarter_turn_invariance(full):
    g, op = full
    M = op.forward(np.full(g.shape, 0.02))
    np.testing.assert_allclose(np.roll(M, (4, 4), axis=(0, 1)), M, rtol=1e-8)


def test_absorption_monotonicity(full):
    g, op = full
    lo = op.forward(np.full(g.shape, 0.01))
    hi = op.forward(np.full(g.shape, 0.03))
    assert np.all(hi < lo)


def test_maximum_principle_and_sign(full):
    g, op = full
    mu = rasterize(builtin_phantom("phantom1"), g, "dot")
    M, U = dot_forward(op, mu)
    qmax = op.face_q.max(axis=0)
    m = disk_mask(g)
    for s in range(16):
        assert U[s][m].min() >= 0
        assert U[s][m].max() <= qmax[s]
    assert np.all(M >= 0)
    np.testing.assert_array_equal(M, op.forward(mu.copy()))


def test_zero_residual_zero_gradient(small):
    g, op = small
    mu = np.full(g.shape, 0.015)
    val, grad = op.fidelity_gradient(mu, op.forward(mu))
    assert val == 0.0 and not np.any(grad)


def test_gradient_against_finite_differences(small, rng):
    g, op = small
    X, Y = g.mesh()
    truth = np.where(X**2 + (Y - 3) ** 2 < 4, 0.03, 0.01)
    data = op.forward(truth)
    mu = np.full(g.shape, 0.01) + 0.002 * rng.random(g.shape)
    grad = dot_fidelity_gradient(op, mu, data)
    m = disk_mask(g)
    assert not np.any(grad[~m])
    cand = np.argwhere(m)
    dt = 1e-6
    for i, j in cand[rng.choice(len(cand), 10, replace=False)]:
        e = np.zeros(g.shape)
        e[i, j] = dt
        fd = (op.fidelity(mu + e, data) - op.fidelity(mu - e, data)) / (2 * dt)
        assert abs(fd - grad[i, j]) < 1e-4 * abs(grad[i, j])


def test_adjoint_solve_residual(small):
    g, op = small
    A, solve, _ = op._solver(np.full(g.shape, 0.01))
    C = np.ascontiguousarray(op.C.T)
    Lam = solve(C)
    assert np.linalg.norm(A @ Lam - C) / np.linalg.norm(C) < 1e-10


def test_data_shape_checked(small):
    g, op = small
    with pytest.raises(ValueError):
        op.fidelity(np.full(g.shape, 0.01), np.zeros((4, 4)))
