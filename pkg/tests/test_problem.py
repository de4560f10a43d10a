"""Tests for the problem data model, generators and instance files."""

import numpy as np
import pytest

from fastbcda.core.errors import (
    DimensionError,
    InstanceFormatError,
    InvalidParameterError,
)
from fastbcda.schemas.common import ProblemKind
from fastbcda.solvers.problem import (
    MAGIC,
    Instance,
    apply_block_delta,
    apply_coordinate_delta,
    generate_instance,
    gradient_q,
    hessian_block,
    initial_state,
    load_instance,
    objective,
    save_instance,
    spike_count,
    sparse_uniform_matrix,
)


def test_objective_at_zero_is_half_squared_b(random_instance):
    """f(0) = 1/2 ||b||^2."""
    inst = random_instance
    expected = 0.5 * float(np.dot(inst.b, inst.b))
    assert objective(inst, np.zeros(inst.n)) == pytest.approx(
        expected, rel=1e-14
    )


def test_objective_exact_fit_plus_l1():
    """A = I, b = (1, 0), tau = 1, x = (1, 0) gives 0 + 1."""
    inst = Instance(A=np.eye(2), b=np.array([1.0, 0.0]), tau=1.0)
    assert objective(inst, np.array([1.0, 0.0])) == 1.0


def test_objective_matches_naive_evaluation():
    """Agrees with an elementwise re-implementation on a 5 x 8 instance."""
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 8))
    b = rng.standard_normal(5)
    inst = Instance(A=A, b=b, tau=0.3)
    x = rng.standard_normal(8)

    naive = 0.0
    for i in range(5):
        r_i = sum(A[i, j] * x[j] for j in range(8)) - b[i]
        naive += 0.5 * r_i * r_i
    naive += 0.3 * sum(abs(v) for v in x)

    assert objective(inst, x) == pytest.approx(naive, rel=1e-12)


def test_objective_is_convex_along_segments(random_instance):
    """Test f at a midpoint never exceeds the mean of the endpoint values."""
    inst = random_instance
    rng = np.random.default_rng(12)
    for _ in range(200):
        x = rng.standard_normal(inst.n)
        y = rng.standard_normal(inst.n)
        f_x, f_y = objective(inst, x), objective(inst, y)
        mid = objective(inst, 0.5 * (x + y))
        assert mid <= 0.5 * (f_x + f_y) + 1e-12 * (1.0 + abs(f_x) + abs(f_y))


def test_objective_rejects_wrong_length(random_instance):
    """Test a wrong-length x is rejected."""
    with pytest.raises(DimensionError):
        objective(random_instance, np.zeros(3))


def test_gradient_identity_and_zero():
    """g = 0 at zero residual; g = b when A = I and residual = b."""
    b = np.array([1.0, -2.0, 0.5])
    inst = Instance(A=np.eye(3), b=b, tau=1.0)
    assert np.array_equal(gradient_q(inst, np.zeros(3)), np.zeros(3))
    assert np.array_equal(gradient_q(inst, b), b)


def test_gradient_matches_finite_differences(random_instance):
    """Central differences of q(x) = 1/2 ||Ax - b||^2."""
    inst = random_instance
    rng = np.random.default_rng(0)
    x = rng.standard_normal(inst.n)

    def q(v):
        r = inst.A @ v - inst.b
        return 0.5 * float(np.dot(r, r))

    g = gradient_q(inst, inst.A @ x - inst.b)
    for i in range(inst.n):
        h = 1e-6 * (1.0 + abs(x[i]))
        e = np.zeros(inst.n)
        e[i] = h
        fd = (q(x + e) - q(x - e)) / (2 * h)
        assert fd == pytest.approx(g[i], abs=1e-6)


def test_initial_state_defaults_to_zero(random_instance):
    """Test the default start is x = 0 with r = -b."""
    state = initial_state(random_instance)
    assert not state.x.any()
    assert np.array_equal(state.residual, -random_instance.b)
    assert state.f == pytest.approx(
        0.5 * float(np.dot(random_instance.b, random_instance.b))
    )


def test_zero_delta_leaves_state_unchanged(random_instance):
    """Test a zero step changes nothing."""
    state = initial_state(random_instance)
    f_before = state.f
    residual_before = state.residual.copy()
    apply_coordinate_delta(state, 3, 0.0)
    assert np.array_equal(state.residual, residual_before)
    assert state.f == f_before


def test_residual_drift_after_many_updates(random_instance):
    """10^3 random coordinate updates track A x - b within 1e-9."""
    inst = random_instance
    rng = np.random.default_rng(42)
    state = initial_state(inst)
    for _ in range(1000):
        i = int(rng.integers(inst.n))
        apply_coordinate_delta(state, i, float(rng.standard_normal()))
    dense = inst.A @ state.x - inst.b
    assert np.max(np.abs(state.residual - dense)) <= 1e-9
    assert state.f == pytest.approx(objective(inst, state.x), rel=1e-10)


def test_resync_removes_residual_drift(random_instance):
    """Test resync restores r = A x - b and drops the cached objective."""
    inst = random_instance
    state = initial_state(inst, np.ones(inst.n))
    state.residual = state.residual + 1e-3
    stale_f = state.f

    state.resync()
    assert np.array_equal(state.residual, inst.A @ state.x - inst.b)
    assert state.f != stale_f
    assert state.f == pytest.approx(objective(inst, state.x), rel=1e-14)


def test_block_delta_updates_residual(random_instance):
    """Test a block step keeps r = A x - b."""
    inst = random_instance
    state = initial_state(inst)
    apply_block_delta(state, [2, 5], np.array([1.5, -0.25]))
    assert state.x[2] == 1.5 and state.x[5] == -0.25
    dense = inst.A @ state.x - inst.b
    assert np.allclose(state.residual, dense, atol=1e-12)


def test_coordinate_delta_rejects_bad_index(random_instance):
    """Test an out-of-range index is rejected."""
    state = initial_state(random_instance)
    with pytest.raises(DimensionError):
        apply_coordinate_delta(state, random_instance.n, 1.0)


def test_hessian_block_single_index_uses_column_norm(random_instance):
    """Test a 1x1 block is the squared column norm."""
    inst = random_instance
    H = hessian_block(inst, [4])
    assert H.shape == (1, 1)
    assert H[0, 0] == inst.col_norms_sq[4]


def test_hessian_block_orthogonal_columns():
    """Test orthogonal columns give a diagonal block."""
    inst = Instance(A=np.eye(3) * 2.0, b=np.ones(3), tau=0.1)
    H = hessian_block(inst, [0, 2])
    assert abs(H[0, 1]) <= 1e-12
    assert H[0, 0] == 4.0


def test_hessian_block_matches_dense_gram(random_instance):
    """Test against the dense Gram matrix."""
    inst = random_instance
    gram = inst.A.T @ inst.A
    H = hessian_block(inst, [2, 5])
    assert np.allclose(H, gram[np.ix_([2, 5], [2, 5])], atol=1e-12)


def test_hessian_block_rejects_duplicates(random_instance):
    """Test repeated indices are rejected."""
    with pytest.raises(DimensionError):
        hessian_block(random_instance, [3, 3])


def test_instance_rejects_zero_column():
    """Test a zero column is rejected."""
    A = np.array([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(InvalidParameterError):
        Instance(A=A, b=np.ones(2), tau=1.0)


def test_instance_rejects_nonpositive_tau():
    """Test tau <= 0 is rejected."""
    with pytest.raises(InvalidParameterError):
        Instance(A=np.eye(2), b=np.ones(2), tau=0.0)


def test_instance_arrays_are_read_only(random_instance):
    """Test instance arrays cannot be written."""
    with pytest.raises(ValueError):
        random_instance.A[0, 0] = 1.0


def test_spike_count_rounds_half_up():
    """Test T = round(rho m) with halves rounded up."""
    assert spike_count(16, 0.05) == 1
    assert spike_count(10, 0.25) == 3
    assert spike_count(16, 0.01) == 0


def test_generate_p1_single_spike_and_unit_columns():
    """n=64, m=16, rho=0.05 gives T = round(0.8) = 1 spike."""
    inst = generate_instance("P1", 64, 16, 0.05, seed=123)
    assert np.count_nonzero(inst.x_true) == 1
    assert set(np.abs(inst.x_true[inst.x_true != 0])) == {1.0}
    norms = np.linalg.norm(inst.A, axis=0)
    assert np.max(np.abs(norms - 1.0)) <= 1e-12
    assert inst.meta.kind is ProblemKind.P1
    assert inst.tau == pytest.approx(
        0.1 * float(np.abs(inst.A.T @ inst.b).max())
    )


def test_generate_is_deterministic():
    """Test the same seed gives the same instance."""
    first = generate_instance("P2", 64, 16, 0.1, seed=9)
    second = generate_instance("P2", 64, 16, 0.1, seed=9)
    assert first == second
    assert generate_instance("P2", 64, 16, 0.1, seed=10) != first


def test_generate_rejects_bad_parameters():
    """Test bad sizes and rho are rejected."""
    with pytest.raises(InvalidParameterError):
        generate_instance("P1", 16, 32, 0.1)
    with pytest.raises(InvalidParameterError):
        generate_instance("P1", 64, 16, 0.01)
    with pytest.raises(InvalidParameterError):
        generate_instance("P1", 64, 16, 1.5)


def test_sparse_uniform_density():
    """Structural nonzero fraction of a density-0.5 draw is near 0.5."""
    rng = np.random.default_rng(0)
    A = sparse_uniform_matrix(rng, 16, 64, 0.5)
    fraction = np.count_nonzero(A) / A.size
    assert 0.4 <= fraction <= 0.6
    assert np.all(A >= 0.0) and np.all(A < 1.0)
    assert np.all(np.abs(A).sum(axis=0) > 0)


def test_save_load_round_trip(tmp_path, small_p2):
    """Test an instance file reads back equal."""
    path = save_instance(small_p2, tmp_path / "p2.fbcd")
    loaded = load_instance(path)
    assert loaded == small_p2
    assert loaded.tau == small_p2.tau
    assert loaded.meta == small_p2.meta


def test_round_trip_without_ground_truth(tmp_path, random_instance):
    """Test files without x_true read back equal."""
    path = save_instance(random_instance, tmp_path / "custom.fbcd")
    loaded = load_instance(path)
    assert loaded.x_true is None
    assert loaded == random_instance


def test_load_rejects_bad_magic(tmp_path, random_instance):
    """Test a wrong magic is a format error."""
    path = save_instance(random_instance, tmp_path / "inst.fbcd")
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(InstanceFormatError) as exc:
        load_instance(path)
    assert exc.value.code == "bad_magic"


def test_load_rejects_truncated_payload(tmp_path, random_instance):
    """Test a truncated payload is a format error."""
    path = save_instance(random_instance, tmp_path / "inst.fbcd")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(InstanceFormatError) as exc:
        load_instance(path)
    assert exc.value.code == "size_mismatch"


def test_load_rejects_corrupted_payload(tmp_path, random_instance):
    """Test a checksum mismatch is a format error."""
    path = save_instance(random_instance, tmp_path / "inst.fbcd")
    data = bytearray(path.read_bytes())
    data[-12] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(InstanceFormatError) as exc:
        load_instance(path)
    assert exc.value.code == "checksum_mismatch"


def test_file_starts_with_magic(tmp_path, random_instance):
    """Test the file begins with the magic bytes."""
    path = save_instance(random_instance, tmp_path / "inst.fbcd")
    assert path.read_bytes().startswith(MAGIC)
