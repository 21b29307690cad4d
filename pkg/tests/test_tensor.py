import numpy as np
import pytest

from randenc import tensor as T
from randenc.tensor_io import read_tensor, write_tensor
from gradcheck import check_gradients


def rand(rng, *shape):
    return rng.standard_normal(shape)


class TestForwardValues:
    def test_relu(self):
        out = T.relu(T.Tensor([-1.0, 0.0, 2.0]))
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_tanh_zero(self):
        assert T.tanh(T.Tensor(0.0)).item() == 0.0

    def test_matmul_identity(self):
        a = T.Tensor([[1.0, 2.0], [3.0, 4.0]])
        eye = T.Tensor(np.eye(2))
        assert np.array_equal(T.matmul(a, eye).data, a.data)

    def test_logistic_midpoint_and_softplus(self):
        assert T.logistic(T.Tensor(0.0)).item() == pytest.approx(0.5)
        assert T.softplus(T.Tensor(0.0)).item() == pytest.approx(np.log(2.0))

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((2, 3))))


class TestBackwardBasics:
    def test_square_at_three(self):
        x = T.Tensor(3.0, requires_grad=True)
        T.backward(T.mul(x, x))
        assert x.grad == pytest.approx(6.0)

    def test_mean_pool_fans_out_uniformly(self):
        x = T.Tensor(np.arange(8.0).reshape(2, 4), requires_grad=True)
        T.backward(T.sum_(T.mean_pool(x, axis=1)))
        assert np.allclose(x.grad, 0.25)

    def test_non_scalar_output_rejected(self):
        x = T.Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            T.backward(T.scale(x, 2.0))

    def test_detached_graph_rejected(self):
        x = T.Tensor(3.0, requires_grad=False)
        with pytest.raises(ValueError, match="tracked"):
            T.backward(T.mul(x, x))

    def test_grad_accumulates_on_reuse(self):
        x = T.Tensor(2.0, requires_grad=True)
        T.backward(T.add(T.mul(x, x), x))  # d/dx (x^2 + x) = 5 at x=2
        assert x.grad == pytest.approx(5.0)


class TestGradientChecks:
    """Analytic versus central finite differences for every primitive."""

    def test_elementwise_and_matmul(self):
        rng = np.random.default_rng(0)
        a, b = rand(rng, 3, 4), rand(rng, 3, 4)
        check_gradients(lambda ts: T.sum_(T.mul(ts[0], ts[1])), [a, b])
        check_gradients(lambda ts: T.sum_(T.add(ts[0], ts[1])), [a, b])
        check_gradients(lambda ts: T.sum_(T.sub(ts[0], ts[1])), [a, b])
        check_gradients(
            lambda ts: T.sum_(T.div(ts[0], ts[1])), [a, np.abs(b) + 0.5]
        )
        m1, m2 = rand(rng, 3, 5), rand(rng, 5, 2)
        check_gradients(lambda ts: T.sum_(T.matmul(ts[0], ts[1])), [m1, m2])

    def test_broadcast_add_bias(self):
        rng = np.random.default_rng(1)
        x, bias = rand(rng, 4, 3), rand(rng, 3)
        check_gradients(lambda ts: T.sum_(T.add(ts[0], ts[1])), [x, bias])

    def test_nonlinearities(self):
        rng = np.random.default_rng(2)
        x = rand(rng, 4, 3)
        x = np.where(np.abs(x) < 0.1, 0.3, x)  # keep away from the relu kink
        for op in (T.relu, T.tanh, T.logistic, T.softplus, T.exp):
            check_gradients(lambda ts, op=op: T.sum_(op(ts[0])), [x])
        pos = np.abs(x) + 0.2
        check_gradients(lambda ts: T.sum_(T.log(ts[0])), [pos])
        check_gradients(lambda ts: T.sum_(T.sqrt(ts[0])), [pos])
        check_gradients(lambda ts: T.sum_(T.power(ts[0], 3.0)), [pos])

    def test_reductions_and_shapes(self):
        rng = np.random.default_rng(3)
        x = rand(rng, 2, 3, 4)
        check_gradients(lambda ts: T.mean(T.reshape(ts[0], (6, 4))), [x])
        check_gradients(lambda ts: T.sum_(T.mean_pool(ts[0], axis=1)), [x])
        weight = rand(rng, 4, 2, 3)
        check_gradients(
            lambda ts: T.sum_(T.mul(T.transpose(ts[0], (2, 0, 1)), T.Tensor(weight))),
            [x],
        )
        check_gradients(lambda ts: T.sum_(T.sum_(ts[0], axis=2)), [x])
        check_gradients(lambda ts: T.sum_(T.sum_(ts[0], axis=0, keepdims=True)), [x])

    def test_conv_nonoverlap(self):
        rng = np.random.default_rng(4)
        x = rand(rng, 2, 4, 6)
        k = rand(rng, 3, 2, 2, 2)
        check_gradients(lambda ts: T.sum_(T.conv_nonoverlap(ts[0], ts[1])), [x, k])

    def test_batch_normalize(self):
        rng = np.random.default_rng(5)
        x = rand(rng, 6, 3)
        gamma, beta = rand(rng, 3), rand(rng, 3)
        check_gradients(
            lambda ts: T.sum_(T.batch_normalize(ts[0], ts[1], ts[2])), [x, gamma, beta]
        )


class TestConvSemantics:
    def conv_loop_oracle(self, x, k):
        kk, c, p, _ = k.shape
        h, w = x.shape[1:]
        out = np.zeros((kk, h // p, w // p))
        for q in range(kk):
            for i in range(h // p):
                for j in range(w // p):
                    patch = x[:, i * p : (i + 1) * p, j * p : (j + 1) * p]
                    out[q, i, j] = np.sum(patch * k[q])
        return out

    def test_all_ones_kernel_sums_patch(self):
        x = T.Tensor(np.arange(4.0).reshape(1, 2, 2))
        k = T.Tensor(np.ones((1, 1, 2, 2)))
        out = T.conv_nonoverlap(x, k)
        assert out.data.reshape(()) == pytest.approx(6.0)

    def test_one_hot_kernels_reshape_patches(self):
        p, c = 2, 1
        x = np.arange(16.0).reshape(1, 4, 4)
        kernels = np.eye(p * p * c).reshape(p * p * c, c, p, p)
        out = T.conv_nonoverlap(T.Tensor(x), T.Tensor(kernels)).data
        for i in range(2):
            for j in range(2):
                patch = x[0, i * p : (i + 1) * p, j * p : (j + 1) * p].ravel()
                assert np.array_equal(out[:, i, j], patch)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((1, 4, 4))
        k = rng.standard_normal((2, 1, 2, 2))
        got = T.conv_nonoverlap(T.Tensor(x), T.Tensor(k)).data
        assert np.allclose(got, self.conv_loop_oracle(x, k), atol=1e-12)

    def test_equals_block_diagonal_matrix(self):
        """The full map equals a block-diagonal matrix on flattened patches."""
        rng = np.random.default_rng(7)
        c, h, w, p, kk = 2, 4, 4, 2, 3
        x = rng.standard_normal((c, h, w))
        k = rng.standard_normal((kk, c, p, p))
        n_patch = (h // p) * (w // p)
        kmat = k.reshape(kk, -1)
        block = np.zeros((n_patch * kk, n_patch * c * p * p))
        for pi in range(n_patch):
            block[pi * kk : (pi + 1) * kk, pi * c * p * p : (pi + 1) * c * p * p] = kmat
        patches = T.patchify(T.Tensor(x[None]), p).data[0]  # (P, c·p·p)
        want = (block @ patches.ravel()).reshape(n_patch, kk)
        got = T.conv_nonoverlap(T.Tensor(x), T.Tensor(k)).data
        got_patch_major = got.reshape(kk, n_patch).T
        assert np.allclose(got_patch_major, want, atol=1e-12)

    def test_indivisible_dims_rejected(self):
        with pytest.raises(ValueError, match="divide"):
            T.conv_nonoverlap(T.Tensor(np.ones((1, 5, 4))), T.Tensor(np.ones((1, 1, 2, 2))))

    def test_batched_matches_single(self):
        rng = np.random.default_rng(8)
        xs = rng.standard_normal((3, 2, 4, 4))
        k = rng.standard_normal((2, 2, 2, 2))
        batched = T.conv_nonoverlap(T.Tensor(xs), T.Tensor(k)).data
        for b in range(3):
            single = T.conv_nonoverlap(T.Tensor(xs[b]), T.Tensor(k)).data
            assert np.allclose(batched[b], single, atol=1e-14)


class TestBatchNormalize:
    def test_constant_batch_collapses_to_shift(self):
        x = T.Tensor(np.full((4, 3), 7.0))
        gamma = T.Tensor(np.ones(3))
        beta = T.Tensor(np.full(3, 0.5))
        out = T.batch_normalize(x, gamma, beta)
        assert np.allclose(out.data, 0.5)  # zeros before the affine shift

    def test_plus_minus_one_batch_fixed_point(self):
        x = T.Tensor(np.array([[-1.0, -1.0], [1.0, 1.0]]))
        out = T.batch_normalize(x, T.Tensor(np.ones(2)), T.Tensor(np.zeros(2)))
        assert np.allclose(out.data, x.data, atol=1e-4)  # eps shrinks slightly

    def test_random_batch_standardized(self):
        rng = np.random.default_rng(9)
        x = T.Tensor(rng.standard_normal((200, 5)) * 3.0 + 1.0)
        out = T.batch_normalize(x, T.Tensor(np.ones(5)), T.Tensor(np.zeros(5)))
        assert np.abs(out.data.mean(axis=0)).max() < 1e-9
        assert np.abs(out.data.var(axis=0) - 1.0).max() < 1e-3

    def test_too_small_batch_rejected(self):
        with pytest.raises(ValueError, match="2"):
            T.batch_normalize(
                T.Tensor(np.ones((1, 3))), T.Tensor(np.ones(3)), T.Tensor(np.zeros(3))
            )


class TestSeededInit:
    def test_zero_sigma_is_constant(self):
        out = T.seeded_init((4, 4), ("gaussian", 2.5, 0.0), seed=3)
        assert np.array_equal(out, np.full((4, 4), 2.5))

    def test_same_seed_bit_identical(self):
        a = T.seeded_init((32, 8), ("gaussian", 0.0, 1.0), seed=11)
        b = T.seeded_init((32, 8), ("gaussian", 0.0, 1.0), seed=11)
        assert a.tobytes() == b.tobytes()

    def test_moments(self):
        x = T.seeded_init((100_000,), ("gaussian", 0.0, 1.0), seed=5)
        assert abs(x.mean()) < 0.02
        assert 0.98 < x.var() < 1.02

    def test_uniform_bounds(self):
        x = T.seeded_init((10_000,), ("uniform", -2.0, 3.0), seed=1)
        assert x.min() >= -2.0 and x.max() <= 3.0


class TestParamStore:
    def test_rebuild_is_bit_identical(self):
        def build():
            st = T.ParamStore(seed=99)
            st.gaussian("w", (8, 8), std=0.3)
            st.zeros("b", (8,))
            st.uniform("u", (4,), -1.0, 1.0)
            return st

        a, b = build(), build()
        for name in a.names():
            assert a[name].data.tobytes() == b[name].data.tobytes()

    def test_creation_order_does_not_matter(self):
        st1 = T.ParamStore(seed=7)
        st1.gaussian("w", (4,))
        st1.gaussian("v", (4,))
        st2 = T.ParamStore(seed=7)
        st2.gaussian("v", (4,))
        st2.gaussian("w", (4,))
        assert st1["w"].data.tobytes() == st2["w"].data.tobytes()
        assert st1["v"].data.tobytes() == st2["v"].data.tobytes()

    def test_duplicate_name_rejected(self):
        st = T.ParamStore(seed=1)
        st.gaussian("w", (2,))
        with pytest.raises(ValueError, match="exists"):
            st.gaussian("w", (2,))

    def test_state_round_trip(self):
        st = T.ParamStore(seed=1)
        st.gaussian("w", (3, 3))
        snapshot = st.state_arrays()
        st["w"].data += 1.0
        st.load_state(snapshot)
        assert np.array_equal(st["w"].data, snapshot["w"])


class TestAdam:
    def test_minimizes_quadratic(self):
        x = T.Tensor(np.array([4.0, -3.0]), requires_grad=True)
        opt = T.Adam([x], lr=0.1)
        for _ in range(200):
            opt.zero_grad()
            loss = T.sum_(T.mul(x, x))
            T.backward(loss)
            opt.step()
        assert np.abs(x.data).max() < 1e-2

    def test_weight_decay_shrinks_solution(self):
        def solve(wd):
            x = T.Tensor(np.array([2.0]), requires_grad=True)
            opt = T.Adam([x], lr=0.05, weight_decay=wd)
            for _ in range(300):
                opt.zero_grad()
                diff = T.sub(x, T.Tensor(np.array([1.0])))
                T.backward(T.sum_(T.mul(diff, diff)))
                opt.step()
            return float(x.data[0])

        assert abs(solve(0.0) - 1.0) < 1e-3
        assert solve(1.0) < 0.9


class TestTensorIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        for shape in [(3,), (2, 5), (2, 3, 4)]:
            arr = rng.standard_normal(shape)
            path = tmp_path / "x.ptnsr"
            write_tensor(path, arr)
            back = read_tensor(path)
            assert back.shape == arr.shape
            assert np.array_equal(back, arr)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ptnsr"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            read_tensor(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "x.ptnsr"
        write_tensor(path, np.ones((4, 4)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="size"):
            read_tensor(path)
