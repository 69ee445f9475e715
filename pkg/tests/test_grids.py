import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathheat.errors import DomainError
from pathheat.grids import (GridPath, PathPoint, SemimartingaleSpec, TimeGrid,
                            brownian_extension, extend_with_increments,
                            brownian_increments, path_distance, read_path_csv,
                            simulate_semimartingale,
                            simulate_semimartingale_ensemble, stop_path,
                            write_path_csv)
from pathheat.streams import sample_stream

from conftest import make_brownian


class TestStopPath:
    def test_constant_path_fixed(self, grid100):
        c = GridPath.constant(grid100, 0.7)
        for t in (0.0, 0.31, 1.0):
            assert np.array_equal(stop_path(c, t).values, c.values)

    def test_identity_ramp(self, grid100):
        x = GridPath.from_function(grid100, lambda t: t)
        stopped = stop_path(x, 0.5)
        expect = np.minimum(grid100.nodes(), 0.5)
        assert np.allclose(stopped.values[:, 0], expect)

    def test_stop_at_zero(self, sine_path):
        stopped = stop_path(sine_path, 0.0)
        assert np.allclose(stopped.values, sine_path.values[0])

    def test_idempotent(self, sine_path):
        once = stop_path(sine_path, 0.4)
        assert np.array_equal(stop_path(once, 0.4).values, once.values)

    @given(t1=st.floats(0, 1), t2=st.floats(0, 1))
    @settings(max_examples=30, deadline=None)
    def test_composition_is_min(self, t1, t2):
        grid = TimeGrid(1.0, 16)
        x = make_brownian(grid, seed=5)
        left = stop_path(stop_path(x, t1), t2)
        right = stop_path(x, min(grid.snap(t1), grid.snap(t2)))
        assert np.array_equal(left.values, right.values)

    def test_out_of_domain(self, sine_path):
        with pytest.raises(DomainError):
            stop_path(sine_path, 1.5)


class TestPathDistance:
    def test_diagonal(self, sine_path):
        p = PathPoint(0.3, sine_path)
        assert path_distance(p, p) == 0.0

    def test_pure_time_separation(self, grid100):
        z = GridPath.zero(grid100)
        assert path_distance(PathPoint(0.0, z), PathPoint(1.0, z)) == 1.0

    def test_constant_paths(self, grid100):
        a = GridPath.constant(grid100, 1.25)
        b = GridPath.constant(grid100, -0.5)
        assert np.isclose(path_distance(PathPoint(0.4, a), PathPoint(0.4, b)), 1.75)

    def test_symmetry_and_triangle(self, grid64):
        pts = [PathPoint(t, make_brownian(grid64, seed=s))
               for s, t in [(1, 0.2), (2, 0.8), (3, 0.5)]]
        d01 = path_distance(pts[0], pts[1])
        assert d01 == path_distance(pts[1], pts[0])
        d02 = path_distance(pts[0], pts[2])
        d12 = path_distance(pts[1], pts[2])
        assert d01 <= d02 + d12 + 1e-15

    def test_insensitive_to_future(self, grid100):
        # distance only sees the stopped representatives
        x = make_brownian(grid100, seed=9)
        p = PathPoint(0.5, x)
        q = PathPoint(0.5, stop_path(x, 0.5))
        assert path_distance(p, q) == 0.0

    def test_dimension_mismatch(self, grid100):
        a = PathPoint(0.1, GridPath.zero(grid100, 1))
        b = PathPoint(0.1, GridPath.zero(grid100, 2))
        with pytest.raises(DomainError):
            path_distance(a, b)


class TestBrownianExtension:
    def test_past_preserved_exactly(self, sine_path):
        w = brownian_extension(0.37, sine_path, seed=4)
        k = sine_path.grid.index_of(0.37)
        assert np.array_equal(w.values[: k + 1], sine_path.values[: k + 1])

    def test_extension_at_horizon_is_identity(self, sine_path):
        w = brownian_extension(1.0, sine_path, seed=4)
        assert np.array_equal(w.values, sine_path.values)

    def test_marginal_variance(self, grid100):
        # var of W_s - x(t) at s > t is s - t per coordinate
        x = GridPath.zero(grid100)
        n = 10_000
        t, s_idx = 0.3, 80
        vals = np.array([
            brownian_extension(t, x, seed=77, stream_index=i).values[s_idx, 0]
            for i in range(n)])
        target = grid100.node(s_idx) - t
        var = np.var(vals, ddof=1)
        stderr = var * math.sqrt(2.0 / (n - 1))
        assert abs(var - target) <= 3 * stderr

    def test_flow_identity_same_noise(self, grid100):
        # re-extending from a later time with the same driving increments
        # reproduces the original sample
        x = GridPath.from_function(grid100, lambda t: np.cos(t))
        k, kp = 20, 60
        rng = sample_stream(123, 0)
        dw = brownian_increments(grid100, k, 1, rng)
        w = extend_with_increments(grid100.node(k), x, dw)
        w2 = extend_with_increments(grid100.node(kp), w, dw[kp - k:])
        assert np.allclose(w.values, w2.values, atol=1e-14)

    def test_nonanticipative_in_input(self, grid100):
        # two inputs agreeing up to t give identical samples
        x = make_brownian(grid100, seed=1)
        y_vals = x.values.copy()
        y_vals[61:] += 5.0
        y = GridPath(grid100, y_vals)
        wx = brownian_extension(0.6, x, seed=5)
        wy = brownian_extension(0.6, y, seed=5)
        assert np.array_equal(wx.values, wy.values)


class TestSemimartingale:
    def test_deterministic_line(self, grid100):
        spec = SemimartingaleSpec(
            drift=lambda t, s: np.full_like(s, 0.8),
            volatility=lambda t, s: np.zeros((1, 1)),
            initial=np.array([0.2]))
        x = simulate_semimartingale(spec, grid100, seed=0)
        assert np.allclose(x.values[:, 0], 0.2 + 0.8 * grid100.nodes())

    def test_constant_when_frozen(self, grid100):
        spec = SemimartingaleSpec(
            drift=lambda t, s: np.zeros_like(s),
            volatility=lambda t, s: np.zeros((1, 1)),
            initial=np.array([1.5]))
        x = simulate_semimartingale(spec, grid100, seed=0)
        assert np.allclose(x.values, 1.5)

    def test_brownian_terminal_variance(self, grid100):
        spec = SemimartingaleSpec(
            drift=lambda t, s: np.zeros_like(s),
            volatility=lambda t, s: np.eye(1),
            initial=np.array([0.0]))
        vals = simulate_semimartingale_ensemble(spec, grid100, 10_000, seed=3)
        term = vals[:, -1, 0]
        var = np.var(term, ddof=1)
        stderr = var * math.sqrt(2.0 / (len(term) - 1))
        assert abs(var - 1.0) <= 3 * stderr

    def test_reproducible_and_partition_independent(self, grid64):
        spec = SemimartingaleSpec(
            drift=lambda t, s: -s,
            volatility=lambda t, s: np.eye(1),
            initial=np.array([0.3]))
        ens = simulate_semimartingale_ensemble(spec, grid64, 8, seed=11)
        # sample i alone must equal row i of the ensemble, bit for bit
        for i in (0, 3, 7):
            single = simulate_semimartingale(spec, grid64, seed=11, stream_index=i)
            assert np.array_equal(single.values, ens[i])


class TestCsvRoundTrip:
    def test_round_trip_exact(self, grid64):
        x = make_brownian(grid64, seed=21, dimension=2)
        buf = io.StringIO()
        write_path_csv(x, buf)
        buf.seek(0)
        header = buf.readline().strip()
        assert header == "t,x1,x2"
        buf.seek(0)
        y = read_path_csv(buf)
        assert y.grid == x.grid
        assert np.array_equal(y.values, x.values)

    def test_rejects_bad_header(self):
        with pytest.raises(DomainError):
            read_path_csv(io.StringIO("a,b\n0,1\n"))
