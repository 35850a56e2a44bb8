import numpy as np
import pytest

from fiodecomp.geometry import (
    Direction,
    DirectionNet,
    ExceptionalSet,
    Rectangle,
    build_direction_net,
    exceptional_set_volume,
    load_net,
    projection,
    rotation_to_direction,
    save_net,
    separation_floor,
    validate_direction_net,
)
from fiodecomp.numerics import fit_log2_slope
from fiodecomp.symbols import phase_flat


def _axis_set(n):
    out = set()
    for i in range(n):
        for s in (1.0, -1.0):
            v = [0.0] * n
            v[i] = s
            out.add(tuple(v))
    return out


class TestBuild:
    def test_level0_n2_is_axes(self):
        net = build_direction_net(0, 2)
        assert {d.vector for d in net.directions} == _axis_set(2)

    def test_level0_n3_is_axes(self):
        net = build_direction_net(0, 3)
        assert {d.vector for d in net.directions} == _axis_set(3)

    def test_level6_n2_cardinality(self):
        # implementation constant C = 24 over the 2^(j/2) scaling
        net = build_direction_net(6, 2)
        assert 2**3 <= net.size <= 24 * 2**3
        rep = validate_direction_net(net, samples=10000)
        assert rep.ok

    def test_deterministic(self):
        a = build_direction_net(5, 2)
        b = build_direction_net(5, 2)
        assert a.matrix().tolist() == b.matrix().tolist()

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            build_direction_net(3, 5)
        with pytest.raises(ValueError):
            build_direction_net(17, 2)

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("j", [0, 1, 2, 4, 7])
    def test_validate_levels(self, n, j):
        rep = validate_direction_net(build_direction_net(j, n), samples=10000)
        assert rep.ok, rep.first_violation()

    def test_cardinality_slope_n2(self):
        pairs = [(j, build_direction_net(j, 2).size) for j in range(4, 13)]
        fit = fit_log2_slope(pairs)
        assert abs(fit.slope - 0.5) <= 0.15


class TestValidateFailures:
    def test_close_pair_fails_separation(self):
        net = build_direction_net(4, 2)
        v = net.directions[0].array()
        # plant a second direction closer than the floor
        eps = separation_floor(4) / 8.0
        w = v + np.array([0.0, eps])
        w /= np.linalg.norm(w)
        bad = DirectionNet(4, 2, net.directions + (
            Direction(tuple(w), 4, frozenset()),))
        rep = validate_direction_net(bad, samples=1000)
        assert not rep.separation_ok
        assert not rep.ok

    def test_missing_axis_fails(self):
        net = build_direction_net(4, 2)
        kept = tuple(d for d in net.directions if d.vector != (1.0, 0.0))
        rep = validate_direction_net(DirectionNet(4, 2, kept), samples=1000)
        assert not rep.axes_ok

    def test_component_floor_fails(self):
        net = build_direction_net(4, 2)
        theta = 0.01  # component sin(theta) far below 2^(-2)
        stray = Direction((np.cos(theta), np.sin(theta)), 4, frozenset())
        rep = validate_direction_net(
            DirectionNet(4, 2, net.directions + (stray,)), samples=1000)
        assert not rep.components_ok

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            validate_direction_net(build_direction_net(2, 2), samples=10)


class TestRotation:
    def test_e1_gives_identity(self):
        d = Direction((1.0, 0.0), 3, frozenset({1}))
        assert np.allclose(rotation_to_direction(d), np.eye(2))

    def test_e2_quarter_turn(self):
        d = Direction((0.0, 1.0), 3, frozenset())
        a = rotation_to_direction(d)
        assert np.allclose(a, [[0.0, -1.0], [1.0, 0.0]])
        assert np.linalg.det(a) == pytest.approx(1.0)

    def test_random_directions_n3(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            d = Direction(tuple(v), 6, frozenset())
            a = rotation_to_direction(d)
            assert np.max(np.abs(a.T @ a - np.eye(3))) < 1e-12
            assert np.linalg.det(a) == pytest.approx(1.0, abs=1e-12)
            assert np.max(np.abs(a @ np.eye(3)[0] - v)) < 1e-12

    def test_dead_block_identity(self):
        net = build_direction_net(4, 3)
        d = next(d for d in net.directions if d.zero_set == frozenset({2}))
        a = rotation_to_direction(d)
        assert a[2, 2] == 1.0 and a[2, 0] == a[0, 2] == 0.0

    def test_non_prefix_pattern_rejected(self):
        d = Direction((0.0, 1.0), 4, frozenset({0}))
        with pytest.raises(ValueError):
            rotation_to_direction(d)


class TestProjection:
    def test_axis(self):
        d = Direction((1.0, 0.0), 0, frozenset({1}))
        assert projection(d, [3.0, 4.0]) == pytest.approx(3.0)

    def test_orthogonal(self):
        d = Direction((1.0, 0.0), 0, frozenset({1}))
        assert abs(projection(d, [0.0, 2.5])) < 1e-12

    def test_diagonal(self):
        s = np.sqrt(0.5)
        d = Direction((s, s), 1, frozenset())
        assert projection(d, [1.0, 0.0]) == pytest.approx(s, abs=1e-12)


class TestRectangles:
    def test_dual_membership(self):
        d = Direction((1.0, 0.0), 3, frozenset({1}))
        r = Rectangle(d, (0.0, 0.0), 3, 1.0, "dual")
        assert r.contains(np.array([0.0, 0.3]))           # thin ball direction
        assert not r.contains(np.array([0.2, 0.0]))       # beyond M*2^-j along d
        assert not r.contains(np.array([0.0, 0.5]))       # beyond M*2^-j/2

    def test_monotone_in_constant(self):
        d = Direction((1.0, 0.0), 3, frozenset({1}))
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, size=(500, 2))
        small = Rectangle(d, (0.0, 0.0), 3, 2.0, "dual").contains(pts)
        big = Rectangle(d, (0.0, 0.0), 3, 5.0, "dual").contains(pts)
        assert np.all(big[small])

    def test_spatial_flat_phase_matches_dual(self):
        d = Direction((1.0, 0.0), 3, frozenset({1}))
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, size=(400, 2))
        dual = Rectangle(d, (0.0, 0.0), 3, 3.0, "dual").contains(pts)
        spat = Rectangle(d, (0.0, 0.0), 3, 3.0, "spatial").contains(
            pts, phase_flat())
        assert np.array_equal(dual, spat)


class TestExceptionalSet:
    def test_volume_single_level_oracle(self):
        # flat phase, r = 2^-2 with level cap 2: only the j=2 rectangles;
        # oracle = slab-in-disk area per direction (overlaps make it a bound)
        es = ExceptionalSet((0.0, 0.0), 2.0**-2, 1.0, 2, level_cap=2)
        est, se = exceptional_set_volume(es, phase_flat(), 20000, 2.0, seed=3)
        j, m = 2, 1.0
        t, R = m * 2.0**-j, m * 2.0 ** (-j / 2)
        single = 2 * (t * np.sqrt(R**2 - t**2) + R**2 * np.arcsin(t / R))
        net = build_direction_net(j, 2)
        assert est <= net.size * single + 3 * se
        assert est >= single - 3 * se

    def test_volume_scales_at_most_linearly_in_r(self):
        phase = phase_flat()
        vols = []
        for k in range(2, 6):
            es = ExceptionalSet((0.0, 0.0), 2.0**-k, 1.0, 2, level_cap=8)
            est, _ = exceptional_set_volume(es, phase, 40000, 2.0, seed=5)
            vols.append(est)
        for a, b in zip(vols, vols[1:]):
            assert 0.25 <= b / a <= 1.0

    def test_empty_levels(self):
        es = ExceptionalSet((0.0, 0.0), 2.0**-3, 1.0, 2, level_cap=2)
        assert es.levels() == []
        est, se = exceptional_set_volume(es, phase_flat(), 10000, 2.0)
        assert est == 0.0

    def test_sample_floor(self):
        es = ExceptionalSet((0.0, 0.0), 0.25, 1.0, 2)
        with pytest.raises(ValueError):
            exceptional_set_volume(es, phase_flat(), 100)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        net = build_direction_net(5, 3)
        path = tmp_path / "net.txt"
        save_net(net, path)
        back = load_net(path)
        assert back.level == 5 and back.dim == 3
        assert np.array_equal(back.matrix(), net.matrix())
        assert [d.zero_set for d in back.directions] == [
            d.zero_set for d in net.directions]

    def test_rejects_empty(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(ValueError):
            load_net(path)
