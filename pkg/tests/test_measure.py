import numpy as np
import pytest

from otrom.errors import AllZeroField, IndexOutOfGrid
from otrom.measure import (
    DiscreteMeasure,
    Grid,
    SignedDecomposition,
    Snapshot,
    Trajectory,
    field_to_measures,
    measures_to_field,
)

from conftest import random_blob_field


def snap(values, grid):
    return Snapshot(values=np.asarray(values, dtype=float), time=0.0, grid=grid)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            Grid(nx=0, nz=4, hx=1.0, hz=1.0)
        with pytest.raises(ValueError):
            Grid(nx=4, nz=4, hx=-1.0, hz=1.0)

    def test_cell_center_bijective(self):
        g = Grid(nx=5, nz=3, hx=0.5, hz=2.0, origin=(1.0, -1.0))
        seen = set()
        for l in range(g.n_cells):
            seen.add(g.cell_center(l))
        assert len(seen) == g.n_cells

    def test_nearest_cell_fixed_point(self):
        g = Grid(nx=7, nz=4, hx=0.3, hz=1.7, origin=(-2.0, 3.0))
        for l in range(g.n_cells):
            assert g.nearest_cell(g.cell_center(l)) == l

    def test_nearest_cell_clamps_outside(self):
        g = Grid(nx=4, nz=4, hx=1.0, hz=1.0)
        assert g.nearest_cell((-100.0, -100.0)) == 0
        assert g.nearest_cell((100.0, 100.0)) == g.n_cells - 1
        assert g.nearest_cell((1.2, -50.0)) == 1

    def test_cell_centers_rejects_bad_index(self):
        g = Grid(nx=2, nz=2, hx=1.0, hz=1.0)
        with pytest.raises(IndexOutOfGrid):
            g.cell_centers([4])


class TestFieldToMeasures:
    def test_nonnegative_normalization(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        d = field_to_measures(snap([2.0, 2.0], g))
        np.testing.assert_allclose(d.positive.weights, [0.5, 0.5])
        assert d.positive.mass == 4.0
        assert d.negative is None

    def test_sign_split(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        d = field_to_measures(snap([1.0, -1.0], g))
        assert list(d.positive.support) == [0]
        assert list(d.negative.support) == [1]
        assert d.positive.mass == 1.0
        assert d.negative.mass == 1.0
        np.testing.assert_array_equal(d.positive.weights, [1.0])

    def test_all_zero_rejected(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        with pytest.raises(AllZeroField):
            field_to_measures(snap([0.0, 0.0], g))

    def test_zero_atoms_dropped(self):
        g = Grid(nx=4, nz=1, hx=1.0, hz=1.0)
        d = field_to_measures(snap([0.0, 3.0, 0.0, 1.0], g))
        assert list(d.positive.support) == [1, 3]


class TestMeasuresToField:
    def test_round_trip_signed(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        s = snap([1.0, -1.0], g)
        out = measures_to_field(field_to_measures(s), g)
        np.testing.assert_array_equal(out.values, s.values)

    def test_positive_only(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        d = SignedDecomposition(
            positive=DiscreteMeasure(support=[0], weights=[1.0], mass=3.0))
        np.testing.assert_array_equal(measures_to_field(d, g).values, [3.0, 0.0])

    def test_index_out_of_grid(self):
        g = Grid(nx=4, nz=1, hx=1.0, hz=1.0)
        d = SignedDecomposition(
            positive=DiscreteMeasure(support=[99], weights=[1.0], mass=1.0))
        with pytest.raises(IndexOutOfGrid):
            measures_to_field(d, g)

    def test_round_trip_random_fields(self, grid16, rng):
        for _ in range(50):
            values = random_blob_field(grid16, rng, signed=True)
            s = Snapshot(values=values, time=0.0, grid=grid16)
            d = field_to_measures(s)
            out = measures_to_field(d, grid16)
            np.testing.assert_allclose(out.values, values, atol=1e-12, rtol=1e-12)
            for part in (d.positive, d.negative):
                if part is not None:
                    assert abs(part.weights.sum() - 1.0) <= 1e-12
                    assert np.all(part.weights > 0)


class TestMeasureInvariants:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(support=[0, 1], weights=[0.6, 0.6], mass=1.0)

    def test_weights_strictly_positive(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(support=[0, 1], weights=[1.0, 0.0], mass=1.0)

    def test_unique_support(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(support=[1, 1], weights=[0.5, 0.5], mass=1.0)

    def test_decomposition_needs_a_part(self):
        with pytest.raises(ValueError):
            SignedDecomposition(positive=None, negative=None)


class TestTrajectory:
    def test_times_must_be_on_lattice(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        s0 = Snapshot(values=np.ones(2), time=0.0, grid=g)
        s1 = Snapshot(values=np.ones(2), time=0.7, grid=g)
        with pytest.raises(ValueError):
            Trajectory(snapshots=(s0, s1), dt=0.5, t_f=0.7)

    def test_shared_grid_required(self):
        g1 = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        g2 = Grid(nx=2, nz=1, hx=2.0, hz=1.0)
        s0 = Snapshot(values=np.ones(2), time=0.0, grid=g1)
        s1 = Snapshot(values=np.ones(2), time=1.0, grid=g2)
        with pytest.raises(ValueError):
            Trajectory(snapshots=(s0, s1), dt=1.0, t_f=1.0)

    def test_matrix_shape(self):
        g = Grid(nx=3, nz=1, hx=1.0, hz=1.0)
        snaps = tuple(Snapshot(values=np.full(3, float(k)), time=k * 0.5, grid=g)
                      for k in range(4))
        traj = Trajectory(snapshots=snaps, dt=0.5, t_f=1.5)
        assert traj.matrix().shape == (3, 4)
        np.testing.assert_allclose(traj.times(), [0.0, 0.5, 1.0, 1.5])

    def test_snapshot_requires_finite(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        with pytest.raises(ValueError):
            Snapshot(values=np.array([np.nan, 1.0]), time=0.0, grid=g)
