"""Bond and site percolation, hexagon coarse-graining and site classifications."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import crossing_oracle, gilbert_oracle, good_power_oracle, n_good_oracle, tame_oracle
from percsim.environments import PVTStabilization
from percsim.errors import InfeasibleError
from percsim.graphs import SinrParams
from percsim.lattice import (
    BondLattice,
    SiteClassification,
    TriangularSiteLattice,
    bond_crossing,
    classify_good_random_power,
    classify_n_good,
    classify_n_tame,
    hex_centers,
    hex_of_points,
    hexagon_coarse_grain,
    hexagon_open_probability,
    hexagon_threshold_interval,
    origin_cluster,
    peierls_supercritical_bound,
    rhombus_crossing,
    sample_bond_lattice,
    saw_subcritical_bound,
    site_percolation_crossing,
    triangular_rhombus,
)
from percsim.pathloss import PathLoss, shifted_pathloss
from percsim.point_processes import MarkedPointCloud, PointCloud, RngStream, Window, sample_ppp

SQRT3 = math.sqrt(3.0)


class TestBond:
    def test_p_zero(self):
        lat = sample_bond_lattice(2, 9, 0.0, RngStream(0))
        assert not lat.open.any()
        assert origin_cluster(lat) == {(4, 4)}
        assert not bond_crossing(lat)

    def test_p_one(self):
        lat = sample_bond_lattice(3, 5, 1.0, RngStream(0))
        assert len(origin_cluster(lat)) == 125
        assert len(np.unique(lat.labels())) == 1
        assert bond_crossing(lat) and bond_crossing(lat, axis=2)

    def test_flag_layout(self):
        lat = sample_bond_lattice(2, 6, 0.5, RngStream(1))
        assert lat.open.shape == (2, 6, 6)
        # edges leaving the box are stored closed
        assert not lat.open[0, -1, :].any() and not lat.open[1, :, -1].any()
        assert lat.edge_mask().sum() == 2 * 6 * 5

    def test_open_fraction(self):
        lat = sample_bond_lattice(2, 200, 0.5, RngStream(2))
        frac, m = lat.open_fraction()
        assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / m)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            sample_bond_lattice(2, 5, 1.5, RngStream(0))
        with pytest.raises(ValueError):
            sample_bond_lattice(0, 5, 0.5, RngStream(0))

    @pytest.mark.parametrize("seed", range(10))
    def test_origin_cluster_matches_union_find(self, seed):
        lat = sample_bond_lattice(2, 30, 0.5, RngStream(seed))
        lab = lat.labels()
        want = {tuple(s) for s in np.argwhere(lab == lab[lat.origin]).tolist()}
        assert origin_cluster(lat) == want

    def test_subcritical_clusters_small(self):
        rng = RngStream(3)
        sizes = np.array([len(origin_cluster(sample_bond_lattice(2, 64, 0.2, rng.spawn(i)))) for i in range(2000)])
        assert (sizes > 100).sum() == 0
        assert sizes.mean() < 5

    def test_csv(self, tmp_path):
        lat = sample_bond_lattice(2, 3, 0.5, RngStream(0))
        lat.to_csv(tmp_path / "b.csv")
        rows = (tmp_path / "b.csv").read_text().splitlines()
        assert rows[0] == "x0,x1,axis,open"
        assert len(rows) == 1 + 2 * 3 * 2


class TestCountingBounds:
    def test_saw_values(self):
        assert saw_subcritical_bound(0.2, 2, 20) == pytest.approx(0.8**20, rel=1e-14)
        assert saw_subcritical_bound(0.2, 2, 20) == pytest.approx(0.01153, abs=5e-6)
        for n in (1, 7, 50):
            assert saw_subcritical_bound(0.25, 2, n) == 1.0
        assert np.all(np.diff([saw_subcritical_bound(0.2, 2, n) for n in range(30)]) < 0)
        with pytest.raises(ValueError):
            saw_subcritical_bound(1.2, 2, 3)

    def test_peierls_values(self):
        assert peierls_supercritical_bound(0.9) == pytest.approx(0.4**6 / 0.84, rel=1e-12)
        assert peierls_supercritical_bound(0.9) == pytest.approx(0.004876, abs=5e-7)
        # starting at n = 0 adds exactly the q^4 term
        q = 0.4
        assert peierls_supercritical_bound(0.9, start=0) == pytest.approx(
            peierls_supercritical_bound(0.9) + q**4, rel=1e-12)
        assert peierls_supercritical_bound(1.0) == 0.0
        assert peierls_supercritical_bound(0.999) == pytest.approx(0.004**6 / (1 - 0.004**2), rel=1e-12)

    def test_peierls_matches_partial_sums(self):
        q = 4 * (1 - 0.8)
        partial = math.fsum(q ** (2 * n + 4) for n in range(1, 400))
        assert peierls_supercritical_bound(0.8) == pytest.approx(partial, rel=1e-12)

    @pytest.mark.parametrize("p", [0.75, 0.5, 0.0])
    def test_peierls_requires_summable_series(self, p):
        with pytest.raises(ValueError):
            peierls_supercritical_bound(p)


class TestTriangular:
    def test_neighbor_counts(self):
        lat = triangular_rhombus(8, 0.5, RngStream(0))
        cnt = lat.neighbor_counts()
        interior = np.all((lat.coords > 0) & (lat.coords < 7), axis=1)
        assert np.all(cnt[interior] == 6)
        assert np.all(cnt[~interior] < 6)

    def test_all_open_all_closed(self):
        for p, want in ((1.0, True), (0.0, False)):
            lat = triangular_rhombus(10, p, RngStream(0))
            assert site_percolation_crossing(lat) is want
            assert rhombus_crossing(lat.dense()[0]) is want

    def test_diagonal_adjacency(self):
        # (q, r) -> (q + 1, r - 1) is a neighbour; (q + 1, r + 1) is not
        grid = np.zeros((3, 3), bool)
        grid[0, 2] = grid[1, 1] = grid[2, 0] = True
        assert rhombus_crossing(grid)
        grid = np.zeros((3, 3), bool)
        grid[0, 0] = grid[1, 1] = grid[2, 2] = True
        assert not rhombus_crossing(grid)

    def test_dense_and_sparse_agree(self):
        rng = RngStream(4)
        for i in range(50):
            lat = triangular_rhombus(12, 0.5, rng.spawn(i))
            assert site_percolation_crossing(lat) == rhombus_crossing(lat.dense()[0])

    def test_sharp_transition(self):
        rng = RngStream(5)
        reps = 10_000
        hi = np.mean([rhombus_crossing(rng.spawn(0).spawn(i).generator().random((64, 64)) < 0.55) for i in range(reps)])
        lo = np.mean([rhombus_crossing(rng.spawn(1).spawn(i).generator().random((64, 64)) < 0.45) for i in range(reps)])
        se = math.sqrt((hi * (1 - hi) + lo * (1 - lo)) / reps)
        assert hi - lo - 3 * se > 0.3

    def test_with_p_monotone(self):
        lat = triangular_rhombus(20, 0.3, RngStream(6))
        prev = False
        for p in np.linspace(0, 1, 21):
            cur = site_percolation_crossing(lat.with_p(p))
            assert cur >= prev
            prev = cur

    def test_csv(self, tmp_path):
        lat = triangular_rhombus(2, 1.0, RngStream(0))
        lat.to_csv(tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text().splitlines() == ["q,r,open", "0,0,1", "0,1,1", "1,0,1", "1,1,1"]


class TestHexagons:
    def test_interval(self):
        lo, hi = hexagon_threshold_interval()
        base = math.log(2.0) / (3.0 * SQRT3)
        assert lo == pytest.approx(2 * base, rel=1e-15)
        assert hi == pytest.approx(26 * base, rel=1e-15)
        assert lo == pytest.approx(0.26679, abs=5e-6)
        assert hi == pytest.approx(3.46830, abs=5e-6)
        assert hi / lo == pytest.approx(13.0, rel=1e-14)

    def test_open_probability(self):
        area = 3 * SQRT3 / 2
        assert area == pytest.approx(2.59808, abs=5e-6)
        assert hexagon_open_probability(0.3, 1.0) == pytest.approx(1 - math.exp(-0.3 * area), rel=1e-15)
        assert hexagon_open_probability(0.3, 1.0) == pytest.approx(0.54133, abs=5e-6)
        assert hexagon_open_probability(0.0, 1.0) == 0.0

    def test_empty_cloud(self):
        cloud = PointCloud(Window(2, 10.0), np.empty((0, 2)))
        lat = hexagon_coarse_grain(cloud, 1.0)
        assert len(lat) > 0 and not lat.open.any()
        assert not site_percolation_crossing(lat)

    def test_origin_hexagon_and_centers(self):
        assert np.array_equal(hex_of_points(np.array([[0.0, 0.0], [0.4, 0.3]]), 1.0), [[0, 0], [0, 0]])
        c = hex_centers(np.array([[1, 0], [0, 1]]), 2.0)
        assert np.allclose(c, [[3.0, SQRT3], [0.0, 2 * SQRT3]])
        # neighbouring centres are sqrt(3) s apart
        assert np.linalg.norm(c[0] - c[1]) == pytest.approx(2 * SQRT3)

    def test_open_iff_nonempty(self):
        cloud = sample_ppp(Window(2, 10.0), 0.5, RngStream(7))
        lat = hexagon_coarse_grain(cloud, 1.0)
        owners = {tuple(o) for o in hex_of_points(cloud.points, 1.0).tolist()}
        got = {tuple(c) for c, o in zip(lat.coords.tolist(), lat.open) if o}
        assert got == owners

    def test_interior_sites_have_six_neighbours(self):
        cloud = PointCloud(Window(2, 10.0), np.empty((0, 2)))
        lat = hexagon_coarse_grain(cloud, 1.0)
        cnt = lat.neighbor_counts()
        # hexagons clear of the box edges by a positive gap
        c, hh = lat.centers, SQRT3 / 2
        clear = (c[:, 0] - 1 > 0) & (c[:, 0] + 1 < 10) & (c[:, 1] - hh > 0) & (c[:, 1] + hh < 10)
        assert clear.sum() > 20
        assert np.all(cnt[clear] == 6)

    def test_open_fraction_by_intensity(self):
        s = 1.0
        for lam in (0.1, 0.3, 1.0):
            cloud = sample_ppp(Window(2, 200.0), lam, RngStream(8, 0, (int(lam * 10),)))
            lat = hexagon_coarse_grain(cloud, s)
            inner = ~lat.boundary
            m = int(inner.sum())
            assert m >= 10_000
            frac = lat.open[inner].mean()
            p = hexagon_open_probability(lam, s)
            assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / m)


@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.1, 5.0))
def test_hexagon_assignment_is_nearest_center(seed, s):
    pts = np.random.default_rng(seed).uniform(-20, 20, (200, 2))
    own = hex_of_points(pts, s)
    mine = np.linalg.norm(pts - hex_centers(own, s), axis=1)
    offs = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, -1], [-1, 1],
                     [2, -1], [-2, 1], [1, 1], [-1, -1], [1, -2], [-1, 2]])
    for k, o in enumerate(offs):
        other = np.linalg.norm(pts - hex_centers(own + o, s), axis=1)
        assert np.all(mine <= other + 1e-12 * s)
    # each point sits inside its own flat-top hexagon (circumradius s)
    assert np.all(mine <= s * (1 + 1e-12))


@pytest.mark.parametrize("seed", range(30))
def test_continuum_crossing_implies_hexagon_crossing(seed):
    # s > 1: steps shorter than 1 never skip a hexagon
    L, margin, s = 12.0, 1.0, 1.2
    cloud = sample_ppp(Window(2, L), 1.5, RngStream(seed))
    cont = crossing_oracle(cloud.points, gilbert_oracle(cloud.points, 1.0), L, margin)
    if cont:
        assert site_percolation_crossing(hexagon_coarse_grain(cloud, s, margin))


def test_continuum_implication_is_not_vacuous():
    L, margin = 12.0, 1.0
    hits = sum(crossing_oracle(c.points, gilbert_oracle(c.points, 1.0), L, margin)
               for c in (sample_ppp(Window(2, L), 1.5, RngStream(seed)) for seed in range(30)))
    assert 5 <= hits <= 29


@pytest.mark.parametrize("seed", range(30))
def test_hexagon_crossing_implies_continuum_crossing(seed):
    # s < 1/sqrt(13): points of neighbouring hexagons are closer than 1;
    # a boundary hexagon may hold its point up to 2 s inside the strip
    L, margin, s = 6.0, 0.25, 0.26
    cloud = sample_ppp(Window(2, L), 7.0, RngStream(100 + seed))
    lat = hexagon_coarse_grain(cloud, s, margin)
    if site_percolation_crossing(lat):
        assert crossing_oracle(cloud.points, gilbert_oracle(cloud.points, 1.0), L, margin + 2 * s)


def test_hexagon_implication_is_not_vacuous():
    L, margin, s = 6.0, 0.25, 0.26
    assert s < 1 / math.sqrt(13)
    hits = sum(site_percolation_crossing(hexagon_coarse_grain(sample_ppp(Window(2, L), 7.0, RngStream(100 + k)), s, margin))
               for k in range(30))
    assert 5 <= hits <= 30


class TestNGood:
    def test_empty_cloud_all_bad(self):
        cloud = PointCloud(Window(2, 6.0), np.empty((0, 2)))
        cls = classify_n_good(cloud, None, 1.0, 1.0)
        assert not cls.flags.any()
        assert cls.conditions["stabilized"].all()
        assert not cls.conditions["occupied"].any()

    @pytest.mark.parametrize("use_pvt", [False, True])
    def test_matches_literal_oracle(self, use_pvt):
        for k in range(25):
            gen = np.random.default_rng(k)
            win = Window(2, 8.0, 3.0)
            cloud = sample_ppp(win, 1.5, RngStream(200 + k))
            n, r = (1.0, 1.0) if k % 2 else (2.0, 0.8)
            stab = PVTStabilization(sample_ppp(win, 0.5, RngStream(300 + k))) if use_pvt else None
            sites = gen.integers(-1, int(8 / n) + 2, (8, 2))
            cls = classify_n_good(cloud, stab, n, r, sites)
            sup = stab.sup_over_cube if stab else (lambda c, side: 0.0)
            want = n_good_oracle(cloud.points, sites, n, r, sup)
            got = list(zip(cls.conditions["stabilized"], cls.conditions["occupied"], cls.conditions["connected"]))
            assert [tuple(map(bool, g)) for g in got] == [tuple(map(bool, w)) for w in want]
            assert np.array_equal(cls.flags, np.array([all(w) for w in want]))

    def test_reevaluation_reproduces(self):
        cloud = sample_ppp(Window(2, 8.0, 3.0), 1.5, RngStream(9))
        a = classify_n_good(cloud, None, 1.0, 1.0)
        b = classify_n_good(cloud, None, 1.0, 1.0)
        assert np.array_equal(a.flags, b.flags) and np.array_equal(a.boundary, b.boundary)

    def test_boundary_flags(self):
        cloud = sample_ppp(Window(2, 12.0, 0.0), 2.0, RngStream(10))
        cls = classify_n_good(cloud, None, 1.0, 1.0)
        # Q_6(z) inside [0, 12]^2 iff 3 <= z <= 9 on both axes
        inside = np.all((cls.sites >= 3) & (cls.sites <= 9), axis=1)
        assert np.array_equal(~cls.boundary, inside)

    def test_crossing_and_csv(self, tmp_path):
        sites = np.stack(np.meshgrid(np.arange(4), np.arange(4), indexing="ij"), -1).reshape(-1, 2)
        flags = np.ones(16, bool)
        cls = SiteClassification(sites, flags, np.zeros(16, bool), {"a": flags}, {})
        assert site_percolation_crossing(cls)
        cls.flags = np.zeros(16, bool)
        assert not site_percolation_crossing(cls)
        cls.flags = sites[:, 1] == 2  # a full row along axis 0
        assert cls.crossing(axis=0) and not cls.crossing(axis=1)
        cls.to_csv(tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == "z0,z1,flag,boundary,a"


class TestGoodPower:
    def params(self):
        return SinrParams(N0=1.0, gamma=0.0, tau=0.0625)

    def test_delta_example(self):
        ell = PathLoss.min_power_law(4.0)
        cloud = MarkedPointCloud(PointCloud(Window(2, 4.0), np.array([[1.0, 1.0]])), np.array([2.0]))
        cls = classify_good_random_power(cloud, self.params(), ell, 1.0)
        assert cls.params["delta"] == pytest.approx(1.0, rel=1e-15)

    def test_weak_powers_all_bad(self):
        ell = PathLoss.min_power_law(4.0)
        base = sample_ppp(Window(2, 6.0), 2.0, RngStream(11))
        cloud = MarkedPointCloud(base, np.full(len(base), 0.9))
        assert not classify_good_random_power(cloud, self.params(), ell, 1.0).flags.any()

    def test_infeasible_level(self):
        ell = PathLoss.min_power_law(4.0)
        cloud = MarkedPointCloud(PointCloud(Window(2, 4.0), np.array([[1.0, 1.0]])), np.array([2.0]))
        with pytest.raises(InfeasibleError):
            classify_good_random_power(cloud, self.params(), ell, 0.01)
        with pytest.raises(TypeError):
            classify_good_random_power(cloud.base, self.params(), ell, 1.0)

    def test_matches_literal_oracle(self):
        ell = PathLoss.min_power_law(4.0)
        for k in range(30):
            gen = np.random.default_rng(k)
            base = sample_ppp(Window(2, 6.0, 3.0), 1.5, RngStream(400 + k))
            cloud = MarkedPointCloud(base, gen.uniform(0.5, 2.0, len(base)))
            r = float(gen.uniform(0.5, 1.5))
            sites = gen.integers(-1, 8, (10, 2))
            cls = classify_good_random_power(cloud, self.params(), ell, r, sites)
            want = good_power_oracle(cloud.points, cloud.marks, sites, r, cls.params["delta"])
            assert list(zip(cls.conditions["strong"].tolist(), cls.conditions["connected"].tolist())) == want

    def test_strength_condition_monotone_in_level(self):
        # raising r never makes a weak site strong; the joint flag is not
        # monotone because delta grows with r
        ell = PathLoss.min_power_law(4.0)
        base = sample_ppp(Window(2, 8.0, 3.0), 1.5, RngStream(12))
        cloud = MarkedPointCloud(base, np.random.default_rng(0).uniform(0.5, 2.0, len(base)))
        prev = None
        for r in np.linspace(0.5, 2.0, 16):
            strong = classify_good_random_power(cloud, self.params(), ell, r).conditions["strong"]
            if prev is not None:
                assert not np.any(strong & ~prev)
            prev = strong


class TestTame:
    ell = PathLoss.power_law_one_plus(4.0)

    def test_empty_cloud_all_tame(self):
        cloud = PointCloud(Window(2, 6.0), np.empty((0, 2)))
        cls = classify_n_tame(cloud, self.ell, 1.0, 0.0)
        assert cls.flags.all()
        assert not cls.extra["I_in"].any()

    def test_matches_literal_oracle_and_splitting(self):
        for k in range(10):
            gen = np.random.default_rng(k)
            cloud = sample_ppp(Window(2, 10.0, 20.0), 0.3, RngStream(500 + k))
            n, M = float(gen.choice([0.5, 1.0])), float(gen.uniform(20, 120))
            sites = gen.integers(0, 6, (6, 2))
            cls = classify_n_tame(cloud, self.ell, n, M, None, sites)
            want = tame_oracle(cloud.points, sites, n, M, 2, self.ell, self.ell.at_zero)
            for t, (i_in, i_out, _) in enumerate(want):
                assert cls.extra["I_in"][t] == pytest.approx(i_in, rel=1e-10)
                assert cls.extra["I_out"][t] == pytest.approx(i_out, rel=1e-10, abs=1e-300)
                assert bool(cls.flags[t]) == (cls.extra["I_in"][t] <= M)
            # I_{6n} = I_in + I_out per sample
            for t, z in enumerate(sites):
                dist = np.linalg.norm(cloud.points - n * z, axis=1)
                total = float(shifted_pathloss(self.ell, 6 * n, dist).sum())
                assert cls.extra["I_in"][t] + cls.extra["I_out"][t] == pytest.approx(total, rel=1e-12)

    def test_mean_inner_interference_bound(self):
        lam, n = 0.2, 0.5
        side = 12 * n * math.sqrt(2)
        vals = []
        rng = RngStream(13)
        for i in range(400):
            cloud = sample_ppp(Window(2, 3 * side, 0.0), lam, rng.spawn(i))
            cls = classify_n_tame(cloud, self.ell, n, 1.0, None, np.array([[int(1.5 * side / n)] * 2]))
            vals.append(cls.extra["I_in"][0])
        vals = np.array(vals)
        bound = self.ell.at_zero * lam * (12 * n * math.sqrt(2)) ** 2
        assert vals.mean() <= bound + 3 * vals.std(ddof=1) / math.sqrt(vals.size)

    def test_pvt_stabilization_condition(self):
        win = Window(2, 10.0, 12.0)
        cloud = sample_ppp(win, 0.5, RngStream(14))
        stab = PVTStabilization(sample_ppp(win, 1.0, RngStream(15)))
        cls = classify_n_tame(cloud, self.ell, 1.0, 1e9, stab, np.array([[2, 2], [5, 5]]))
        for t, z in enumerate(cls.sites):
            want = stab.sup_over_cube(1.0 * z, 12 * math.sqrt(2)) < 0.5
            assert cls.conditions["stabilized"][t] == want


@given(seed=st.integers(0, 1000), m1=st.floats(0, 50), m2=st.floats(0, 50))
def test_tame_monotone_in_M(seed, m1, m2):
    lo, hi = sorted((m1, m2))
    cloud = sample_ppp(Window(2, 6.0, 6.0), 0.3, RngStream(seed))
    ell = PathLoss.power_law_one_plus(4.0)
    a = classify_n_tame(cloud, ell, 0.5, lo).flags
    b = classify_n_tame(cloud, ell, 0.5, hi).flags
    assert not np.any(a & ~b)


@given(seed=st.integers(0, 1000))
def test_bond_crossing_monotone_in_p(seed):
    lat = sample_bond_lattice(2, 16, 0.5, RngStream(seed))
    prev = False
    for p in np.linspace(0, 1, 11):
        cur = bond_crossing(lat.with_p(p))
        assert cur >= prev
        prev = cur


@given(seed=st.integers(0, 1000), r1=st.floats(0.3, 3.0), r2=st.floats(0.3, 3.0))
def test_n_good_monotone_in_radius(seed, r1, r2):
    lo, hi = sorted((r1, r2))
    cloud = sample_ppp(Window(2, 6.0, 3.0), 1.0, RngStream(seed))
    a = classify_n_good(cloud, None, 1.0, lo).flags
    b = classify_n_good(cloud, None, 1.0, hi).flags
    assert not np.any(a & ~b)
