import math

import numpy as np
import pytest

from hypfield.errors import (
    CapacityError,
    EnumerationTooSmallError,
    IncompleteOrbitError,
    NotHyperbolicError,
)
from hypfield.geometry import Point, dist, origin, point_at, reflect_in
from hypfield.tessellation import (
    TriangleParams,
    Tile,
    conical_sequence,
    fundamental_triangle,
    generate,
    orbital_count,
    tile_area,
)


def test_params_validation():
    with pytest.raises(NotHyperbolicError):
        TriangleParams(3, 3, 3)  # angle sum exactly pi: Euclidean
    with pytest.raises(NotHyperbolicError):
        TriangleParams(2, 3, 6)
    with pytest.raises(NotHyperbolicError):
        TriangleParams(1, 8, 8)
    TriangleParams(2, 3, 7)


def test_fundamental_angles_and_area():
    # Gauss-Bonnet: area = pi - angle sum
    fund = fundamental_triangle(TriangleParams(3, 4, 4))
    want = (math.pi / 3, math.pi / 4, math.pi / 4)
    for got, expect in zip(fund.angles, want):
        assert got == pytest.approx(expect, abs=1e-10)
    assert tile_area(fund) == pytest.approx(math.pi / 6, abs=1e-9)
    assert tile_area(fundamental_triangle(TriangleParams(2, 3, 7))) == pytest.approx(
        math.pi / 42, abs=1e-9
    )


def test_equilateral_triangle():
    fund = fundamental_triangle(TriangleParams(4, 4, 4))
    v = fund.vertices
    sides = [dist(v[0], v[1]), dist(v[1], v[2]), dist(v[0], v[2])]
    assert max(sides) - min(sides) < 1e-12


def test_canonical_placement():
    fund = fundamental_triangle(TriangleParams(3, 4, 4))
    assert np.abs(fund.vertex_vecs[0] - np.array([0.0, 0.0, 1.0])).max() < 1e-14
    assert abs(fund.vertex_vecs[1][1]) < 1e-14  # second vertex on the real axis


def test_radius_zero_single_tile():
    t = generate(TriangleParams(3, 4, 4), 0.0)
    assert len(t) == 1
    assert t.tiles[0].word == ()


def _brute_force_words(tp, max_len):
    """Oracle: all distinct group elements from words of length <= max_len."""
    fund = fundamental_triangle(tp)
    refls = [reflect_in(s).m for s in fund.sides]
    c1 = fund.centroid.vec
    found = {}  # rounded centroid -> matrix
    frontier = [(np.eye(3), -1)]
    key = lambda m: tuple(np.round(m @ c1, 7))
    found[key(np.eye(3))] = np.eye(3)
    for _ in range(max_len):
        nxt = []
        for m, last in frontier:
            for i in range(3):
                if i == last:
                    continue
                child = m @ refls[i]
                k = key(child)
                if k not in found:
                    found[k] = child
                    nxt.append((child, i))
        frontier = nxt
    return found


def test_generate_matches_word_oracle():
    tp = TriangleParams(3, 4, 4)
    radius = 1.5
    tess = generate(tp, radius)
    # saturate the oracle: word length L and L+1 give the same ball
    prev = None
    for L in (8, 9):
        oracle = _brute_force_words(tp, L)
        ball = {
            k: m
            for k, m in oracle.items()
            if math.acosh(max((m @ tess.centroids[0])[2], 1.0)) <= radius + 1e-9
        }
        if prev is not None:
            assert set(ball) == prev, "oracle not saturated at this word length"
        prev = set(ball)
    assert len(tess) == len(prev)
    mine = {tuple(np.round(c, 7)) for c in tess.centroids}
    assert mine == prev


def test_words_reproduce_tiles(tess344_small):
    tess = tess344_small
    refls = [r.m for r in tess.reflections]
    for t in tess.tiles[:: max(1, len(tess.tiles) // 40)]:
        m = np.eye(3)
        for i in t.word:
            m = m @ refls[i]
        verts = tess.fund_vertices @ m.T
        scale = max(1.0, np.abs(t.vertex_vecs).max())
        assert np.abs(verts - t.vertex_vecs).max() < 1e-10 * scale


def test_locate_centroids(tess344_small):
    tess = tess344_small
    for tid in range(0, len(tess), 7):
        assert tess.locate(Point.from_vec(tess.centroids[tid])) == tid


def test_locate_outside(tess344_small):
    assert tess344_small.locate(point_at(0.3, 8.0)) is None


def test_locate_unique_claim(tess344_small):
    # oracle: exhaustive sign test over all tiles
    tess = tess344_small
    rng = np.random.default_rng(17)
    inner = tess.radius - tess.tile_diameter
    eta = np.array([1.0, 1.0, -1.0])
    for _ in range(10_000):
        p = point_at(rng.uniform(0, 2 * math.pi), rng.uniform(0, inner))
        vals = tess.side_normals @ (p.vec * eta)
        claims = int((vals <= 1e-12 * max(1.0, p.vec[2])).all(axis=1).sum())
        assert claims == 1


def test_orbital_count_basics(tess344_small):
    tess = tess344_small
    c1 = tess.tiles[0].centroid
    assert orbital_count(tess, 1e-6, c1, c1) == 1  # identity only
    counts = [orbital_count(tess, th, c1, c1) for th in (0.5, 1.0, 1.5, 2.0)]
    assert all(b >= a for a, b in zip(counts, counts[1:]))


def test_orbital_count_guard(tess344_small):
    c1 = tess344_small.tiles[0].centroid
    with pytest.raises(IncompleteOrbitError):
        orbital_count(tess344_small, 10.0, c1, c1)


def test_orbital_growth_bound(tess344_big):
    # sup of N(theta) e^{-theta} finite and stable as theta grows
    tess = tess344_big
    c1 = tess.tiles[0].centroid
    vals = [orbital_count(tess, th, c1, c1) * math.exp(-th) for th in np.arange(1.0, 8.1, 0.5)]
    assert max(vals) < 20.0
    assert max(vals[:-2]) > 0.85 * max(vals)  # no blow-up at the deep end


def test_conical_sequence_empty(tess344_small):
    assert conical_sequence(tess344_small, 0.3, tess344_small.tiles[0].centroid, 0, 1.0) == []


def test_conical_sequence_properties(tess344_big):
    tess = tess344_big
    a = tess.tiles[0].centroid
    c = 0.8
    ids = conical_sequence(tess, math.pi / 4, a, 8, c, min_step=0.3)
    assert len(ids) == 8
    g_a = tess.tiles[tess.locate(a)].g
    theta = math.pi / 4
    normal = np.array([-math.sin(theta), math.cos(theta), 0.0])
    eta = np.array([1.0, 1.0, -1.0])
    depths = []
    diam_eucl = []
    for tid in ids:
        gamma = tess.tiles[tid].g @ g_a.inverse()
        ga = gamma.apply(a)
        # inside the tube and marching outward
        assert abs(math.asinh(float(np.dot(ga.vec * eta, normal)))) <= c + 1e-9
        depths.append(dist(origin(), ga))
        dv = [complex(d.x, d.y) for d in tess.tiles[tid].disk_vertices()]
        diam_eucl.append(max(abs(x - y) for x in dv for y in dv))
    assert all(b > a_ for a_, b in zip(depths, depths[1:]))
    # Euclidean diameters strictly decreasing beyond some index
    tail = diam_eucl[2:]
    assert all(b < a_ for a_, b in zip(tail, tail[1:]))


def test_conical_sequence_exhaustion(tess344_small):
    with pytest.raises(EnumerationTooSmallError):
        conical_sequence(tess344_small, 0.3, tess344_small.tiles[0].centroid, 50, 0.5)


def test_tile_area_invariance(tess344_small):
    tess = tess344_small
    areas = [tile_area(t) for t in tess.tiles[::11]]
    assert max(abs(a - math.pi / 6) for a in areas) < 1e-9


def test_tile_area_vs_ball_area(tess344_big):
    # total tile area consistent with the area of the enumerated region
    tess = tess344_big
    total = len(tess) * math.pi / 6
    ball = 2.0 * math.pi * (math.cosh(tess.radius) - 1.0)
    assert abs(total - ball) / ball < 0.01


def test_congruence(tess344_small):
    tess = tess344_small
    rng = np.random.default_rng(23)
    for _ in range(20):
        j, k = rng.integers(0, len(tess), size=2)
        g = tess.tiles[k].g @ tess.tiles[j].g.inverse()
        mapped = tess.tiles[j].vertex_vecs @ g.m.T
        scale = max(1.0, np.abs(tess.tiles[k].vertex_vecs).max())
        assert np.abs(mapped - tess.tiles[k].vertex_vecs).max() < 1e-9 * scale


def test_group_property_words(tess344_small):
    for t in tess344_small.tiles[::9]:
        assert t.g.lorentz_residual() < 1e-10


def test_adjacency(tess344_small):
    tess = tess344_small
    nb = tess.neighbors(0)
    assert len(nb) == 3
    for side, other in enumerate(nb):
        assert other is not None
        # the neighbor through side i is g R_i
        expect = (tess.tiles[0].g @ tess.reflections[side]).m @ tess.centroids[0]
        assert np.abs(expect - tess.centroids[other]).max() < 1e-9


def test_capacity_error():
    with pytest.raises(CapacityError) as exc:
        generate(TriangleParams(3, 4, 4), 6.0, cap=100)
    assert exc.value.partial is not None
    assert len(exc.value.partial) >= 100


def test_export_csv(tmp_path, tess344_small):
    path = tmp_path / "t.csv"
    tess344_small.export_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tile_id,word,v1x,v1y,v2x,v2y,v3x,v3y"
    assert len(lines) == len(tess344_small) + 1
    first = lines[1].split(",")
    assert first[0] == "0" and first[1] == "e"
