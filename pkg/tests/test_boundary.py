import math

import numpy as np
import pytest

from hypfield.boundary import (
    BoundarySource,
    h_plus,
    h_plus_at_points,
    h_plus_forms,
    k_constant,
    k_constant_log,
    k_table,
    sector_lower_bound_audit,
)
from hypfield.errors import ConfigurationError
from hypfield.geometry import DiskPoint, Point, Sector, convert
from hypfield.greens import ModelParams
from hypfield.tessellation import conical_sequence

B0, B1 = math.pi / 6, math.pi / 3


def test_bump_support_and_flatness():
    h = BoundarySource.bump(B0, B1, amplitude=2.0)
    assert h(np.array([B0 - 0.01]))[0] == 0.0
    assert h(np.array([B1 + 0.01]))[0] == 0.0
    # positive wherever the double-exponential tail is representable
    inside = np.linspace(B0 + 0.04, B1 - 0.04, 50)
    assert (h(inside) > 0.0).all()
    # infinitely flat endpoints: below 1e-300 within 1e-6 of the ends
    assert h(np.array([B0 + 1e-6]))[0] < 1e-300
    assert h(np.array([B1 - 1e-6]))[0] < 1e-300
    # amplitude is the peak value
    assert h(np.array([(B0 + B1) / 2.0]))[0] == pytest.approx(2.0)


def test_bump_wraps_angles():
    h = BoundarySource.bump(B0, B1)
    mid = (B0 + B1) / 2.0
    assert h(np.array([mid + 2.0 * math.pi]))[0] == pytest.approx(h(np.array([mid]))[0])


def test_bump_validation():
    with pytest.raises(ConfigurationError):
        BoundarySource.bump(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        BoundarySource("gaussian")


def test_tabulated_constant():
    h = BoundarySource.constant(3.5)
    grid = np.linspace(-math.pi, math.pi, 17)
    assert np.abs(h(grid) - 3.5).max() < 1e-12


def test_h_plus_zero_source(mp2):
    h = BoundarySource.bump(B0, B1, amplitude=0.0)
    assert h_plus(mp2, h, 0.5, 0.3) == 0.0


def test_h_plus_uniform_closed_form(mp2):
    # H_+ 1 = sqrt(pi) Gamma(D - 1/2)/Gamma(D) * z^(1-D); D = 2 gives (pi/2)/z
    h = BoundarySource.constant(1.0)
    for z, zeta in ((0.37, 1.3), (1.0, 0.0), (0.05, -2.0)):
        expect = math.sqrt(math.pi) * math.gamma(1.5) / math.gamma(2.0) * z ** (-1.0)
        assert h_plus(mp2, h, z, zeta) == pytest.approx(expect, rel=1e-6)


def test_h_plus_uniform_massless_limit():
    # at Delta_+ = 1 the closed form is pi * z^0 = pi
    mp1 = ModelParams(1e-12)
    h = BoundarySource.constant(1.0)
    assert h_plus(mp1, h, 0.43, 0.8) == pytest.approx(math.pi, rel=1e-6)


def test_h_plus_two_forms_agree(mp2):
    h = BoundarySource.bump(B0, B1)
    worst = 0.0
    for z in np.geomspace(0.02, 1.0, 5):
        for zeta in np.linspace(0.0, 1.0, 4):
            direct, subst = h_plus_forms(mp2, h, float(z), float(zeta))
            worst = max(worst, abs(direct - subst) / max(abs(direct), 1e-300))
    assert worst < 1e-8


def test_h_plus_linearity(mp2):
    angles = np.linspace(-math.pi, math.pi, 33)
    rng = np.random.default_rng(2)
    v1, v2 = rng.uniform(0.1, 1.0, size=(2, 33))
    v1[-1], v2[-1] = v1[0], v2[0]
    h1 = BoundarySource.tabulated(angles, v1)
    h2 = BoundarySource.tabulated(angles, v2)
    combo = BoundarySource.tabulated(angles, 2.0 * v1 + 3.0 * v2)
    z, zeta = 0.4, 0.7
    lhs = h_plus(mp2, combo, z, zeta)
    rhs = 2.0 * h_plus(mp2, h1, z, zeta) + 3.0 * h_plus(mp2, h2, z, zeta)
    assert abs(lhs - rhs) <= 1e-9 * abs(lhs)


def test_h_plus_positivity(mp2):
    h = BoundarySource.bump(B0, B1)
    rng = np.random.default_rng(4)
    for _ in range(40):
        z, zeta = rng.uniform(0.05, 2.0), rng.uniform(-3.0, 3.0)
        assert h_plus(mp2, h, z, zeta) >= 0.0


def test_sector_audit_empty(mp2):
    h = BoundarySource.bump(B0, B1)
    rep = sector_lower_bound_audit(mp2, h, Sector(0.5, B0 + 0.1, B1 - 0.1), 0)
    assert rep["n_samples"] == 0 and not rep["passed"]


def test_sector_audit_positive_and_stable(mp2):
    h = BoundarySource.bump(B0, B1)
    span = B1 - B0
    sector = Sector(0.5, B0 + span / 3.0, B1 - span / 3.0)
    rep = sector_lower_bound_audit(mp2, h, sector, 2000, seed=5)
    assert not rep["inconclusive"]
    assert rep["min_product"] > 0.0
    assert abs(rep["min_product"] - rep["min_first_half"]) <= 0.10 * rep["min_first_half"]


def test_sector_audit_uniform_is_constant(mp2):
    # for h = 1 the product equals the Beta constant at every point
    h = BoundarySource.constant(1.0)
    sector = Sector(0.4, 0.2, 1.1)
    rep = sector_lower_bound_audit(mp2, h, sector, 200, seed=6)
    const = math.sqrt(math.pi) * math.gamma(1.5) / math.gamma(2.0)
    assert rep["min_product"] == pytest.approx(const, rel=1e-6)
    assert rep["inconclusive"]  # constant source has no bump segment flag


def test_sector_audit_outside_support_flag(mp2):
    h = BoundarySource.bump(B0, B1)
    rep = sector_lower_bound_audit(mp2, h, Sector(0.5, B0 - 0.2, B1), 50, seed=7)
    assert rep["inconclusive"]


def test_k_zero_source(mp2, tess344_small):
    h = BoundarySource.bump(B0, B1, amplitude=0.0)
    assert k_constant(mp2, h, 1.0, tess344_small.tiles[0]) == 1.0


def test_k_grid_refinement_stable(mp2, tess344_small):
    h = BoundarySource.bump(B0, B1)
    k4 = k_constant(mp2, h, 1.0, tess344_small.tiles[0], grid=4)
    k8 = k_constant(mp2, h, 1.0, tess344_small.tiles[0], grid=8)
    assert abs(k8 - k4) <= 0.01 * k4


def test_k_sign_of_alpha(mp2, tess344_small):
    h = BoundarySource.bump(B0, B1)
    tile = tess344_small.tiles[0]
    _, m_min = k_constant_log(mp2, h, 1.0, tile)
    _, m_max = k_constant_log(mp2, h, -1.0, tile)
    assert m_min <= m_max  # min of H for alpha > 0, max for alpha < 0
    assert k_constant(mp2, h, -1.0, tile) < 1.0 < k_constant(mp2, h, 1.0, tile)


def test_k_increases_along_conical_sequence(mp2, tess344_big):
    h = BoundarySource.bump(B0, B1)
    a = tess344_big.tiles[0].centroid
    ids = conical_sequence(tess344_big, math.pi / 4, a, 7, 0.6, min_step=0.35)
    ks = [k_constant_log(mp2, h, 1.0, tess344_big.tiles[t])[0] for t in ids]
    assert all(b > a_ for a_, b in zip(ks[-5:], ks[-4:]))


def test_k_table_rows(mp2, tess344_small):
    h = BoundarySource.bump(B0, B1)
    rows = k_table(mp2, h, 1.0, tess344_small, [0, 1], grid=3)
    assert [r["tile_id"] for r in rows] == [0, 1]
    for r in rows:
        assert r["k_j"] > 0.0 and r["z_centroid"] > 0.0


def test_h_plus_at_points_matches_scalar(mp2, tess344_small):
    h = BoundarySource.bump(B0, B1)
    pts = [Point.from_vec(v) for v in tess344_small.centroids[:3]]
    vec = h_plus_at_points(mp2, h, pts)
    for p, v in zip(pts, vec):
        hp = convert(p, "halfplane")
        assert v == pytest.approx(h_plus(mp2, h, hp.z, hp.zeta), rel=1e-12)
