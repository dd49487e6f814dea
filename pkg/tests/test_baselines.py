import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinchopt.baselines import (
    BaselineKind,
    claim_nearest,
    place_cup,
    place_rpcs,
    place_upcs,
    rpcs_antenna_count,
    upcs_grid,
)
from pinchopt.model import Scenario, SystemConfig, assign_users
from pinchopt.projection import is_feasible

CFG = SystemConfig()


def setup(users, cfg=CFG):
    sc = Scenario(users)
    return sc, assign_users(cfg, sc)


def test_kinds():
    assert [k.value for k in BaselineKind] == ["CUP", "UPCS", "RPCS"]


def test_cup_examples():
    cfg = SystemConfig(min_spacing=0.2)
    sc, a = setup([[5.0, 0.0], [5.0, 0.0]], cfg)
    np.testing.assert_allclose(place_cup(cfg, sc, a), [4.8, 5.0])
    sc, a = setup([[10.0, 3.0]])
    np.testing.assert_array_equal(place_cup(CFG, sc, a), [10.0])


def test_cup_tends_to_user_positions_as_spacing_vanishes():
    rng = np.random.default_rng(0)
    users = rng.random((30, 2)) * 10
    cfg = SystemConfig(min_spacing=1e-9)
    sc, a = setup(users, cfg)
    np.testing.assert_allclose(place_cup(cfg, sc, a), users[:, 0], atol=1e-7)


def test_upcs_grid():
    grid = upcs_grid(CFG)
    assert grid.size == 101 and grid[0] == 0.0 and grid[-1] == pytest.approx(10.0)
    with pytest.raises(ValueError):
        upcs_grid(CFG, 0.0)


def test_upcs_examples():
    sc, a = setup([[3.14, 0.0]])
    np.testing.assert_allclose(place_upcs(CFG, sc, a), [3.1])
    sc, a = setup([[3.14, 0.0], [3.16, 0.0]])
    np.testing.assert_allclose(place_upcs(CFG, sc, a), [3.1, 3.2])
    sc, a = setup([[3.15, 0.0]])
    np.testing.assert_allclose(place_upcs(CFG, sc, a), [3.1])
    # equidistant within rounding of the grid: lower point wins
    np.testing.assert_allclose(claim_nearest([0.5], np.array([0.0, 1.0])), [0.0])


def test_upcs_second_user_takes_next_nearest_free():
    sc, a = setup([[3.11, 0.0], [3.12, 0.0]])
    np.testing.assert_allclose(place_upcs(CFG, sc, a), [3.1, 3.2])


def test_upcs_projects_when_spacing_exceeds_pitch():
    cfg = SystemConfig(min_spacing=0.2)
    sc, a = setup([[3.14, 0.0], [3.16, 0.0]], cfg)
    x, projected = place_upcs(cfg, sc, a, with_flag=True)
    assert projected
    assert is_feasible(x, a.groups, cfg)[0]
    _, projected = place_upcs(CFG, sc, assign_users(CFG, sc), with_flag=True)
    assert not projected


def test_claim_nearest_rejects_too_few_candidates():
    with pytest.raises(ValueError):
        claim_nearest([1.0, 2.0], np.array([0.0]))


def test_rpcs_antenna_count():
    assert rpcs_antenna_count(CFG, 50) == (50, False)
    assert rpcs_antenna_count(SystemConfig(min_spacing=0.2), 60) == (51, True)


def test_rpcs_single_antenna():
    cfg = SystemConfig(waveguide_length=2.0, min_spacing=0.1)
    sc, a = setup([[1.0, 0.0]], cfg)

    class Fixed:
        def uniform(self, low, high, size):
            return np.full(size, high)

    assert place_rpcs(cfg, sc, a, Fixed(), num_antennas=1).tolist() == [2.0]


def test_rpcs_seeded_determinism():
    rng = np.random.default_rng(5)
    sc, a = setup(rng.random((40, 2)) * 10)
    first = place_rpcs(CFG, sc, a, np.random.default_rng(9))
    second = place_rpcs(CFG, sc, a, np.random.default_rng(9))
    np.testing.assert_array_equal(first, second)


def test_rpcs_too_many_users_for_count():
    sc, a = setup([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        place_rpcs(CFG, sc, a, np.random.default_rng(0), num_antennas=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([CFG.wavelength / 2, 0.1, 0.2]),
       st.integers(1, 50))
def test_baselines_always_feasible(seed, d, k):
    cfg = SystemConfig(min_spacing=d)
    rng = np.random.default_rng(seed)
    sc, a = setup(rng.random((k, 2)) * 10, cfg)
    for x in (place_cup(cfg, sc, a), place_upcs(cfg, sc, a), place_rpcs(cfg, sc, a, rng)):
        ok, reason = is_feasible(x, a.groups, cfg)
        assert ok, reason
