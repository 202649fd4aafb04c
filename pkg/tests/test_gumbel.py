"""Depth clustering vs a brute-force contiguous-partition oracle."""

import numpy as np

from splatfx.effects.snow import alpha_blend_depth, gumbel_depth, gumbel_depth_detailed

ORACLE_WIDTH = 0.5   # max depth spread of a single oracle cluster, world units


def oracle_best_cluster(depths, alphas, width=ORACLE_WIDTH):
    """Enumerate every contiguous run whose spread fits one cluster; pick the
    heaviest by accumulated alpha * transmittance (ties: later run wins)."""
    depths = np.asarray(depths, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    t = np.cumprod(np.concatenate([[1.0], 1.0 - alphas[:-1]]))
    w = alphas * t
    n = len(depths)
    best = (-1.0, 0.0, ())
    for i in range(n):
        for j in range(i, n):
            if depths[j] - depths[i] > width:
                break
            weight = w[i:j + 1].sum()
            if weight >= best[0]:
                mean = float((w[i:j + 1] * depths[i:j + 1]).sum() / weight)
                best = (weight, mean, tuple(range(i, j + 1)))
    return best[1], best[0], best[2]


def test_empty_input():
    assert gumbel_depth([]) == (0.0, 0.0)


def test_single_sample():
    d, w = gumbel_depth([(5.0, 0.9)])
    assert d == 5.0
    assert abs(w - 0.9) < 1e-12


def test_floater_then_surface():
    samples = [(2.0, 0.05), (5.0, 0.6), (5.05, 0.6), (5.1, 0.6)]
    d, w = gumbel_depth(samples)
    assert abs(d - 5.05) < 0.1          # lands on the surface cluster
    assert w > 0.5                       # far above the floater's 0.05

    depths = np.array([s[0] for s in samples])
    alphas = np.array([s[1] for s in samples])
    od, ow, members = oracle_best_cluster(depths, alphas)
    assert abs(d - od) < 0.05
    _, _, winner, _ = gumbel_depth_detailed(samples)
    assert set(winner.members) & set(members)


def test_alpha_blend_is_floater_biased():
    samples = [(2.0, 0.05), (5.0, 0.6), (5.05, 0.6), (5.1, 0.6)]
    d_gumbel, _ = gumbel_depth(samples)
    d_blend = alpha_blend_depth(samples)
    true_depth = 5.05
    assert abs(d_blend - true_depth) > abs(d_gumbel - true_depth)


def test_identical_depths_form_one_cluster():
    samples = [(4.0, 0.3)] * 5
    d, w = gumbel_depth(samples)
    assert d == 4.0
    t = np.cumprod([1.0] + [0.7] * 4)
    assert abs(w - (0.3 * t[:5]).sum()) < 1e-12


def test_two_well_separated_clusters_pick_heavier():
    light = [(1.0, 0.2), (1.05, 0.2)]
    heavy = [(6.0, 0.5), (6.02, 0.5), (6.04, 0.5)]
    d, w = gumbel_depth(light + heavy)
    assert 5.9 < d < 6.1
    # and in reverse weight order the front cluster wins
    d2, _ = gumbel_depth([(1.0, 0.9), (1.01, 0.5)] + [(8.0, 0.2)])
    assert d2 < 1.1


def test_tie_prefers_later_cluster():
    # first cluster w = 0.5, second w = 1.0 * (1 - 0.5) = 0.5: replace on W <= w
    d, _ = gumbel_depth([(1.0, 0.5), (9.0, 1.0)])
    assert d == 9.0


def test_rejects_unordered_samples():
    import pytest
    with pytest.raises(ValueError, match="ascending"):
        gumbel_depth([(5.0, 0.5), (2.0, 0.5)])


def test_gumbel_matches_oracle_on_random_suites(rng):
    agree = 0
    total = 60
    for _ in range(total):
        surface = rng.uniform(4.0, 6.0)
        n_surf = rng.integers(4, 8)
        jitter = np.sort(rng.normal(0.0, 0.02, size=n_surf))
        s_depths = surface + jitter
        s_alphas = rng.uniform(0.4, 0.7, size=n_surf)
        n_float = rng.integers(1, 3)
        f_depths = np.sort(surface - rng.uniform(1.5, 3.0, size=n_float))
        f_alphas = rng.uniform(0.05, 0.2, size=n_float)
        depths = np.concatenate([f_depths, s_depths])
        alphas = np.concatenate([f_alphas, s_alphas])

        d, w, winner, _ = gumbel_depth_detailed((depths, alphas))
        od, ow, members = oracle_best_cluster(depths, alphas)
        if set(winner.members) & set(members) and abs(d - od) <= 0.1:
            agree += 1
    assert agree / total >= 0.95
