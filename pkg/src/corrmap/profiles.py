"""Reference correlation profiles.

``EXAMPLE_1_ROWS`` .. ``EXAMPLE_3_ROWS`` are the worked examples and the first simulation
setup; ``scenario_*`` build the four Monte Carlo setups. Rows list
coefficients in lexicographic pair order (12, 13, ..., (P-1)P).
"""

from __future__ import annotations

from .model import CorrelationProfile, pair_list

# P=3, n=5: one component shared by all sets, three pairwise, one uncorrelated.
EXAMPLE_1_ROWS = [
    [0.5, 0.6, 0.6],
    [0.7, 0.0, 0.0],
    [0.0, 0.0, 0.8],
    [0.0, 0.4, 0.0],
    [0.0, 0.0, 0.0],
]

# P=4, n=4.
EXAMPLE_2_ROWS = [
    [0.0, 0.0, 0.0, 0.7, 0.2, 0.8],
    [0.0, 0.6, 0.4, 0.0, 0.0, 0.5],
    [0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
]

# P=4: the three correlated components of the first simulation setup.
EXAMPLE_3_ROWS = [
    [0.63, 0.78, 0.69, 0.81, 0.64, 0.91],
    [0.62, 0.67, 0.74, 0.71, 0.82, 0.91],
    [0.84, 0.81, 0.72, 0.57, 0.71, 0.62],
]

SCENARIO_I_DIM = 7
SCENARIO_I_SAMPLES = 350
SCENARIO_IV_DIM = 4
SCENARIO_IV_SAMPLES = 250


def example_1() -> CorrelationProfile:
    return CorrelationProfile.from_table(3, EXAMPLE_1_ROWS)


def example_2() -> CorrelationProfile:
    return CorrelationProfile.from_table(4, EXAMPLE_2_ROWS)


def example_3(n_components: int = 3) -> CorrelationProfile:
    """``EXAMPLE_3_ROWS`` padded with ``n_components - 3`` uncorrelated components."""
    rows = EXAMPLE_3_ROWS + [[0.0] * 6] * (n_components - 3)
    return CorrelationProfile.from_table(4, rows)


def scenario_i() -> CorrelationProfile:
    """P=4, n=7, d = d_all = 3."""
    return example_3(SCENARIO_I_DIM)


def scenario_ii() -> CorrelationProfile:
    """P=4, n=7, d=3, d_all=1.

    Component 1 spans all sets, component 2 sets {2,3,4}, component 3 sets
    {2,4}; coefficients are the matching entries of ``EXAMPLE_3_ROWS``.
    """
    t = EXAMPLE_3_ROWS
    comps = {
        0: [(p, q, rho) for (p, q), rho in zip(pair_list(4), t[0])],
        1: [(1, 2, t[1][3]), (1, 3, t[1][4]), (2, 3, t[1][5])],
        2: [(1, 3, t[2][4])],
    }
    return CorrelationProfile.from_pairs(4, SCENARIO_I_DIM, comps)


def scenario_iii(rho: float, n_components: int = SCENARIO_I_DIM) -> CorrelationProfile:
    """P=5, d = d_all = 2, with the correlations of data set 1 set to ``rho``.

    All other coefficients of components 1 and 2 are 0.7.
    """
    comps = {}
    for i in (0, 1):
        pairs = []
        for p in range(5):
            for q in range(p + 1, 5):
                pairs.append((p, q, rho if p == 0 else 0.7))
        comps[i] = pairs
    return CorrelationProfile.from_pairs(5, n_components, comps)


def scenario_iii_varied_entries() -> list[tuple[int, int, int]]:
    """``(component, p, q)`` entries that a rho sweep replaces (0-based)."""
    return [(i, 0, q) for i in (0, 1) for q in range(1, 5)]


def scenario_iv(rho: float = 0.7) -> CorrelationProfile:
    """P=5, n=4, d=3, d_all=1.

    Component 1 spans all sets, component 2 all but set 4, component 3 sets
    {1,4,5}; component 4 is uncorrelated.
    """
    groups = [range(5), [0, 1, 2, 4], [0, 3, 4]]
    comps = {i: [(p, q, rho) for p in g for q in g if p < q] for i, g in enumerate(groups)}
    return CorrelationProfile.from_pairs(5, SCENARIO_IV_DIM, comps)


def uncorrelated(p_sets: int, n_components: int) -> CorrelationProfile:
    return CorrelationProfile.identity(p_sets, n_components)


BUILTIN = {
    "example1": example_1,
    "example2": example_2,
    "example3": example_3,
    "scenario-i": scenario_i,
    "scenario-ii": scenario_ii,
    "scenario-iii": lambda: scenario_iii(0.7),
    "scenario-iv": scenario_iv,
}
