import itertools

import numpy as np
import pytest

from renas.cellgraph import (
    CONV1X1,
    CONV3X3,
    INPUT,
    INTERIOR_OPS,
    MAXPOOL3X3,
    OUTPUT,
    canonicalize,
    cell_id,
    validate,
)
from renas.errors import RenasError
from renas.evosearch import (
    EaConfig,
    InvalidConfig,
    TooLarge,
    ea_search,
    enumerate_space,
    exhaustive_search,
)
from renas.pipeline import score_cells

from .test_pipeline import scaled_model


def test_config_validation():
    EaConfig()  # defaults are valid
    with pytest.raises(InvalidConfig):
        EaConfig(p_select=1.5)
    with pytest.raises(InvalidConfig):
        EaConfig(population=1)
    with pytest.raises(InvalidConfig):
        EaConfig(generations=-1)
    with pytest.raises(InvalidConfig):
        EaConfig(max_nodes=8)


def test_enumerate_trivial_and_limits():
    assert [g.n for g in enumerate_space(2)] == [2]
    with pytest.raises(TooLarge):
        enumerate_space(6)
    with pytest.raises(TooLarge):
        enumerate_space(1)


def test_enumerate_three_nodes_matches_brute_force():
    # oracle: raw generate-and-validate over every 3-node combination,
    # deduplicated by canonical text
    seen = set()
    for e01, e02, e12 in itertools.product((0, 1), repeat=3):
        adj = [[0, e01, e02], [0, 0, e12], [0, 0, 0]]
        for op in INTERIOR_OPS:
            try:
                g = validate(adj, [INPUT, op, OUTPUT])
            except RenasError:
                continue
            seen.add(g.to_text())
    space = enumerate_space(3)
    assert {g.to_text() for g in space} == seen
    assert len(space) == 7


def test_enumerate_cells_are_canonical_and_deterministic():
    space = enumerate_space(4)
    assert len(space) == 91
    ids = [cell_id(g) for g in space]
    assert len(set(ids)) == len(ids)
    for g in space:
        assert canonicalize(g) == g
        assert g.edge_count <= 9 and g.n <= 4
    again = enumerate_space(4)
    assert [g.to_text() for g in again] == [g.to_text() for g in space]


def test_exhaustive_search_properties():
    model = scaled_model()
    space = enumerate_space(4)
    top = exhaustive_search(model, space, top_k=10)
    assert len(top) == 10
    scores = [s for _, s in top]
    assert scores == sorted(scores, reverse=True)
    # iteration order must not matter
    rev = exhaustive_search(model, reversed(space), top_k=10)
    assert [(cell_id(g), s) for g, s in rev] == [(cell_id(g), s) for g, s in top]
    single = exhaustive_search(model, space[:1], top_k=5)
    assert len(single) == 1 and single[0][0] == space[0]


def test_exhaustive_matches_direct_scoring():
    model = scaled_model()
    space = sorted(enumerate_space(3), key=cell_id)  # the order search scores in
    top = exhaustive_search(model, space, top_k=len(space))
    direct = dict(zip((cell_id(g) for g in space), score_cells(model, space)))
    for g, s in top:
        assert direct[cell_id(g)] == s


def test_ea_zero_generations_scores_initial_population():
    model = scaled_model()
    cfg = EaConfig(generations=0, population=8, seed=5, top_k=20, max_nodes=4)
    result = ea_search(model, cfg)
    assert 1 <= len(result) <= 8
    for g, s in result:
        assert canonicalize(g) == g
        np.testing.assert_allclose(score_cells(model, [g])[0], s, rtol=1e-9)
    scores = [s for _, s in result]
    assert scores == sorted(scores, reverse=True)


def test_ea_deterministic_per_seed():
    model = scaled_model()
    cfg = EaConfig(generations=5, population=8, seed=11, top_k=5, max_nodes=4)
    a = ea_search(model, cfg)
    b = ea_search(model, cfg)
    assert [(g.to_text(), s) for g, s in a] == [(g.to_text(), s) for g, s in b]
    c = ea_search(model, EaConfig(generations=5, population=8, seed=12, top_k=5, max_nodes=4))
    assert [(g.to_text(), s) for g, s in a] != [(g.to_text(), s) for g, s in c]


def test_ea_results_unique_and_valid():
    model = scaled_model()
    cfg = EaConfig(generations=8, population=10, seed=2, top_k=50, max_nodes=4)
    result = ea_search(model, cfg)
    ids = [cell_id(g) for g, _ in result]
    assert len(set(ids)) == len(ids)
    for g, _ in result:
        validate([list(r) for r in g.adj], list(g.ops))


def test_ea_finds_the_small_space_optimum():
    # 7 cells total: ample generations must reach the exhaustive best
    model = scaled_model(seed=9)
    best_true = exhaustive_search(model, enumerate_space(3), top_k=1)[0][1]
    cfg = EaConfig(generations=30, population=8, seed=0, top_k=1, max_nodes=3)
    found = ea_search(model, cfg)[0][1]
    assert found == pytest.approx(best_true, rel=1e-12)
