import numpy as np
import pytest

from cppnet.errors import FormatVersionMismatch, TooLarge
from cppnet.oracle import (
    LabelCache,
    brute_force,
    cost_matrix,
    label_pairs,
    labels_from_text,
    labels_to_text,
    nearest_neighbor_tour,
    pairs_to_matrix,
    tour_length,
    tour_to_labels,
    two_opt,
    Tour,
)
from cppnet.scenario import GridMap, generate_scenario

from conftest import bfs_distances, exhaustive_best_open_path


def corridor(n):
    return GridMap(1, n, 1.0, np.zeros((1, n), dtype=bool), (0, 0))


def blocked_center_3x3():
    occ = np.zeros((3, 3), dtype=bool)
    occ[1, 1] = True
    return GridMap(3, 3, 1.0, occ, (0, 0))


def test_cost_matrix_manhattan_on_free_map():
    grid = generate_scenario(10, 10, 1.0, 0.0, seed=0)
    costs = cost_matrix(grid)
    slots = {cell: i for i, cell in enumerate(grid.free_cells())}
    assert costs.cost[slots[(0, 0)], slots[(9, 9)]] == pytest.approx(18.0)
    assert np.allclose(np.diag(costs.cost), 0.0)


def test_cost_matrix_detours_around_obstacle():
    grid = blocked_center_3x3()
    costs = cost_matrix(grid)
    slots = {cell: i for i, cell in enumerate(grid.free_cells())}
    assert costs.cost[slots[(0, 1)], slots[(2, 1)]] == pytest.approx(4.0)


def test_cost_matrix_matches_bfs_oracle():
    grid = generate_scenario(6, 6, 1.0, 0.3, seed=17)
    costs = cost_matrix(grid)
    cells = grid.free_cells()
    for src_slot in (0, len(cells) // 2, len(cells) - 1):
        oracle = bfs_distances(grid, cells[src_slot])
        for j, cell in enumerate(cells):
            assert costs.cost[src_slot, j] == pytest.approx(oracle[cell], abs=1e-9)


def test_cost_matrix_eight_connected():
    grid = generate_scenario(4, 4, 1.0, 0.0, seed=0)
    costs = cost_matrix(grid, connectivity=8)
    slots = {cell: i for i, cell in enumerate(grid.free_cells())}
    assert costs.cost[slots[(0, 0)], slots[(3, 3)]] == pytest.approx(3 * np.sqrt(2.0))
    oracle = bfs_distances(grid, (0, 0), connectivity=8)
    for j, cell in enumerate(grid.free_cells()):
        assert costs.cost[slots[(0, 0)], j] == pytest.approx(oracle[cell], abs=1e-9)


def test_cost_matrix_symmetric():
    grid = generate_scenario(5, 5, 1.0, 0.25, seed=9)
    costs = cost_matrix(grid)
    assert np.allclose(costs.cost, costs.cost.T)


def test_corridor_sweep_is_unique_optimum():
    grid = corridor(6)
    costs = cost_matrix(grid)
    tour = two_opt(costs, 0)
    assert tour.order == (0, 1, 2, 3, 4, 5)
    assert tour.length == pytest.approx(5.0)


def test_2x3_hand_computed_optimum():
    grid = generate_scenario(2, 3, 1.0, 0.0, seed=0)
    costs = cost_matrix(grid)
    # independent exhaustive oracle over all 5! open paths
    oracle_best = exhaustive_best_open_path(costs.cost, 0)
    assert oracle_best == pytest.approx(5.0)
    assert brute_force(costs, 0).length == pytest.approx(5.0)
    assert two_opt(costs, 0).length == pytest.approx(5.0)


def test_two_opt_never_worse_than_nearest_neighbor():
    for seed in range(6):
        grid = generate_scenario(6, 6, 1.0, 0.2 + 0.05 * (seed % 3), seed=seed)
        costs = cost_matrix(grid)
        start = grid.free_cells().index((0, 0))
        nn = nearest_neighbor_tour(costs, start)
        improved = two_opt(costs, start)
        assert improved.length <= nn.length + 1e-9


def test_two_opt_is_locally_optimal():
    grid = generate_scenario(5, 5, 1.0, 0.2, seed=21)
    costs = cost_matrix(grid)
    tour = two_opt(costs, 0)
    order = list(tour.order)
    cost = costs.cost
    n = len(order)
    for a in range(1, n - 1):
        for b in range(a + 1, n):
            if b < n - 1:
                delta = (
                    cost[order[a - 1], order[b]]
                    + cost[order[a], order[b + 1]]
                    - cost[order[a - 1], order[a]]
                    - cost[order[b], order[b + 1]]
                )
            else:
                delta = cost[order[a - 1], order[b]] - cost[order[a - 1], order[a]]
            assert delta >= -1e-9, f"improving reversal ({a}, {b}) left behind"


def test_two_opt_tour_is_valid_permutation():
    grid = generate_scenario(6, 6, 1.0, 0.35, seed=4)
    costs = cost_matrix(grid)
    start = grid.free_cells().index((0, 0))
    tour = two_opt(costs, start)
    assert tour.order[0] == start
    assert sorted(tour.order) == list(range(costs.n))
    assert tour.length == pytest.approx(tour_length(costs, tour.order))


def test_two_opt_deterministic_given_seed():
    grid = generate_scenario(6, 6, 1.0, 0.3, seed=13)
    costs = cost_matrix(grid)
    assert two_opt(costs, 0).order == two_opt(costs, 0).order
    assert two_opt(costs, 0, seed=5).order == two_opt(costs, 0, seed=5).order


def test_brute_force_bounds_two_opt():
    hits = 0
    total = 0
    for seed in range(20):
        grid = generate_scenario(3, 3, 1.0, 0.1 + 0.05 * (seed % 5), seed=seed)
        costs = cost_matrix(grid)
        if costs.n > 9:
            continue
        total += 1
        best = brute_force(costs, 0)
        heur = two_opt(costs, 0)
        assert best.length <= heur.length + 1e-9
        if abs(best.length - heur.length) < 1e-9:
            hits += 1
    assert total >= 10
    assert hits / total >= 0.8


def test_brute_force_two_nodes():
    grid = corridor(2)
    costs = cost_matrix(grid)
    tour = brute_force(costs, 0)
    assert tour.order == (0, 1)
    assert tour.length == pytest.approx(1.0)


def test_brute_force_size_guard():
    grid = generate_scenario(4, 4, 1.0, 0.0, seed=0)
    with pytest.raises(TooLarge):
        brute_force(cost_matrix(grid), 0)


def test_tour_to_labels_counts():
    tour = Tour((0, 1, 2, 3), 3.0)
    labels = tour_to_labels(tour, 6)
    assert labels.sum() == 6  # 3 undirected pairs, stored symmetrically
    assert np.array_equal(labels, labels.T)
    row_sums = labels[:4, :4].sum(axis=1)
    assert sorted(row_sums.tolist()) == [1.0, 1.0, 2.0, 2.0]


def test_tour_to_labels_degenerate():
    assert not tour_to_labels(Tour((0,), 0.0), 4).any()


def test_label_file_roundtrip(tmp_path):
    grid = generate_scenario(4, 4, 1.0, 0.25, seed=6)
    costs = cost_matrix(grid)
    pairs = label_pairs(two_opt(costs, 0))
    text = labels_to_text(grid.content_hash(), pairs)
    loaded_hash, loaded_pairs = labels_from_text(text)
    assert loaded_hash == grid.content_hash()
    assert loaded_pairs == pairs
    assert labels_to_text(loaded_hash, loaded_pairs) == text


def test_label_file_bad_header():
    with pytest.raises(FormatVersionMismatch):
        labels_from_text("cpp-labels v2 deadbeef\n0 1\n")


def test_label_cache_reuses_disk(tmp_path):
    grid = generate_scenario(5, 5, 1.0, 0.2, seed=2)
    cache = LabelCache(tmp_path)
    pairs = cache.pairs_for(grid)
    path = tmp_path / f"{grid.content_hash()}.labels"
    assert path.is_file()
    fresh = LabelCache(tmp_path)
    assert fresh.pairs_for(grid) == pairs
    matrix = pairs_to_matrix(pairs, 30)
    assert matrix.sum() == 2 * len(pairs)


def test_labels_match_tour_consecutive_pairs():
    grid = generate_scenario(4, 5, 1.0, 0.15, seed=3)
    costs = cost_matrix(grid)
    tour = two_opt(costs, 0)
    labels = tour_to_labels(tour, costs.n)
    for k in range(len(tour.order) - 1):
        assert labels[tour.order[k], tour.order[k + 1]] == 1.0
    assert labels.sum() == 2 * (costs.n - 1)
