import math
from collections import Counter

import numpy as np
import pytest

from gitstar.gp import (
    BASELINE,
    CONSTANT,
    FUNCTIONS,
    MAX_DEPTH,
    TERMINALS,
    WINNER,
    EdgeContext,
    ExprIndividual,
    ExprTree,
    StructureError,
    init_population,
    load_heuristic,
    point_mutate,
    random_tree,
    save_heuristic,
    subtree_crossover,
    tournament_select,
)


def random_context(rng: np.random.Generator) -> dict[str, float]:
    """Terminal values spanning many magnitudes, signs and exact zeros."""
    ctx = {}
    for name in TERMINALS:
        kind = rng.integers(4)
        if kind == 0:
            ctx[name] = 0.0
        elif kind == 1:
            ctx[name] = float(rng.uniform(-10, 10))
        else:
            ctx[name] = float(rng.choice([-1, 1]) * 10.0 ** rng.uniform(-12, 12))
    return ctx


class TestTrees:
    def test_constant_tree(self):
        assert ExprTree.parse("CONST_PI").evaluate({}) == pytest.approx(math.pi)

    def test_protected_division(self):
        tree = ExprTree.parse("(PDIV G_HAT_T C_HAT)")
        assert tree.evaluate(EdgeContext(g_hat_t=3.0, c_hat=0.0)) == 1.0
        assert tree.evaluate(EdgeContext(g_hat_t=3.0, c_hat=2.0)) == 1.5

    def test_protected_log_and_sqrt(self):
        assert ExprTree.parse("(PLOG1P U_T)").evaluate(EdgeContext(u_t=-(math.e - 1))) == pytest.approx(1.0)
        assert ExprTree.parse("(PSQRT U_T)").evaluate(EdgeContext(u_t=-4.0)) == pytest.approx(2.0)

    def test_winner_primary_hand_value(self):
        ctx = EdgeContext(g_hat_t=5.0, u_s=0.0, u_t=math.e - 1, w_dyn=0.0)
        assert WINNER.primary.evaluate(ctx) == pytest.approx(5 - math.pi, abs=1e-12)
        assert 5 - math.pi == pytest.approx(1.8584, abs=1e-4)

    def test_depth_and_size(self):
        tree = ExprTree.parse("(ADD (MUL G_HAT_T 2.5) H_HAT_T)")
        assert tree.size == 5 and tree.depth == 2
        assert tree.node_depths == [0, 1, 2, 2, 1]
        assert tree.subtree_end(1) == 4
        assert WINNER.depth <= MAX_DEPTH

    @pytest.mark.parametrize("ind", [WINNER, BASELINE, CONSTANT])
    def test_text_round_trip(self, ind, tmp_path):
        assert ExprIndividual.from_text(ind.to_text()) == ind
        path = tmp_path / "key.heuristic"
        save_heuristic(ind, path)
        assert load_heuristic(path) == ind

    def test_ephemeral_round_trip(self):
        tree = ExprTree(("ADD", 0.1 + 0.2, "DIM"))
        assert ExprTree.parse(tree.to_sexpr()) == tree

    @pytest.mark.parametrize(
        "text", ["", "(ADD G_HAT_T)", "(FOO G_HAT_T)", "(ADD G_HAT_T C_HAT) DIM", "(ADD G_HAT_T C_HAT"]
    )
    def test_malformed(self, text):
        with pytest.raises(StructureError):
            ExprTree.parse(text)

    def test_heuristic_file_needs_two_lines(self):
        with pytest.raises(StructureError):
            ExprIndividual.from_text("CONST_ONE\n")
        assert ExprIndividual.from_text("# comment\nCONST_ONE\n\nDIM\n").tiebreak == ExprTree.parse("DIM")

    def test_vectorised_matches_scalar(self, rng):
        tree = WINNER.primary
        ctxs = [random_context(rng) for _ in range(20)]
        arrays = {k: np.array([c[k] for c in ctxs]) for k in TERMINALS}
        vec = tree.evaluate(arrays)
        assert np.allclose(vec, [tree.evaluate(c) for c in ctxs], rtol=1e-12, equal_nan=False)


class TestFuzz:
    def test_random_trees_are_finite(self):
        rng = np.random.default_rng(1)
        trees = [random_tree(rng, int(rng.integers(0, 5)), "grow" if i % 2 else "full") for i in range(1000)]
        for i in range(2000):
            ctx = random_context(rng)
            for tree in trees[(i % 20) * 50 : (i % 20) * 50 + 5]:
                assert math.isfinite(float(tree.evaluate(ctx)))


class TestInitialisation:
    def test_size_and_depth_cap(self, rng):
        pop = init_population(10, rng)
        assert len(pop) == 10
        assert all(ind.depth <= MAX_DEPTH for ind in pop)

    def test_deterministic(self):
        a = init_population(20, np.random.default_rng(3))
        b = init_population(20, np.random.default_rng(3))
        assert a == b

    def test_depth_spread(self):
        for seed in range(5):
            depths = Counter(ind.primary.depth for ind in init_population(30, np.random.default_rng(seed)))
            assert {2, 3, 4} <= set(depths)

    def test_full_trees_are_full(self, rng):
        for d in range(5):
            tree = random_tree(rng, d, "full")
            leaves = [dep for dep, a in zip(tree.node_depths, tree.arities) if a == 0]
            assert set(leaves) == {d}

    def test_too_small(self, rng):
        with pytest.raises(ValueError):
            init_population(1, rng)


def with_fitness(pop, values):
    return [ind.with_fitness(v) for ind, v in zip(pop, values)]


class TestSelection:
    def test_full_tournament_returns_best(self, rng):
        pop = with_fitness(init_population(8, rng), [5, 3, 9, 1, 7, 8, 2, 6])
        for _ in range(20):
            assert tournament_select(pop, 200, rng).fitness == 1

    def test_ties_are_uniform_over_draws(self):
        rng = np.random.default_rng(0)
        ind = CONSTANT
        pop = [ExprIndividual(ind.primary, ExprTree((float(i),))).with_fitness(1.0) for i in range(4)]
        counts = Counter(tournament_select(pop, 1, rng).tiebreak.nodes[0] for _ in range(4000))
        assert all(abs(c - 1000) < 150 for c in counts.values())

    def test_smaller_wins_ties(self, rng):
        pop = [WINNER.with_fitness(1.0), CONSTANT.with_fitness(1.0)]
        for _ in range(20):
            assert tournament_select(pop, 100, rng).size == CONSTANT.size

    def test_seeded_sequence_is_reproducible(self):
        pop = with_fitness(init_population(12, np.random.default_rng(2)), np.arange(12.0)[::-1])
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(8)
            runs.append([tournament_select(pop, 3, rng).fitness for _ in range(10)])
        assert runs[0] == runs[1]
        assert len(set(runs[0])) > 1

    def test_unevaluated(self, rng):
        with pytest.raises(ValueError):
            tournament_select([WINNER, BASELINE], 2, rng)


class TestOperators:
    def test_zero_rate_crossover_is_identity(self, rng):
        for _ in range(100):
            p1, p2 = init_population(2, rng)
            assert subtree_crossover(p1, p2, 0.0, rng) == p1

    def test_identical_parents(self, rng):
        for _ in range(100):
            p1 = init_population(2, rng)[0]
            child = subtree_crossover(p1, p1, 1.0, rng)
            assert child.depth <= MAX_DEPTH
        leaf = ExprIndividual.parse("(ADD DIM DIM)", "DIM")
        assert subtree_crossover(leaf, leaf, 1.0, rng).tiebreak == leaf.tiebreak

    def test_zero_rate_mutation_is_identity(self, rng):
        for ind in init_population(50, rng):
            assert point_mutate(ind, 0.0, rng) is ind

    def test_full_mutation_preserves_arity(self, rng):
        tree = ExprTree.parse("(ADD (ADD DIM DIM) (ADD DIM DIM))")
        ind = ExprIndividual(tree, tree)
        out = point_mutate(ind, 1.0, rng)
        for node, a in zip(out.primary.nodes, out.primary.arities):
            if a:
                assert FUNCTIONS[node] == 2
        assert out.primary.arities == tree.arities

    def test_mutation_keeps_shape(self, rng):
        for ind in init_population(200, rng):
            out = point_mutate(ind, 0.5, rng)
            assert out.primary.arities == ind.primary.arities
            assert out.tiebreak.arities == ind.tiebreak.arities

    def test_depth_cap_under_many_operations(self):
        rng = np.random.default_rng(6)
        pop = init_population(40, rng)
        for i in range(10_000):
            p1, p2 = pop[int(rng.integers(40))], pop[int(rng.integers(40))]
            child = subtree_crossover(p1, p2, 0.8, rng)
            child = point_mutate(child, 0.1, rng)
            assert child.depth <= MAX_DEPTH
            pop[i % 40] = child
