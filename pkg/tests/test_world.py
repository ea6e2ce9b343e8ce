import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gitstar.world import (
    AxisBox,
    ContractError,
    GenerationError,
    ProblemInstance,
    Scenario,
    bisection_order,
    default_resolution,
    edge_check,
    generate_scenario,
    interpolate,
    is_edge_valid,
    is_state_valid,
    obstacle_free,
    path_is_valid,
    path_length,
    segment_hits_obstacle,
)


def one_box_world(n: int = 2) -> ProblemInstance:
    lo = np.full(n, 0.4)
    hi = np.full(n, 0.6)
    start = np.full(n, 0.1)
    goal = AxisBox(np.full(n, 0.85), np.full(n, 0.95))
    return ProblemInstance(n, (AxisBox(lo, hi),), start, goal)


class TestStateValidity:
    def test_obstacle_center_is_invalid(self):
        assert not is_state_valid(one_box_world(), [0.5, 0.5])

    def test_origin_free_in_empty_world(self):
        for n in (2, 3, 8):
            world = obstacle_free(n, np.full(n, 0.1), np.full(n, 0.9))
            assert is_state_valid(world, np.zeros(n))

    def test_dividing_walls_start(self):
        world = generate_scenario("dw", 2)
        assert np.allclose(world.start, (0.05, 0.5))
        assert is_state_valid(world, (0.05, 0.5))

    def test_box_boundary_counts_as_collision(self):
        assert not is_state_valid(one_box_world(), [0.4, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            is_state_valid(one_box_world(), [0.5, 0.5, 0.5])


class TestEdgeValidity:
    def test_zero_length_edge(self):
        world = one_box_world()
        ok, used = edge_check(world, [0.2, 0.2], [0.2, 0.2], 0.01)
        assert ok and used == 1

    def test_edge_through_thick_obstacle(self):
        assert not is_edge_valid(one_box_world(), [0.1, 0.5], [0.9, 0.5], 0.01)

    def test_edge_through_wall_gap(self):
        world = generate_scenario("dw", 2)
        # gap of the second wall centred at x1 = 0.38, width 0.125
        a, b = np.array([0.40, 0.38]), np.array([0.60, 0.38])
        assert is_edge_valid(world, a, b, 0.002)
        assert is_edge_valid(world, a, b, 0.0002)
        assert not segment_hits_obstacle(world, a, b)

    def test_check_count_orders(self):
        world = one_box_world()
        a, b = np.array([0.1, 0.5]), np.array([0.9, 0.5])
        ok_s, sweep = edge_check(world, a, b, 0.01, order="sweep")
        ok_b, bisect = edge_check(world, a, b, 0.01, order="bisect")
        assert not ok_s and not ok_b
        assert sweep == 31  # first state with x0 >= 0.4
        assert bisect == 3  # the midpoint hits after both ends
        with pytest.raises(ContractError):
            edge_check(world, a, b, 0.01, order="random")

    def test_interpolation_count(self):
        pts = interpolate(np.zeros(2), np.array([1.0, 0.0]), 0.1)
        assert len(pts) == 11
        assert np.allclose(pts[-1], [1.0, 0.0])

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 33])
    def test_bisection_order_is_a_permutation(self, n):
        order = bisection_order(n)
        assert sorted(order.tolist()) == list(range(n))
        if n >= 2:
            assert order[0] == 0 and order[1] == n - 1

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(0, 1), min_size=4, max_size=4),
    )
    def test_discrete_hit_implies_exact_hit(self, coords):
        world = generate_scenario("rr", 2, seed=3)
        a, b = np.array(coords[:2]), np.array(coords[2:])
        if not is_edge_valid(world, a, b, 0.002):
            assert segment_hits_obstacle(world, a, b)


class TestScenarios:
    @pytest.mark.parametrize("kind", ["dw", "rr", "ge"])
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_deterministic(self, kind, n):
        assert generate_scenario(kind, n, 7) == generate_scenario(kind, n, 7)

    @pytest.mark.parametrize("kind", ["dw", "rr", "ge"])
    def test_json_round_trip(self, kind):
        world = generate_scenario(kind, 3, 5)
        again = ProblemInstance.from_json(world.to_json())
        assert again == world
        assert json.loads(again.to_json()) == json.loads(world.to_json())

    def test_random_rectangles_with_no_boxes(self):
        world = generate_scenario("rr", 3, 1, {"count": 0})
        assert world.obstacles == ()
        assert is_edge_valid(world, world.start, world.goal_center, 0.002)

    def test_random_rectangles_default_count(self):
        assert len(generate_scenario("rr", 4, 2).obstacles) == 40

    @pytest.mark.parametrize("seed", range(5))
    def test_goal_enclosure_open_only_on_far_face(self, seed):
        world = generate_scenario("ge", 2, seed)
        goal = world.goal_center
        # straight shots into the goal from each side: only +x0 is open
        for direction, open_ in [((1, 0), True), ((-1, 0), False), ((0, 1), False), ((0, -1), False)]:
            outside = goal + 0.3 * np.asarray(direction)
            assert is_edge_valid(world, outside, goal, 0.001) is open_

    def test_sealed_enclosure(self):
        world = generate_scenario("ge", 2, 0, {"open": False})
        goal = world.goal_center
        assert not is_edge_valid(world, goal, goal + [0.3, 0.0], 0.001)

    def test_unknown_kind(self):
        with pytest.raises(ContractError):
            generate_scenario("maze", 2)
        assert Scenario.parse("DividingWalls") is Scenario.DIVIDING_WALLS

    def test_unknown_param(self):
        with pytest.raises(GenerationError):
            generate_scenario("dw", 2, 0, {"walls": 3})

    def test_start_inside_obstacle_rejected(self):
        with pytest.raises(ContractError):
            ProblemInstance(2, (AxisBox((0, 0), (0.5, 0.5)),), (0.1, 0.1), AxisBox((0.9, 0.9), (1, 1)))


class TestPaths:
    def test_length(self):
        assert path_length(np.array([[0, 0], [3, 4], [3, 5]])) == pytest.approx(6.0)
        assert path_length(np.zeros((1, 2))) == 0.0

    def test_path_validity(self):
        world = one_box_world()
        around = np.array([[0.1, 0.1], [0.7, 0.1], [0.9, 0.9]])
        through = np.array([[0.1, 0.1], [0.9, 0.9]])
        assert path_is_valid(world, around, 0.005)
        assert not path_is_valid(world, through, 0.005)

    def test_default_resolution(self):
        assert default_resolution(4) == pytest.approx(0.004)
        assert math.isclose(default_resolution(2), 0.002 * math.sqrt(2))
