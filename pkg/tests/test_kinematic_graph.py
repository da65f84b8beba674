import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artikit.fixtures import random_joint, random_tree
from artikit.kinematic_graph import (
    InvalidTreeError,
    Joint,
    JointAxis,
    JointLimits,
    JointType,
    KinematicTree,
    Link,
    require_valid,
    topological_order,
    trees_equal,
    validate_tree,
)


def links(K):
    return [Link(i, f"l{i}") for i in range(K)]


def fixed(p, c):
    return Joint(p, c, JointType.FIXED)


def brute_force_ok(K, root, edges):
    """Independent structural check: unique parents, no parent for the root, all reachable."""
    parents = {}
    for p, c in edges:
        if not (0 <= p < K and 0 <= c < K) or p == c or c in parents:
            return False
        parents[c] = p
    if root in parents or len(edges) != K - 1:
        return False
    seen, todo = set(), [root]
    while todo:
        n = todo.pop()
        if n in seen:
            return False
        seen.add(n)
        todo.extend(c for p, c in edges if p == n)
    return len(seen) == K


def test_joint_type_codes_are_stable():
    assert [int(t) for t in JointType] == [0, 1, 2]
    assert not JointType.FIXED.movable
    assert JointType.REVOLUTE.movable and JointType.PRISMATIC.movable


def test_single_link_is_valid():
    assert validate_tree(KinematicTree(links(1), [], 0)).ok


def test_two_cycle_reports_cycle_and_unreachable():
    tree = KinematicTree(links(3), [fixed(0, 1), fixed(1, 0)], 0)
    report = validate_tree(tree)
    assert not report.ok
    assert "cycle {0,1}" in report.violations
    assert "link 2 unreachable" in report.violations


def test_violations_name_offenders():
    tree = KinematicTree(links(3), [fixed(0, 1), fixed(2, 1)], 0)
    text = str(validate_tree(tree))
    assert "link 1 has 2 parent joints" in text
    assert "link 2 unreachable" in text


@pytest.mark.parametrize("joint, fragment", [
    (Joint(0, 1, JointType.FIXED, JointAxis((0, 0, 1), (0, 0, 0))), "zero axis"),
    (Joint(0, 1, JointType.FIXED, limits=JointLimits(0, 1)), "zero limits"),
    (Joint(0, 1, JointType.REVOLUTE, JointAxis((0, 0, 0), (0, 0, 2)), JointLimits(0, 1)), "norm"),
    (Joint(0, 1, JointType.PRISMATIC, JointAxis((0, 0, 0), (1, 0, 0)), JointLimits(1, 0)), "exceeds"),
    (Joint(0, 1, JointType.REVOLUTE, JointAxis((0, 0, math.nan), (1, 0, 0)), JointLimits(0, 1)), "non-finite"),
    (Joint(0, 0, JointType.FIXED), "self loop"),
])
def test_attribute_violations(joint, fragment):
    tree = KinematicTree(links(2), [joint], 0)
    assert fragment in str(validate_tree(tree))


def test_unit_norm_tolerance():
    d = np.array([0.0, 0.0, 1.0 + 5e-10])
    j = Joint(0, 1, JointType.REVOLUTE, JointAxis((0, 0, 0), d), JointLimits(0, 1))
    assert validate_tree(KinematicTree(links(2), [j], 0)).ok


def test_require_valid_raises():
    with pytest.raises(InvalidTreeError):
        require_valid(KinematicTree(links(2), [], 0))


@pytest.mark.parametrize("seed", range(100))
def test_generated_trees_are_valid(seed):
    tree = random_tree(np.random.default_rng(seed), 12)
    assert validate_tree(tree).ok


@given(st.integers(1, 7), st.data())
def test_validator_agrees_with_brute_force(K, data):
    n_edges = data.draw(st.integers(0, K + 1))
    edges = data.draw(st.lists(st.tuples(st.integers(0, K - 1), st.integers(0, K - 1)),
                               min_size=n_edges, max_size=n_edges))
    root = data.draw(st.integers(0, K - 1))
    tree = KinematicTree(links(K), [fixed(p, c) for p, c in edges], root)
    assert validate_tree(tree).ok == brute_force_ok(K, root, edges)


def test_topological_order_chain_and_star():
    chain = KinematicTree(links(3), [fixed(0, 1), fixed(1, 2)], 0)
    assert topological_order(chain) == [0, 1, 2]
    star = KinematicTree(links(4), [fixed(0, 3), fixed(0, 1), fixed(0, 2)], 0)
    assert topological_order(star) == [0, 1, 2, 3]


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_topological_order_is_parent_first_permutation(seed, K):
    tree = random_tree(np.random.default_rng(seed), K)
    order = topological_order(tree)
    assert sorted(order) == list(range(K))
    assert order[0] == tree.root
    pos = {n: i for i, n in enumerate(order)}
    assert all(pos[j.parent] < pos[j.child] for j in tree.joints)


def test_trees_equal_tolerances():
    rng = np.random.default_rng(0)
    j = random_joint(rng, 0, 1, JointType.REVOLUTE)
    a = KinematicTree(links(2), [j], 0)
    lo = j.limits.lower
    b = KinematicTree(links(2), [Joint(0, 1, j.jtype, j.axis, JointLimits(lo + 1e-8, j.limits.upper))], 0)
    assert trees_equal(a, a, atol=0)
    assert not trees_equal(a, b)
    assert trees_equal(a, b, atol=2e-8)
    c = KinematicTree(links(2), [Joint(0, 1, JointType.PRISMATIC, j.axis, j.limits)], 0)
    assert not trees_equal(a, c, atol=1.0)
