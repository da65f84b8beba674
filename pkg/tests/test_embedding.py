import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artikit.codec import encode_joint
from artikit.embedding import (
    EMBED_DIM,
    PARENT_SLOT,
    ROOT_PARENT,
    ArticulatedVoxelGrid,
    EmbeddingError,
    RecoveryError,
    aggregate_part_channels,
    embed,
    recover,
)
from artikit.fixtures import hinge_asset, random_asset, random_tree
from artikit.kinematic_graph import KinematicTree, Link, tree_differences
from artikit.voxel import SparseVoxelGrid, voxelize


def random_grid(rng, K, R=8, n=None):
    """Random sparse grid in which every part 0..K-1 owns at least one cell."""
    n = n or int(rng.integers(K, 3 * K + 10))
    flat = rng.choice(R ** 3, size=n, replace=False)
    coords = np.column_stack(np.unravel_index(flat, (R, R, R)))
    parts = np.concatenate([rng.permutation(K), rng.integers(0, K, n - K)])
    return SparseVoxelGrid(R, coords, parts)


def with_channels(avg, channels):
    return ArticulatedVoxelGrid(avg.grid.with_channels(channels), avg.adjacency, avg.link_names)


def test_hinge_embedding():
    asset = hinge_asset()
    grid = voxelize(asset.meshes, [0, 1], 16)
    avg = embed(asset.tree, grid)
    code = encode_joint(asset.tree.joints[0])
    ch, parts = avg.grid.channels, avg.grid.part_ids
    assert ch.shape[1] == EMBED_DIM == 10
    assert np.all(ch[parts == 1, :9] == code) and np.all(ch[parts == 1, PARENT_SLOT] == 0)
    assert np.all(ch[parts == 0, :9] == 0) and np.all(ch[parts == 0, PARENT_SLOT] == ROOT_PARENT)
    assert avg.adjacency.tolist() == [[0, 1], [0, 0]]
    assert avg.grid.same_geometry(grid)
    assert not tree_differences(recover(avg), asset.tree, atol=0)


def test_single_link():
    tree = KinematicTree([Link(0, "only")], [], 0)
    avg = embed(tree, SparseVoxelGrid(4, [[0, 0, 0], [1, 2, 3]], [0, 0]))
    assert avg.adjacency.tolist() == [[0]]
    assert np.all(avg.grid.channels[:, PARENT_SLOT] == ROOT_PARENT)
    assert recover(avg).K == 1


def test_part_sets_must_match():
    tree = random_tree(np.random.default_rng(0), 3)
    with pytest.raises(EmbeddingError):
        embed(tree, SparseVoxelGrid(4, [[0, 0, 0], [0, 0, 1]], [0, 1]))
    with pytest.raises(EmbeddingError):
        embed(tree, SparseVoxelGrid(4, [[0, 0, 0], [0, 0, 1], [0, 0, 2], [0, 0, 3]], [0, 1, 2, 3]))


@pytest.mark.parametrize("seed", range(100))
def test_uniform_channels_and_exact_round_trip(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 13))
    tree = random_tree(rng, K)
    grid = random_grid(rng, K)
    avg = embed(tree, grid)
    assert avg.grid.same_geometry(grid)
    for part in range(K):
        rows = avg.grid.channels[avg.grid.part_ids == part]
        assert np.all(rows == rows[0])
    assert not tree_differences(recover(avg), tree, atol=0)


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_on_voxelized_assets(seed):
    asset = random_asset(np.random.default_rng(seed), 12)
    avg = embed(asset.tree, voxelize(asset.meshes, range(12), 32))
    assert not tree_differences(recover(avg), asset.tree, atol=0)


def test_text_round_trip_keeps_adjacency():
    rng = np.random.default_rng(5)
    tree = random_tree(rng, 6)
    avg = embed(tree, random_grid(rng, 6))
    back, header = ArticulatedVoxelGrid.from_text(avg.to_text({"seed": 9}))
    assert header["seed"] == 9
    assert np.array_equal(back.adjacency, avg.adjacency)
    assert back.link_names == avg.link_names
    assert not tree_differences(recover(back), tree, atol=1e-9)


def swap_parents_grid():
    tree = KinematicTree([Link(i, f"l{i}") for i in range(3)], [], 0)
    grid = SparseVoxelGrid(4, [[0, 0, 0], [1, 0, 0], [2, 0, 0]], [0, 1, 2])
    ch = np.zeros((3, EMBED_DIM))
    ch[0, PARENT_SLOT] = ROOT_PARENT
    ch[1, PARENT_SLOT] = 2
    ch[2, PARENT_SLOT] = 1
    return ArticulatedVoxelGrid(grid.with_channels(ch), np.zeros((0, 0)), tuple(l.name for l in tree.links))


def test_cycle_is_reported():
    avg = swap_parents_grid()
    avg = ArticulatedVoxelGrid(avg.grid, np.zeros((3, 3), dtype=np.int8), avg.link_names)
    with pytest.raises(RecoveryError, match="cycle") as info:
        recover(avg)
    assert info.value.parts == [1, 2]


def test_orphan_and_root_count_errors():
    rng = np.random.default_rng(1)
    tree = random_tree(rng, 4)
    avg = embed(tree, random_grid(rng, 4))
    ch = avg.grid.channels.copy()
    child = tree.joints[0].child
    ch[avg.grid.part_ids == child, PARENT_SLOT] = 17
    with pytest.raises(RecoveryError, match="orphaned") as info:
        recover(with_channels(avg, ch))
    assert info.value.parts == [child]
    ch[avg.grid.part_ids == child, PARENT_SLOT] = ROOT_PARENT
    with pytest.raises(RecoveryError, match="exactly one root"):
        recover(with_channels(avg, ch))


def test_adjacency_sidecar_mismatch_names_part():
    rng = np.random.default_rng(2)
    tree = random_tree(rng, 5, shuffle=False)
    avg = embed(tree, random_grid(rng, 5))
    adj = avg.adjacency.copy()
    j = tree.joints[-1]
    adj[j.parent, j.child] = 0
    adj[tree.root, j.child] = 1 if j.parent != tree.root else 0
    with pytest.raises(RecoveryError, match="adjacency") as info:
        recover(ArticulatedVoxelGrid(avg.grid, adj, avg.link_names))
    assert j.child in info.value.parts


def test_uniform_part_aggregates_exactly():
    rng = np.random.default_rng(3)
    tree = random_tree(rng, 4)
    avg = embed(tree, random_grid(rng, 4))
    codes = aggregate_part_channels(avg)
    for j in tree.joints:
        assert np.array_equal(codes[j.child].code, encode_joint(j))
        assert codes[j.child].parent == j.parent


def test_majority_then_mean():
    grid = SparseVoxelGrid(4, [[0, 0, 0], [0, 0, 1], [0, 0, 2], [1, 0, 0]], [1, 1, 1, 0])
    ch = np.zeros((4, EMBED_DIM))
    ch[:, PARENT_SLOT] = [0, 0, 0, ROOT_PARENT]
    ch[0, :9] = [1, 0.1, 0, 0, 0, 0, 1, 0.0, 1.0]
    ch[1, :9] = [1, 0.3, 0, 0, 0, 0, 1, 0.2, 1.0]
    ch[2, :9] = [2, 9.0, 9, 9, 1, 0, 0, 5.0, 6.0]
    avg = ArticulatedVoxelGrid(grid.with_channels(ch), np.zeros((0, 0)))
    code = aggregate_part_channels(avg)[1].code
    np.testing.assert_allclose(code, [1, 0.2, 0, 0, 0, 0, 1, 0.1, 1.0], atol=1e-15)


def test_type_and_parent_ties_pick_lower_value():
    grid = SparseVoxelGrid(4, [[0, 0, 0], [0, 0, 1], [1, 0, 0], [2, 0, 0]], [1, 1, 0, 2])
    ch = np.zeros((4, EMBED_DIM))
    ch[:, 6] = 1
    ch[:, PARENT_SLOT] = [2, 0, ROOT_PARENT, 0]
    ch[0, 0], ch[1, 0] = 2, 1
    avg = ArticulatedVoxelGrid(grid.with_channels(ch), np.zeros((0, 0)))
    pc = aggregate_part_channels(avg)[1]
    assert pc.code[0] == 1 and pc.parent == 0


@given(st.integers(0, 2 ** 32 - 1))
def test_aggregation_ignores_cell_order(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 7))
    tree = random_tree(rng, K)
    avg = embed(tree, random_grid(rng, K, n=4 * K))
    noisy = avg.grid.channels + rng.normal(scale=1e-3, size=avg.grid.channels.shape)
    noisy[:, PARENT_SLOT] = avg.grid.channels[:, PARENT_SLOT]
    a = aggregate_part_channels(with_channels(avg, noisy))
    # re-assign the same (part, channel) rows to a permuted set of cells
    perm = rng.permutation(avg.grid.count)
    shuffled = SparseVoxelGrid(avg.grid.resolution, avg.grid.coords, avg.grid.part_ids[perm], noisy[perm])
    b = aggregate_part_channels(ArticulatedVoxelGrid(shuffled, avg.adjacency))
    for part in range(K):
        assert np.array_equal(a[part].code, b[part].code)
        assert a[part].parent == b[part].parent
    ta = recover(with_channels(avg, noisy))
    tb = recover(ArticulatedVoxelGrid(shuffled, avg.adjacency, avg.link_names))
    assert not tree_differences(ta, tb, atol=0)
