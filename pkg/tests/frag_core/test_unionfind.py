from frag_core.unionfind import UnionFind


class TestUnionFind:
    """Union by size with path compression and carried masses."""

    def test_singletons(self):
        uf = UnionFind(4)
        assert uf.roots().tolist() == [0, 1, 2, 3]
        assert uf.size(2) == 1

    def test_union_merges_sizes_and_masses(self):
        uf = UnionFind(4, [0.1, 0.2, 0.3, 0.4])
        uf.union(0, 1)
        root = uf.union(2, 1)
        assert uf.size(2) == 3
        assert uf.mass[root] == sum([0.1, 0.2, 0.3])
        assert uf.is_same(0, 2)
        assert not uf.is_same(0, 3)

    def test_union_is_idempotent(self):
        uf = UnionFind(3)
        first = uf.union(0, 1)
        assert uf.union(1, 0) == first
        assert uf.size(0) == 2

    def test_larger_set_survives(self):
        uf = UnionFind(5)
        big = uf.union(uf.union(0, 1), 2)
        assert uf.union(3, 0) == big

    def test_path_compression(self):
        uf = UnionFind(6)
        for v in range(1, 6):
            uf.union(0, v)
        root = uf.find(5)
        assert all(uf.parents[v] == root for v in range(6) if v != root)

    def test_labels_start_as_vertices(self):
        assert UnionFind(3).label == [0, 1, 2]
