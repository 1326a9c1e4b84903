import random
from collections import deque

import pytest

from sciatlas.errors import ConfigError
from sciatlas.taxonomy import Concept, expand_discipline, load_table1_roots


def make_tree(seed: int, n: int):
    """Random taxonomy: one level-1 root, a tree of descendants below it, and
    a sprinkling of unrelated concepts. Returns (root, concepts, children)
    where ``children`` is the explicit parent->child adjacency used as the
    reachability oracle."""
    rng = random.Random(seed)
    root = Concept(id="C_root", level=1, ancestor_ids=frozenset({"C_l0"}), display_name="Root")
    concepts = [root, Concept(id="C_l0", level=0)]
    children: dict[str, list[str]] = {"C_root": []}
    nodes = [root]
    for i in range(n):
        if rng.random() < 0.75:
            parent = rng.choice(nodes)
            cid = f"C_d{i}"
            concept = Concept(
                id=cid, level=parent.level + 1,
                ancestor_ids=parent.ancestor_ids | {parent.id},
            )
            children.setdefault(parent.id, []).append(cid)
            children.setdefault(cid, [])
            nodes.append(concept)
        else:
            concept = Concept(id=f"C_u{i}", level=rng.randint(0, 4),
                              ancestor_ids=frozenset({"C_other"}))
        concepts.append(concept)
    return root, concepts, children


def bfs_reachable(children: dict[str, list[str]], start: str) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for child in children.get(node, []):
            if child not in seen:
                seen.add(child)
                queue.append(child)
    return seen


class TestExpandDiscipline:
    def test_six_concept_fixture(self):
        root = Concept("C_root", 1)
        taxonomy = [
            root,
            Concept("C_child1", 2, frozenset({"C_root"})),
            Concept("C_child2", 2, frozenset({"C_root"})),
            Concept("C_grand", 3, frozenset({"C_root", "C_child1"})),
            Concept("C_other", 1),
            Concept("C_other_child", 2, frozenset({"C_other"})),
        ]
        spec = expand_discipline(root, taxonomy, "Fixture")
        assert spec.expanded_ids == {"C_root", "C_child1", "C_child2", "C_grand"}

    def test_no_descendants(self):
        root = Concept("C_root", 1)
        spec = expand_discipline(root, [root], "Lonely")
        assert spec.expanded_ids == {"C_root"}

    def test_level0_never_included(self):
        root = Concept("C_root", 1, frozenset({"C_l0"}))
        sneaky = Concept("C_l0", 0, frozenset())
        # a level-1 sibling under the root's level-0 parent is not a descendant
        sibling = Concept("C_sib", 1, frozenset({"C_l0"}))
        spec = expand_discipline(root, [root, sneaky, sibling])
        assert spec.expanded_ids == {"C_root"}

    def test_root_must_be_level1(self):
        with pytest.raises(ConfigError):
            expand_discipline(Concept("C_l0", 0), [])

    def test_matches_reachability_oracle_on_random_trees(self):
        for seed in range(10):
            root, concepts, children = make_tree(seed, 50)
            spec = expand_discipline(root, concepts)
            expected = {c for c in bfs_reachable(children, root.id)}
            assert spec.expanded_ids == expected

    def test_monotone_under_taxonomy_growth(self):
        root, concepts, children = make_tree(3, 30)
        spec_small = expand_discipline(root, concepts)
        grown = concepts + [Concept("C_new", 2, frozenset({root.id}))]
        spec_grown = expand_discipline(root, grown)
        assert spec_small.expanded_ids <= spec_grown.expanded_ids

    def test_member_levels_partition(self):
        root, concepts, _ = make_tree(7, 50)
        spec = expand_discipline(root, concepts)
        by_id = {c.id: c for c in concepts}
        for cid in spec.expanded_ids:
            level = by_id[cid].level
            if cid == root.id:
                assert level == 1
            else:
                assert level >= 2


class TestTable1Roots:
    def test_fifteen_entries_in_order(self):
        roots = load_table1_roots()
        assert len(roots) == 15
        assert roots[0] == ("Artificial Intelligence", "C154945302")
        assert roots[1] == ("Quantum Science", "C62520636")
        assert roots[14] == ("Pure Mathematics", "C202444582")

    def test_all_expected_pairs(self):
        expected = [
            ("Artificial Intelligence", "C154945302"),
            ("Quantum Science", "C62520636"),
            ("Biotechnology", "C150903083"),
            ("Nanotechnology", "C171250308"),
            ("Agricultural Engineering", "C88463610"),
            ("Particle Physics", "C109214941"),
            ("Aerospace Engineering", "C146978453"),
            ("Nuclear Engineering", "C116915560"),
            ("Marine Engineering", "C199104240"),
            ("Neuroscience", "C169760540"),
            ("Condensed Matter Physics", "C26873012"),
            ("Environmental Engineering", "C87717796"),
            ("Earth Science", "C1965285"),
            ("Astronomy", "C1276947"),
            ("Pure Mathematics", "C202444582"),
        ]
        assert load_table1_roots() == expected

    def test_manifest_override(self, tmp_path):
        path = tmp_path / "roots.json"
        path.write_text('[{"name": "Only One", "id": "C1"}]')
        assert load_table1_roots(path) == [("Only One", "C1")]
