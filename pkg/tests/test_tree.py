import json
import math

import numpy as np
import pytest

from hedgelab.lab import rng_for
from hedgelab.tree import (
    PruningTree,
    TemplateTree,
    TreeLearner,
    TreeNode,
    absolute_loss,
    best_pruning,
    best_pruning_bruteforce,
    generate_tree_data,
    load_tree,
    load_tree_data,
    pruning_leaves,
    pruning_predict,
    random_template_tree,
    save_tree,
    save_tree_data,
    squared_loss,
)

REL = 1e-9


@pytest.fixture
def depth1_tree():
    return TemplateTree(
        [
            TreeNode("root", children=("l", "r"), feature=0, threshold=0.5),
            TreeNode("l", prediction=0.2),
            TreeNode("r", prediction=0.9),
        ],
        "root",
    )


@pytest.fixture
def depth2_tree():
    # root splits on x0 at 0.5; left child splits on x1 at 0.4
    return TemplateTree(
        [
            TreeNode("root", children=("a", "b"), feature=0, threshold=0.5),
            TreeNode("a", children=("al", "ar"), feature=1, threshold=0.4, prediction=0.5),
            TreeNode("b", prediction=1.0),
            TreeNode("al", prediction=0.0),
            TreeNode("ar", prediction=0.25),
        ],
        "root",
    )


class TestTemplateValidation:
    def test_missing_prediction_rejected(self):
        with pytest.raises(ValueError):
            TemplateTree(
                [
                    TreeNode("root", children=("l", "r"), feature=0, threshold=0.5),
                    TreeNode("l"),
                    TreeNode("r", prediction=0.9),
                ],
                "root",
            )

    def test_two_parents_rejected(self):
        with pytest.raises(ValueError):
            TemplateTree(
                [
                    TreeNode("root", children=("l", "l"), feature=0, threshold=0.5),
                    TreeNode("l", prediction=0.1),
                ],
                "root",
            )

    def test_unreachable_node_rejected(self):
        with pytest.raises(ValueError):
            TemplateTree(
                [
                    TreeNode("root", children=("l", "r"), feature=0, threshold=0.5),
                    TreeNode("l", prediction=0.1),
                    TreeNode("r", prediction=0.2),
                    TreeNode("orphan", prediction=0.3),
                ],
                "root",
            )

    def test_root_prediction_rejected(self):
        with pytest.raises(ValueError):
            TemplateTree(
                [
                    TreeNode("root", children=("l", "r"), feature=0, threshold=0.5, prediction=0.5),
                    TreeNode("l", prediction=0.1),
                    TreeNode("r", prediction=0.2),
                ],
                "root",
            )

    def test_leaf_root_rejected(self):
        with pytest.raises(ValueError):
            TemplateTree([TreeNode("root")], "root")


class TestTraverse:
    def test_depth1_single_edge(self, depth1_tree):
        assert depth1_tree.traverse([0.1]) == [("root", "l")]
        assert depth1_tree.traverse([0.9]) == [("root", "r")]

    def test_leftmost_path(self, depth2_tree):
        assert depth2_tree.traverse([0.0, 0.0]) == [("root", "a"), ("a", "al")]

    def test_fixture_threshold_routing(self, depth2_tree):
        # x = (0.2, 0.9): left at root (0.2 < 0.5), right at a (0.9 >= 0.4)
        assert depth2_tree.traverse([0.2, 0.9]) == [("root", "a"), ("a", "ar")]

    def test_missing_feature_rejected(self, depth2_tree):
        with pytest.raises(ValueError):
            depth2_tree.traverse([0.2])

    def test_path_length_is_depth(self):
        rng = rng_for(1, 2)
        tree = random_template_tree(3, 2, rng)
        assert len(tree.traverse(rng.uniform(0, 1, 2))) == 3
        assert tree.depth() == 3


class TestTreeLearner:
    def test_depth1_prediction_is_leaf_value(self, depth1_tree):
        learner = TreeLearner(depth1_tree)
        assert learner.predict([0.1]) == pytest.approx(0.2, rel=REL)

    def test_equal_path_predictions_collapse(self):
        tree = TemplateTree(
            [
                TreeNode("root", children=("a", "b"), feature=0, threshold=0.5),
                TreeNode("a", children=("al", "ar"), feature=0, threshold=0.25, prediction=0.7),
                TreeNode("b", prediction=0.1),
                TreeNode("al", prediction=0.7),
                TreeNode("ar", prediction=0.7),
            ],
            "root",
        )
        learner = TreeLearner(tree)
        learner.update([0.1], squared_loss(0.3))
        assert learner.predict([0.1]) == pytest.approx(0.7, rel=REL)

    def test_mixture_loss_dominates_realized(self, depth2_tree):
        learner = TreeLearner(depth2_tree)
        rng = rng_for(2, 2)
        for _ in range(60):
            x = rng.uniform(0, 1, 2)
            z = float(rng.uniform(0, 1))
            loss_fn = squared_loss(z)
            y = learner.predict(x)
            lhat = learner.update(x, loss_fn)
            assert loss_fn(y) <= lhat + 1e-12

    def test_update_after_one_round_matches_replay(self, depth1_tree):
        learner = TreeLearner(depth1_tree)
        lhat = learner.update([0.1], squared_loss(0.0))
        # single awake edge: p = 1 on it, so the mixture loss is its own loss
        assert lhat == pytest.approx(0.2 ** 2, rel=REL)
        assert learner.registry.state(("root", "l")).R == pytest.approx(0.0, abs=1e-15)

    def test_two_edge_path_mixture(self):
        # fresh weights tie, path edges predict 0 and 1, target 0: edge losses
        # (0, 1), mixture loss 0.5, realized squared loss 0.25
        tree = TemplateTree(
            [
                TreeNode("root", children=("a", "b"), feature=0, threshold=0.5),
                TreeNode("a", children=("al", "ar"), feature=0, threshold=0.25, prediction=0.0),
                TreeNode("b", prediction=0.5),
                TreeNode("al", prediction=1.0),
                TreeNode("ar", prediction=0.3),
            ],
            "root",
        )
        learner = TreeLearner(tree)
        loss_fn = squared_loss(0.0)
        y = learner.predict([0.1])  # path edges predict 0.0 and 1.0
        assert y == pytest.approx(0.5, rel=REL)
        lhat = learner.update([0.1], loss_fn)
        assert lhat == pytest.approx(0.5, rel=REL)
        assert loss_fn(y) == pytest.approx(0.25, rel=REL)
        assert loss_fn(y) <= lhat

    def test_two_round_trace_matches_scalar_replay(self):
        from hedgelab.potential import weight

        tree = TemplateTree(
            [
                TreeNode("root", children=("a", "b"), feature=0, threshold=0.5),
                TreeNode("a", children=("al", "ar"), feature=0, threshold=0.25, prediction=0.0),
                TreeNode("b", prediction=0.5),
                TreeNode("al", prediction=1.0),
                TreeNode("ar", prediction=0.3),
            ],
            "root",
        )
        learner = TreeLearner(tree)
        learner.update([0.1], squared_loss(0.0))  # edges (root,a)=0, (a,al)=1
        # replay by hand: lhat1 = 0.5, r = conf*(lhat - loss) per edge
        assert learner.registry.state(("root", "a")).R == pytest.approx(0.5, rel=REL)
        assert learner.registry.state(("a", "al")).R == pytest.approx(-0.5, rel=REL)
        # second round, same path, target 1: edge predictions (0, 1) ->
        # losses (1, 0); weights now differ
        wa, wl = weight(0.5, 0.5), weight(-0.5, 0.5)
        pa = wa / (wa + wl)
        lhat2 = learner.update([0.1], squared_loss(1.0))
        assert lhat2 == pytest.approx(pa * 1.0 + (1 - pa) * 0.0, rel=REL)
        assert learner.registry.state(("root", "a")).R == pytest.approx(0.5 + lhat2 - 1.0, rel=REL)
        assert learner.registry.state(("a", "al")).R == pytest.approx(-0.5 + lhat2, rel=REL)

    def test_edge_loss_range_enforced(self, depth1_tree):
        learner = TreeLearner(depth1_tree)
        with pytest.raises(ValueError):
            learner.update([0.1], lambda y: 2.0)

    def test_edges_seen_bounded_by_depth_times_rounds(self):
        rng = rng_for(3, 2)
        tree = random_template_tree(3, 3, rng)
        learner = TreeLearner(tree)
        for t in range(1, 41):
            x = rng.uniform(0, 1, 3)
            learner.update(x, squared_loss(0.5))
            assert learner.edges_seen <= t * tree.depth()


class TestBestPruning:
    def test_recovers_generating_pruning(self):
        rng = rng_for(4, 2)
        tree = random_template_tree(3, 2, rng)
        internal = sorted(i for i in tree.internal_ids if i != tree.root)
        truth = PruningTree(frozenset(internal[:1]))
        data = [(x, squared_loss(z)) for x, z in generate_tree_data(tree, truth, 200, 2, rng)]
        loss, m, found = best_pruning(tree, data)
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert found.pruned_at == truth.pruned_at
        assert m == pruning_leaves(tree, truth)

    def test_single_point_only_path_matters(self, depth2_tree):
        x = np.array([0.2, 0.9])  # path root -> a -> ar
        data = [(x, absolute_loss(0.3))]
        loss, m, found = best_pruning(depth2_tree, data)
        # candidate leaves on the path: a (|0.5-0.3|=0.2), ar (|0.25-0.3|=0.05)
        assert loss == pytest.approx(0.05, rel=REL)
        assert found.pruned_at == frozenset()

    def test_ties_break_to_fewer_leaves(self, depth2_tree):
        # a data point down branch b only: everything under a is unreached and
        # collapses to a single leaf
        data = [(np.array([0.9, 0.9]), squared_loss(1.0))]
        loss, m, found = best_pruning(depth2_tree, data)
        assert loss == pytest.approx(0.0, abs=1e-15)
        assert m == 2
        assert found.pruned_at == {"a"}

    def test_matches_bruteforce_on_random_trees(self):
        rng = rng_for(5, 2)
        for _ in range(25):
            depth = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            tree = random_template_tree(depth, k, rng)
            data = [
                (rng.uniform(0, 1, k), squared_loss(float(rng.uniform(0, 1))))
                for _ in range(int(rng.integers(1, 21)))
            ]
            loss_fast, m_fast, pruning = best_pruning(tree, data)
            loss_slow, m_slow = best_pruning_bruteforce(tree, data)
            assert loss_fast == pytest.approx(loss_slow, abs=1e-9)
            assert m_fast == m_slow
            pruning.validate(tree)

    def test_empty_data_rejected(self, depth1_tree):
        with pytest.raises(ValueError):
            best_pruning(depth1_tree, [])


class TestPruningTree:
    def test_nested_pruning_rejected(self, depth2_tree):
        bad = PruningTree(frozenset({"a", "al"}))
        with pytest.raises(ValueError):
            bad.validate(depth2_tree)

    def test_root_pruning_rejected(self, depth2_tree):
        with pytest.raises(ValueError):
            PruningTree(frozenset({"root"})).validate(depth2_tree)

    def test_pruned_prediction(self, depth2_tree):
        pruning = PruningTree(frozenset({"a"}))
        assert pruning_predict(depth2_tree, pruning, [0.1, 0.1]) == 0.5
        assert pruning_predict(depth2_tree, pruning, [0.9, 0.1]) == 1.0
        assert pruning_leaves(depth2_tree, pruning) == 2

    def test_empty_pruning_is_template(self, depth2_tree):
        empty = PruningTree(frozenset())
        assert pruning_predict(depth2_tree, empty, [0.0, 0.0]) == 0.0
        assert pruning_leaves(depth2_tree, empty) == 3


class TestCertificate:
    def test_zero_noise_certificate_holds(self):
        rng = rng_for(42, 2)
        tree = random_template_tree(3, 2, rng)
        internal = sorted(i for i in tree.internal_ids if i != tree.root)
        truth = PruningTree(frozenset(internal[:1]))
        data = generate_tree_data(tree, truth, 800, 2, rng)
        learner = TreeLearner(tree)
        realized = 0.0
        for x, z in data:
            loss_fn = squared_loss(z)
            realized += loss_fn(learner.predict(x))
            learner.update(x, loss_fn)
        loss_star, m, pruning = best_pruning(tree, [(x, squared_loss(z)) for x, z in data])
        assert loss_star == pytest.approx(0.0, abs=1e-12)
        cert = learner.pruning_certificate(pruning)
        assert math.isfinite(cert)
        assert realized - loss_star <= cert * (1 + REL)

    def test_unseen_terminal_edge_gives_infinite_certificate(self, depth2_tree):
        learner = TreeLearner(depth2_tree)
        learner.update([0.9, 0.9], squared_loss(1.0))  # only edge (root, b) awake
        cert = learner.pruning_certificate(PruningTree(frozenset()))
        assert cert == math.inf


class TestSerialization:
    def test_round_trip(self, tmp_path, depth2_tree):
        path = tmp_path / "tree.json"
        save_tree(depth2_tree, path)
        loaded = load_tree(path)
        assert loaded.to_dict() == depth2_tree.to_dict()
        raw = json.loads(path.read_text())
        assert set(raw) == {"root", "nodes"}
        assert {n["id"] for n in raw["nodes"]} == set(depth2_tree.nodes)

    def test_data_round_trip(self, tmp_path):
        rng = rng_for(6, 2)
        data = [(rng.uniform(0, 1, 3), float(rng.uniform(0, 1))) for _ in range(20)]
        path = tmp_path / "data.csv"
        save_tree_data(data, path)
        loaded = load_tree_data(path)
        assert len(loaded) == 20
        for (x1, z1), (x2, z2) in zip(data, loaded):
            np.testing.assert_array_equal(x1, x2)
            assert z1 == z2

    def test_data_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            load_tree_data(path)
