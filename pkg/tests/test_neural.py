import numpy as np
import pytest

from conftest import corpus, random_instance
from pdlab.engine import AlgoConfig, run_general
from pdlab.instances import from_vertex_cover, is_hitting_set, make_instance
from pdlab.neural import (
    EmptyStepError,
    ModelWeights,
    analytic_weights,
    forward_step,
    rollout,
    tensor_shapes,
    verify_replication,
)


def triangle():
    return from_vertex_cover(3, [(0, 1), (1, 2), (2, 0)], [1.0, 1.0, 1.0], id="tri")


def random_model(hidden_dim, uniform, seed=0, **kw):
    rng = np.random.default_rng(seed)
    tensors = {
        name: rng.normal(scale=0.3, size=shape)
        for name, shape in tensor_shapes(hidden_dim, uniform).items()
    }
    return ModelWeights(hidden_dim=hidden_dim, uniform=uniform, tensors=tensors, **kw)


class TestModelWeights:
    def test_missing_tensor_rejected(self):
        tensors = {
            name: np.zeros(shape)
            for name, shape in tensor_shapes(2, False).items()
            if name != "q_r.w"
        }
        with pytest.raises(ValueError, match="missing"):
            ModelWeights(hidden_dim=2, uniform=False, tensors=tensors)

    def test_bad_shape_rejected(self):
        tensors = {name: np.zeros(shape) for name, shape in tensor_shapes(2, False).items()}
        tensors["g_u.w"] = np.zeros((2, 3))
        with pytest.raises(ValueError, match="shape"):
            ModelWeights(hidden_dim=2, uniform=False, tensors=tensors)

    def test_nonfinite_rejected(self):
        tensors = {name: np.zeros(shape) for name, shape in tensor_shapes(2, False).items()}
        tensors["f_r.w"][0, 0] = np.inf
        with pytest.raises(ValueError, match="finite"):
            ModelWeights(hidden_dim=2, uniform=False, tensors=tensors)

    def test_uniform_needs_extra_decoder(self):
        shapes = tensor_shapes(4, True)
        assert "q_Delta.w" in shapes and "q_Delta.b" in shapes
        assert "q_Delta.w" not in tensor_shapes(4, False)


class TestAnalyticAlgebra:
    def test_message_mlp_computes_ratio(self):
        # r = 1 in two active subsets (degree 2): the increment decodes 0.5,
        # i.e. the message path realizes ELU(ln 1 - ln 2) + 1 = 1/2.
        w = analytic_weights(1, uniform=False)
        inst = make_instance("mhs", [1.0, 1.0], [[0], [0, 1]], id="deg2")
        out = forward_step(
            w, inst, np.array([1.0, 1.0]), np.array([True, True]), np.array([True, True])
        )
        assert out.delta_hat[0] == pytest.approx(0.5, abs=1e-12)

    def test_decoders_project_first_coordinate(self):
        w = analytic_weights(8, uniform=True)
        h = np.zeros(8)
        h[0] = 0.37
        assert (h @ w.tensors["q_r.w"].T + w.tensors["q_r.b"]).item() == pytest.approx(0.37)
        assert (h @ w.tensors["q_delta.w"].T + w.tensors["q_delta.b"]).item() == pytest.approx(0.37)
        assert (h @ w.tensors["q_Delta.w"].T + w.tensors["q_Delta.b"]).item() == pytest.approx(0.37)

    def test_single_element_forward(self):
        w = analytic_weights(4, uniform=False)
        inst = make_instance("mhs", [1.0], [[0]], id="one")
        out = forward_step(w, inst, np.array([1.0]), np.array([True]), np.array([True]))
        assert out.delta_hat.tolist() == [1.0]
        assert out.r_hat[0] == pytest.approx(0.0, abs=1e-12)
        assert out.x_hat[0] >= w.decode_threshold

    def test_triangle_matches_engine_step(self):
        inst = triangle()
        gt = run_general(inst).steps[0]
        w = analytic_weights(16, uniform=False)
        out = forward_step(
            w,
            inst,
            np.ones(3),
            np.ones(3, dtype=bool),
            np.ones(3, dtype=bool),
        )
        assert np.abs(out.r_hat - gt.r).max() <= 1e-9
        assert np.abs(out.delta_hat - gt.delta).max() <= 1e-9

    def test_random_weights_outputs_bounded(self):
        inst = triangle()
        w = random_model(8, uniform=False, seed=3)
        out = forward_step(w, inst, np.ones(3), np.ones(3, dtype=bool), np.ones(3, dtype=bool))
        assert np.isfinite(out.r_hat).all()
        assert ((0 <= out.x_hat) & (out.x_hat <= 1)).all()

    def test_all_masked_raises(self):
        inst = triangle()
        w = analytic_weights(2, uniform=False)
        with pytest.raises(EmptyStepError):
            forward_step(w, inst, np.ones(3), np.zeros(3, dtype=bool), np.zeros(3, dtype=bool))


class TestAggregationAgainstLoops:
    """The vectorized forward pass against a per-node reimplementation."""

    @pytest.mark.parametrize("uniform", [False, True])
    def test_forward_matches_loop_reference(self, uniform):
        rng = np.random.default_rng(11)
        inst = random_instance(rng, n_lo=6, n_hi=10)
        n, m = inst.n_elements, inst.n_sets
        w = random_model(6, uniform=uniform, seed=5)
        r = rng.random(n) + 0.05
        element_active = np.ones(n, dtype=bool)
        set_active = np.ones(m, dtype=bool)
        out = forward_step(w, inst, r, element_active, set_active)

        t = w.tensors
        elu = lambda x: np.where(x > 0, x, np.expm1(np.minimum(x, 0)))
        deg = np.array([sum(e in T for T in inst.sets) for e in range(n)], dtype=float)
        h_e = {e: t["f_r.w"][:, 0] * np.log(max(r[e], 1e-12)) + t["f_r.b"] for e in range(n)}
        h_d = {e: t["f_d.w"][:, 0] * np.log1p(deg[e]) + t["f_d.b"] for e in range(n)}
        h_T = {}
        for j, members in enumerate(inst.sets):
            msgs = []
            for e in members:
                z = np.concatenate([h_e[e], h_d[e]])
                msgs.append(t["g_e.w2"] @ elu(t["g_e.w1"] @ z + t["g_e.b1"]) + t["g_e.b2"])
            h_T[j] = np.min(msgs, axis=0)
        for j in range(m):
            got = out.delta_hat[j]
            want = (t["q_delta.w"] @ h_T[j] + t["q_delta.b"]).item()
            assert got == pytest.approx(want, abs=1e-12)
        if uniform:
            h_z = np.min([h_T[j] for j in range(m)], axis=0)
            assert out.Delta_hat == pytest.approx(
                (t["q_Delta.w"] @ h_z + t["q_Delta.b"]).item(), abs=1e-12
            )
        for e in range(n):
            if uniform:
                agg = sum(h_z for T in inst.sets if e in T)
            else:
                agg = sum(h_T[j] for j, T in enumerate(inst.sets) if e in T)
            if isinstance(agg, int):
                agg = np.zeros(w.hidden_dim)
            u = np.concatenate([elu(h_e[e]) + t["g_u.pre_b"], agg])
            h_new = t["g_u.w"] @ u + t["g_u.b"]
            assert out.r_hat[e] == pytest.approx((t["q_r.w"] @ h_new + t["q_r.b"]).item(), abs=1e-12)


class TestRollout:
    def test_path_uniform_chooses_middle(self):
        inst = from_vertex_cover(3, [(0, 1), (1, 2)], [1.0, 1.0, 1.0], id="path")
        pred = rollout(analytic_weights(4, uniform=True), inst)
        assert pred.final_solution.chosen == (1,)
        assert len(pred.steps) == 1
        assert not pred.cleanup_used

    @pytest.mark.parametrize("task", ["mvc", "msc", "mhs"])
    def test_free_run_matches_engine_solutions(self, task):
        uniform = task == "mhs"
        model = analytic_weights(8, uniform=uniform)
        for inst in corpus(task, 20, sizes=(16,), seed=41):
            scaled = make_instance(inst.task, [x / max(inst.weights) for x in inst.weights], inst.sets, id=inst.id)
            pred = rollout(model, scaled)
            gt = run_general(scaled, AlgoConfig(uniform=uniform))
            assert pred.final_solution.chosen == gt.final_solution.chosen

    def test_zero_weights_prechooses_everything(self):
        inst = make_instance("mhs", [0.0, 0.0], [[0], [0, 1]], id="zz")
        pred = rollout(analytic_weights(4, uniform=False), inst)
        assert pred.final_solution.chosen == (0, 1)
        assert len(pred.steps) == 1  # the pre-pass record, no processor steps

    def test_teacher_forced_needs_matching_trajectory(self):
        inst = triangle()
        other = from_vertex_cover(2, [(0, 1)], [1, 1], id="other")
        traj = run_general(other)
        with pytest.raises(ValueError):
            rollout(analytic_weights(2, False), inst, mode="teacher_forced", trajectory=traj)
        with pytest.raises(ValueError):
            rollout(analytic_weights(2, False), inst, mode="teacher_forced")

    def test_teacher_forced_analytic_matches_hints(self):
        inst = corpus("mvc", 1, sizes=(12,), seed=51)[0]
        scaled = make_instance(inst.task, [x / max(inst.weights) for x in inst.weights], inst.sets, id=inst.id)
        traj = run_general(scaled)
        pred = rollout(analytic_weights(4, False), scaled, mode="teacher_forced", trajectory=traj)
        assert len(pred.steps) == len(traj.steps)
        for hat, gt in zip(pred.steps, traj.steps):
            assert np.abs(hat.r_hat - gt.r).max() <= 1e-9
            assert np.abs(hat.delta_hat - gt.delta).max() <= 1e-9

    def test_mask_monotone_under_threshold_rule(self):
        model = random_model(8, uniform=False, seed=9, temperature=4.0)
        inst = corpus("mvc", 1, sizes=(12,), seed=61)[0]
        pred = rollout(model, inst)
        prev = set()
        for step in pred.steps:
            now = {e for e in range(inst.n_elements) if step.x_hat[e] >= 0.5}
            assert prev <= now
            prev = {e for e in range(inst.n_elements) if step.x_hat[e] == 1.0}
        assert is_hitting_set(inst, pred.final_solution.chosen)

    def test_argmax_rule_adds_one_element_per_step(self):
        model = random_model(8, uniform=True, seed=10)
        inst = corpus("mhs", 1, sizes=(12,), seed=62)[0]
        pred = rollout(model, inst)
        assert is_hitting_set(inst, pred.final_solution.chosen)
        # each processor step commits exactly one element
        counts = [(s.x_hat == 1.0).sum() for s in pred.steps]
        assert all(b - a == 1 for a, b in zip(counts, counts[1:]))

    def test_cleanup_flag_on_hopeless_model(self):
        # A model that never crosses the threshold must fall back to cleanup.
        tensors = {name: np.zeros(shape) for name, shape in tensor_shapes(2, False).items()}
        tensors["q_x.b"][0] = -50.0
        model = ModelWeights(hidden_dim=2, uniform=False, tensors=tensors)
        inst = triangle()
        pred = rollout(model, inst, max_steps=4)
        assert pred.cleanup_used
        assert is_hitting_set(inst, pred.final_solution.chosen)


class TestPermutationEquivariance:
    def test_element_relabel_exact(self):
        rng = np.random.default_rng(13)
        inst = random_instance(rng, n_lo=8, n_hi=8)
        perm = rng.permutation(inst.n_elements)
        inv = np.argsort(perm)
        permuted = make_instance(
            inst.task,
            [inst.weights[inv[e]] for e in range(inst.n_elements)],
            [[int(perm[e]) for e in members] for members in inst.sets],
            id="perm",
        )
        model = random_model(4, uniform=False, seed=2)
        r = rng.random(inst.n_elements)
        act = np.ones(inst.n_elements, dtype=bool)
        sact = np.ones(inst.n_sets, dtype=bool)
        a = forward_step(model, inst, r, act, sact)
        b = forward_step(model, permuted, r[inv], act, sact)
        assert (a.r_hat == b.r_hat[perm]).all()
        assert (a.x_hat == b.x_hat[perm]).all()
        assert (a.delta_hat == b.delta_hat).all()

    def test_set_relabel_near_exact(self):
        # sum aggregation order changes under subset relabeling, so allow
        # an ulp-level tolerance there
        rng = np.random.default_rng(14)
        inst = random_instance(rng, n_lo=8, n_hi=8)
        sigma = rng.permutation(inst.n_sets)
        permuted = make_instance(
            inst.task,
            inst.weights,
            [inst.sets[j] for j in sigma],
            id="sperm",
        )
        model = random_model(4, uniform=True, seed=2)
        r = rng.random(inst.n_elements)
        act = np.ones(inst.n_elements, dtype=bool)
        sact = np.ones(inst.n_sets, dtype=bool)
        a = forward_step(model, inst, r, act, sact)
        b = forward_step(model, permuted, r, act, sact)
        assert np.abs(a.delta_hat[sigma] - b.delta_hat).max() <= 1e-12
        assert np.abs(a.r_hat - b.r_hat).max() <= 1e-12
        assert a.Delta_hat == pytest.approx(b.Delta_hat, abs=1e-12)


class TestReplication:
    def test_triangle_tight(self):
        report = verify_replication(triangle(), 4)
        assert report.passed(1e-9)

    @pytest.mark.parametrize("hidden", [1, 4, 32])
    def test_hidden_dim_invariance(self, hidden):
        inst = corpus("mhs", 1, sizes=(16,), seed=71)[0]
        report = verify_replication(inst, hidden)
        assert report.passed(1e-6)

    def test_identical_rollouts_across_hidden_dims(self):
        inst = corpus("mvc", 1, sizes=(12,), seed=72)[0]
        scaled = make_instance(inst.task, [x / max(inst.weights) for x in inst.weights], inst.sets, id=inst.id)
        preds = [rollout(analytic_weights(h, False), scaled) for h in (1, 4, 32)]
        for other in preds[1:]:
            assert len(other.steps) == len(preds[0].steps)
            for a, b in zip(preds[0].steps, other.steps):
                assert (a.r_hat == b.r_hat).all()
                assert (a.delta_hat == b.delta_hat).all()

    def test_rescaled_weights_still_pass(self):
        inst = triangle()
        half = make_instance("mvc", [0.5, 0.5, 0.5], inst.sets, id="half")
        assert verify_replication(half, 4).passed(1e-9)

    @pytest.mark.parametrize("task", ["mvc", "msc", "mhs"])
    def test_random_instances(self, task):
        for inst in corpus(task, 15, sizes=(16,), seed=73):
            report = verify_replication(inst, 8)
            assert report.passed(1e-6), (inst.id, report)
