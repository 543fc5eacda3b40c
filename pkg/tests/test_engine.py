import numpy as np
import pytest

from conftest import corpus, random_instance
from pdlab.engine import (
    AlgoConfig,
    IncompleteTrajectoryError,
    dual_variables,
    run_cover_msc,
    run_cover_mvc,
    run_general,
    verify_dual_feasibility,
)
from pdlab.instances import (
    InvalidInstanceError,
    from_set_cover,
    from_vertex_cover,
    is_hitting_set,
    make_instance,
)
from pdlab.oracle import solve_bruteforce


def triangle():
    return from_vertex_cover(3, [(0, 1), (1, 2), (2, 0)], [1.0, 1.0, 1.0], id="tri")


def path3():
    return from_vertex_cover(3, [(0, 1), (1, 2)], [1.0, 1.0, 1.0], id="path")


class TestRunGeneral:
    def test_single_element_forced(self):
        inst = make_instance("mhs", [1.0], [[0]], id="one")
        traj = run_general(inst)
        assert len(traj.steps) == 1
        step = traj.steps[0]
        assert step.delta.tolist() == [1.0]
        assert step.r.tolist() == [0.0]
        assert step.x.tolist() == [1]
        assert traj.final_solution.chosen == (0,)
        assert traj.final_solution.weight == 1.0

    def test_triangle_hand_trace(self):
        traj = run_general(triangle())
        assert len(traj.steps) == 1
        step = traj.steps[0]
        assert step.delta.tolist() == [0.5, 0.5, 0.5]
        assert step.r.tolist() == [0.0, 0.0, 0.0]
        assert traj.final_solution.chosen == (0, 1, 2)
        assert traj.final_solution.weight == 3.0

    def test_path_uniform_hand_trace(self):
        traj = run_general(path3(), AlgoConfig(uniform=True))
        assert len(traj.steps) == 1
        step = traj.steps[0]
        assert step.delta.tolist() == [0.5, 0.5]
        assert step.Delta == 0.5
        assert step.r.tolist() == [0.5, 0.0, 0.5]
        assert traj.final_solution.chosen == (1,)
        assert traj.final_solution.weight == 1.0  # the optimum

    def test_zero_weight_prepass_recorded_as_step0(self):
        inst = make_instance("mhs", [0.0, 1.0], [[0, 1], [1]], id="z")
        traj = run_general(inst)
        step0 = traj.steps[0]
        assert step0.x.tolist() == [1, 0]
        assert step0.delta.tolist() == [0.0, 0.0]
        assert step0.r.tolist() == [0.0, 1.0]
        # second subset still needs element 1
        assert traj.final_solution.chosen == (0, 1)

    def test_step_cap_exhaustion_raises(self):
        inst = make_instance("mhs", [1.0, 2.0], [[0], [1]], id="cap")
        with pytest.raises(IncompleteTrajectoryError):
            run_general(inst, AlgoConfig(uniform=True, max_steps=1))

    def test_no_sets_is_trivially_feasible(self):
        inst = make_instance("mhs", [1.0, 2.0], [], id="empty-family")
        traj = run_general(inst)
        assert traj.steps == ()
        assert traj.final_solution.chosen == ()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AlgoConfig(epsilon=1.0)
        with pytest.raises(ValueError):
            AlgoConfig(epsilon=-0.1)
        with pytest.raises(ValueError):
            AlgoConfig(tight_tol=0.0)


class TestCoverVariants:
    def test_single_edge_hand_trace(self):
        inst = from_vertex_cover(2, [(0, 1)], [1.0, 3.0], id="edge")
        traj = run_cover_mvc(inst, 0.1)
        assert len(traj.steps) == 1
        step = traj.steps[0]
        assert step.delta.tolist() == [1.0]
        assert step.r.tolist() == [0.0, 2.0]
        assert traj.final_solution.chosen == (0,)
        assert traj.final_solution.weight == 1.0

    def test_triangle_bound(self):
        traj = run_cover_mvc(triangle(), 0.1)
        opt = solve_bruteforce(triangle()).weight
        assert opt == 2.0
        assert traj.final_solution.weight <= (2 / 0.9) * opt

    def test_star_cheap_center(self):
        edges = [(0, i) for i in range(1, 5)]
        inst = from_vertex_cover(5, edges, [0.1, 1, 1, 1, 1], id="star")
        traj = run_cover_mvc(inst, 0.1)
        assert traj.final_solution.chosen == (0,)
        assert traj.final_solution.weight == pytest.approx(0.1)

    def test_epsilon_zero_rejected(self):
        with pytest.raises(ValueError):
            run_cover_mvc(triangle(), 0.0)
        msc = from_set_cover(1, [[0]], [1.0])
        with pytest.raises(ValueError):
            run_cover_msc(msc, 0.0)

    def test_task_mismatch_rejected(self):
        with pytest.raises(InvalidInstanceError):
            run_cover_msc(triangle(), 0.1)
        msc = from_set_cover(1, [[0]], [1.0])
        with pytest.raises(InvalidInstanceError):
            run_cover_mvc(msc, 0.1)

    def test_msc_only_cover(self):
        inst = from_set_cover(2, [[0, 1]], [1.0], id="only")
        traj = run_cover_msc(inst, 0.1)
        assert traj.final_solution.chosen == (0,)

    def test_msc_bound_example(self):
        inst = from_set_cover(2, [[0], [1], [0, 1]], [1.0, 1.0, 1.0], id="msc3")
        traj = run_cover_msc(inst, 0.1)
        assert traj.final_solution.weight <= (2 / 0.9) * 1.0  # OPT = 1 via the pair set

    def test_msc_relaxed_bound_random(self):
        rng = np.random.default_rng(17)
        eps = 0.1
        for _ in range(100):
            inst = random_instance(rng, n_lo=4, n_hi=10, task="msc")
            traj = run_cover_msc(inst, eps)
            opt = solve_bruteforce(inst).weight
            r = inst.max_set_size()
            assert traj.final_solution.weight <= r / (1 - eps) * opt + 1e-9


class TestDuals:
    def test_triangle_duals(self):
        inst = triangle()
        y = dual_variables(run_general(inst), inst)
        assert y.tolist() == [0.5, 0.5, 0.5]
        report = verify_dual_feasibility(inst, y)
        assert report.feasible
        assert report.dual_objective == pytest.approx(1.5)
        assert report.dual_objective <= solve_bruteforce(inst).weight

    def test_single_element_dual_tight(self):
        inst = make_instance("mhs", [1.0], [[0]], id="one")
        y = dual_variables(run_general(inst), inst)
        assert y.tolist() == [1.0]
        assert verify_dual_feasibility(inst, y).feasible

    def test_infeasible_dual_reports_violation(self):
        inst = make_instance("mhs", [1.0], [[0]], id="one")
        report = verify_dual_feasibility(inst, [1.1])
        assert not report.feasible
        assert report.max_violation == pytest.approx(0.1)

    def test_path_uniform_duals(self):
        inst = path3()
        y = dual_variables(run_general(inst, AlgoConfig(uniform=True)), inst)
        assert y.tolist() == [0.5, 0.5]

    def test_negative_dual_rejected(self):
        inst = make_instance("mhs", [1.0], [[0]], id="one")
        with pytest.raises(ValueError):
            verify_dual_feasibility(inst, [-0.1])

    def test_length_mismatch_rejected(self):
        inst = make_instance("mhs", [1.0], [[0]], id="one")
        with pytest.raises(ValueError):
            verify_dual_feasibility(inst, [0.1, 0.1])

    def test_wrong_instance_rejected(self):
        traj = run_general(triangle())
        with pytest.raises(ValueError):
            dual_variables(traj, path3())


def _configs_for(task):
    if task == "mhs":
        return [AlgoConfig(uniform=True), AlgoConfig(uniform=False)]
    return [AlgoConfig(uniform=False)]


class TestInvariants:
    @pytest.mark.parametrize("task", ["mvc", "msc", "mhs"])
    def test_exact_runs(self, task):
        for inst in corpus(task, 40, seed=3):
            for config in _configs_for(task):
                traj = run_general(inst, config)
                w = np.asarray(inst.weights)
                assert is_hitting_set(inst, traj.final_solution.chosen)
                assert len(traj.steps) <= inst.n_elements + 1

                prev_r = w
                prev_chosen = 0
                for step in traj.steps:
                    assert (step.r <= prev_r + 1e-12).all(), "residuals must not increase"
                    assert (step.r >= -config.tight_tol).all()
                    n_chosen = int(step.x.sum())
                    if step.delta.any():  # a real increment pass
                        assert n_chosen > prev_chosen, "each pass must tighten an element"
                    prev_r = step.r
                    prev_chosen = n_chosen

                # Residual identity r = w - sum of duals of covering subsets.
                y = dual_variables(traj, inst)
                load = np.zeros(inst.n_elements)
                for j, members in enumerate(inst.sets):
                    load[list(members)] += y[j]
                assert np.allclose(traj.steps[-1].r, w - load, atol=1e-9, rtol=0)

                report = verify_dual_feasibility(inst, y)
                assert report.feasible
                opt = solve_bruteforce(inst).weight
                assert report.dual_objective <= opt + 1e-9
                assert opt <= traj.final_solution.weight + 1e-9
                alpha = inst.max_set_size()
                assert traj.final_solution.weight <= alpha * opt + 1e-9

    def test_scale_equivariance_power_of_two(self):
        # c = 4 scales every float exactly, so the runs match bit for bit.
        inst = corpus("mhs", 1, sizes=(16,), seed=9)[0]
        c = 4.0
        scaled = make_instance(
            inst.task, [w * c for w in inst.weights], inst.sets, id=inst.id
        )
        cfg = AlgoConfig(uniform=True)
        cfg_scaled = AlgoConfig(uniform=True, tight_tol=cfg.tight_tol * c)
        a = run_general(inst, cfg)
        b = run_general(scaled, cfg_scaled)
        assert a.final_solution.chosen == b.final_solution.chosen
        assert len(a.steps) == len(b.steps)
        for sa, sb in zip(a.steps, b.steps):
            assert sa.x.tolist() == sb.x.tolist()
            assert (sb.r == c * sa.r).all()
            assert (sb.delta == c * sa.delta).all()
            assert sb.Delta == c * sa.Delta

    def test_scale_equivariance_general_factor(self):
        inst = corpus("mvc", 1, sizes=(12,), seed=9)[0]
        c = 0.3
        scaled = make_instance(
            inst.task, [w * c for w in inst.weights], inst.sets, id=inst.id
        )
        a = run_general(inst, AlgoConfig())
        b = run_general(scaled, AlgoConfig(tight_tol=1e-9 * c))
        assert a.final_solution.chosen == b.final_solution.chosen
        for sa, sb in zip(a.steps, b.steps):
            assert np.allclose(sb.r, c * sa.r, rtol=1e-12, atol=1e-15)
            assert np.allclose(sb.delta, c * sa.delta, rtol=1e-12, atol=1e-15)


def reference_interpreter(inst, uniform, epsilon, tol=1e-9):
    """Independent dict-and-loop interpreter of the algorithm semantics.

    Mirrors one increment pass + tightness pass per timestep with active-set
    degree counting; deliberately shares no code with the engine.
    """
    n = inst.n_elements
    w = list(inst.weights)
    r = list(w)
    chosen = {e for e in range(n) if w[e] <= tol}
    steps = []
    if chosen:
        steps.append((list(chosen), list(r), [0.0] * inst.n_sets, 0.0 if uniform else None))

    def active_sets():
        return [j for j, t in enumerate(inst.sets) if not chosen.intersection(t)]

    while active_sets():
        act = active_sets()
        deg = {}
        for j in act:
            for e in inst.sets[j]:
                deg[e] = deg.get(e, 0) + 1
        delta = [0.0] * inst.n_sets
        for j in act:
            delta[j] = min(r[e] / deg[e] for e in inst.sets[j])
        if uniform:
            big_delta = min(delta[j] for j in act)
            for e in range(n):
                if e not in chosen:
                    r[e] = r[e] - deg.get(e, 0) * big_delta
        else:
            big_delta = None
            for e in range(n):
                if e not in chosen:
                    drop = 0.0
                    for j in act:
                        if e in inst.sets[j]:
                            drop += delta[j]
                    r[e] = r[e] - drop
        for e in range(n):
            if e not in chosen and r[e] <= max(tol, epsilon * w[e]):
                chosen.add(e)
        steps.append((sorted(chosen), list(r), delta, big_delta))
    return steps, sorted(chosen)


class TestAgainstReferenceInterpreter:
    @pytest.mark.parametrize(
        "uniform,epsilon", [(False, 0.0), (True, 0.0), (False, 0.1), (False, 0.4)]
    )
    def test_trajectories_match_exactly(self, uniform, epsilon):
        rng = np.random.default_rng(99)
        for _ in range(40):
            inst = random_instance(rng, n_lo=4, n_hi=12)
            traj = run_general(inst, AlgoConfig(uniform=uniform, epsilon=epsilon))
            ref_steps, ref_chosen = reference_interpreter(inst, uniform, epsilon)
            assert len(traj.steps) == len(ref_steps)
            assert list(traj.final_solution.chosen) == ref_chosen
            for step, (rx, rr, rdelta, rDelta) in zip(traj.steps, ref_steps):
                assert sorted(np.flatnonzero(step.x).tolist()) == sorted(rx)
                assert step.r.tolist() == rr
                assert step.delta.tolist() == rdelta
                assert step.Delta == rDelta

    def test_zero_weight_prepass_matches(self):
        inst = make_instance("mhs", [0.0, 0.4, 0.7], [[0, 1], [1, 2]], id="zz")
        traj = run_general(inst, AlgoConfig(uniform=True))
        ref_steps, ref_chosen = reference_interpreter(inst, True, 0.0)
        assert len(traj.steps) == len(ref_steps)
        assert list(traj.final_solution.chosen) == ref_chosen


class TestRelaxedRunDuals:
    def test_cover_duals_feasible_and_bounded(self):
        # the relaxed runs still build a feasible packing, so weak duality
        # and the residual identity hold there too
        from pdlab.oracle import solve_bruteforce

        for inst in corpus("mvc", 15, sizes=(10, 14), seed=91):
            traj = run_cover_mvc(inst, 0.1)
            y = dual_variables(traj, inst)
            report = verify_dual_feasibility(inst, y)
            assert report.feasible
            assert report.dual_objective <= solve_bruteforce(inst).weight + 1e-9
            w = np.asarray(inst.weights)
            load = np.zeros(inst.n_elements)
            for j, members in enumerate(inst.sets):
                load[list(members)] += y[j]
            assert np.allclose(traj.steps[-1].r, w - load, atol=1e-9, rtol=0)
