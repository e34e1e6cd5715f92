import math
import random

import numpy as np
import pytest

from pidlab import (PidConfig, PlantModel, brake_mission, circle_mission,
                    eval_offline, eval_online, hold_mission, mode_spec,
                    parse_formula, return_home_mission, simulate)
from pidlab.mtl import (And, Atom, Eventually, Globally, Implies, MtlSyntaxError,
                        Not, Or, Prev, circle_lap_spec)
from pidlab.plant import Trajectory


def make_traj(x, dt=1.0, v=None, r=None, mode="hold"):
    x = np.asarray(x, dtype=float)
    n = len(x)
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    r = np.zeros(n) if r is None else np.asarray(r, dtype=float)
    return Trajectory(dt=dt, t=np.arange(n) * dt, x=x, v=v, r=r, e=r - x,
                      mode=mode)


# ---------------------------------------------------------------------------
# slow reference semantics, written independently of the vectorized engine
# ---------------------------------------------------------------------------

def _ref_signal(traj, name):
    if name == "abs_e":
        return np.abs(traj.e)
    return getattr(traj, name)


def _ref_cmp(op, a, b):
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "=": a == b}[op]


def ref_sat(node, traj, i, h, optimistic):
    if isinstance(node, Atom):
        if node.signal == "mode":
            return traj.mode == node.rhs
        sig = _ref_signal(traj, node.signal)
        if isinstance(node.rhs, Prev):
            if i == 0:
                return True
            rhs = _ref_signal(traj, node.rhs.signal)[i - 1] + node.rhs.offset
        else:
            rhs = node.rhs
        return bool(_ref_cmp(node.op, sig[i], rhs))
    if isinstance(node, Not):
        return not ref_sat(node.child, traj, i, h, optimistic)
    if isinstance(node, And):
        return all(ref_sat(c, traj, i, h, optimistic) for c in node.children)
    if isinstance(node, Or):
        return any(ref_sat(c, traj, i, h, optimistic) for c in node.children)
    if isinstance(node, Implies):
        return (not ref_sat(node.lhs, traj, i, h, optimistic)
                or ref_sat(node.rhs, traj, i, h, optimistic))
    if node.t_lo is None:
        lo, hi = 0, None
    else:
        lo = max(0, math.ceil(node.t_lo / traj.dt - 1e-9))
        hi = math.floor(node.t_hi / traj.dt + 1e-9)
    last = h if hi is None else min(i + hi, h)
    indices = range(i + lo, last + 1)
    if isinstance(node, Globally):
        return all(ref_sat(node.child, traj, j, h, optimistic) for j in indices)
    hit = any(ref_sat(node.child, traj, j, h, optimistic) for j in indices)
    beyond = hi is None or i + hi > h
    return hit or (optimistic and beyond)


def ref_offline(node, traj):
    return ref_sat(node, traj, 0, len(traj) - 1, False)


def ref_online(node, traj, window):
    n = len(traj)
    if window >= n:
        return ref_offline(node, traj)
    return all(ref_sat(node, traj, w0, w0 + window - 1, True)
               for w0 in range(n - window + 1))


def random_formula(rng, depth=3):
    if depth == 0 or rng.random() < 0.3:
        sig = rng.choice(["x", "v", "e", "t", "abs_e"])
        op = rng.choice(["<", "<=", ">", ">=", "="])
        if rng.random() < 0.2:
            return Atom(sig, op, Prev(sig, rng.choice([0.0, 0.5, -0.5])))
        return Atom(sig, op, rng.choice([-2.0, -0.5, 0.0, 0.5, 1.0, 3.0]))
    kind = rng.randrange(6)
    if kind == 0:
        return Not(random_formula(rng, depth - 1))
    if kind == 1:
        return And((random_formula(rng, depth - 1), random_formula(rng, depth - 1)))
    if kind == 2:
        return Or((random_formula(rng, depth - 1), random_formula(rng, depth - 1)))
    if kind == 3:
        return Implies(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    cls = Globally if kind == 4 else Eventually
    if rng.random() < 0.5:
        return cls(random_formula(rng, depth - 1))
    lo = rng.choice([0.0, 1.0, 2.5])
    return cls(random_formula(rng, depth - 1), t_lo=lo, t_hi=lo + rng.choice([0.0, 2.0, 6.0]))


def random_traj(rng, n):
    vals = lambda: np.round(np.array([rng.uniform(-3, 3) for _ in range(n)]), 2)
    x = vals()
    return Trajectory(dt=1.0, t=np.arange(n, dtype=float), x=x, v=vals(),
                      r=x + vals() * 0.5, e=None, mode="hold")


def test_engine_matches_reference_semantics():
    """Drive the vectorized evaluator against the naive recursive one on a
    few hundred random formula/trace pairs, offline and windowed."""
    rng = random.Random(20240811)
    for trial in range(300):
        traj = random_traj(rng, rng.randrange(2, 12))
        traj.e = traj.r - traj.x
        f = random_formula(rng)
        assert eval_offline(f, traj) == ref_offline(f, traj), (trial, f)
        w = rng.randrange(2, len(traj) + 3)
        assert eval_online(f, traj, w) == ref_online(f, traj, w), (trial, f, w)


class TestOfflineSemantics:
    def test_globally_all_samples(self):
        traj = make_traj([0, 1, 2, 3])
        assert eval_offline(Globally(Atom("x", "<", 4)), traj)
        assert not eval_offline(Globally(Atom("x", "<", 3)), traj)

    def test_eventually_needs_a_witness_inside_the_trace(self):
        traj = make_traj([0, 1, 2])
        assert eval_offline(Eventually(Atom("x", ">=", 2)), traj)
        # interval extends past the trace: unsatisfied means false offline
        assert not eval_offline(Eventually(Atom("x", ">", 5), t_lo=0, t_hi=100), traj)

    def test_truncated_globally_is_vacuous(self):
        traj = make_traj([0, 1, 2])
        assert eval_offline(Globally(Atom("x", ">", 99), t_lo=50, t_hi=60), traj)

    def test_interval_bounds_round_toward_interior(self):
        traj = make_traj([5, 0, 0, 5], dt=0.1)
        # [0.05, 0.25] covers exactly the samples at t=0.1 and t=0.2
        assert eval_offline(Globally(Atom("x", "<", 1), t_lo=0.05, t_hi=0.25), traj)
        assert not eval_offline(Eventually(Atom("x", ">", 1), t_lo=0.05, t_hi=0.25), traj)

    def test_interval_endpoints_inclusive(self):
        traj = make_traj([1, 0, 0, 1], dt=1.0)
        assert eval_offline(Eventually(Atom("x", ">=", 1), t_lo=3, t_hi=3), traj)
        assert eval_offline(Eventually(Atom("x", "=", 1), t_lo=0, t_hi=0), traj)

    def test_prev_atom_skips_first_sample(self):
        climbing = make_traj([3, 2, 1])  # |x| falls but the atom wants a rise
        rising = Atom("x", ">", Prev("x"))
        assert not eval_offline(Globally(rising), climbing)
        # at index 0 there is no previous sample, so the obligation is waived
        assert eval_offline(rising, climbing)

    def test_prev_atom_with_offset(self):
        traj = make_traj([0, 0.3, 0.6])
        assert eval_offline(Globally(Atom("x", "<=", Prev("x", 0.5))), traj)
        assert not eval_offline(Globally(Atom("x", "<=", Prev("x", 0.1))), traj)

    def test_boolean_connectives(self):
        traj = make_traj([1, 1])
        t = Atom("x", "=", 1)
        f = Atom("x", "=", 0)
        assert eval_offline(And((t, Not(f))), traj)
        assert eval_offline(Or((f, t)), traj)
        assert eval_offline(Implies(f, f), traj)
        assert not eval_offline(Implies(t, f), traj)

    def test_mode_atom(self):
        traj = make_traj([0], mode="brake")
        assert eval_offline(Atom("mode", "=", "brake"), traj)
        assert not eval_offline(Atom("mode", "=", "hold"), traj)


class TestOnlineSemantics:
    def test_window_covering_trace_equals_offline(self):
        traj = make_traj([0, 1, 2, 5])
        f = Eventually(Atom("x", ">", 9))
        assert eval_online(f, traj, 4) == eval_offline(f, traj)
        assert eval_online(f, traj, 400) == eval_offline(f, traj)

    def test_pointwise_violation_caught_by_both(self):
        x = np.zeros(50)
        x[30] = 9.0
        traj = make_traj(x)
        f = Globally(Atom("x", "<", 1))
        assert not eval_offline(f, traj)
        assert not eval_online(f, traj, 5)

    def test_long_horizon_eventually_slips_past_online(self):
        # the obligation spans 40 samples; a 5-sample window never resolves it
        traj = make_traj(np.zeros(60))
        f = Globally(Eventually(Atom("x", ">", 1), t_lo=0, t_hi=40), t_lo=0, t_hi=10)
        assert not eval_offline(f, traj)
        assert eval_online(f, traj, 5)

    def test_window_must_be_at_least_two(self):
        with pytest.raises(ValueError):
            eval_online(Atom("x", "<", 1), make_traj([0, 1]), 1)

    def test_globally_of_atoms_agrees_with_offline(self):
        rng = random.Random(3)
        for _ in range(60):
            traj = random_traj(rng, rng.randrange(3, 10))
            traj.e = traj.r - traj.x
            atom = Atom(rng.choice(["x", "v", "e"]), rng.choice(["<", ">="]),
                        rng.choice([-1.0, 0.0, 1.0]))
            f = Globally(atom)
            for w in (2, 3, 5):
                assert eval_online(f, traj, w) == eval_offline(f, traj)

    def test_violations_persist_in_larger_windows(self):
        rng = random.Random(4)
        for _ in range(40):
            traj = random_traj(rng, 8)
            traj.e = traj.r - traj.x
            f = Globally(Atom("x", "<", rng.choice([0.0, 1.0])))
            results = [eval_online(f, traj, w) for w in range(2, 9)]
            # once a window size catches the violation, bigger ones do too
            for small, big in zip(results, results[1:]):
                assert not (small is False and big is True)


class TestModeSpecs:
    def test_hold_spec_verdicts(self):
        plant = PlantModel()
        m = hold_mission()
        good = simulate(plant, PidConfig(1, 0.5, 1), m)
        bad = simulate(plant, PidConfig(1, 5, 1), m)
        spec = mode_spec(m)
        assert eval_offline(spec, good)
        assert not eval_offline(spec, bad)

    def test_brake_spec_on_stopped_trace(self):
        m = brake_mission(v_stop=0.01)
        n = 6001
        v = np.where(np.arange(n) * 0.01 < 25.0, 1.0, 0.0)
        traj = Trajectory(dt=0.01, t=np.arange(n) * 0.01, x=np.zeros(n), v=v,
                          r=np.zeros(n), e=np.zeros(n), mode="brake")
        assert eval_offline(mode_spec(m), traj)
        still_moving = Trajectory(dt=0.01, t=np.arange(n) * 0.01, x=np.zeros(n),
                                  v=np.full(n, 0.5), r=np.zeros(n),
                                  e=np.zeros(n), mode="brake")
        assert not eval_offline(mode_spec(m), still_moving)

    def test_brake_spec_simulated(self):
        plant = PlantModel()
        m = brake_mission()
        assert eval_offline(mode_spec(m), simulate(plant, PidConfig(2, 1, 2), m))
        assert not eval_offline(mode_spec(m), simulate(plant, PidConfig(1, 5, 1), m))

    def test_circle_spec_verdicts(self):
        plant = PlantModel()
        m = circle_mission(radius=1.0, freq=0.05, circle_tol=0.4)
        assert eval_offline(mode_spec(m), simulate(plant, PidConfig(4, 2, 2), m))
        assert not eval_offline(mode_spec(m), simulate(plant, PidConfig(1, 5, 1), m))

    def test_return_home_spec_verdicts(self):
        plant = PlantModel()
        m = return_home_mission()
        spec = mode_spec(m)
        assert eval_offline(spec, simulate(plant, PidConfig(2, 1, 2), m))
        assert not eval_offline(spec, simulate(plant, PidConfig(1, 5, 1), m))

    def test_return_home_flags_stalled_return(self):
        # parks far from home: arrival fails even though nothing oscillates
        m = return_home_mission()
        n = 12001
        t = np.arange(n) * 0.01
        x = np.full(n, 3.0)
        r, _ = np.vectorize(lambda tt: __import__("pidlab").reference_at(m, tt))(t)
        traj = Trajectory(dt=0.01, t=t, x=x, v=np.zeros(n), r=r, e=r - x,
                          mode="return_home")
        assert not eval_offline(mode_spec(m), traj)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            mode_spec(Mission := type("M", (), {"mode": "x", "params": {}})())


class TestCircleLapSpec:
    def test_good_tracker_reaches_both_extremes(self):
        m = circle_mission(radius=1.0, freq=0.05, duration=60)
        plant = PlantModel()
        spec = circle_lap_spec(m)
        assert eval_offline(spec, simulate(plant, PidConfig(4, 2, 2), m))

    def test_sluggish_tracker_fails_offline_but_passes_online(self):
        m = circle_mission(radius=1.0, freq=0.05, duration=60)
        plant = PlantModel()
        spec = circle_lap_spec(m)
        traj = simulate(plant, PidConfig(0.05, 0.01, 0.5), m)
        assert np.abs(traj.x).max() < 0.8  # genuinely never gets there
        assert not eval_offline(spec, traj)
        lap_tenth = int(round(0.1 / m.params["freq"] / plant.dt))
        assert eval_online(spec, traj, lap_tenth)

    def test_needs_circle_mission(self):
        with pytest.raises(ValueError):
            circle_lap_spec(hold_mission())


class TestParser:
    def test_worked_example(self):
        f = parse_formula("(G (=> (> t 20) (< (abs e) 0.05)))")
        assert f == Globally(Implies(Atom("t", ">", 20.0),
                                     Atom("abs_e", "<", 0.05)))

    def test_bounded_operators(self):
        f = parse_formula("(E [0 5] (>= x 1))")
        assert f == Eventually(Atom("x", ">=", 1.0), t_lo=0.0, t_hi=5.0)

    def test_boolean_forms(self):
        f = parse_formula("(and (not (< v 0)) (or (= mode hold) (= mode brake)))")
        assert f == And((Not(Atom("v", "<", 0.0)),
                         Or((Atom("mode", "=", "hold"), Atom("mode", "=", "brake")))))

    def test_prev_forms(self):
        assert parse_formula("(> x (prev x))") == Atom("x", ">", Prev("x"))
        f = parse_formula("(<= (abs e) (+ (prev (abs e)) 0.02))")
        assert f == Atom("abs_e", "<=", Prev("abs_e", 0.02))

    def test_parse_eval_round_trip(self):
        traj = make_traj([0, 1, 2, 3], dt=1.0)
        f = parse_formula("(G [1 3] (>= x 1))")
        assert eval_offline(f, traj)

    @pytest.mark.parametrize("text", [
        "", "(G", "(G x)", "(< q 1)", "(< x one)", "(foo x 1)",
        "(= x hold)", "(G [1] (< x 1))", "(< x 1) junk", "(and (< x 1))",
    ])
    def test_rejects_malformed(self, text):
        with pytest.raises(MtlSyntaxError):
            parse_formula(text)

    def test_error_carries_offset(self):
        with pytest.raises(MtlSyntaxError) as err:
            parse_formula("(G (=> (> t 20) (< (abs q) 0.05)))")
        assert err.value.pos is not None
