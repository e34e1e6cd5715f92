"""Discrete-time metric temporal logic over sampled trajectories.

Formulas are pointwise Boolean: atoms compare one trace signal against a
constant or against the same signal one sample earlier. Semantics are
finite-trace: a Globally over a truncated interval quantifies over the
samples that exist, an Eventually that is never satisfied within the trace
is false.

The online evaluator slides a fixed-length window along the trace and flags
a violation as soon as any window fails. Obligations whose interval reaches
past the window's end cannot be resolved there and are treated as satisfied,
which is exactly why long-horizon Eventually properties can slip past an
online monitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGNALS = ("x", "v", "r", "e", "abs_e", "t", "mode")
COMPARATORS = ("<", "<=", ">", ">=", "=")


class MtlSyntaxError(ValueError):
    """Raised by parse_formula on malformed text, with a character offset."""

    def __init__(self, message, pos=None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)


@dataclass(frozen=True)
class Prev:
    """Reference to a signal one sample back, plus an additive offset."""

    signal: str
    offset: float = 0.0

    def __post_init__(self):
        if self.signal not in SIGNALS or self.signal == "mode":
            raise ValueError(f"prev() not defined for signal {self.signal!r}")


@dataclass(frozen=True)
class Atom:
    signal: str
    op: str
    rhs: object  # float, str (mode name) or Prev
    label: str | None = None

    def __post_init__(self):
        if self.signal not in SIGNALS:
            raise ValueError(f"unknown signal {self.signal!r}")
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")
        if self.signal == "mode":
            if self.op != "=" or not isinstance(self.rhs, str):
                raise ValueError("mode atoms support only '=' against a mode name")
        elif isinstance(self.rhs, str):
            raise ValueError("string rhs is only valid for the mode signal")


@dataclass(frozen=True)
class Not:
    child: object
    label: str | None = None


@dataclass(frozen=True)
class And:
    children: tuple
    label: str | None = None


@dataclass(frozen=True)
class Or:
    children: tuple
    label: str | None = None


@dataclass(frozen=True)
class Implies:
    lhs: object
    rhs: object
    label: str | None = None


def _check_bounds(t_lo, t_hi):
    if (t_lo is None) != (t_hi is None):
        raise ValueError("temporal bounds must be both set or both omitted")
    if t_lo is not None and (t_lo < 0 or t_hi < t_lo):
        raise ValueError("need 0 <= t_lo <= t_hi")


@dataclass(frozen=True)
class Globally:
    child: object
    t_lo: float | None = None
    t_hi: float | None = None
    label: str | None = None

    def __post_init__(self):
        _check_bounds(self.t_lo, self.t_hi)


@dataclass(frozen=True)
class Eventually:
    child: object
    t_lo: float | None = None
    t_hi: float | None = None
    label: str | None = None

    def __post_init__(self):
        _check_bounds(self.t_lo, self.t_hi)


def _signal_slice(ctx, name, j0, j1):
    if name == "mode":
        return None  # handled in _eval_atom
    arr = ctx["sig"].get(name)
    if arr is None and name == "abs_e":
        arr = np.abs(ctx["sig"]["e"])
        ctx["sig"]["abs_e"] = arr
    return arr[j0:j1 + 1]


def _compare(op, lhs, rhs):
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    if op == ">=":
        return lhs >= rhs
    return lhs == rhs


def _eval_atom(node, ctx, j0, j1):
    m = j1 - j0 + 1
    if node.signal == "mode":
        hit = _compare("=", ctx["mode"], node.rhs)
        return np.full(m, bool(hit))
    lhs = _signal_slice(ctx, node.signal, j0, j1)
    if isinstance(node.rhs, Prev):
        # Previous-sample atoms have no obligation at the very first sample.
        out = np.empty(m, dtype=bool)
        pj0 = max(j0, 1)
        prev = _signal_slice(ctx, node.rhs.signal, pj0 - 1, j1 - 1) + node.rhs.offset
        out[pj0 - j0:] = _compare(node.op, lhs[pj0 - j0:], prev)
        if j0 == 0:
            out[0] = True
        return out
    return _compare(node.op, lhs, np.float64(node.rhs))


def _offsets(node, dt):
    """Interval bounds as sample offsets, rounded toward the interval interior."""
    if node.t_lo is None:
        return 0, None
    lo = max(0, math.ceil(node.t_lo / dt - 1e-9))
    hi = math.floor(node.t_hi / dt + 1e-9)
    return lo, hi


def _sat_range(node, ctx, j0, j1, h, optimistic):
    """Satisfaction of node at each index in [j0, j1], horizon h (inclusive).

    Indices are absolute trace positions; h is the last sample visible to
    this evaluation (the trace end offline, the window end online).
    """
    if isinstance(node, Atom):
        return _eval_atom(node, ctx, j0, j1)
    if isinstance(node, Not):
        return ~_sat_range(node.child, ctx, j0, j1, h, optimistic)
    if isinstance(node, And):
        parts = [_sat_range(c, ctx, j0, j1, h, optimistic) for c in node.children]
        return np.logical_and.reduce(parts)
    if isinstance(node, Or):
        parts = [_sat_range(c, ctx, j0, j1, h, optimistic) for c in node.children]
        return np.logical_or.reduce(parts)
    if isinstance(node, Implies):
        a = _sat_range(node.lhs, ctx, j0, j1, h, optimistic)
        b = _sat_range(node.rhs, ctx, j0, j1, h, optimistic)
        return ~a | b

    # Temporal: window of child indices [j + lo, min(j + hi, h)] per j.
    lo, hi = _offsets(node, ctx["dt"])
    js = np.arange(j0, j1 + 1)
    starts = js + lo
    if hi is None:
        ends = np.full_like(js, h)
        beyond = np.ones(len(js), dtype=bool)
    else:
        ends = np.minimum(js + hi, h)
        beyond = js + hi > h
    c0 = j0 + lo
    c1 = int(ends.max())
    if c0 > h or c1 < c0:
        # no child sample is ever visible
        empty = np.ones(len(js), dtype=bool)
        counts = np.zeros(len(js), dtype=int)
        widths = np.zeros(len(js), dtype=int)
    else:
        child = _sat_range(node.child, ctx, c0, c1, h, optimistic)
        cs = np.concatenate(([0], np.cumsum(child)))
        empty = starts > ends
        s_off = np.clip(starts - c0, 0, len(child))
        e_off = np.clip(ends - c0 + 1, 0, len(child))
        counts = cs[e_off] - cs[s_off]
        widths = e_off - s_off
    if isinstance(node, Globally):
        # truncated intervals quantify over what exists; empty ones hold
        return empty | (counts == widths)
    sat = ~empty & (counts > 0)
    if optimistic:
        sat |= beyond
    return sat


def _context(traj):
    return {"sig": {"x": traj.x, "v": traj.v, "r": traj.r, "e": traj.e,
                    "t": traj.t},
            "mode": traj.mode, "dt": traj.dt}


def eval_offline(formula, traj):
    """Whole-trace verdict: does the trace satisfy the formula at time 0?"""
    n = len(traj)
    if n == 0:
        raise ValueError("empty trajectory")
    ctx = _context(traj)
    return bool(_sat_range(formula, ctx, 0, 0, n - 1, False)[0])


def eval_online(formula, traj, window):
    """Sliding-window verdict.

    Evaluates the formula at the start of every window of `window` samples,
    with obligations reaching past the window's end treated as satisfied.
    False iff some window is violated. A window spanning the whole trace (or
    more) degenerates to eval_offline.

    Args:
        formula: MTL formula.
        traj: Trajectory to monitor.
        window: window length in samples, >= 2.
    """
    if window < 2:
        raise ValueError("window must be at least 2 samples")
    n = len(traj)
    if n == 0:
        raise ValueError("empty trajectory")
    if window >= n:
        return eval_offline(formula, traj)
    ctx = _context(traj)
    for w0 in range(n - window + 1):
        if not _sat_range(formula, ctx, w0, w0, w0 + window - 1, True)[0]:
            return False
    return True


def mode_spec(mission):
    """The misbehavior spec a mission's trajectory is checked against."""
    p = mission.params
    if mission.mode == "hold":
        return Globally(
            Implies(Atom("t", ">", p["settle_deadline"]),
                    Atom("abs_e", "<", p["hold_tol"])),
            label="hold_tolerance")
    if mission.mode == "brake":
        after = p["brake_at"] + p["brake_deadline"]
        return Globally(
            Implies(Atom("t", ">", after),
                    And((Atom("v", "<", p["v_stop"]),
                         Atom("v", ">", -p["v_stop"])))),
            label="brake_stop")
    if mission.mode == "circle_track":
        return Globally(
            Implies(Atom("t", ">", p["settle_deadline"]),
                    Atom("abs_e", "<", p["circle_tol"])),
            label="circle_tracking")
    if mission.mode == "return_home":
        ret_start = p["out_t"] + p["mono_margin"]
        ret_end = p["out_t"] + p["return_t"]
        return And((
            Globally(
                Implies(Atom("t", ">", p["settle_deadline"]),
                        Atom("abs_e", "<", p["home_radius"])),
                label="home_arrival"),
            Globally(
                Atom("abs_e", "<=", Prev("abs_e", p["eps_mono"])),
                t_lo=ret_start, t_hi=ret_end,
                label="return_progress"),
        ), label="return_home")
    raise ValueError(f"no spec for mission mode {mission.mode!r}")


def circle_lap_spec(mission, reach_frac=0.8):
    """Recurrence spec for circle tracking: within every lap the plant must
    actually swing out to both extremes of the circle.

    Violations of this spec span a whole lap, so an online monitor whose
    window is much shorter than the lap cannot resolve them.
    """
    if mission.mode != "circle_track":
        raise ValueError("circle_lap_spec needs a circle_track mission")
    p = mission.params
    lap = 1.0 / p["freq"]
    if mission.duration < lap:
        raise ValueError("mission shorter than one lap")
    reach = reach_frac * p["radius"]
    return Globally(
        And((Eventually(Atom("x", ">=", reach), t_lo=0.0, t_hi=lap),
             Eventually(Atom("x", "<=", -reach), t_lo=0.0, t_hi=lap))),
        t_lo=0.0, t_hi=mission.duration - lap,
        label="lap_reach")


# ---------------------------------------------------------------------------
# Textual syntax, e.g.  (G (=> (> t 20) (< (abs e) 0.05)))
# Grammar:
#   formula = atom | (not f) | (and f f ...) | (or f f ...) | (=> f f)
#           | (G f) | (G [lo hi] f) | (E f) | (E [lo hi] f)
#   atom    = (CMP sig rhs)         CMP in < <= > >= =
#   sig     = x | v | r | e | t | mode | (abs e)
#   rhs     = number | modename | (prev sig) | (+ (prev sig) number)
# ---------------------------------------------------------------------------

def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()[]":
            tokens.append((ch, i))
            i += 1
            continue
        j = i
        while j < len(text) and not text[j].isspace() and text[j] not in "()[]":
            j += 1
        tokens.append((text[i:j], i))
        i = j
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, len(self.text))

    def take(self, expect=None):
        tok, at = self.peek()
        if tok is None:
            raise MtlSyntaxError("unexpected end of formula", at)
        if expect is not None and tok != expect:
            raise MtlSyntaxError(f"expected {expect!r}, got {tok!r}", at)
        self.pos += 1
        return tok, at

    def number(self):
        tok, at = self.take()
        try:
            return float(tok)
        except ValueError:
            raise MtlSyntaxError(f"expected a number, got {tok!r}", at) from None

    def signal(self):
        tok, at = self.take()
        if tok == "(":
            head, hat = self.take()
            if head != "abs":
                raise MtlSyntaxError(f"unknown signal form {head!r}", hat)
            inner, iat = self.take()
            if inner != "e":
                raise MtlSyntaxError("abs is only defined for e", iat)
            self.take(")")
            return "abs_e"
        if tok not in SIGNALS or tok == "abs_e":
            raise MtlSyntaxError(f"unknown signal {tok!r}", at)
        return tok

    def rhs(self):
        tok, at = self.peek()
        if tok == "(":
            self.take("(")
            head, hat = self.take()
            if head == "prev":
                sig = self.signal()
                self.take(")")
                return Prev(sig)
            if head == "+":
                self.take("(")
                inner, iat = self.take()
                if inner != "prev":
                    raise MtlSyntaxError("only (+ (prev sig) number) is supported", iat)
                sig = self.signal()
                self.take(")")
                off = self.number()
                self.take(")")
                return Prev(sig, off)
            raise MtlSyntaxError(f"unknown rhs form {head!r}", hat)
        tok, at = self.take()
        try:
            return float(tok)
        except ValueError:
            return tok  # mode name

    def bounds(self):
        tok, _ = self.peek()
        if tok != "[":
            return None, None
        self.take("[")
        lo = self.number()
        hi = self.number()
        self.take("]")
        return lo, hi

    def formula(self):
        _, at = self.take("(")
        head, hat = self.take()
        if head in COMPARATORS:
            sig = self.signal()
            rhs = self.rhs()
            self.take(")")
            try:
                return Atom(sig, head, rhs)
            except ValueError as exc:
                raise MtlSyntaxError(str(exc), at) from None
        if head == "not":
            child = self.formula()
            self.take(")")
            return Not(child)
        if head in ("and", "or"):
            kids = [self.formula()]
            while self.peek()[0] == "(":
                kids.append(self.formula())
            self.take(")")
            if len(kids) < 2:
                raise MtlSyntaxError(f"{head} needs at least two operands", hat)
            return And(tuple(kids)) if head == "and" else Or(tuple(kids))
        if head == "=>":
            lhs = self.formula()
            rhs = self.formula()
            self.take(")")
            return Implies(lhs, rhs)
        if head in ("G", "E"):
            lo, hi = self.bounds()
            child = self.formula()
            self.take(")")
            cls = Globally if head == "G" else Eventually
            try:
                return cls(child, t_lo=lo, t_hi=hi)
            except ValueError as exc:
                raise MtlSyntaxError(str(exc), at) from None
        raise MtlSyntaxError(f"unknown operator {head!r}", hat)


def parse_formula(text):
    """Parse the prefix syntax into a formula tree. Raises MtlSyntaxError."""
    parser = _Parser(text)
    node = parser.formula()
    tok, at = parser.peek()
    if tok is not None:
        raise MtlSyntaxError(f"trailing input {tok!r}", at)
    return node
