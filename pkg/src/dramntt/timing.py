"""Temporal engine: cycle assignment, an independent legality checker, and
command/energy accounting.

The scheduler walks a command sequence in order and gives each command the
earliest issue cycle that satisfies the bank constraints (one command per
bus cycle, tRCD/tRP/tRAS/tCCD/tWR, column latency, CU occupancy, buffer
validity).  DRAM constraints scale with the operating clock so their
absolute latency in nanoseconds stays fixed; compute-unit latencies stay
in cycles.  `check_legality` re-derives every constraint from the timed
trace with its own state machine, so a scheduler bug cannot hide.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

from .device import PimCommand


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class TimingParams:
    """Timing constants in cycles at the reference clock, plus CU latencies."""

    cl: int = 14
    tccd: int = 2
    trp: int = 14
    tras: int = 34
    trcd: int = 14
    twr: int = 16
    tc1: int = 15
    tc2: int = 10
    param_cycles: int = 2
    ref_clock_mhz: int = 1200
    clock_mhz: int = 1200

    def __post_init__(self):
        for name in ("cl", "tccd", "trp", "tras", "trcd", "twr", "tc1", "tc2",
                     "param_cycles", "ref_clock_mhz", "clock_mhz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def ref_ns(self, cycles: int) -> float:
        return cycles * 1000.0 / self.ref_clock_mhz

    def at_clock(self, clock_mhz: int) -> "TimingParams":
        """DRAM constraints rescaled so their duration in ns is preserved;
        CU latencies (tc1/tc2/param) are clock-relative and stay put."""
        if clock_mhz == self.clock_mhz:
            return self
        scale = lambda c: max(1, _ceil_div(c * clock_mhz, self.ref_clock_mhz))
        return replace(
            self,
            cl=scale(self.cl),
            tccd=scale(self.tccd),
            trp=scale(self.trp),
            tras=scale(self.tras),
            trcd=scale(self.trcd),
            twr=scale(self.twr),
            clock_mhz=clock_mhz,
        )


@dataclass(frozen=True)
class EnergyTable:
    """Per-command energy in pJ plus static pJ/cycle.

    Placeholder magnitudes for relative comparisons only; they come from no
    measured source and absolute energy is excluded from acceptance.
    """

    act_pj: float = 2000.0
    rd_pj: float = 300.0
    wr_pj: float = 300.0
    c1_pj: float = 60.0
    c2_pj: float = 40.0
    param_pj: float = 10.0
    static_pj_per_cycle: float = 5.0

    def __post_init__(self):
        for f in (self.act_pj, self.rd_pj, self.wr_pj, self.c1_pj, self.c2_pj,
                  self.param_pj, self.static_pj_per_cycle):
            if f < 0:
                raise ValueError("energies must be non-negative")


class TimedCommand(NamedTuple):
    issue: int
    cmd: PimCommand
    done: int


class TimedTrace(list):
    """Ordered (issue, command, completion) triples."""

    def dump(self) -> str:
        return "".join(f"cycle={t.issue} {t.cmd.text()} done={t.done}\n" for t in self)


@dataclass
class SimStats:
    cycles: int = 0
    ns: float = 0.0
    act: int = 0
    pre: int = 0
    rd: int = 0
    wr: int = 0
    c1: int = 0
    c2: int = 0
    param: int = 0
    energy_nj: float = 0.0


def schedule(cmds, tp: TimingParams) -> TimedTrace:
    """Earliest-issue-cycle assignment for a functionally legal sequence.

    Commands issue in order, one per bus cycle at most.  A compute command
    occupies the bus for one cycle at issue and the CU from `begin` (when
    its operands and parameters are valid) to `done`.
    """
    cl, tccd, trp, tras = tp.cl, tp.tccd, tp.trp, tp.tras
    trcd, twr, tc1, tc2 = tp.trcd, tp.twr, tp.tc1, tp.tc2
    t_prev = -1
    last_col = None
    last_pre = None
    act_issue = None
    wr_gate = 0  # earliest PRE permitted by writes in the current activation
    valid: dict[int, int] = {}  # buffer -> cycle its content is usable
    busy: dict[int, int] = {}  # buffer -> cycle the CU stops consuming it
    reg_valid = [0, 0]
    cu_free = 0
    param_valid = 0
    out = TimedTrace()

    for cmd in cmds:
        kind = cmd.kind
        t = t_prev + 1
        if kind == "ACT":
            if act_issue is not None:
                raise ValueError("ACT while a row is open")
            if last_pre is not None:
                t = max(t, last_pre + trp)
            act_issue = t
            wr_gate = 0
            done = t + trcd
        elif kind == "PRE":
            if act_issue is None:
                raise ValueError("PRE with no open row")
            t = max(t, act_issue + tras, wr_gate)
            last_pre = t
            act_issue = None
            done = t + trp
        elif kind in ("RD", "WR"):
            if act_issue is None:
                raise ValueError(f"{kind} with no open row")
            t = max(t, act_issue + trcd)
            if last_col is not None:
                t = max(t, last_col + tccd)
            if kind == "RD":
                if cmd.reg is not None:
                    reg_valid[cmd.reg] = t + cl + 2
                else:
                    b = cmd.buf
                    # data may not land while the CU is consuming this buffer
                    t = max(t, busy.get(b, 0) - cl)
                    valid[b] = t + cl
            else:
                if cmd.reg is not None:
                    t = max(t, reg_valid[cmd.reg])
                else:
                    t = max(t, valid.get(cmd.buf, 0))
                wr_gate = max(wr_gate, t + cl + twr)
            last_col = t
            done = t + cl
        elif kind == "PARAM":
            done = t + tp.param_cycles
            param_valid = done
        elif kind == "C1":
            b = cmd.buf
            begin = max(t, valid.get(b, 0), cu_free, param_valid)
            done = begin + tc1
            valid[b] = done
            busy[b] = done
            cu_free = done
        elif kind == "C2":
            if cmd.scalar:
                begin = max(t, reg_valid[0], reg_valid[1], cu_free, param_valid)
                done = begin + tc2
                reg_valid[0] = reg_valid[1] = done + 2
                cu_free = done
            else:
                begin = max(t, valid.get(cmd.bufp, 0), valid.get(cmd.bufs, 0),
                            cu_free, param_valid)
                if cmd.table_buf is not None:
                    begin = max(begin, valid.get(cmd.table_buf, 0))
                done = begin + tc2
                valid[cmd.bufp] = valid[cmd.bufs] = done
                busy[cmd.bufp] = busy[cmd.bufs] = done
                if cmd.table_buf is not None:
                    busy[cmd.table_buf] = done
                cu_free = done
        else:
            raise ValueError(f"unknown command kind: {kind}")
        out.append(TimedCommand(t, cmd, done))
        t_prev = t
    return out


@dataclass(frozen=True)
class Violation:
    index: int
    rule: str
    detail: str

    def __str__(self):
        return f"cmd[{self.index}] {self.rule}: {self.detail}"


def check_legality(trace: TimedTrace, tp: TimingParams) -> list[Violation]:
    """Independent re-verification of every scheduling constraint.

    Returns an empty list iff the trace is legal; each violation names the
    offending command index and the constraint.
    """
    cl, tccd, trp, tras = tp.cl, tp.tccd, tp.trp, tp.tras
    trcd, twr, tc1, tc2 = tp.trcd, tp.twr, tp.tc1, tp.tc2
    bad: list[Violation] = []
    last_issue = None
    last_col = None
    last_pre = None
    act_issue = None
    wr_times: list[int] = []
    valid: dict[int, int] = {}
    cu_ops: list[tuple[int, int, tuple]] = []  # (begin, done, buffers consumed)
    reg_valid = [0, 0]
    cu_done_prev = 0
    param_valid = 0

    def fail(i, rule, detail):
        bad.append(Violation(i, rule, detail))

    for i, (issue, cmd, done) in enumerate(trace):
        kind = cmd.kind
        if last_issue is not None and issue <= last_issue:
            fail(i, "bus", f"issue {issue} not after previous issue {last_issue}")
        if done < issue:
            fail(i, "completion", f"done {done} before issue {issue}")
        if kind == "ACT":
            if act_issue is not None:
                fail(i, "row-state", "ACT while a row is open")
            if last_pre is not None and issue - last_pre < trp:
                fail(i, "tRP", f"ACT at {issue}, PRE at {last_pre}")
            if done != issue + trcd:
                fail(i, "completion", f"ACT done {done} != issue+tRCD")
            act_issue = issue
            wr_times = []
        elif kind == "PRE":
            if act_issue is None:
                fail(i, "row-state", "PRE with no open row")
            else:
                if issue - act_issue < tras:
                    fail(i, "tRAS", f"PRE at {issue}, ACT at {act_issue}")
                for w in wr_times:
                    if issue < w + cl + twr:
                        fail(i, "tWR", f"PRE at {issue} before WR@{w}+CL+tWR")
                        break
            if done != issue + trp:
                fail(i, "completion", f"PRE done {done} != issue+tRP")
            last_pre = issue
            act_issue = None
        elif kind in ("RD", "WR"):
            if act_issue is None:
                fail(i, "row-state", f"{kind} with no open row")
            elif issue - act_issue < trcd:
                fail(i, "tRCD", f"{kind} at {issue}, ACT at {act_issue}")
            if last_col is not None and issue - last_col < tccd:
                fail(i, "tCCD", f"column commands at {last_col} and {issue}")
            if done != issue + cl:
                fail(i, "completion", f"{kind} done {done} != issue+CL")
            if kind == "RD":
                if cmd.reg is not None:
                    reg_valid[cmd.reg] = issue + cl + 2
                else:
                    land = issue + cl
                    # expired CU windows cannot contain a future landing cycle
                    cu_ops = [op for op in cu_ops if op[1] > issue]
                    for b0, d0, bufs in cu_ops:
                        if cmd.buf in bufs and b0 <= land < d0:
                            fail(i, "buffer-overwrite",
                                 f"RD lands at {land} inside CU window [{b0},{d0})")
                    valid[cmd.buf] = land
            else:
                if cmd.reg is not None:
                    if issue < reg_valid[cmd.reg]:
                        fail(i, "reg-valid", f"WR at {issue}, reg ready {reg_valid[cmd.reg]}")
                else:
                    if cmd.buf not in valid:
                        fail(i, "buffer-valid", f"WR from never-loaded buffer {cmd.buf}")
                    elif issue < valid[cmd.buf]:
                        fail(i, "buffer-valid",
                             f"WR at {issue}, buffer {cmd.buf} ready {valid[cmd.buf]}")
                wr_times.append(issue)
            last_col = issue
        elif kind == "PARAM":
            if done != issue + tp.param_cycles:
                fail(i, "completion", f"PARAM done {done} != issue+{tp.param_cycles}")
            param_valid = issue + tp.param_cycles
        elif kind in ("C1", "C2"):
            lat = tc1 if kind == "C1" else tc2
            begin = done - lat
            if begin < issue:
                fail(i, "cu-begin", f"{kind} begins at {begin} before issue {issue}")
            if begin < cu_done_prev:
                fail(i, "cu-serial", f"{kind} begins at {begin}, CU busy to {cu_done_prev}")
            if begin < param_valid:
                fail(i, "param-valid", f"{kind} begins at {begin}, params ready {param_valid}")
            if kind == "C2" and cmd.scalar:
                for r in (0, 1):
                    if begin < reg_valid[r]:
                        fail(i, "reg-valid", f"scalar C2 begins {begin}, reg {r} ready {reg_valid[r]}")
                reg_valid[0] = reg_valid[1] = done + 2
            else:
                ops = (cmd.buf,) if kind == "C1" else (cmd.bufp, cmd.bufs) + (
                    (cmd.table_buf,) if cmd.table_buf is not None else ())
                for b in ops:
                    if b not in valid:
                        fail(i, "buffer-valid", f"{kind} operand buffer {b} never loaded")
                    elif begin < valid[b]:
                        fail(i, "buffer-valid",
                             f"{kind} begins at {begin}, buffer {b} ready {valid[b]}")
                written = ops[:1] if kind == "C1" else ops[:2]
                for b in written:
                    valid[b] = done
                cu_ops.append((begin, done, ops))
            cu_done_prev = done
        else:
            fail(i, "unknown", f"command kind {kind}")
        last_issue = issue
    return bad


def account(trace: TimedTrace, e: EnergyTable, clock_mhz: int = 1200) -> SimStats:
    """Exact command tallies plus derived wall time and energy."""
    st = SimStats()
    for _, cmd, done in trace:
        k = cmd.kind
        if k == "ACT":
            st.act += 1
        elif k == "PRE":
            st.pre += 1
        elif k == "RD":
            st.rd += 1
        elif k == "WR":
            st.wr += 1
        elif k == "C1":
            st.c1 += 1
        elif k == "C2":
            st.c2 += 1
        elif k == "PARAM":
            st.param += 1
        if done > st.cycles:
            st.cycles = done
    st.ns = st.cycles * 1000.0 / clock_mhz
    dynamic = (st.act * e.act_pj + st.rd * e.rd_pj + st.wr * e.wr_pj
               + st.c1 * e.c1_pj + st.c2 * e.c2_pj + st.param * e.param_pj)
    st.energy_nj = (dynamic + st.cycles * e.static_pj_per_cycle) / 1000.0
    return st
