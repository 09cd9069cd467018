"""Temporal engine: constraint arithmetic, legality cross-check, accounting."""

import random

import pytest

from dramntt.device import act, c1, c2, param, pre, rd, wr
from dramntt.harness import RunConfig, run_job
from dramntt.timing import (EnergyTable, TimedCommand, TimedTrace, TimingParams,
                            account, check_legality, schedule)

TP = TimingParams()


def test_act_rd_timing():
    trace = schedule([act(0), rd(0, 0)], TP)
    assert trace[0].issue == 0
    assert trace[1].issue == 14  # tRCD
    assert trace[1].done == 28  # data valid at issue + CL


def test_tccd_between_column_commands():
    trace = schedule([act(0), rd(0, 0), rd(1, 1)], TP)
    assert trace[2].issue == 16  # tCCD = 2 after the first read


def test_wr_gates_pre():
    trace = schedule([act(0), rd(0, 0), wr(1, 0), pre()], TP)
    wr_issue = trace[2].issue
    assert trace[3].issue >= wr_issue + TP.cl + TP.twr
    assert trace[3].issue >= trace[0].issue + TP.tras


def test_pre_act_trp():
    trace = schedule([act(0), rd(0, 0), pre(), act(1)], TP)
    assert trace[3].issue - trace[2].issue >= TP.trp


def test_compute_waits_for_operands_and_cu():
    cmds = [act(0), rd(0, 0), rd(1, 1), c2(0, 1, 5, 5), c2(0, 1, 5, 5)]
    trace = schedule(cmds, TP)
    rd2 = trace[2]
    first = trace[3]
    second = trace[4]
    assert first.done - TP.tc2 >= rd2.done  # begins after operand data lands
    assert second.done - TP.tc2 >= first.done  # CU is serial


def test_param_gates_compute():
    cmds = [act(0), rd(0, 0), param("omega0", 0, 7), c1(0, omega0=7, r_omega=1)]
    trace = schedule(cmds, TP)
    assert trace[3].done - TP.tc1 >= trace[2].issue + TP.param_cycles


def test_schedule_traces_pass_checker():
    for n, nb in ((8, 2), (64, 2), (256, 4), (512, 6), (512, 1)):
        res = run_job(RunConfig(n=n, nb=nb, seed=0))
        assert check_legality(res.trace, res.config.timing.at_clock(1200)) == []


def test_checker_flags_trcd_violation():
    trace = TimedTrace([
        TimedCommand(0, act(0), 14),
        TimedCommand(5, rd(0, 0), 19),
    ])
    rules = {v.rule for v in check_legality(trace, TP)}
    assert "tRCD" in rules


def test_checker_flags_bus_conflict():
    trace = TimedTrace([
        TimedCommand(0, act(0), 14),
        TimedCommand(0, act(1), 14),
    ])
    rules = {v.rule for v in check_legality(trace, TP)}
    assert "bus" in rules


def test_checker_flags_row_state_and_tras():
    trace = TimedTrace([
        TimedCommand(0, rd(0, 0), 14),
        TimedCommand(1, act(0), 15),
        TimedCommand(2, pre(), 16),
    ])
    rules = {v.rule for v in check_legality(trace, TP)}
    assert "row-state" in rules and "tRAS" in rules


def test_checker_flags_buffer_misuse():
    trace = TimedTrace([
        TimedCommand(0, act(0), 14),
        TimedCommand(14, rd(0, 0), 28),
        TimedCommand(15, wr(1, 1), 29),  # buffer 1 never loaded
    ])
    rules = {v.rule for v in check_legality(trace, TP)}
    assert "buffer-valid" in rules


def test_account_tallies():
    e = EnergyTable()
    assert account(TimedTrace(), e).cycles == 0
    trace = schedule([act(0), rd(0, 0), c1(0, omega0=1, r_omega=1), wr(0, 0), pre()], TP)
    st = account(trace, e)
    assert (st.act, st.rd, st.c1, st.wr, st.pre) == (1, 1, 1, 1, 1)
    doubled = EnergyTable(act_pj=2 * e.act_pj, rd_pj=2 * e.rd_pj, wr_pj=2 * e.wr_pj,
                          c1_pj=2 * e.c1_pj, c2_pj=2 * e.c2_pj, param_pj=2 * e.param_pj,
                          static_pj_per_cycle=2 * e.static_pj_per_cycle)
    assert account(trace, doubled).energy_nj == 2 * st.energy_nj


def test_ns_is_cycles_over_clock():
    res = run_job(RunConfig(n=64, nb=2))
    assert res.stats.ns == res.stats.cycles * 1000.0 / 1200


def test_clock_scaling_monotonic():
    cyc = {}
    ns = {}
    for f in (300, 1200):
        res = run_job(RunConfig(n=512, nb=2, clock_mhz=f))
        cyc[f] = res.stats.cycles
        ns[f] = res.stats.ns
    assert cyc[300] <= cyc[1200]
    assert ns[300] >= ns[1200]


def test_scaled_params_keep_reference_ns():
    tp300 = TP.at_clock(300)
    # ceil(ref_ns * f / 1000): 14 cycles @1200 -> 11.67ns -> 4 cycles @300
    assert tp300.trcd == 4 and tp300.cl == 4 and tp300.tccd == 1
    assert tp300.tras == 9 and tp300.twr == 4
    assert tp300.tc1 == TP.tc1 and tp300.tc2 == TP.tc2  # CU stays in cycles


def test_removing_commands_never_increases_cycles():
    res = run_job(RunConfig(n=64, nb=2, seed=1))
    cmds = [t.cmd for t in res.trace]
    total = res.trace[-1].done
    rng = random.Random(0)
    droppable = [i for i, c in enumerate(cmds) if c.kind in ("PARAM", "WR")]
    for i in rng.sample(droppable, 10):
        shorter = cmds[:i] + cmds[i + 1:]
        t = schedule(shorter, TP)
        assert t[-1].done <= total


def test_rd_wr_counts_equal_on_job_traces():
    for n in (8, 64, 512):
        res = run_job(RunConfig(n=n, nb=2))
        rds = sum(1 for t in res.trace if t.cmd.kind == "RD")
        wrs = sum(1 for t in res.trace if t.cmd.kind == "WR")
        assert rds == wrs


def test_trace_dump_format():
    trace = schedule([act(3), rd(2, 1)], TP)
    lines = trace.dump().splitlines()
    assert lines[0] == "cycle=0 cmd=ACT row=3 done=14"
    assert lines[1] == "cycle=14 cmd=RD col=2 buf=1 done=28"


def test_rejects_nonpositive_params():
    with pytest.raises(ValueError):
        TimingParams(cl=0)
