"""Memory-controller command compiler.

Turns one transform job into a bank command schedule using the three-regime
decomposition: the first log R stages run as independent row-sized blocks
(one activate/precharge envelope each), split into an intra-atom pass (C1
per atom) and per-stage intra-row passes (C2 per atom pair); the remaining
stages pair atoms across rows, grouping same-row reads and writes so extra
buffers eliminate activations.  Results land at their input addresses.

Per-command twiddle parameters are assigned from the validated plan table:
a command whose required twiddle vector follows the two-parameter generator
recurrence gets (omega0, r_omega); anything else falls back to an explicit
table delivered through the 16-bit parameter port.  A scalar-granularity
single-buffer schedule is provided for comparison experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .device import (BankGeometry, PimCommand, act, c1, c2, c2_scalar, param,
                     pre, rd, rd_word, wr, wr_word)
from .modmath import MASK32, to_mont
from .reference import NttPlan


class JobTooLarge(ValueError):
    pass


class PlanMismatch(ValueError):
    pass


@dataclass(frozen=True)
class NttJob:
    """One transform invocation: size, modulus, placement, and buffer budget."""

    n: int
    q: int
    n_b: int = 2
    base_row: int = 0
    pipelining: bool = True
    twiddle_mode: str = "table-fallback-allowed"  # or "on-the-fly"
    direction: str = "forward"

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two: {self.n}")
        if self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        if self.twiddle_mode not in ("table-fallback-allowed", "on-the-fly"):
            raise ValueError(f"bad twiddle mode: {self.twiddle_mode}")
        if self.direction not in ("forward", "inverse"):
            raise ValueError(f"bad direction: {self.direction}")


@dataclass(frozen=True)
class RegimePlan:
    """Stage classification for one job: distances double per stage and the
    regime boundaries sit exactly at the atom size and the row size."""

    n: int
    intra_atom: tuple  # stage numbers handled by C1
    intra_row: tuple
    inter_row: tuple

    def regime_of(self, stage: int) -> str:
        if stage in self.intra_atom:
            return "intra-atom"
        if stage in self.intra_row:
            return "intra-row"
        return "inter-row"


def classify_stages(n: int, geom: BankGeometry) -> RegimePlan:
    logn = n.bit_length() - 1
    log_na = geom.atom_words.bit_length() - 1
    log_r = geom.row_words.bit_length() - 1
    return RegimePlan(
        n=n,
        intra_atom=tuple(range(1, min(log_na, logn) + 1)),
        intra_row=tuple(range(log_na + 1, min(log_r, logn) + 1)),
        inter_row=tuple(range(log_r + 1, logn + 1)),
    )


@dataclass(frozen=True)
class BufferAllocation:
    """Pair-slot view of the buffer file for inter-atom regimes."""

    n_b: int

    @property
    def pair_slots(self) -> int:
        return max(1, self.n_b // 2)

    def slot_buffers(self, slot: int) -> tuple[int, int]:
        if not (0 <= slot < self.pair_slots):
            raise ValueError(f"slot {slot} out of range")
        return 2 * slot, 2 * slot + 1


@dataclass(frozen=True)
class TableFallback:
    """Required twiddles, in command order, that no (omega0, r_omega) fits."""

    values: tuple


def _fit_geometric(seq, q):
    w0 = seq[0]
    if len(seq) == 1:
        return (w0, 1)
    if w0 == 0:
        return None
    r = seq[1] * pow(w0, -1, q) % q
    w = w0
    for v in seq:
        if v != w:
            return None
        w = w * r % q
    return (w0, r)


def _fit_c1(seqs, q):
    """Fit the C1 generator recurrence: stage ratio r^(stage-1), running
    twiddle reset to omega0 each stage and stepped per butterfly."""
    w0 = seqs[0][0]
    if w0 == 0:
        return None
    r = 1
    for s_idx, seq in enumerate(seqs):
        if s_idx >= 1 and len(seq) >= 2:
            if seq[0] == 0:
                return None
            r = seq[1] * pow(seq[0], -1, q) % q
            break
    for s_idx, seq in enumerate(seqs):
        ratio = pow(r, s_idx, q)
        w = w0
        for v in seq:
            if v != w:
                return None
            w = w * ratio % q
    return (w0, r)


def _c1_required(plan: NttPlan, atom: int, geom: BankGeometry):
    """Per-stage twiddle sequences, in visit order, for one atom's C1."""
    na = geom.atom_words
    log_na = na.bit_length() - 1
    seqs = []
    for s in range(1, log_na + 1):
        blocks = na >> s
        row = plan.stages[s - 1]
        seqs.append([row[atom * blocks + t] for t in range(blocks)])
    return seqs


def assign_twiddles(stage: int, unit: int, plan: NttPlan, geom: BankGeometry):
    """Twiddle parameters for one compute command.

    For an intra-atom stage, `unit` is the atom index and the result covers
    the whole C1 command (all intra-atom stages at once).  Otherwise `unit`
    is the word index of the command's first P lane and the result covers
    the atom_words lanes of one C2.  Returns (omega0, r_omega) when the
    generator recurrence reproduces the required twiddles exactly, else a
    TableFallback carrying them.
    """
    q = plan.mod.q
    na = geom.atom_words
    log_na = na.bit_length() - 1
    if stage <= log_na:
        seqs = _c1_required(plan, unit, geom)
        fit = _fit_c1(seqs, q)
        if fit is not None:
            return fit
        flat = tuple(v for seq in seqs for v in seq)
        return TableFallback(flat)
    row = plan.stages[stage - 1]
    req = [row[(unit + j) >> stage] for j in range(na)]
    fit = _fit_geometric(req, q)
    if fit is not None:
        return fit
    return TableFallback(tuple(req))


@dataclass
class MapInfo:
    """Index ranges of the emitted sequence, for counting and reporting."""

    n: int
    n_b: int
    block_phase_end: int = 0
    stage_slices: dict = field(default_factory=dict)  # stage -> (start, end)


def expected_column_reads(n: int, geom: BankGeometry) -> int:
    """Column reads a full job performs: one per atom for the intra-atom
    pass plus one per atom per later stage.  Writes match reads."""
    na = geom.atom_words
    return (n // na) * (1 + (n.bit_length() - 1) - (na.bit_length() - 1))


class _Emitter:
    def __init__(self, job: NttJob, geom: BankGeometry, plan: NttPlan):
        self.job = job
        self.geom = geom
        self.plan = plan
        self.out: list[PimCommand] = []
        self.regs: dict[str, int] = {}

    def mont(self, x: int) -> int:
        return to_mont(x, self.plan.mod)

    def emit_param(self, name: str, value: int) -> None:
        """Load a 32-bit parameter register, 16 bits per command, skipping
        halves that already hold the right value."""
        if value != (value & MASK32):
            raise ValueError(f"parameter wider than 32 bits: {value}")
        cur = self.regs.get(name)
        if cur is None or (cur & 0xFFFF) != (value & 0xFFFF):
            self.out.append(param(name, 0, value & 0xFFFF))
        if cur is None or (cur >> 16) != (value >> 16):
            self.out.append(param(name, 1, value >> 16))
        self.regs[name] = value

    def prologue(self) -> None:
        self.emit_param("q", self.plan.mod.q)
        self.emit_param("qinv", self.plan.mod.neg_qinv)

    def compute_params(self, assign) -> dict:
        """Emit parameter loads for one compute command and return the
        Montgomery-form operand fields it carries."""
        if isinstance(assign, TableFallback):
            if self.job.twiddle_mode == "on-the-fly":
                raise PlanMismatch(
                    "required twiddles do not follow the generator recurrence")
            mt = tuple(self.mont(v) for v in assign.values)
            for i, v in enumerate(mt):
                self.emit_param(f"t{i}", v)
            return {"table": mt}
        w0, r = assign
        m0, mr = self.mont(w0), self.mont(r)
        self.emit_param("omega0", m0)
        self.emit_param("r_omega", mr)
        return {"omega0": m0, "r_omega": mr}


def _intra_atom_block(em: _Emitter, cols, atom_base: int) -> None:
    """RD -> C1 -> WR per atom; consecutive atoms rotate across buffers so
    the next read overlaps the running compute."""
    nb = em.job.n_b
    out = em.out
    geom = em.geom
    pipelined = em.job.pipelining and nb >= 2
    pend = None
    for i, col in enumerate(cols):
        buf = i % nb
        out.append(rd(col, buf))
        fields = em.compute_params(
            assign_twiddles(1, atom_base + col, em.plan, geom))
        out.append(c1(buf, **fields))
        if pipelined:
            if pend is not None:
                out.append(wr(*pend))
            pend = (col, buf)
        else:
            out.append(wr(col, buf))
    if pend is not None:
        out.append(wr(*pend))


def _intra_row_stage(em: _Emitter, stage: int, cols, block_word_base: int) -> None:
    """Per atom pair at the stage distance: RD, RD -> C2 -> WR, WR in place,
    with up to floor(N_b/2) pairs in flight."""
    geom = em.geom
    na = geom.atom_words
    dist_cols = (1 << (stage - 1)) // na
    alloc = BufferAllocation(em.job.n_b)
    k = alloc.pair_slots if em.job.pipelining else 1
    out = em.out
    pend: list[tuple] = []
    pairs = [c for c in cols if not ((c // dist_cols) & 1)]
    for idx, ca in enumerate(pairs):
        cb = ca + dist_cols
        # slot keyed by pair index so pipelined and serial emission share
        # one command multiset; only flush timing differs
        bufa, bufb = alloc.slot_buffers(idx % alloc.pair_slots)
        if len(pend) == k:
            pca, pba, pcb, pbb = pend.pop(0)
            out.append(wr(pca, pba))
            out.append(wr(pcb, pbb))
        assign = assign_twiddles(stage, block_word_base + ca * na, em.plan, geom)
        fields = em.compute_params(assign)
        out.append(rd(ca, bufa))
        out.append(rd(cb, bufb))
        out.append(c2(bufa, bufb, **fields))
        pend.append((ca, bufa, cb, bufb))
    for pca, pba, pcb, pbb in pend:
        out.append(wr(pca, pba))
        out.append(wr(pcb, pbb))


def _inter_row_stage(em: _Emitter, stage: int) -> None:
    """Pairs row r with r + distance/R.  Groups of k = floor(N_b/2) columns
    share each row visit: the far row's results stay buffered and are written
    back on the next visit to that row, so each group costs two activations
    and each row pair one closing flush."""
    job, geom, out = em.job, em.geom, em.out
    na = geom.atom_words
    cpr = geom.columns_per_row
    d_rows = (1 << (stage - 1)) // geom.row_words
    n_rows = job.n // geom.row_words
    alloc = BufferAllocation(job.n_b)
    k = alloc.pair_slots if job.pipelining else 1
    # slot keyed by column so grouped and serial emission share one command
    # multiset apart from ACT/PRE
    slot = lambda col: alloc.slot_buffers(col % alloc.pair_slots)
    for ra in range(n_rows):
        if (ra // d_rows) & 1:
            continue
        rb = ra + d_rows
        pending: list[tuple] = []
        for g0 in range(0, cpr, k):
            gcols = range(g0, min(g0 + k, cpr))
            out.append(act(job.base_row + ra))
            for col, buf in pending:
                out.append(wr(col, buf))
            pending = []
            for col in gcols:
                out.append(rd(col, slot(col)[0]))
            out.append(pre())
            out.append(act(job.base_row + rb))
            for col in gcols:
                bufa, bufb = slot(col)
                word = ra * geom.row_words + col * na
                fields = em.compute_params(
                    assign_twiddles(stage, word, em.plan, geom))
                out.append(rd(col, bufb))
                out.append(c2(bufa, bufb, **fields))
            for col in gcols:
                out.append(wr(col, slot(col)[1]))
            out.append(pre())
            pending = [(col, slot(col)[0]) for col in gcols]
        out.append(act(job.base_row + ra))
        for col, buf in pending:
            out.append(wr(col, buf))
        out.append(pre())


def _check_job(job: NttJob, geom: BankGeometry, plan: NttPlan) -> None:
    if plan.n != job.n or plan.mod.q != job.q:
        raise PlanMismatch(f"plan is for n={plan.n} q={plan.mod.q}, "
                           f"job wants n={job.n} q={job.q}")
    if plan.inverse != (job.direction == "inverse"):
        raise PlanMismatch("plan direction does not match job direction")
    if job.n < geom.atom_words:
        raise JobTooLarge(f"n={job.n} smaller than one atom")
    n_rows = max(1, job.n // geom.row_words)
    if job.base_row + n_rows > geom.rows_per_bank:
        raise JobTooLarge(f"job spans rows {job.base_row}..{job.base_row + n_rows}")


def map_ntt(job: NttJob, geom: BankGeometry, plan: NttPlan):
    """Compile a job into a command sequence.  Returns (commands, MapInfo).

    Executing the sequence transforms the stored polynomial, in place, into
    exactly what the iterative reference dataflow computes.
    """
    _check_job(job, geom, plan)
    if job.n_b < 2:
        raise ValueError("map_ntt needs N_b >= 2; use baseline_single_buffer")
    em = _Emitter(job, geom, plan)
    info = MapInfo(n=job.n, n_b=job.n_b)
    em.prologue()
    regimes = classify_stages(job.n, geom)
    n_blocks = max(1, job.n // geom.row_words)
    cols_per_block = min(geom.columns_per_row, job.n // geom.atom_words)
    cols = list(range(cols_per_block))
    for blk in range(n_blocks):
        em.out.append(act(job.base_row + blk))
        _intra_atom_block(em, cols, blk * geom.columns_per_row)
        for s in regimes.intra_row:
            _intra_row_stage(em, s, cols, blk * geom.row_words)
        em.out.append(pre())
    info.block_phase_end = len(em.out)
    for s in regimes.inter_row:
        start = len(em.out)
        _inter_row_stage(em, s)
        info.stage_slices[s] = (start, len(em.out))
    return em.out, info


def baseline_single_buffer(job: NttJob, geom: BankGeometry, plan: NttPlan):
    """Scalar-granularity schedule for N_b = 1: every butterfly is two word
    loads into the operand registers, one scalar butterfly, and two word
    stores.  Comparison baseline only."""
    _check_job(job, geom, plan)
    em = _Emitter(job, geom, plan)
    info = MapInfo(n=job.n, n_b=1)
    em.prologue()
    n = job.n
    na = geom.atom_words
    rw = geom.row_words
    log_r = rw.bit_length() - 1
    open_row = None
    inter_start = None

    def goto(row):
        nonlocal open_row
        if open_row != row:
            if open_row is not None:
                em.out.append(pre())
            em.out.append(act(row))
            open_row = row

    for s in range(1, plan.log_n + 1):
        start = len(em.out)
        m = 1 << (s - 1)
        row_tbl = plan.stages[s - 1]
        first = row_tbl[0]
        em.emit_param("omega0", em.mont(first))
        for k in range(0, n, 2 * m):
            tw = em.mont(row_tbl[k >> s])
            for p0 in range(k, k + m):
                p1 = p0 + m
                r0, c0, l0 = job.base_row + p0 // rw, (p0 % rw) // na, p0 % na
                r1, c1_, l1 = job.base_row + p1 // rw, (p1 % rw) // na, p1 % na
                goto(r0)
                em.out.append(rd_word(c0, l0, 0))
                goto(r1)
                em.out.append(rd_word(c1_, l1, 1))
                em.out.append(c2_scalar(tw))
                em.out.append(wr_word(c1_, l1, 1))
                goto(r0)
                em.out.append(wr_word(c0, l0, 0))
        info.stage_slices[s] = (start, len(em.out))
        if s == log_r + 1 and inter_start is None:
            inter_start = start
    if open_row is not None:
        em.out.append(pre())
    info.block_phase_end = inter_start if inter_start is not None else len(em.out)
    return em.out, info


def commands_text(cmds) -> str:
    """Mapper-output text form: the trace dump format without cycles."""
    return "".join(cmd.text() + "\n" for cmd in cmds)


def map_intra_atom(block_cols, atom_base: int, job: NttJob, geom: BankGeometry,
                   plan: NttPlan) -> list[PimCommand]:
    """Intra-atom pass for one already-activated row block."""
    em = _Emitter(job, geom, plan)
    _intra_atom_block(em, list(block_cols), atom_base)
    return em.out


def map_intra_row(block_cols, stage: int, block_word_base: int, job: NttJob,
                  geom: BankGeometry, plan: NttPlan) -> list[PimCommand]:
    """One intra-row stage for one already-activated row block."""
    em = _Emitter(job, geom, plan)
    _intra_row_stage(em, stage, list(block_cols), block_word_base)
    return em.out


def map_inter_row(stage: int, job: NttJob, geom: BankGeometry,
                  plan: NttPlan) -> list[PimCommand]:
    """One inter-row stage, all row pairs."""
    em = _Emitter(job, geom, plan)
    _inter_row_stage(em, stage)
    return em.out
