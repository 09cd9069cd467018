"""Functional (timing-free) model of one extended DRAM bank.

State is a cell array, an open-row marker, N_b atom buffers (index 0 is
the primary, the global sense amplifiers), two scalar operand registers,
and a small parameter register file filled 16 bits at a time.  Commands
mutate the state; all compute happens in Montgomery form so the butterfly
multiplier is a single Montgomery product.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK16 = 0xFFFF
MASK32 = (1 << 32) - 1


class DeviceError(Exception):
    pass


class RowNotOpen(DeviceError):
    pass


class RowAlreadyOpen(DeviceError):
    pass


class BufferOutOfRange(DeviceError):
    pass


class BufferInvalid(DeviceError):
    pass


class SameBuffer(DeviceError):
    pass


class ParamsNotLoaded(DeviceError):
    pass


@dataclass(frozen=True)
class BankGeometry:
    """Bank shape: words per atom, atoms per row, rows per bank."""

    atom_words: int = 8
    columns_per_row: int = 32
    rows_per_bank: int = 32768
    word_bits: int = 32

    def __post_init__(self):
        for v in (self.atom_words, self.columns_per_row, self.rows_per_bank):
            if v < 1 or v & (v - 1):
                raise ValueError(f"geometry fields must be powers of two: {v}")

    @property
    def row_words(self) -> int:
        return self.atom_words * self.columns_per_row


# Field order used when rendering each command kind as text.
_ARG_FIELDS = {
    "ACT": ("row",),
    "PRE": (),
    "RD": ("col", "buf", "lane", "reg"),
    "WR": ("col", "buf", "lane", "reg"),
    "C1": ("buf", "omega0", "r_omega", "table"),
    "C2": ("bufp", "bufs", "omega0", "r_omega", "table_buf", "scalar"),
    "PARAM": ("reg_name", "chunk", "value"),
}

_ARG_LABELS = {
    "omega0": "w0",
    "r_omega": "rw",
    "reg_name": "reg",
    "table_buf": "tbuf",
    "value": "val",
}


@dataclass(frozen=True, slots=True)
class PimCommand:
    """One DRAM/PIM command; the unit the mapper emits and the bank executes."""

    kind: str
    row: int | None = None
    col: int | None = None
    buf: int | None = None
    bufp: int | None = None
    bufs: int | None = None
    omega0: int | None = None
    r_omega: int | None = None
    table: tuple | None = None
    table_buf: int | None = None
    lane: int | None = None
    reg: int | None = None
    reg_name: str | None = None
    chunk: int | None = None
    value: int | None = None
    scalar: bool = False

    def args_text(self) -> str:
        parts = []
        for f in _ARG_FIELDS[self.kind]:
            v = getattr(self, f)
            if v is None or (f == "scalar" and not v):
                continue
            if f == "table":
                v = ":".join(str(x) for x in v)
            elif f == "scalar":
                v = 1
            parts.append(f"{_ARG_LABELS.get(f, f)}={v}")
        return " ".join(parts)

    def text(self) -> str:
        args = self.args_text()
        return f"cmd={self.kind} {args}" if args else f"cmd={self.kind}"


def act(row: int) -> PimCommand:
    return PimCommand("ACT", row=row)


def pre() -> PimCommand:
    return PimCommand("PRE")


def rd(col: int, buf: int) -> PimCommand:
    return PimCommand("RD", col=col, buf=buf)


def wr(col: int, buf: int) -> PimCommand:
    return PimCommand("WR", col=col, buf=buf)


def rd_word(col: int, lane: int, reg: int) -> PimCommand:
    return PimCommand("RD", col=col, lane=lane, reg=reg)


def wr_word(col: int, lane: int, reg: int) -> PimCommand:
    return PimCommand("WR", col=col, lane=lane, reg=reg)


def c1(buf: int, omega0: int | None = None, r_omega: int | None = None,
       table: tuple | None = None) -> PimCommand:
    return PimCommand("C1", buf=buf, omega0=omega0, r_omega=r_omega, table=table)


def c2(bufp: int, bufs: int, omega0: int, r_omega: int,
       table_buf: int | None = None) -> PimCommand:
    return PimCommand("C2", bufp=bufp, bufs=bufs, omega0=omega0, r_omega=r_omega,
                      table_buf=table_buf)


def c2_scalar(omega0: int) -> PimCommand:
    return PimCommand("C2", omega0=omega0, scalar=True)


def param(reg_name: str, chunk: int, value: int) -> PimCommand:
    return PimCommand("PARAM", reg_name=reg_name, chunk=chunk, value=value)


class BankState:
    """Mutable bank state owned by exactly one simulation."""

    def __init__(self, geometry: BankGeometry = BankGeometry(), n_buffers: int = 2):
        if n_buffers < 1:
            raise ValueError("need at least the primary buffer")
        self.geometry = geometry
        self.n_buffers = n_buffers
        self.cells: dict[int, list] = {}  # row -> list of atoms (lists of words)
        self.open_row: int | None = None
        self.buffers: list = [None] * n_buffers
        self.cu_regs: list = [None, None]
        self.params: dict[str, int] = {}
        self._q = None
        self._neg_qinv = None

    # -- memory image helpers -------------------------------------------------

    def _row(self, row: int) -> list:
        atoms = self.cells.get(row)
        if atoms is None:
            na = self.geometry.atom_words
            atoms = [[0] * na for _ in range(self.geometry.columns_per_row)]
            self.cells[row] = atoms
        return atoms

    def load_words(self, base_row: int, words: list) -> None:
        """Write a contiguous row-major word vector starting at (base_row, 0)."""
        na = self.geometry.atom_words
        rw = self.geometry.row_words
        for i, v in enumerate(words):
            r = self._row(base_row + i // rw)
            r[(i % rw) // na][i % na] = v

    def read_words(self, base_row: int, count: int) -> list:
        na = self.geometry.atom_words
        rw = self.geometry.row_words
        out = []
        for i in range(count):
            r = self._row(base_row + i // rw)
            out.append(r[(i % rw) // na][i % na])
        return out

    def dump_words(self, base_row: int, count: int) -> str:
        """Flat bank-image dump: one decimal 32-bit word per line, row-major."""
        return "\n".join(str(v) for v in self.read_words(base_row, count)) + "\n"

    # -- parameter registers ----------------------------------------------------

    def _load_param(self, name: str, chunk: int, value: int) -> None:
        if chunk not in (0, 1) or value != (value & MASK16):
            raise DeviceError(f"bad PARAM chunk={chunk} value={value}")
        old = self.params.get(name, 0)
        if chunk == 0:
            self.params[name] = (old & ~MASK16) | value
        else:
            self.params[name] = (old & MASK16) | (value << 16)
        if name in ("q", "qinv"):
            self._q = self.params.get("q")
            self._neg_qinv = self.params.get("qinv")

    def _arith(self) -> tuple[int, int]:
        if not self._q or self._neg_qinv is None:
            raise ParamsNotLoaded("q/qinv registers not loaded")
        return self._q, self._neg_qinv

    def _check_buf(self, b: int) -> None:
        if not (0 <= b < self.n_buffers):
            raise BufferOutOfRange(f"buffer {b} (have {self.n_buffers})")

    def _valid_buf(self, b: int) -> list:
        self._check_buf(b)
        v = self.buffers[b]
        if v is None:
            raise BufferInvalid(f"buffer {b} used before load")
        return v


def _mont_mul(a: int, b: int, q: int, neg_qinv: int) -> int:
    t = a * b
    u = (t * neg_qinv) & MASK32
    r = (t + u * q) >> 32
    return r - q if r >= q else r


def _bfly(a: int, b: int, w: int, q: int, neg_qinv: int) -> tuple[int, int]:
    s = a + b
    if s >= q:
        s -= q
    d = a - b
    if d < 0:
        d += q
    return s, _mont_mul(d, w, q, neg_qinv)


def op_c1(st: BankState, buf: int, omega0: int | None = None,
          r_omega: int | None = None, table: tuple | None = None) -> BankState:
    """Intra-atom transform of one buffer, in place.

    With (omega0, r_omega), twiddles follow the generator recurrence: the
    per-stage ratio starts at 1, the running twiddle resets to omega0 each
    stage and multiplies by the ratio per butterfly, and the ratio steps by
    r_omega per stage.  With `table`, per-block twiddles are explicit:
    atom_words - 1 values ordered stage by stage.
    """
    s_buf = st._valid_buf(buf)
    q, nqi = st._arith()
    na = st.geometry.atom_words
    log_na = na.bit_length() - 1
    if table is not None:
        if len(table) != na - 1:
            raise DeviceError(f"C1 table needs {na - 1} entries, got {len(table)}")
        off = 0
        for s in range(1, log_na + 1):
            m = 1 << (s - 1)
            for k in range(0, na, 2 * m):
                w = table[off + (k >> s)]
                for j in range(k, k + m):
                    s_buf[j], s_buf[j + m] = _bfly(s_buf[j], s_buf[j + m], w, q, nqi)
            off += na >> s
        return st
    if omega0 is None or r_omega is None:
        raise DeviceError("C1 needs either (omega0, r_omega) or a table")
    omega_s = (1 << 32) % q  # 1 in Montgomery form
    for s in range(1, log_na + 1):
        w = omega0
        m = 1 << (s - 1)
        for k in range(0, na, 2 * m):
            for j in range(k, k + m):
                s_buf[j], s_buf[j + m] = _bfly(s_buf[j], s_buf[j + m], w, q, nqi)
                w = _mont_mul(w, omega_s, q, nqi)
        omega_s = _mont_mul(omega_s, r_omega, q, nqi)
    return st


def op_c2(st: BankState, bufp: int, bufs: int, omega0: int, r_omega: int,
          table_buf: int | None = None) -> BankState:
    """One vectorized butterfly across two buffers, in place.

    Lane j uses omega0 * r_omega^j, or lane j of `table_buf` when the
    required twiddle vector is not geometric.
    """
    if bufp == bufs or table_buf in (bufp, bufs):
        raise SameBuffer(f"C2 operands must differ: {bufp}, {bufs}, {table_buf}")
    p = st._valid_buf(bufp)
    s_buf = st._valid_buf(bufs)
    q, nqi = st._arith()
    tw = st._valid_buf(table_buf) if table_buf is not None else None
    w = omega0
    for j in range(st.geometry.atom_words):
        wj = tw[j] if tw is not None else w
        p[j], s_buf[j] = _bfly(p[j], s_buf[j], wj, q, nqi)
        if tw is None:
            w = _mont_mul(w, r_omega, q, nqi)
    return st


def execute(cmd: PimCommand, st: BankState) -> BankState:
    """Apply one command to the bank state; raises on illegal use."""
    kind = cmd.kind
    if kind == "ACT":
        if st.open_row is not None:
            raise RowAlreadyOpen(f"row {st.open_row} still open")
        if not (0 <= cmd.row < st.geometry.rows_per_bank):
            raise DeviceError(f"row out of range: {cmd.row}")
        st.open_row = cmd.row
    elif kind == "PRE":
        if st.open_row is None:
            raise RowNotOpen("PRE with no open row")
        st.open_row = None
    elif kind == "RD":
        if st.open_row is None:
            raise RowNotOpen("RD with no open row")
        atoms = st._row(st.open_row)
        if not (0 <= cmd.col < st.geometry.columns_per_row):
            raise DeviceError(f"column out of range: {cmd.col}")
        if cmd.reg is not None:
            st.cu_regs[cmd.reg] = atoms[cmd.col][cmd.lane]
        else:
            st._check_buf(cmd.buf)
            st.buffers[cmd.buf] = list(atoms[cmd.col])
    elif kind == "WR":
        if st.open_row is None:
            raise RowNotOpen("WR with no open row")
        atoms = st._row(st.open_row)
        if cmd.reg is not None:
            v = st.cu_regs[cmd.reg]
            if v is None:
                raise BufferInvalid(f"register {cmd.reg} used before load")
            atoms[cmd.col][cmd.lane] = v
        else:
            atoms[cmd.col] = list(st._valid_buf(cmd.buf))
    elif kind == "C1":
        op_c1(st, cmd.buf, cmd.omega0, cmd.r_omega, cmd.table)
    elif kind == "C2":
        if cmd.scalar:
            a, b = st.cu_regs
            if a is None or b is None:
                raise BufferInvalid("scalar C2 with unloaded operand register")
            q, nqi = st._arith()
            st.cu_regs[0], st.cu_regs[1] = _bfly(a, b, cmd.omega0, q, nqi)
        else:
            op_c2(st, cmd.bufp, cmd.bufs, cmd.omega0, cmd.r_omega, cmd.table_buf)
    elif kind == "PARAM":
        st._load_param(cmd.reg_name, cmd.chunk, cmd.value)
    else:
        raise DeviceError(f"unknown command kind: {kind}")
    return st


def run_commands(cmds, st: BankState, fault=None) -> BankState:
    """Execute a command sequence in order.

    `fault`, when given as (wr_ordinal, lane, xor_mask), corrupts the target
    atom of the wr_ordinal-th WR after it executes; used by fault-injection
    tests.
    """
    wr_seen = 0
    for cmd in cmds:
        execute(cmd, st)
        if fault is not None and cmd.kind == "WR":
            if wr_seen == fault[0]:
                _, lane, mask = fault
                st._row(st.open_row)[cmd.col][lane] ^= mask
            wr_seen += 1
    return st
