"""Host-side golden models for the transform.

Two independent routes are kept side by side: `ntt_direct` evaluates the
O(n^2) DFT sum and is the arbiter for everything else, while
`ntt_iterative` runs the same increasing-distance butterfly dataflow the
bank hardware executes.  `build_plan` derives the per-stage twiddle table
for that dataflow and empirically resolves whether the bit-reversal
permutation belongs on the input or the output side, validating the whole
construction against `ntt_direct` before handing the plan out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .modmath import Modulus, find_root_of_unity, is_ntt_friendly

try:
    import numpy as _np
except ImportError:  # pragma: no cover
    _np = None

Poly = list  # vector of residues in [0, q)


class BadRoot(ValueError):
    """w does not have exact multiplicative order n."""


class SizeMismatch(ValueError):
    pass


class NotNttFriendly(ValueError):
    pass


class PlanValidationFailed(RuntimeError):
    """No permutation convention reproduces the direct transform."""


def bit_reverse(x: int, bits: int) -> int:
    y = 0
    for _ in range(bits):
        y = (y << 1) | (x & 1)
        x >>= 1
    return y


def bit_reverse_permute(a: Poly) -> Poly:
    n = len(a)
    if n & (n - 1):
        raise SizeMismatch(f"length must be a power of two: {n}")
    bits = n.bit_length() - 1
    return [a[bit_reverse(i, bits)] for i in range(n)]


def _check_root(n: int, m: Modulus, w: int) -> None:
    if n < 2 or n & (n - 1):
        raise SizeMismatch(f"n must be a power of two >= 2: {n}")
    if pow(w, n, m.q) != 1 or pow(w, n >> 1, m.q) == 1:
        raise BadRoot(f"{w} is not an order-{n} root mod {m.q}")


def _w_powers(n: int, m: Modulus, w: int) -> list[int]:
    out = [1] * n
    x = 1
    for i in range(1, n):
        x = x * w % m.q
        out[i] = x
    return out


def ntt_direct(a: Poly, m: Modulus, w: int) -> Poly:
    """DFT sum A_k = sum_j a_j w^(jk) mod q.  O(n^2); the arbiter oracle."""
    n = len(a)
    q = m.q
    _check_root(n, m, w)
    wp = _w_powers(n, m, w)
    # Residues are < q, so n*(q-1)^2 < 2^63 makes int64 accumulation exact.
    if _np is not None and n * (q - 1) * (q - 1) < (1 << 63):
        wp_a = _np.array(wp, dtype=_np.int64)
        a_a = _np.array(a, dtype=_np.int64)
        js = _np.arange(n, dtype=_np.int64)
        out = _np.empty(n, dtype=_np.int64)
        for k0 in range(0, n, 256):
            ks = _np.arange(k0, min(k0 + 256, n), dtype=_np.int64)
            idx = (ks[:, None] * js[None, :]) % n
            out[k0 : k0 + len(ks)] = (wp_a[idx] @ a_a) % q
        return [int(v) for v in out]
    out = []
    for k in range(n):
        s = 0
        idx = 0
        for j in range(n):
            s += a[j] * wp[idx]
            idx += k
            if idx >= n:
                idx -= n
        out.append(s % q)
    return out


@dataclass
class NttPlan:
    """Twiddle table + permutation for the increasing-distance dataflow.

    stages[s-1][b] is the twiddle shared by every butterfly of block b in
    stage s (distance 2^(s-1), block width 2^s).  perm is the bit-reversal
    permutation; perm_side records which side of the dataflow it belongs
    on, as resolved by build-time validation.
    """

    n: int
    mod: Modulus
    w: int
    log_n: int
    stages: tuple
    perm: tuple
    n_inv: int
    inverse: bool = False
    perm_side: str = "input"
    validated: bool = field(default=False, repr=False)


def _stage_tables(n: int, m: Modulus, w: int) -> tuple:
    logn = n.bit_length() - 1
    q = m.q
    rows = []
    for s in range(1, logn + 1):
        bits = logn - s
        rows.append(
            tuple(pow(w, (1 << (s - 1)) * bit_reverse(b, bits), q) for b in range(n >> s))
        )
    return tuple(rows)


def ntt_iterative(a: Poly, plan: NttPlan) -> Poly:
    """Raw dataflow: log n stages of (a+b, (a-b)*w) at distance 2^(s-1).

    No permutation applied; this is bit-identical to what the bank computes
    over a full command schedule.
    """
    n = plan.n
    if len(a) != n:
        raise SizeMismatch(f"expected length {n}, got {len(a)}")
    q = plan.mod.q
    x = list(a)
    for s in range(1, plan.log_n + 1):
        row = plan.stages[s - 1]
        m = 1 << (s - 1)
        step = m << 1
        for k in range(0, n, step):
            tw = row[k >> s]
            for j in range(k, k + m):
                u = x[j]
                v = x[j + m]
                t = u + v
                if t >= q:
                    t -= q
                d = u - v
                if d < 0:
                    d += q
                x[j] = t
                x[j + m] = d * tw % q
    return x


def _permute(a: Poly, perm: tuple) -> Poly:
    return [a[p] for p in perm]


def _validate_plan(plan: NttPlan) -> None:
    n = plan.n
    vecs = [[1 if i == j else 0 for i in range(n)] for j in range(n)]
    state = 0x12345678
    for _ in range(2):
        v = []
        for _ in range(n):
            state = (state * 1103515245 + 12345) & 0x7FFFFFFF
            v.append(state % plan.mod.q)
        vecs.append(v)
    if all(
        ntt_iterative(_permute(v, plan.perm), plan) == ntt_direct(v, plan.mod, plan.w)
        for v in vecs
    ):
        plan.perm_side = "input"
    elif all(
        _permute(ntt_iterative(v, plan), plan.perm) == ntt_direct(v, plan.mod, plan.w)
        for v in vecs
    ):
        plan.perm_side = "output"
    else:
        raise PlanValidationFailed(
            f"n={n} q={plan.mod.q} w={plan.w}: no permutation side reproduces the DFT sum"
        )
    plan.validated = True


def build_plan(n: int, m: Modulus, w: int, inverse: bool = False) -> NttPlan:
    """Derive the stage twiddle table and permutation for size n and root w.

    For n <= 64 the construction is validated exhaustively against
    ntt_direct (delta basis plus random vectors) and fails loudly if no
    permutation convention matches.
    """
    _check_root(n, m, w)
    logn = n.bit_length() - 1
    plan = NttPlan(
        n=n,
        mod=m,
        w=w,
        log_n=logn,
        stages=_stage_tables(n, m, w),
        perm=tuple(bit_reverse(i, logn) for i in range(n)),
        n_inv=pow(n, -1, m.q),
        inverse=inverse,
    )
    if n <= 64:
        _validate_plan(plan)
    return plan


_plan_cache: dict[tuple[int, int, bool], NttPlan] = {}


def plan_for(n: int, m: Modulus, inverse: bool = False) -> NttPlan:
    """Cached plan with the smallest order-n root (or its inverse)."""
    key = (n, m.q, inverse)
    plan = _plan_cache.get(key)
    if plan is None:
        w = find_root_of_unity(m, n)
        if inverse:
            w = pow(w, -1, m.q)
        plan = build_plan(n, m, w, inverse=inverse)
        _plan_cache[key] = plan
    return plan


def ntt(a: Poly, plan: NttPlan) -> Poly:
    """Full transform: dataflow composed with the plan's permutation."""
    if plan.perm_side == "input":
        return ntt_iterative(_permute(a, plan.perm), plan)
    return _permute(ntt_iterative(a, plan), plan.perm)


def intt(a: Poly, plan: NttPlan) -> Poly:
    """Inverse transform: the same dataflow with inverse twiddles, then n^-1."""
    if not plan.inverse:
        raise ValueError("intt requires a plan built with inverse=True")
    q = plan.mod.q
    n_inv = plan.n_inv
    return [v * n_inv % q for v in ntt(a, plan)]


def polymul_schoolbook(a: Poly, b: Poly, m: Modulus) -> Poly:
    """Negacyclic convolution by direct O(n^2) expansion with sign folding."""
    n = len(a)
    if len(b) != n:
        raise SizeMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    q = m.q
    if _np is not None and n * (q - 1) * (q - 1) < (1 << 63):
        full = _np.convolve(_np.array(a, dtype=_np.int64), _np.array(b, dtype=_np.int64))
        lo = full[:n] % q
        hi = _np.zeros(n, dtype=_np.int64)
        hi[: n - 1] = full[n:] % q
        return [int(v) for v in (lo - hi) % q]
    out = [0] * n
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            k = i + j
            if k < n:
                out[k] = (out[k] + ai * bj) % q
            else:
                out[k - n] = (out[k - n] - ai * bj) % q
    return out


def polymul_negacyclic(a: Poly, b: Poly, m: Modulus) -> Poly:
    """Product in Z_q[x]/(x^n + 1) via forward transforms, an element-wise
    product, and the inverse transform, with the psi-twist applied around
    the cyclic transform on the host."""
    n = len(a)
    if len(b) != n:
        raise SizeMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    q = m.q
    if not is_ntt_friendly(q, n):
        raise NotNttFriendly(f"q={q} has no 2n-th root of unity for n={n}")
    psi = find_root_of_unity(m, 2 * n)
    fwd = plan_for(n, m)
    inv = plan_for(n, m, inverse=True)
    # plan_for uses the smallest order-n root; twist with a psi whose square
    # matches it so the cyclic transform and the twist compose exactly.
    if psi * psi % q != fwd.w:
        psi = _matching_psi(m, n, fwd.w)
    psi_pow = _w_powers(n, m, psi)
    at = [x * psi_pow[i] % q for i, x in enumerate(a)]
    bt = [x * psi_pow[i] % q for i, x in enumerate(b)]
    ah = ntt(at, fwd)
    bh = ntt(bt, fwd)
    ch = [x * y % q for x, y in zip(ah, bh)]
    ct = intt(ch, inv)
    ipsi = pow(psi, -1, q)
    ipsi_pow = _w_powers(n, m, ipsi)
    return [x * ipsi_pow[i] % q for i, x in enumerate(ct)]


def _matching_psi(m: Modulus, n: int, w: int) -> int:
    """Smallest 2n-th root whose square is w."""
    q = m.q
    h = find_root_of_unity(m, 2 * n)
    best = None
    x = h
    for _ in range(2 * n):
        if x * x % q == w and (best is None or x < best):
            best = x
        x = x * h % q
    if best is None:
        raise NotNttFriendly(f"no square root of {w} of order {2 * n} mod {q}")
    return best
