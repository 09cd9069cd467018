"""Exact 32-bit modular arithmetic on odd primes q < 2^31.

Multiplication uses Montgomery reduction with radix 2^32; addition and
subtraction stay overflow-free because q < 2^31.  Also provides
root-of-unity discovery and the geometric twiddle sequences used by the
in-bank compute commands.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK32 = (1 << 32) - 1
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class NoSuchRoot(ValueError):
    """Requested root order does not divide q - 1."""


def is_prime(x: int) -> bool:
    """Deterministic Miller-Rabin, exact for 32-bit (and well beyond)."""
    if x < 2:
        return False
    for p in _MR_BASES:
        if x % p == 0:
            return x == p
    d = x - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        y = pow(a, d, x)
        if y == 1 or y == x - 1:
            continue
        for _ in range(r - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


class Modulus:
    """Odd prime q with 2 < q < 2^31 plus its Montgomery constants.

    Constants: R = 2^32 mod q, R^2 mod q, and -q^-1 mod 2^32.  They are
    self-checked at construction by round-tripping a handful of values.
    """

    __slots__ = ("q", "r_mod_q", "r2", "neg_qinv")

    def __init__(self, q: int):
        if q % 2 == 0 or q <= 2 or q >= (1 << 31):
            raise ValueError(f"modulus must be an odd prime in (2, 2^31): {q}")
        if not is_prime(q):
            raise ValueError(f"modulus must be prime: {q}")
        self.q = q
        self.r_mod_q = (1 << 32) % q
        self.r2 = pow(2, 64, q)
        self.neg_qinv = (-pow(q, -1, 1 << 32)) & MASK32
        x = 0x9E3779B9 % q
        for v in (1, 2, q - 1, x, (x * x + 1) % q):
            if from_mont(to_mont(v, self), self) != v:
                raise AssertionError("Montgomery constants failed round-trip")

    def __repr__(self):
        return f"Modulus({self.q})"

    def __eq__(self, other):
        return isinstance(other, Modulus) and other.q == self.q

    def __hash__(self):
        return hash(self.q)


def mod_add(a: int, b: int, m: Modulus) -> int:
    assert 0 <= a < m.q and 0 <= b < m.q
    s = a + b
    return s - m.q if s >= m.q else s


def mod_sub(a: int, b: int, m: Modulus) -> int:
    assert 0 <= a < m.q and 0 <= b < m.q
    d = a - b
    return d + m.q if d < 0 else d


def mont_redc(t: int, m: Modulus) -> int:
    """Montgomery reduction: t * 2^-32 mod q, for 0 <= t < q * 2^32."""
    u = (t * m.neg_qinv) & MASK32
    r = (t + u * m.q) >> 32
    return r - m.q if r >= m.q else r


def mont_mul(a: int, b: int, m: Modulus) -> int:
    """Product of two Montgomery-form residues, result in Montgomery form."""
    assert 0 <= a < m.q and 0 <= b < m.q
    return mont_redc(a * b, m)


def to_mont(x: int, m: Modulus) -> int:
    return mont_redc(x * m.r2, m)


def from_mont(x: int, m: Modulus) -> int:
    return mont_redc(x, m)


def butterfly(a: int, b: int, w: int, m: Modulus) -> tuple[int, int]:
    """One butterfly: ((a + b) mod q, (a - b) * w mod q)."""
    assert 0 <= a < m.q and 0 <= b < m.q and 0 <= w < m.q
    return mod_add(a, b, m), mod_sub(a, b, m) * w % m.q


_root_cache: dict[tuple[int, int], int] = {}


def find_root_of_unity(m: Modulus, order: int) -> int:
    """Smallest residue of exact multiplicative order `order` (a power of two).

    Raises NoSuchRoot when order does not divide q - 1.
    """
    q = m.q
    if order < 2 or order & (order - 1):
        raise ValueError(f"order must be a power of two >= 2: {order}")
    if (q - 1) % order:
        raise NoSuchRoot(f"{order} does not divide q-1 = {q - 1}")
    key = (q, order)
    if key in _root_cache:
        return _root_cache[key]
    exp = (q - 1) // order
    h = None
    for g in range(2, q):
        cand = pow(g, exp, q)
        if pow(cand, order >> 1, q) != 1:
            h = cand
            break
    if h is None:  # unreachable for prime q
        raise NoSuchRoot(f"no element of order {order} mod {q}")
    # All exact-order elements are the odd powers of h; take the smallest.
    best = h
    x = h
    h2 = h * h % q
    for _ in range(order // 2 - 1):
        x = x * h2 % q
        if x < best:
            best = x
    _root_cache[key] = best
    return best


def is_ntt_friendly(q: int, n: int) -> bool:
    """True iff q is prime and 2n divides q - 1 (negacyclic transforms exist)."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a power of two: {n}")
    return is_prime(q) and (q - 1) % (2 * n) == 0


@dataclass(frozen=True)
class TwiddleGen:
    """Two-parameter twiddle generator state: initial value and step size.

    Stage s uses the geometric ratio r_omega^(s-1); within a stage the
    twiddle starts at omega0 and multiplies by that ratio per butterfly.
    """

    omega0: int
    r_omega: int
    m: Modulus

    def __post_init__(self):
        q = self.m.q
        if not (0 <= self.omega0 < q and 0 <= self.r_omega < q):
            raise ValueError("generator parameters must be residues mod q")


def twiddle_sequence(g: TwiddleGen, stage: int, count: int) -> list[int]:
    """First `count` twiddles of the given stage: omega0 * ratio^i."""
    if stage < 1 or count < 1:
        raise ValueError("stage and count must be >= 1")
    q = g.m.q
    ratio = pow(g.r_omega, stage - 1, q)
    out = []
    w = g.omega0
    for _ in range(count):
        out.append(w)
        w = w * ratio % q
    return out
