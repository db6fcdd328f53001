"""Finite field GF(p^m) with table-driven arithmetic.

Elements are integers in ``[0, q)`` whose base-``p`` digits are the polynomial
coefficients (lowest degree first).  Binary extension fields use fixed
irreducible polynomials so that arithmetic is reproducible; odd-characteristic
extension fields use the first irreducible polynomial found by ordered search.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache

import numpy as np

# x^m + ... as bitmasks, including the leading term
BINARY_POLYNOMIALS = {
    2: 0x7,  # x^2 + x + 1
    3: 0xB,  # x^3 + x + 1
    4: 0x13,  # x^4 + x + 1
    5: 0x25,  # x^5 + x^2 + 1
    6: 0x43,  # x^6 + x + 1
    7: 0x83,  # x^7 + x + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    9: 0x211,  # x^9 + x^4 + 1
    10: 0x409,  # x^10 + x^3 + 1
}

# tables are q*q entries
MAX_TABLE_ORDER = 1024


def prime_power(q: int) -> tuple[int, int] | None:
    """Return ``(p, m)`` with ``q == p**m`` and p prime, or None."""
    if q < 2:
        return None
    p = 2
    while p * p <= q:
        if q % p == 0:
            break
        p += 1
    else:
        return q, 1
    m = 0
    while q % p == 0:
        q //= p
        m += 1
    return (p, m) if q == 1 else None


@dataclass(frozen=True)
class FieldSpec:
    """A finite field of prime-power order ``q`` (default GF(256))."""

    order: int = 256

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or isinstance(self.order, bool):
            raise TypeError(f"field order must be an integer, got {self.order!r}")
        if prime_power(int(self.order)) is None:
            raise ValueError(f"field order {self.order} is not a prime power")

    @property
    def characteristic(self) -> int:
        return prime_power(self.order)[0]

    @property
    def degree(self) -> int:
        return prime_power(self.order)[1]

    def tables(self) -> "FieldTables":
        return _build_tables(int(self.order))

    def contains(self, values) -> bool:
        arr = np.asarray(values)
        if arr.size == 0:
            return True
        if not np.issubdtype(arr.dtype, np.integer):
            return False
        return bool(arr.min() >= 0 and arr.max() < self.order)


@dataclass(frozen=True)
class FieldTables:
    add: np.ndarray
    mul: np.ndarray
    neg: np.ndarray
    inv: np.ndarray  # inv[0] is 0 and must never be used


def _poly_divides(divisor, poly, p):
    """True when ``divisor`` (monic, low-first coeffs) divides ``poly`` over GF(p)."""
    rem = list(poly)
    d = len(divisor) - 1
    for shift in range(len(rem) - 1 - d, -1, -1):
        c = rem[shift + d] % p
        if c:
            for k in range(d + 1):
                rem[shift + k] = (rem[shift + k] - c * divisor[k]) % p
    return not any(c % p for c in rem[:d])


def _monic_polys(p, degree):
    for code in range(p**degree):
        coeffs = [(code // p**k) % p for k in range(degree)]
        yield coeffs + [1]


def irreducible_polynomial(p: int, m: int) -> list[int]:
    """Monic irreducible polynomial of degree m over GF(p), low-first coefficients."""
    if p == 2 and m in BINARY_POLYNOMIALS:
        mask = BINARY_POLYNOMIALS[m]
        return [(mask >> k) & 1 for k in range(m + 1)]
    for cand in _monic_polys(p, m):
        if cand[0] == 0:
            continue
        if not any(
            _poly_divides(div, cand, p)
            for d in range(1, m // 2 + 1)
            for div in _monic_polys(p, d)
        ):
            return cand
    raise ValueError(f"no irreducible polynomial of degree {m} over GF({p})")


@cache
def _build_tables(q: int) -> FieldTables:
    if q > MAX_TABLE_ORDER:
        raise ValueError(f"arithmetic tables limited to q <= {MAX_TABLE_ORDER}, got {q}")
    p, m = prime_power(q)
    dtype = np.int16 if q > 127 else np.int8
    if m == 1:
        a = np.arange(q)
        add = (a[:, None] + a[None, :]) % p
        mul = (a[:, None] * a[None, :]) % p
    else:
        weights = p ** np.arange(m)
        digits = (np.arange(q)[:, None] // weights[None, :]) % p
        red = np.array(irreducible_polynomial(p, m)[:m])
        add = np.empty((q, q), dtype=np.int64)
        for b in range(q):
            add[:, b] = ((digits + digits[b]) % p) @ weights
        mul = np.empty((q, q), dtype=np.int64)
        for b in range(q):
            acc = np.zeros_like(digits)
            for k in range(m - 1, -1, -1):
                # acc <- acc * x mod f
                top = acc[:, m - 1].copy()
                acc[:, 1:] = acc[:, :-1]
                acc[:, 0] = 0
                acc = (acc - top[:, None] * red[None, :]) % p
                acc = (acc + digits[b, k] * digits) % p
            mul[:, b] = acc @ weights
    neg = np.argmax(add == 0, axis=1)
    inv = np.argmax(mul == 1, axis=1)
    inv[0] = 0
    return FieldTables(
        add=add.astype(dtype),
        mul=mul.astype(dtype),
        neg=neg.astype(dtype),
        inv=inv.astype(dtype),
    )
