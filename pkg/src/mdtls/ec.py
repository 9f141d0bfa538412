"""Affine short-Weierstrass curve arithmetic with operation counting.

Points are ``(x, y)`` tuples; the point at infinity is ``None``. Every
addition pays a modular inverse, which is slow but keeps one counted event
per group operation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .counters import POINT_UNITS, OpCounter
from .encoding import DecodeError

try:
    from gmpy2 import invert as _gmp_invert

    def _inv(x: int, p: int) -> int:
        return int(_gmp_invert(x, p))
except ImportError:  # pragma: no cover
    def _inv(x: int, p: int) -> int:
        return pow(x, -1, p)

Point = tuple[int, int] | None
INFINITY: Point = None


@dataclass(frozen=True)
class Curve:
    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    # Nominal scalar width used by the cost convention.
    bits: int

    @property
    def G(self) -> Point:
        return (self.gx, self.gy)

    @property
    def q(self) -> int:
        return self.n

    @property
    def byte_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_mul_units(self) -> int:
        # 1 doubling + 0.5 additions per bit on average.
        return 3 * self.bits // 2

    def is_on_curve(self, P: Point) -> bool:
        if P is None:
            return True
        x, y = P
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0

    def neg(self, P: Point) -> Point:
        if P is None:
            return None
        return (P[0], (-P[1]) % self.p)

    def _double(self, P: Point, ctr: OpCounter) -> Point:
        if P is None or P[1] == 0:
            return None
        x, y = P
        p = self.p
        lam = (3 * x * x + self.a) * _inv(2 * y, p) % p
        x3 = (lam * lam - 2 * x) % p
        ctr.bump("point_doublings")
        return (x3, (lam * (x - x3) - y) % p)

    def point_add(self, P: Point, Q: Point, ctr: OpCounter | None = None) -> Point:
        ctr = ctr if ctr is not None else OpCounter()
        if P is None:
            return Q
        if Q is None:
            return P
        if P[0] == Q[0]:
            if (P[1] + Q[1]) % self.p == 0:
                return None
            return self._double(P, ctr)
        p = self.p
        lam = (Q[1] - P[1]) * _inv((Q[0] - P[0]) % p, p) % p
        x3 = (lam * lam - P[0] - Q[0]) % p
        ctr.bump("point_additions")
        return (x3, (lam * (P[0] - x3) - P[1]) % p)

    def scalar_mul(self, k: int, P: Point, ctr: OpCounter | None = None) -> Point:
        """Left-to-right double-and-add."""
        ctr = ctr if ctr is not None else OpCounter()
        if P is None:
            raise ValueError("identity base")
        if k <= 0:
            raise ValueError("zero scalar")
        acc = P
        for bit in bin(k)[3:]:
            acc = self._double(acc, ctr)
            if bit == "1":
                acc = self.point_add(acc, P, ctr)
        ctr.bump("scalar_multiplications")
        ctr.charge(POINT_UNITS, self.scalar_mul_units)
        return acc

    def encode_point(self, P: Point) -> bytes:
        if P is None:
            return b"\x00"
        n = self.byte_len
        return b"\x04" + P[0].to_bytes(n, "big") + P[1].to_bytes(n, "big")

    def decode_point(self, data: bytes) -> Point:
        n = self.byte_len
        if data == b"\x00":
            return None
        if len(data) != 1 + 2 * n or data[0] != 4:
            raise DecodeError("bad point encoding")
        P = (int.from_bytes(data[1:1 + n], "big"), int.from_bytes(data[1 + n:], "big"))
        if not self.is_on_curve(P):
            raise DecodeError("point not on curve")
        return P


SECP256R1 = Curve(
    name="secp256r1",
    p=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF,
    a=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFC,
    b=0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B,
    gx=0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296,
    gy=0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5,
    n=0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
    bits=256,
)

# y^2 = x^3 + 2x + 2 over F_17; G = (5, 1) generates all 19 points.
TOY_CURVE = Curve(name="toy17", p=17, a=2, b=2, gx=5, gy=1, n=19, bits=5)
