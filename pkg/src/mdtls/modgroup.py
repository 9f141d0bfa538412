"""Prime-order subgroups of Z_p^* for the Schnorr backend.

Exponentiation is plain left-to-right square-and-multiply; the two-base
product ``b1^e1 * b2^e2`` uses Shamir's simultaneous method, which averages
one squaring and 0.75 multiplications per exponent bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .counters import MODMULS, OpCounter
from .encoding import DecodeError


@dataclass(frozen=True)
class SchnorrGroup:
    name: str
    p: int
    q: int
    g: int

    @property
    def bits(self) -> int:
        return self.q.bit_length()

    @property
    def byte_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def exp_units(self) -> int:
        return 3 * self.bits // 2

    @property
    def multi_exp_units(self) -> int:
        return 7 * self.bits // 4

    def is_element(self, x: int) -> bool:
        return 1 <= x < self.p and pow(x, self.q, self.p) == 1

    def mul(self, a: int, b: int, ctr: OpCounter | None = None) -> int:
        if ctr is not None:
            ctr.bump("modular_multiplications")
        return a * b % self.p

    def mod_exp(self, base: int, e: int, ctr: OpCounter | None = None) -> int:
        ctr = ctr if ctr is not None else OpCounter()
        if e == 0:
            return 1
        if e < 0:
            raise ValueError("negative exponent")
        p = self.p
        result = base % p
        mults = 0
        for bit in bin(e)[3:]:
            result = result * result % p
            mults += 1
            if bit == "1":
                result = result * base % p
                mults += 1
        ctr.bump("modular_multiplications", mults)
        ctr.bump("modular_exponentiations")
        ctr.charge(MODMULS, self.exp_units)
        return result

    def multi_exp(self, b1: int, e1: int, b2: int, e2: int,
                  ctr: OpCounter | None = None, charge: bool = True) -> int:
        ctr = ctr if ctr is not None else OpCounter()
        p = self.p
        table = {1: b1 % p, 2: b2 % p, 3: b1 * b2 % p}
        mults = 1
        result = 1
        width = max(e1.bit_length(), e2.bit_length())
        for i in range(width - 1, -1, -1):
            if result != 1:
                result = result * result % p
                mults += 1
            sel = ((e1 >> i) & 1) | (((e2 >> i) & 1) << 1)
            if sel:
                if result == 1:
                    result = table[sel]
                else:
                    result = result * table[sel] % p
                    mults += 1
        ctr.bump("modular_multiplications", mults)
        ctr.bump("multi_exponentiations")
        if charge:
            ctr.charge(MODMULS, self.multi_exp_units)
        return result

    def scalar_product(self, a: int, b: int, ctr: OpCounter | None = None) -> int:
        """Product of two exponents mod q, charged as one multiplication."""
        if ctr is not None:
            ctr.bump("scalar_products")
            ctr.charge(MODMULS, 1)
        return a * b % self.q

    def encode_element(self, x: int) -> bytes:
        return x.to_bytes(self.byte_len, "big")

    def decode_element(self, data: bytes) -> int:
        if len(data) != self.byte_len:
            raise DecodeError("bad group element length")
        x = int.from_bytes(data, "big")
        if not self.is_element(x):
            raise DecodeError("not a subgroup element")
        return x


SCHNORR_3072 = SchnorrGroup(
    name="schnorr-3072-256",
    p=int(
        "8000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000000"
        "0000000000000000000000000000000000000000000000000000000000000030"
        "8206837c4cb7f509902ae941213fc9f2ad714bf7abf0c7e15733aad26f9043bf",
        16,
    ),
    q=0x8D72E2ECE0B66FC9870D18A368B5CE96B79440D0EE168E84F7368E7BC0C5769D,
    g=int(
        "d7b914b2ecd08d63c5991ec64d41f6d2f501d56e0ce361513e41efad0bf7a065"
        "7d4544e7e882cd6dbe6f4418b98cee1a3d3a25f4555d64b0247b970e79442106"
        "1482453d80583f5739396bf3e076cede507852613c811e92ad616eaf88a1097f"
        "3944fda1018a7014ed6fd7e304a967b97273e4460dd4d476d50a839589041ca8"
        "a16ce92643bdb2b1de9dfc52fdf3da3aaa230884e2b1cff1334f1b1f9056056d"
        "fe69a1d4e6fe5d904fff497b217390e1bc5bd5784a2fd586820ea615fd03abf4"
        "850c145f8fc01602aa497b12c25fb43ca7cb70a4376168461c0c949d3eec4de8"
        "40b20d9077ebe68b3023b1ae56805133a54884b47e2b8b6ffcb1da0dcdff679c"
        "a6fc8a37a2c4686d6637343d1fe7a123cc177e3f95c53cc64304dfae15fb295c"
        "8a035e872e8eeb8d867306b2e9504bf3442ba2d5252dfcb6969a3d58e60f30a5"
        "319785b59b1affee67478ba0c91ebb564a16121507627ff9ab1527b1cc163439"
        "ec81964834a34c4d47bf5a531ad788ad4c599704929c17088c5c403d0105f0c",
        16,
    ),
)

SCHNORR_TEST_64 = SchnorrGroup(
    name="schnorr-test-64",
    p=0x8000000ED7AAF7C5,
    q=0xFEF4434F,
    g=0x610F6B28C857F2E6,
)
