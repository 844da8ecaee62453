"""Reference implementations used only by the tests.

Each one is written from the rules directly and shares no code with the
package, so agreement between the two is evidence rather than tautology.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

# -- SHA-256, straight from the FIPS 180-4 round description -----------------

_K = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
]
_H0 = [0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19]
_M = 0xFFFFFFFF


def _rotr(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & _M


def ref_sha256(msg: bytes) -> bytes:
    bitlen = len(msg) * 8
    msg = msg + b"\x80" + b"\x00" * ((55 - len(msg)) % 64) + struct.pack(">Q", bitlen)
    h = list(_H0)
    for off in range(0, len(msg), 64):
        w = list(struct.unpack(">16I", msg[off:off + 64]))
        for i in range(16, 64):
            s0 = _rotr(w[i - 15], 7) ^ _rotr(w[i - 15], 18) ^ (w[i - 15] >> 3)
            s1 = _rotr(w[i - 2], 17) ^ _rotr(w[i - 2], 19) ^ (w[i - 2] >> 10)
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & _M)
        a, b, c, d, e, f, g, hh = h
        for i in range(64):
            t1 = (hh + (_rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)) + ((e & f) ^ (~e & g)) + _K[i] + w[i]) & _M
            t2 = ((_rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)) + ((a & b) ^ (a & c) ^ (b & c))) & _M
            a, b, c, d, e, f, g, hh = (t1 + t2) & _M, a, b, c, (d + t1) & _M, e, f, g
        h = [(x + y) & _M for x, y in zip(h, [a, b, c, d, e, f, g, hh])]
    return struct.pack(">8I", *h)


# -- Merkle root by recursion over halves of the padded level ----------------

def ref_merkle_root(leaves: list[bytes]) -> bytes:
    if len(leaves) == 1:
        return leaves[0]
    if len(leaves) % 2:
        leaves = leaves + leaves[-1:]
    parents = [ref_sha256(leaves[i] + leaves[i + 1]) for i in range(0, len(leaves), 2)]
    return ref_merkle_root(parents)


# -- pool accounting replayer -------------------------------------------------

@dataclass
class PoolReplay:
    """Brute-force replay of settlements against one pool.

    ``events`` are (target, cumulative_amount) in submission order; the replay
    rejects anything that would not move money and slashes on the first
    consolidated claim the remaining deposit cannot cover.
    """
    deposit: int
    collateral: int
    fee: int
    remaining: int = 0
    settled: dict = field(default_factory=dict)
    paid: dict = field(default_factory=dict)
    slashed: bool = False
    burned: int = 0
    outcomes: list = field(default_factory=list)

    def __post_init__(self):
        self.remaining = self.deposit

    def settle(self, target, amount: int) -> str:
        if self.slashed:
            self.outcomes.append("inactive")
            return "inactive"
        inc = amount - self.settled.get(target, 0)
        if inc <= 0:
            res = "nonpositive"
        elif inc <= self.fee:
            res = "uneconomical"
        elif inc <= self.remaining:
            self.remaining -= inc
            self.settled[target] = self.settled.get(target, 0) + inc
            self.paid[target] = self.paid.get(target, 0) + inc - self.fee
            self.burned += self.fee
            res = "settled"
        else:
            got = max(self.remaining - self.fee, 0)
            self.paid[target] = self.paid.get(target, 0) + got
            self.burned += self.remaining - got + self.collateral
            self.settled[target] = self.settled.get(target, 0) + self.remaining
            self.remaining = 0
            self.slashed = True
            res = "slash"
        self.outcomes.append(res)
        return res


def settlement_earnings(chunks: int, value: int, fee: int, settle_after: list[int]) -> int:
    """Net earnings of one peer paid ``value`` per chunk that settles after the
    listed (1-based) chunk counts."""
    total, last = 0, 0
    for k in settle_after:
        total += k * value - last - fee
        last = k * value
    return total
