"""
Reference implementations of the shipped benchmarks.

Each oracle reads the benchmark's input words from an initial memory image and
returns the expected final outputs keyed by output region name. They are written
independently of the assembly programs.
"""

import math
from typing import Callable, Dict, List, Sequence

import numpy as np

from src.utils.bits import Word, to_signed64

Oracle = Callable[[Sequence[Word]], Dict[str, List[Word]]]

MASK64 = (1 << 64) - 1


def affine(memory: Sequence[Word]) -> Dict[str, List[Word]]:
    a = np.array(memory[0:4], dtype=np.float64)
    return {"d": list(((a * 2.0) * 0.25) * 0.5)}


def masker(memory: Sequence[Word]) -> Dict[str, List[Word]]:
    x = [float(v) for v in memory[0:4]]
    table = [float(v) for v in memory[30:38]]
    z = [v * 0.5 + 0.125 for v in x]
    g = [((z[i] + z[(i + 1) % 4]) * 0.5) * 2.0 for i in range(4)]
    return {"out": [table[math.trunc(v * 4.0 + 0.5)] for v in g]}


def _blocks_to_dense(words: Sequence[Word]) -> np.ndarray:
    dense = np.zeros((8, 8))
    for bi in range(2):
        for bj in range(2):
            base = 16 * (2 * bi + bj)
            block = np.array(words[base:base + 16], dtype=np.float64).reshape(4, 4)
            dense[4 * bi:4 * bi + 4, 4 * bj:4 * bj + 4] = block
    return dense


def _dense_to_blocks(dense: np.ndarray) -> List[float]:
    words: List[float] = []
    for bi in range(2):
        for bj in range(2):
            words.extend(dense[4 * bi:4 * bi + 4, 4 * bj:4 * bj + 4].reshape(-1).tolist())
    return words


def doolittle(a: np.ndarray) -> np.ndarray:
    """Unpivoted LU factorization packed in place: unit-lower L below the diagonal, U above."""
    packed = np.array(a, dtype=np.float64)
    n = packed.shape[0]
    for k in range(n):
        packed[k + 1:, k] /= packed[k, k]
        packed[k + 1:, k + 1:] -= np.outer(packed[k + 1:, k], packed[k, k + 1:])
    return packed


def lu(memory: Sequence[Word]) -> Dict[str, List[Word]]:
    return {"A": _dense_to_blocks(doolittle(_blocks_to_dense(memory[0:64])))}


def fft(memory: Sequence[Word]) -> Dict[str, List[Word]]:
    pairs = np.array(memory[0:16], dtype=np.float64).reshape(8, 2)
    spectrum = np.fft.fft(pairs[:, 0] + 1j * pairs[:, 1])
    return {"y": np.column_stack([spectrum.real, spectrum.imag]).reshape(-1).tolist()}


def cnd(d: float) -> float:
    """Cumulative normal distribution, five-term polynomial approximation."""
    x = abs(d)
    density = math.exp(x * x * -0.5) * 0.3989422804014327
    k = 1.0 / (x * 0.2316419 + 1.0)
    poly = 1.330274429
    for coefficient in (-1.821255978, 1.781477937, -0.356563782, 0.31938153):
        poly = poly * k + coefficient
    value = 1.0 - poly * k * density
    return 1.0 - value if d < 0.0 else value


def black_scholes_call(s: float, k: float, r: float, v: float, t: float) -> float:
    root = v * math.sqrt(t)
    d1 = (math.log(s / k) + (r + v * v * 0.5) * t) / root
    d2 = d1 - root
    return s * cnd(d1) - k * math.exp(-(r * t)) * cnd(d2)


def bscholes(memory: Sequence[Word]) -> Dict[str, List[Word]]:
    prices = [
        black_scholes_call(*[float(w) for w in memory[5 * o:5 * o + 5]]) for o in range(2)
    ]
    return {"price": prices, "status": [0]}


def fmix64(x: int) -> int:
    """splitmix64 finalizer on an unsigned 64-bit value."""
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix_hash(data: Sequence[int], iv: Sequence[int], rounds: int = 2) -> List[int]:
    """Digest of four 64-bit words as signed integers."""
    h = [(d ^ i) & MASK64 for d, i in zip(data, iv)]
    for _ in range(rounds):
        h[0] = (h[0] + h[1]) & MASK64
        h[2] = (h[2] + h[3]) & MASK64
        h[1] ^= h[2]
        h[3] ^= h[0]
        h[1] = fmix64(h[1])
        h[3] = fmix64(h[3])
        h[0] ^= h[3]
        h[2] ^= h[1]
    return [to_signed64(fmix64(h[i] ^ h[(i + 1) % 4])) for i in range(4)]


def hash_digest(memory: Sequence[Word]) -> Dict[str, List[Word]]:
    data = [int(w) & MASK64 for w in memory[0:4]]
    iv = [int(w) & MASK64 for w in memory[5:9]]
    return {"digest": mix_hash(data, iv)}


ORACLES: Dict[str, Oracle] = {
    "affine": affine,
    "masker": masker,
    "lu": lu,
    "fft": fft,
    "bscholes": bscholes,
    "hash": hash_digest,
}
