"""Counter-based random numbers for common-random-number experiments.

Every draw is a pure function of ``(master_seed, replication, design,
run_index)``: the key is fed through Philox4x64-10 (the same bijection as
``numpy.random.Philox``), one 64-bit word per draw.  Run ``r`` of design ``i``
therefore has the same value whichever policy asks for it, in whatever order,
and in whichever process.  Policy-internal uniforms (randomised allocation
decisions) live on the reserved ``DECISION`` design index.

Layout: counter = ``(r // 4, replication, design, 0)``, key =
``(master_seed, 0)``; draw ``r`` is output word ``r % 4``.
"""

from __future__ import annotations

import ctypes
from dataclasses import dataclass

import numba as nb
import numpy as np
from llvmlite import ir
from numba import types
from numba.extending import get_cython_function_address, intrinsic

__all__ = [
    "DECISION",
    "StreamKey",
    "philox4x64",
    "normal_sample",
    "uniform_sample",
    "normal_block",
    "uniform_block",
]

DECISION = 2**64 - 1
_U64_MAX = 2**64 - 1

_S11 = np.uint64(11)
_MUL0 = np.uint64(0xD2E7470EE14C6C93)
_MUL1 = np.uint64(0xCA5A826395121157)
_WEYL0 = np.uint64(0x9E3779B97F4A7C15)
_WEYL1 = np.uint64(0xBB67AE8584CAA73B)
_ZERO = np.uint64(0)
_FOUR = np.uint64(4)
_THREE = np.uint64(3)
_INV53 = 2.0**-53

_ndtri_addr = get_cython_function_address("scipy.special.cython_special", "ndtri")
_c_ndtri = ctypes.CFUNCTYPE(ctypes.c_double, ctypes.c_double)(_ndtri_addr)


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    replication: int
    design: int
    run_index: int

    def __post_init__(self):
        for name in ("master_seed", "replication", "design", "run_index"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v <= _U64_MAX:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {v}")


@intrinsic
def _mulhilo(typingctx, a, b):
    """Full 64x64 -> 128-bit product as ``(hi, lo)``."""
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        wide = ir.IntType(128)
        prod = builder.mul(builder.zext(args[0], wide), builder.zext(args[1], wide))
        lo = builder.trunc(prod, ir.IntType(64))
        hi = builder.trunc(builder.lshr(prod, ir.Constant(wide, 64)), ir.IntType(64))
        return context.make_tuple(builder, signature.return_type, (hi, lo))

    return sig, codegen


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; all arguments are ``uint64``."""
    for i in range(10):
        if i > 0:
            k0 = k0 + _WEYL0
            k1 = k1 + _WEYL1
        hi0, lo0 = _mulhilo(_MUL0, c0)
        hi1, lo1 = _mulhilo(_MUL1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True)
def raw_word(seed, rep, design, r):
    """The 64-bit word behind one key (all ``uint64``)."""
    w = philox4x64(r // _FOUR, rep, design, _ZERO, seed, _ZERO)
    j = r & _THREE
    if j == 0:
        return w[0]
    if j == 1:
        return w[1]
    if j == 2:
        return w[2]
    return w[3]


@nb.njit(inline="always")
def word_to_uniform(w):
    return np.float64(w >> _S11) * _INV53


@nb.njit(inline="always")
def word_to_normal(w):
    # midpoint of the 2**-53 cell keeps the argument of ndtri inside (0, 1)
    return _c_ndtri((np.float64(w >> _S11) + 0.5) * _INV53)


@nb.njit
def std_normal_at(seed, rep, design, r):
    return word_to_normal(raw_word(seed, rep, design, r))


@nb.njit(cache=True)
def uniform_at(seed, rep, design, r):
    return word_to_uniform(raw_word(seed, rep, design, r))


def normal_sample(key: StreamKey, mu: float = 0.0, sigma: float = 1.0) -> float:
    """``mu + sigma * Z(key)`` with ``Z(key)`` standard normal."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    z = std_normal_at(
        np.uint64(key.master_seed), np.uint64(key.replication),
        np.uint64(key.design), np.uint64(key.run_index),
    )
    return mu + sigma * z


def uniform_sample(key: StreamKey) -> float:
    """A uniform draw in ``[0, 1)`` for ``key``."""
    return float(uniform_at(
        np.uint64(key.master_seed), np.uint64(key.replication),
        np.uint64(key.design), np.uint64(key.run_index),
    ))


@nb.njit
def _fill_block(seed, reps, designs, n_runs, out, normal):
    for a in range(reps.shape[0]):
        rep = np.uint64(reps[a])
        for b in range(designs.shape[0]):
            design = np.uint64(designs[b])
            for j in range(0, n_runs, 4):
                w = philox4x64(np.uint64(j // 4), rep, design, _ZERO, seed, _ZERO)
                for q in range(min(4, n_runs - j)):
                    if normal:
                        out[a, b, j + q] = word_to_normal(w[q])
                    else:
                        out[a, b, j + q] = word_to_uniform(w[q])


def _as_u64_array(values, name):
    arr = np.atleast_1d(np.asarray(values))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and (arr.min() < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr.astype(np.uint64)


def normal_block(seed: int, replications, n_designs: int, n_runs: int) -> np.ndarray:
    """Standard normal draws ``Z[a, i, r]`` for replications ``replications[a]``,
    designs ``0..n_designs-1`` and runs ``0..n_runs-1``."""
    reps = _as_u64_array(replications, "replications")
    designs = np.arange(n_designs, dtype=np.uint64)
    out = np.empty((reps.shape[0], n_designs, n_runs))
    _fill_block(np.uint64(seed), reps, designs, n_runs, out, True)
    return out


def uniform_block(seed: int, replications, n_runs: int, design: int = DECISION) -> np.ndarray:
    """Uniform draws ``U[a, r]`` from one design stream (the decision stream by default)."""
    reps = _as_u64_array(replications, "replications")
    designs = np.array([design], dtype=np.uint64)
    out = np.empty((reps.shape[0], 1, n_runs))
    _fill_block(np.uint64(seed), reps, designs, n_runs, out, False)
    return out[:, 0, :]
