"""Open-addressing hash table (int64 -> int64) usable from compiled code.

The table is a pair of flat arrays so it can be passed into numba kernels;
``lookup`` returns -1 for missing keys. Keys must be non-negative.
"""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _mix(key):
    # splitmix64 finalizer
    z = np.uint64(key) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _build(keys, values):
    cap = 8
    while cap < 2 * keys.size:
        cap *= 2
    mask = np.uint64(cap - 1)
    tk = np.full(cap, -1, np.int64)
    tv = np.full(cap, -1, np.int64)
    for i in range(keys.size):
        k = keys[i]
        j = np.int64(_mix(k) & mask)
        while tk[j] != -1:
            if tk[j] == k:
                return tk, tv, False
            j = (j + 1) & (cap - 1)
        tk[j] = k
        tv[j] = values[i]
    return tk, tv, True


@numba.njit(cache=True, inline="always")
def lookup(tk, tv, key):
    cap = tk.size
    j = np.int64(_mix(key) & np.uint64(cap - 1))
    while True:
        k = tk[j]
        if k == key:
            return tv[j]
        if k == -1:
            return -1
        j = (j + 1) & (cap - 1)


@numba.njit(cache=True)
def lookup_many(tk, tv, keys):
    out = np.empty(keys.size, np.int64)
    for i in range(keys.size):
        out[i] = lookup(tk, tv, keys[i])
    return out


class HashIndex:
    """Map from non-negative int64 keys to int64 values (default: position)."""

    def __init__(self, keys, values=None):
        keys = np.ascontiguousarray(keys, dtype=np.int64)
        if keys.size and keys.min() < 0:
            raise ValueError("hash keys must be non-negative")
        values = np.arange(keys.size, dtype=np.int64) if values is None else np.ascontiguousarray(values, dtype=np.int64)
        self.table_keys, self.table_values, ok = _build(keys, values)
        if not ok:
            raise ValueError("duplicate hash keys")
        self.size = keys.size

    def get(self, key, default=None):
        v = lookup(self.table_keys, self.table_values, np.int64(key))
        return default if v < 0 else int(v)

    def __contains__(self, key):
        return key >= 0 and lookup(self.table_keys, self.table_values, np.int64(key)) >= 0

    def __len__(self):
        return self.size

    def get_many(self, keys):
        return lookup_many(self.table_keys, self.table_values, np.ascontiguousarray(keys, dtype=np.int64))
