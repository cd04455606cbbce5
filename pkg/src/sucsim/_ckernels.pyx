# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Must stay call-compatible with ``_pykernels``.

States are uint64 words. Substitution/diffusion tables are 8 x 256 uint64
arrays indexed by byte position: the layer output is the XOR over j of
``table[j, (x >> 8j) & 0xff]``.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"

# Encryption / round kernels

cdef inline uint64_t _layer(uint64_t st, const uint64_t[:, ::1] t) noexcept nogil:
    return (t[0, st & 0xff] ^ t[1, (st >> 8) & 0xff] ^ t[2, (st >> 16) & 0xff]
            ^ t[3, (st >> 24) & 0xff] ^ t[4, (st >> 32) & 0xff]
            ^ t[5, (st >> 40) & 0xff] ^ t[6, (st >> 48) & 0xff]
            ^ t[7, st >> 56])


cdef inline uint64_t _diffuse(uint64_t st) noexcept nogil:
    cdef uint64_t s = st ^ (st >> 32)
    s ^= s >> 16
    s ^= s >> 8
    s ^= s >> 4
    s &= 0xf
    return st ^ (s * <uint64_t>0x1111111111111111)


def ni_encrypt(const uint64_t[::1] x, const uint64_t[:, ::1] sp, const uint64_t[::1] keys):
    cdef Py_ssize_t n = x.shape[0], i
    cdef int r
    cdef uint64_t st
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    with nogil:
        for i in range(n):
            st = x[i]
            for r in range(31):
                st = _layer(st ^ keys[r], sp)
            o[i] = st ^ keys[31]
    return out


def ni_decrypt(const uint64_t[::1] y, const uint64_t[:, ::1] pinv,
               const uint64_t[:, ::1] sinv, const uint64_t[::1] keys):
    cdef Py_ssize_t n = y.shape[0], i
    cdef int r
    cdef uint64_t st
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    with nogil:
        for i in range(n):
            st = y[i] ^ keys[31]
            for r in range(30, -1, -1):
                st = _layer(_layer(st, pinv), sinv) ^ keys[r]
            o[i] = st
    return out


def ni_rounds(const uint64_t[::1] x, const uint64_t[:, ::1] sp, const uint64_t[::1] keys):
    """State after each of the 31 rounds (before the final whitening key)."""
    cdef Py_ssize_t n = x.shape[0], i
    cdef int r
    cdef uint64_t st
    out = np.empty((n, 31), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            st = x[i]
            for r in range(31):
                st = _layer(st ^ keys[r], sp)
                o[i, r] = st
    return out


def i_apply(const uint64_t[::1] x, const uint64_t[:, ::1] sl, const uint64_t[::1] keys):
    cdef Py_ssize_t n = x.shape[0], i
    cdef int r
    cdef uint64_t st
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    with nogil:
        for i in range(n):
            st = _layer(x[i], sl)
            for r in range(31):
                st = _layer(_diffuse(st) ^ keys[r], sl)
            o[i] = st
    return out


def i_rounds(const uint64_t[::1] x, const uint64_t[:, ::1] sl, const uint64_t[::1] keys):
    """State after each of the 32 substitution layers."""
    cdef Py_ssize_t n = x.shape[0], i
    cdef int r
    cdef uint64_t st
    out = np.empty((n, 32), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            st = _layer(x[i], sl)
            o[i, 0] = st
            for r in range(31):
                st = _layer(_diffuse(st) ^ keys[r], sl)
                o[i, r + 1] = st
    return out


# Involutive-optimal S-box census

cdef inline int _assign(int* s, int* ddt, int x, int v) noexcept nogil:
    # returns 1 when some DDT entry now exceeds 4
    cdef int z, bad = 0, k
    for z in range(16):
        if s[z] >= 0:
            k = ((x ^ z) << 4) | (v ^ s[z])
            ddt[k] += 2
            if ddt[k] > 4:
                bad = 1
    s[x] = v
    return bad


cdef inline void _unassign(int* s, int* ddt, int x) noexcept nogil:
    cdef int z, v = s[x]
    s[x] = -1
    for z in range(16):
        if s[z] >= 0:
            ddt[((x ^ z) << 4) | (v ^ s[z])] -= 2


cdef int _lin_ok(int* s) noexcept nogil:
    cdef int b, x, h, j, u, w, p
    cdef int f[16]
    for b in range(1, 16):
        for x in range(16):
            p = s[x] & b
            p ^= p >> 2
            p ^= p >> 1
            f[x] = 1 - 2 * (p & 1)
        h = 1
        while h < 16:
            x = 0
            while x < 16:
                for j in range(x, x + h):
                    u = f[j]
                    w = f[j + h]
                    f[j] = u + w
                    f[j + h] = u - w
                x += 2 * h
            h *= 2
        for x in range(16):
            if f[x] > 8 or f[x] < -8:
                return 0
    return 1


cdef int _search(int* s, int* ddt, uint64_t* out, int64_t cap, int64_t* count) noexcept nogil:
    cdef int x = 0, y, bad
    cdef uint64_t packed
    while x < 16 and s[x] >= 0:
        x += 1
    if x == 16:
        if _lin_ok(s):
            if count[0] < cap:
                packed = 0
                for y in range(16):
                    packed = (packed << 4) | <uint64_t>s[y]
                out[count[0]] = packed
            count[0] += 1
        return 0
    # fixed point
    bad = _assign(s, ddt, x, x)
    if not bad:
        _search(s, ddt, out, cap, count)
    _unassign(s, ddt, x)
    # transposition (x y)
    for y in range(x + 1, 16):
        if s[y] >= 0:
            continue
        bad = _assign(s, ddt, x, y)
        if not bad:
            bad = _assign(s, ddt, y, x)
            if not bad:
                _search(s, ddt, out, cap, count)
            _unassign(s, ddt, y)
        _unassign(s, ddt, x)
    return 0


def enumerate_involutive_optimal(int first_image=-1):
    """Packed tables (nibble of S(0) most significant), sorted ascending.

    ``first_image`` restricts the census to involutions with S(0) equal to it.
    """
    cdef int s[16]
    cdef int ddt[256]
    cdef int i, bad = 0
    cdef int64_t count = 0
    cdef int64_t cap = 1 << 24
    buf = np.zeros(cap, dtype=np.uint64)
    cdef uint64_t[::1] b = buf
    for i in range(16):
        s[i] = -1
    for i in range(256):
        ddt[i] = 0
    if first_image >= 0:
        bad = _assign(s, ddt, 0, first_image)
        if first_image != 0 and not bad:
            bad = _assign(s, ddt, first_image, 0)
    if not bad:
        with nogil:
            _search(s, ddt, &b[0], cap, &count)
    if count > cap:
        raise RuntimeError("census buffer overflow")
    return np.sort(buf[:count])
