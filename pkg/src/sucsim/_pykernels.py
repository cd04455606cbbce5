"""numpy / pure-Python twins of ``_ckernels``.

Same signatures, same outputs. Used when the extension is not built or when
``SUCSIM_BACKEND=python`` is set.
"""
import numpy as np

BACKEND = "python"

_BYTE = np.uint64(0xFF)
_SHIFTS = [np.uint64(8 * j) for j in range(8)]


def _layer(st, t):
    out = t[0][st & _BYTE]
    for j in range(1, 8):
        out = out ^ t[j][(st >> _SHIFTS[j]) & _BYTE]
    return out


def _diffuse(st):
    s = st ^ (st >> np.uint64(32))
    s ^= s >> np.uint64(16)
    s ^= s >> np.uint64(8)
    s ^= s >> np.uint64(4)
    s &= np.uint64(0xF)
    return st ^ (s * np.uint64(0x1111111111111111))


def _u64(a):
    return np.ascontiguousarray(a, dtype=np.uint64)


def ni_encrypt(x, sp, keys):
    st = _u64(x).copy()
    for r in range(31):
        st = _layer(st ^ keys[r], sp)
    return st ^ keys[31]


def ni_decrypt(y, pinv, sinv, keys):
    st = _u64(y) ^ keys[31]
    for r in range(30, -1, -1):
        st = _layer(_layer(st, pinv), sinv) ^ keys[r]
    return st


def ni_rounds(x, sp, keys):
    st = _u64(x).copy()
    out = np.empty((st.shape[0], 31), dtype=np.uint64)
    for r in range(31):
        st = _layer(st ^ keys[r], sp)
        out[:, r] = st
    return out


def i_apply(x, sl, keys):
    st = _layer(_u64(x), sl)
    for r in range(31):
        st = _layer(_diffuse(st) ^ keys[r], sl)
    return st


def i_rounds(x, sl, keys):
    st = _layer(_u64(x), sl)
    out = np.empty((st.shape[0], 32), dtype=np.uint64)
    out[:, 0] = st
    for r in range(31):
        st = _layer(_diffuse(st) ^ keys[r], sl)
        out[:, r + 1] = st
    return out


def _lin_ok(s):
    for b in range(1, 16):
        f = [1 - 2 * (bin(s[x] & b).count("1") & 1) for x in range(16)]
        h = 1
        while h < 16:
            for base in range(0, 16, 2 * h):
                for j in range(base, base + h):
                    u, w = f[j], f[j + h]
                    f[j], f[j + h] = u + w, u - w
            h *= 2
        if max(f) > 8 or min(f) < -8:
            return False
    return True


def enumerate_involutive_optimal(first_image=-1):
    """Backtracking census over involutions with incremental DDT pruning."""
    s = [-1] * 16
    ddt = [0] * 256
    found = []

    def assign(x, v):
        bad = False
        for z in range(16):
            sz = s[z]
            if sz >= 0:
                k = ((x ^ z) << 4) | (v ^ sz)
                ddt[k] += 2
                if ddt[k] > 4:
                    bad = True
        s[x] = v
        return bad

    def unassign(x):
        v = s[x]
        s[x] = -1
        for z in range(16):
            sz = s[z]
            if sz >= 0:
                ddt[((x ^ z) << 4) | (v ^ sz)] -= 2

    def search():
        try:
            x = s.index(-1)
        except ValueError:
            if _lin_ok(s):
                packed = 0
                for v in s:
                    packed = (packed << 4) | v
                found.append(packed)
            return
        if not assign(x, x):
            search()
        unassign(x)
        for y in range(x + 1, 16):
            if s[y] >= 0:
                continue
            if not assign(x, y):
                if not assign(y, x):
                    search()
                unassign(y)
            unassign(x)

    bad = False
    if first_image >= 0:
        bad = assign(0, first_image)
        if first_image != 0 and not bad:
            bad = assign(first_image, 0)
    if not bad:
        search()
    return np.sort(np.array(found, dtype=np.uint64))
