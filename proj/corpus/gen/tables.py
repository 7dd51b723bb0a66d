"""Table and key-schedule generators for the corpus sources."""

M32 = 0xFFFFFFFF


def rol(x, n):
    n &= 31
    return ((x << n) | (x >> (32 - n))) & M32 if n else x


def ror(x, n):
    return rol(x, 32 - n)


def words(values, per_line=4, directive=".word"):
    out = []
    for i in range(0, len(values), per_line):
        chunk = values[i:i + per_line]
        if directive == ".word":
            out.append("  .word " + ", ".join(f"0x{v:08x}" for v in chunk))
        elif directive == ".half":
            out.append("  .half " + ", ".join(f"0x{v:04x}" for v in chunk))
        else:
            out.append("  .byte " + ", ".join(f"0x{v:02x}" for v in chunk))
    return "\n".join(out) + "\n"


# Speck32/64 ---------------------------------------------------------------

SPECK_KEY = (0x1918, 0x1110, 0x0908, 0x0100)  # l2 l1 l0 k0


def _rol16(x, n):
    return ((x << n) | (x >> (16 - n))) & 0xFFFF


def speck_schedule(key=SPECK_KEY, rounds=22):
    l2, l1, l0, k0 = key
    l = [l0, l1, l2]
    k = [k0]
    for i in range(rounds - 1):
        l.append(((k[i] + _rol16(l[i], 9)) & 0xFFFF) ^ i)
        k.append(_rol16(k[i], 2) ^ l[i + 3])
    return k


def speck_round_keys():
    return "rk:\n" + words(speck_schedule(), 8, ".half")


# AES-128 ------------------------------------------------------------------

def _xtime(a):
    a <<= 1
    return (a ^ 0x11B) & 0xFF if a & 0x100 else a


def _gmul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a = _xtime(a)
        b >>= 1
    return r


def _sbox():
    # Multiplicative inverse in GF(2^8) followed by the affine map.
    inv = [0] * 256
    for a in range(1, 256):
        for b in range(1, 256):
            if _gmul(a, b) == 1:
                inv[a] = b
                break
    box = []
    for a in range(256):
        x = inv[a]
        y = x
        for s in range(1, 5):
            y ^= ((x << s) | (x >> (8 - s))) & 0xFF
        box.append(y ^ 0x63)
    return box


SBOX = _sbox()
AES_KEY = bytes(range(16))  # FIPS-197 appendix C.1 key


def aes_expand(key=AES_KEY):
    """Round-key words, byte 0 of each column in the low byte."""
    w = [int.from_bytes(key[4 * i:4 * i + 4], "little") for i in range(4)]
    rcon = 1
    for i in range(4, 44):
        t = w[i - 1]
        if i % 4 == 0:
            t = ror(t, 8)  # RotWord on a little-endian column
            t = sum(SBOX[(t >> (8 * j)) & 0xFF] << (8 * j) for j in range(4))
            t ^= rcon
            rcon = _xtime(rcon)
        w.append(w[i - 4] ^ t)
    return w


def aes_te0():
    # Column produced by one state byte in MixColumns(SubBytes): rows 2s, s, s, 3s.
    te = []
    for a in range(256):
        s = SBOX[a]
        te.append(_gmul(s, 2) | s << 8 | s << 16 | _gmul(s, 3) << 24)
    return "te0:\n" + words(te)


def aes_sbox():
    return "sbox:\n" + words(SBOX, 16, ".byte")


def aes_round_keys():
    return "rk:\n" + words(aes_expand())


# CRC-32 (reflected, poly 0xEDB88320) --------------------------------------

def crc32_table():
    t = []
    for n in range(256):
        c = n
        for _ in range(8):
            c = (c >> 1) ^ 0xEDB88320 if c & 1 else c >> 1
        t.append(c)
    return "crc_table:\n" + words(t)


def base64_alphabet():
    return 'alphabet: .ascii "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"\n'


def _aes_lookups(final):
    # New column c takes row r from old column (c + r) % 4 (ShiftRows).
    out = []
    for c, dst in enumerate(("r2", "r3", "r4", "r5")):
        out.append(f"  ; column {c}")
        for r in range(4):
            off = r + 4 * ((c + r) % 4)
            out.append(f"  ld1 r6, [r1+{off}]")
            if final:
                out.append("  ld1 r7, [r6+sbox]")
                if r:
                    out.append(f"  shl r7, r7, {8 * r}")
            else:
                out.append("  shl r6, r6, 2")
                out.append("  ld4 r7, [r6+te0]")
                if r:
                    out.append(f"  rol r7, r7, {8 * r}")
            out.append(f"  {'mov' if r == 0 else 'xor'} {dst}, {'r7' if r == 0 else dst + ', r7'}")
        out.append(f"  ld4 r7, [r12+{4 * c}]")
        out.append(f"  xor {dst}, {dst}, r7")
    return "\n".join(out) + "\n"


def aes_full_round():
    return _aes_lookups(False)


def aes_final_round():
    return _aes_lookups(True)


# ARX hash (BLAKE2s-shaped compression, keyless) ---------------------------

ARX_IV = (0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
          0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19)

ARX_SIGMA = (
    (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15),
    (14, 10, 4, 8, 9, 15, 13, 6, 1, 12, 0, 2, 11, 7, 5, 3),
    (11, 8, 12, 0, 5, 2, 15, 13, 10, 14, 3, 6, 7, 1, 9, 4),
    (7, 9, 3, 1, 13, 12, 11, 14, 2, 6, 5, 10, 4, 0, 15, 8),
    (9, 0, 5, 7, 2, 4, 10, 15, 14, 1, 11, 12, 6, 8, 3, 13),
    (2, 12, 6, 10, 0, 11, 8, 3, 4, 13, 7, 5, 15, 14, 1, 9),
    (12, 5, 1, 15, 14, 13, 4, 10, 0, 7, 6, 3, 9, 2, 8, 11),
    (13, 11, 7, 14, 12, 1, 3, 9, 5, 0, 15, 4, 8, 6, 2, 10),
    (6, 15, 14, 9, 11, 3, 0, 8, 12, 2, 13, 7, 1, 4, 10, 5),
    (10, 2, 8, 4, 7, 6, 1, 5, 15, 11, 9, 14, 3, 12, 13, 0),
)

ARX_G = ((0, 4, 8, 12), (1, 5, 9, 13), (2, 6, 10, 14), (3, 7, 11, 15),
         (0, 5, 10, 15), (1, 6, 11, 12), (2, 7, 8, 13), (3, 4, 9, 14))


def arx_sigma():
    return "sigma:\n" + words([b for row in ARX_SIGMA for b in row], 16, ".byte")


def arx_round():
    # r12 points at the round's sigma row, r13 at the message block.
    out = []
    for k, (a, b, c, d) in enumerate(ARX_G):
        out.append(f"  ; G{k}: v{a} v{b} v{c} v{d}\n")
        for reg, idx in zip(("r1", "r2", "r3", "r4"), (a, b, c, d)):
            out.append(f"  li {reg}, v+{4 * idx}\n")
        for reg, off in (("r5", 2 * k), ("r6", 2 * k + 1)):
            out.append(f"  ld1 {reg}, [r12+{off}]\n")
            out.append(f"  shl {reg}, {reg}, 2\n")
            out.append(f"  add {reg}, {reg}, r13\n")
            out.append(f"  ld4 {reg}, [{reg}]\n")
        out.append("  call g\n")
    return "".join(out)
