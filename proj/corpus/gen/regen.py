#!/usr/bin/env python3
"""Rewrites the generated regions of the corpus sources.

A region is delimited by `; <gen:NAME>` and `; </gen:NAME>` lines; its body
is replaced by the output of the generator of the same name.
"""
import pathlib
import re
import sys

import tables

HERE = pathlib.Path(__file__).resolve().parent
CORPUS = HERE.parent

GENERATORS = {
    "speck_round_keys": tables.speck_round_keys,
    "aes_te0": tables.aes_te0,
    "aes_sbox": tables.aes_sbox,
    "aes_round_keys": tables.aes_round_keys,
    "aes_full_round": tables.aes_full_round,
    "aes_final_round": tables.aes_final_round,
    "crc32_table": tables.crc32_table,
    "base64_alphabet": tables.base64_alphabet,
    "arx_sigma": tables.arx_sigma,
    "arx_round": tables.arx_round,
}

REGION = re.compile(r"(; <gen:(\w+)>\n)(.*?)(; </gen:\2>)", re.S)


def rewrite(text):
    def body(m):
        name = m.group(2)
        if name not in GENERATORS:
            sys.exit(f"unknown generator {name}")
        return m.group(1) + GENERATORS[name]() + m.group(4)
    return REGION.sub(body, text)


def main():
    check = "--check" in sys.argv
    stale = []
    for path in sorted(CORPUS.glob("*.asm")):
        old = path.read_text()
        new = rewrite(old)
        if new != old:
            stale.append(path.name)
            if not check:
                path.write_text(new)
    if check and stale:
        print("stale generated regions:", ", ".join(stale))
        return 1
    for name in stale:
        print("regenerated", name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
