#!/usr/bin/env python3
"""Writes the hand-assembled ELF fixtures next to this script.

le64.elf  ELF64 little-endian x86-64: main, helper, _start; one object symbol
be32.elf  ELF32 big-endian MIPS: two functions, one object symbol, a .debug_info section
"""
import struct
from pathlib import Path

STT_OBJECT, STT_FUNC, STT_FILE = 1, 2, 4
STB_LOCAL, STB_GLOBAL = 0, 1
SHT_PROGBITS, SHT_SYMTAB, SHT_STRTAB = 1, 2, 3


def strtab(names):
    blob, offsets = b"\0", {}
    for n in names:
        offsets[n] = len(blob)
        blob += n.encode() + b"\0"
    return blob, offsets


def build(is64, big, machine, text_addr, symbols, extra_sections=()):
    e = ">" if big else "<"
    sym_names = [s[0] for s in symbols if s[0]]
    strs, stroff = strtab(sym_names)
    sec_names = [".text", ".symtab", ".strtab", ".shstrtab"] + [n for n, _ in extra_sections]
    shstr, shoff_names = strtab(sec_names)

    text = b"\x00" * 0x100
    syms = b""
    entry = (lambda name, value, size, info, shndx:
             struct.pack(e + "IBBHQQ", name, info, 0, shndx, value, size) if is64 else
             struct.pack(e + "IIIBBH", name, value, size, info, 0, shndx))
    syms += entry(0, 0, 0, 0, 0)
    first_global = 1
    for name, value, size, kind, bind in symbols:
        if bind == STB_LOCAL:
            first_global += 1
        syms += entry(stroff.get(name, 0), value, size, (bind << 4) | kind, 1 if kind != STT_FILE else 0xFFF1)

    ehsize = 64 if is64 else 52
    blobs = [text, syms, strs, shstr] + [b for _, b in extra_sections]
    offsets, at = [], ehsize
    for b in blobs:
        at = (at + 7) & ~7
        offsets.append(at)
        at += len(b)
    shoff = (at + 7) & ~7
    shentsize = 64 if is64 else 40
    symentsize = 24 if is64 else 16

    def shdr(name, kind, flags, addr, off, size, link, info, align, entsize):
        if is64:
            return struct.pack(e + "IIQQQQIIQQ", name, kind, flags, addr, off, size, link, info, align, entsize)
        return struct.pack(e + "IIIIIIIIII", name, kind, flags, addr, off, size, link, info, align, entsize)

    headers = shdr(0, 0, 0, 0, 0, 0, 0, 0, 0, 0)
    headers += shdr(shoff_names[".text"], SHT_PROGBITS, 6, text_addr, offsets[0], len(text), 0, 0, 16, 0)
    headers += shdr(shoff_names[".symtab"], SHT_SYMTAB, 0, 0, offsets[1], len(syms), 3, first_global, 8, symentsize)
    headers += shdr(shoff_names[".strtab"], SHT_STRTAB, 0, 0, offsets[2], len(strs), 0, 0, 1, 0)
    headers += shdr(shoff_names[".shstrtab"], SHT_STRTAB, 0, 0, offsets[3], len(shstr), 0, 0, 1, 0)
    for i, (name, b) in enumerate(extra_sections):
        headers += shdr(shoff_names[name], SHT_PROGBITS, 0, 0, offsets[4 + i], len(b), 0, 0, 1, 0)
    shnum = 5 + len(extra_sections)

    ident = b"\x7fELF" + bytes([2 if is64 else 1, 2 if big else 1, 1, 0]) + b"\0" * 8
    if is64:
        ehdr = ident + struct.pack(e + "HHIQQQIHHHHHH", 2, machine, 1, text_addr, 0, shoff, 0,
                                   ehsize, 0, 0, shentsize, shnum, 4)
    else:
        ehdr = ident + struct.pack(e + "HHIIIIIHHHHHH", 2, machine, 1, text_addr, 0, shoff, 0,
                                   ehsize, 0, 0, shentsize, shnum, 4)
    out = bytearray(shoff + len(headers))
    out[:len(ehdr)] = ehdr
    for off, b in zip(offsets, blobs):
        out[off:off + len(b)] = b
    out[shoff:] = headers
    return bytes(out)


def main():
    here = Path(__file__).resolve().parent
    le64 = build(True, False, 62, 0x1000, [
        ("le64.c", 0, 0, STT_FILE, STB_LOCAL),
        ("helper", 0x1030, 16, STT_FUNC, STB_LOCAL),
        ("main", 0x1000, 42, STT_FUNC, STB_GLOBAL),
        ("_start", 0x1040, 8, STT_FUNC, STB_GLOBAL),
        ("counter", 0x2000, 4, STT_OBJECT, STB_GLOBAL),
    ])
    be32 = build(False, True, 8, 0x400100, [
        ("foo", 0x400100, 64, STT_FUNC, STB_GLOBAL),
        ("bar.isra.0", 0x400140, 32, STT_FUNC, STB_GLOBAL),
        ("table", 0x410000, 128, STT_OBJECT, STB_GLOBAL),
    ], extra_sections=[(".debug_info", b"\x00" * 16)])
    (here / "le64.elf").write_bytes(le64)
    (here / "be32.elf").write_bytes(be32)


if __name__ == "__main__":
    main()
