"""Multi-level hybrid encoder/decoder and the ``MLBC`` container format.

Each 16x16 block of the zero-padded image is coded top-down: if its key is in
the level-16 dictionary the key's codeword is emitted, otherwise the level's
ESCAPE codeword is emitted and the four 8x8 quadrants follow, and so on down
to 2x2, where every pattern is always codable. Blocks are visited in raster
order and each quadtree is emitted in pre-order.

Container layout (integers little-endian)::

    "MLBC" | version u16 | flags u16 | orig_width u32 | orig_height u32
    | dictionary manifest SHA-256 (32 bytes)
    | symbol tables for levels 16, 8, 4, 2
    | payload bit length u64 | payload bytes | CRC32 of everything before

A symbol table is ``count u32`` followed, at levels 16/8/4 and when
``count > 0``, by the ESCAPE code length (u8), then one ``rank varint,
length u8`` pair per pattern in increasing rank order. Ranks index the
canonical order of the coding dictionary, which the manifest hash pins down.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .bitstream import BitReader, BitWriter
from .dictionary import DictionarySet, decode_varint, encode_varint
from .errors import (
    ChecksumError, CorruptionError, FormatError, InputError, MLDictError,
    TruncationError, VersionError, WrongDictionaryError,
)
from .huffman import ESCAPE, build_lengths, canonicalize
from .imgproc import BinaryImage, PaddedImage, crop, pad_to_16
from .patchkey import keys_to_bits, tile_keys

MAGIC = b"MLBC"
VERSION = 1
CODED_LEVELS = (16, 8, 4, 2)
_FIXED = struct.Struct("<4sHHII32s")


def _as_dictset(dicts):
    return dicts if isinstance(dicts, DictionarySet) else DictionarySet(dicts)


# -- planning ----------------------------------------------------------------

def plan(img, dicts):
    """Quadtree plan of every 16x16 block, in raster block order.

    Each plan is the pre-order token list of one block: ``(level, key)`` for a
    coded node, ``(level, ESCAPE)`` for a split node.
    """
    dicts = _as_dictset(dicts)
    if not isinstance(img, PaddedImage):
        img = pad_to_16(img)
    known = {n: dicts[n].counts for n in (16, 8, 4)}
    plans = []
    for key in tile_keys(img, 16):
        tokens = []
        _descend(key, 16, known, tokens)
        plans.append(tokens)
    return plans


def _descend(key, n, known, tokens):
    if n == 2 or key in known[n]:
        tokens.append((n, key))
        return
    tokens.append((n, ESCAPE))
    q = len(key) // 4
    half = n // 2
    for i in range(0, len(key), q):
        _descend(key[i:i + q], half, known, tokens)


def build_image_codebooks(plans, dicts):
    """One canonical codebook per level that appears in ``plans``.

    Pattern weights are their dictionary frequencies; the ESCAPE weight is the
    number of splits at that level in this image (at least 1).
    """
    dicts = _as_dictset(dicts)
    used = {n: set() for n in CODED_LEVELS}
    splits = {n: 0 for n in CODED_LEVELS}
    reached = set()
    for tokens in plans:
        for n, sym in tokens:
            reached.add(n)
            if sym is ESCAPE or sym == ESCAPE:
                splits[n] += 1
            else:
                used[n].add(sym)
    books = {}
    for n in CODED_LEVELS:
        if n not in reached:
            continue
        d = dicts[n]
        keys = sorted(used[n], key=d.rank_of)
        symbols = ([ESCAPE] if n != 2 else []) + keys
        weights = ([max(splits[n], 1)] if n != 2 else []) + [d[k] for k in keys]
        books[n] = canonicalize(symbols, build_lengths(zip(symbols, weights)))
    return books


# -- container ---------------------------------------------------------------

@dataclass
class Container:
    orig_width: int
    orig_height: int
    manifest_hash: bytes
    # level -> [(rank, length)], rank None for ESCAPE (always first)
    tables: dict
    payload: bytes
    payload_bits: int
    version: int = VERSION
    flags: int = 0
    _raw: bytes = field(default=None, repr=False, compare=False)

    def to_bytes(self):
        out = bytearray(_FIXED.pack(MAGIC, self.version, self.flags, self.orig_width,
                                    self.orig_height, self.manifest_hash))
        for n in CODED_LEVELS:
            entries = self.tables.get(n, [])
            out += struct.pack("<I", len(entries))
            for rank, length in entries:
                if rank is not None:
                    out += encode_varint(rank)
                out.append(length)
        out += struct.pack("<Q", self.payload_bits)
        out += self.payload
        out += struct.pack("<I", zlib.crc32(out))
        return bytes(out)

    def __len__(self):
        return len(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        if not data.startswith(MAGIC):
            if MAGIC.startswith(data):
                raise TruncationError("container is truncated")
            raise FormatError("not an MLBC container (bad magic)")
        if len(data) < _FIXED.size + 4 * len(CODED_LEVELS) + 8 + 4:
            raise TruncationError("container is truncated")
        (crc,) = struct.unpack_from("<I", data, len(data) - 4)
        if crc != zlib.crc32(data[:-4]):
            raise ChecksumError("container checksum mismatch")
        body = data[:-4]
        _, version, flags, w, h, digest = _FIXED.unpack_from(body, 0)
        if version != VERSION:
            raise VersionError(f"unsupported container version {version}")
        if flags != 0:
            raise CorruptionError(f"unknown container flags {flags:#x}")
        if w < 1 or h < 1:
            raise CorruptionError(f"invalid image size {w}x{h}")
        pos = _FIXED.size
        tables = {}
        try:
            for n in CODED_LEVELS:
                (count,) = struct.unpack_from("<I", body, pos)
                pos += 4
                entries = []
                for i in range(count):
                    rank = None
                    if n == 2 or i > 0:
                        rank, pos = decode_varint(body, pos)
                    entries.append((rank, body[pos]))
                    pos += 1
                tables[n] = entries
            (bits,) = struct.unpack_from("<Q", body, pos)
            pos += 8
        except (struct.error, IndexError, TruncationError, FormatError):
            raise CorruptionError("container symbol tables are malformed") from None
        payload = body[pos:]
        if len(payload) != (bits + 7) // 8:
            raise CorruptionError(
                f"payload is {len(payload)} bytes, header says {bits} bits")
        return cls(w, h, digest, tables, payload, bits, version, flags, _raw=data)

    def codebooks(self, dicts):
        """Resolve the symbol tables against ``dicts`` into codebooks."""
        books = {}
        for n in CODED_LEVELS:
            entries = self.tables.get(n, [])
            if not entries:
                continue
            ranked = dicts[n].ranked()
            symbols, lengths, last = [], [], -1
            for rank, length in entries:
                if rank is None:
                    symbols.append(ESCAPE)
                else:
                    if rank >= len(ranked) or rank <= last:
                        raise CorruptionError(f"unknown or unordered symbol rank {rank} at level {n}")
                    last = rank
                    symbols.append(ranked[rank][0])
                lengths.append(length)
            try:
                if len(symbols) == 1 and lengths != [1]:
                    raise InputError("lone symbol must have a 1-bit code")
                books[n] = canonicalize(symbols, lengths)
            except InputError as e:
                raise CorruptionError(f"invalid code lengths at level {n}: {e}") from None
        return books


# -- encode / decode ---------------------------------------------------------

def encode(img, dicts):
    if isinstance(img, PaddedImage):
        padded = img
    else:
        padded = pad_to_16(img)
    dicts = _as_dictset(dicts)
    plans = plan(padded, dicts)
    books = build_image_codebooks(plans, dicts)
    emit = {n: {s: b.encode_symbol(s) for s in b.symbols} for n, b in books.items()}
    writer = BitWriter()
    write = writer.write_bits
    for tokens in plans:
        for n, sym in tokens:
            code, length = emit[n][sym]
            write(code, length)
    tables = {n: [] for n in CODED_LEVELS}
    for n, book in books.items():
        d = dicts[n]
        tables[n] = [(None if s == ESCAPE else d.rank_of(s), l)
                     for s, l in zip(book.symbols, book.lengths)]
    return Container(padded.orig_width, padded.orig_height, dicts.manifest_hash,
                     tables, writer.getvalue(), writer.bit_length)


def decode(container, dicts):
    """Reconstruct the original BinaryImage from a Container or its bytes."""
    if not isinstance(container, Container):
        container = Container.from_bytes(container)
    dicts = _as_dictset(dicts)
    if container.manifest_hash != dicts.manifest_hash:
        raise WrongDictionaryError(
            "container was encoded with a different dictionary set "
            f"({container.manifest_hash.hex()[:16]} != {dicts.manifest_hash.hex()[:16]})")
    books = container.codebooks(dicts)
    pw = -(-container.orig_width // 16) * 16
    ph = -(-container.orig_height // 16) * 16
    nblocks = (pw // 16) * (ph // 16)
    reader = BitReader(container.payload, container.payload_bits)
    try:
        keys = [_read_block(reader, books, 16) for _ in range(nblocks)]
    except TruncationError:
        raise CorruptionError("payload ended before every block was decoded") from None
    if reader.remaining:
        raise CorruptionError(f"{reader.remaining} payload bits left after the last block")
    tail = (8 - container.payload_bits % 8) % 8
    if tail and container.payload[-1] & ((1 << tail) - 1):
        raise CorruptionError("nonzero padding bits after payload")
    bits = keys_to_bits(keys, 16, pw, ph)
    return crop(PaddedImage(BinaryImage(bits), container.orig_width, container.orig_height))


def _read_block(reader, books, n):
    book = books.get(n)
    if book is None:
        raise CorruptionError(f"payload needs a level-{n} codebook the header lacks")
    sym = book.decode_symbol(reader)
    if sym == ESCAPE:
        return "".join([_read_block(reader, books, n // 2) for _ in range(4)])
    return sym


def compression_ratio(original, container):
    """Uncompressed size at 1 bit per pixel over the container size in bits."""
    nbytes = container if isinstance(container, int) else len(
        container if isinstance(container, (bytes, bytearray)) else container.to_bytes())
    return original.width * original.height / (8 * nbytes)


def roundtrip_ok(img, data, dicts):
    """True iff ``data`` decodes to exactly ``img`` under ``dicts``."""
    try:
        return decode(data, dicts) == img
    except MLDictError:
        return False
