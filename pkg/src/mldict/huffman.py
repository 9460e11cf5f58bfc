"""Canonical Huffman codes.

Lengths come from the classic two-smallest merge; ties between equal weights
are broken by node creation order (leaves in input order, then internal nodes
as they are created), so a given frequency list always yields the same
lengths. Codewords are then assigned canonically from lengths alone.
"""

import heapq
from dataclasses import dataclass, field

from .errors import CorruptionError, InputError

MAX_CODE_LENGTH = 32

# Reserved symbol for "block not coded at this level, descend to its quadrants".
# Never collides with a key: keys only contain hex digits.
ESCAPE = "ESC"


def build_lengths(freqs):
    """Optimal code length per symbol for ``freqs``, a sequence of (symbol, count).

    Returns a list of lengths aligned with the input order. A lone symbol gets
    length 1.
    """
    freqs = list(freqs)
    if not freqs:
        raise InputError("cannot build a code for an empty alphabet")
    for sym, count in freqs:
        if count <= 0:
            raise InputError(f"symbol {sym!r} has non-positive count {count}")
    n = len(freqs)
    if n == 1:
        return [1]

    # heap of (weight, node id); parent[] links every node to its merge parent
    heap = [(count, i) for i, (_, count) in enumerate(freqs)]
    heapq.heapify(heap)
    parent = [0] * (2 * n - 1)
    next_id = n
    while len(heap) > 1:
        w1, a = heapq.heappop(heap)
        w2, b = heapq.heappop(heap)
        parent[a] = parent[b] = next_id
        heapq.heappush(heap, (w1 + w2, next_id))
        next_id += 1

    root = next_id - 1
    depth = [0] * (2 * n - 1)
    for node in range(root - 1, -1, -1):
        depth[node] = depth[parent[node]] + 1
    lengths = depth[:n]
    if max(lengths) > MAX_CODE_LENGTH:
        raise InputError(
            f"Huffman code length {max(lengths)} exceeds the {MAX_CODE_LENGTH}-bit limit")
    return lengths


def kraft_sum_scaled(lengths):
    """Kraft sum multiplied by 2**MAX_CODE_LENGTH (exact integer)."""
    return sum(1 << (MAX_CODE_LENGTH - l) for l in lengths)


@dataclass(frozen=True)
class CodeBook:
    symbols: tuple
    lengths: tuple
    codes: tuple
    _index: dict = field(repr=False, compare=False)
    # per length l: (first code of length l, offset into the sorted symbol list, count)
    _decode: dict = field(repr=False, compare=False)
    _sorted: tuple = field(repr=False, compare=False)

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return symbol in self._index

    @property
    def max_length(self):
        return max(self.lengths)

    def encode_symbol(self, symbol):
        """(codeword, length) for ``symbol``."""
        try:
            i = self._index[symbol]
        except KeyError:
            raise KeyError(f"symbol {symbol!r} is not in this codebook") from None
        return self.codes[i], self.lengths[i]

    def write_symbol(self, writer, symbol):
        code, length = self.encode_symbol(symbol)
        writer.write_bits(code, length)

    def decode_symbol(self, reader):
        """Consume exactly one codeword from ``reader`` and return its symbol."""
        code = 0
        table = self._decode
        read_bit = reader.read_bit
        for length in range(1, self.max_length + 1):
            code = (code << 1) | read_bit()
            entry = table.get(length)
            if entry is not None:
                first, offset, count = entry
                if code - first < count:
                    return self._sorted[offset + code - first]
        raise CorruptionError("bit pattern matches no codeword")


def canonicalize(symbols, lengths):
    """Assign canonical codewords: sorted by (length, position in ``symbols``),
    each code is the previous one plus one, shifted left when the length grows."""
    symbols = tuple(symbols)
    lengths = tuple(int(l) for l in lengths)
    if len(symbols) != len(lengths) or not symbols:
        raise InputError("need one length per symbol and at least one symbol")
    if len(set(symbols)) != len(symbols):
        raise InputError("duplicate symbols")
    if min(lengths) < 1 or max(lengths) > MAX_CODE_LENGTH:
        raise InputError(f"code lengths must lie in [1, {MAX_CODE_LENGTH}]")
    if kraft_sum_scaled(lengths) > 1 << MAX_CODE_LENGTH:
        raise InputError("code lengths violate the Kraft inequality")

    order = sorted(range(len(symbols)), key=lambda i: (lengths[i], i))
    codes = [0] * len(symbols)
    decode = {}
    code = 0
    prev_len = lengths[order[0]]
    for rank, i in enumerate(order):
        l = lengths[i]
        code <<= l - prev_len
        prev_len = l
        codes[i] = code
        if l not in decode:
            decode[l] = [code, rank, 0]
        decode[l][2] += 1
        code += 1
    return CodeBook(
        symbols=symbols,
        lengths=lengths,
        codes=tuple(codes),
        _index={s: i for i, s in enumerate(symbols)},
        _decode={l: tuple(v) for l, v in decode.items()},
        _sorted=tuple(symbols[i] for i in order),
    )


def build_codebook(freqs):
    freqs = list(freqs)
    return canonicalize([s for s, _ in freqs], build_lengths(freqs))
