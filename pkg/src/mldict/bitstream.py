"""MSB-first bit packing.

The first bit written lands in the highest unused bit of the current byte,
and multi-bit values are emitted most-significant bit first. Unused trailing
bits of the last byte are zero.
"""

from .errors import TruncationError


class BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bit_length = 0

    def write_bits(self, value, count):
        if not 0 <= count <= 64:
            raise ValueError(f"bit count {count} outside [0, 64]")
        if value < 0 or value >> count:
            raise ValueError(f"value {value} does not fit in {count} bits")
        self._acc = (self._acc << count) | value
        self._nacc += count
        self.bit_length += count
        if self._nacc >= 8:
            keep = self._nacc & 7
            nbytes = self._nacc >> 3
            self._buf += (self._acc >> keep).to_bytes(nbytes, "big")
            self._acc &= (1 << keep) - 1
            self._nacc = keep

    def write_bit(self, bit):
        self.write_bits(1 if bit else 0, 1)

    def getvalue(self):
        out = bytes(self._buf)
        if self._nacc:
            out += bytes([(self._acc << (8 - self._nacc)) & 0xFF])
        return out

    def __len__(self):
        return self.bit_length


class BitReader:
    """Reads bits back from ``data``; ``bit_length`` bounds the readable region
    (defaults to every bit of ``data``)."""

    def __init__(self, data, bit_length=None):
        self._data = bytes(data)
        if bit_length is None:
            bit_length = 8 * len(self._data)
        if bit_length > 8 * len(self._data):
            raise TruncationError(
                f"bit length {bit_length} exceeds {len(self._data)} bytes")
        self.bit_length = bit_length
        self.pos = 0

    @property
    def remaining(self):
        return self.bit_length - self.pos

    def read_bits(self, count):
        if count < 0 or count > 64:
            raise ValueError(f"bit count {count} outside [0, 64]")
        if count > self.bit_length - self.pos:
            raise TruncationError(
                f"read of {count} bits at {self.pos} past end ({self.bit_length})")
        if count == 0:
            return 0
        start = self.pos >> 3
        end = (self.pos + count + 7) >> 3
        chunk = int.from_bytes(self._data[start:end], "big")
        tail = (end << 3) - (self.pos + count)
        self.pos += count
        return (chunk >> tail) & ((1 << count) - 1)

    def read_bit(self):
        pos = self.pos
        if pos >= self.bit_length:
            raise TruncationError(f"read past end ({self.bit_length} bits)")
        self.pos = pos + 1
        return (self._data[pos >> 3] >> (7 - (pos & 7))) & 1
