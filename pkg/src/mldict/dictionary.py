"""Per-level pattern dictionaries: training, convergence monitoring, merging,
pruning and the on-disk format."""

import hashlib
import json
import os
import struct
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChecksumError, FormatError, InputError, TruncationError, VersionError,
)
from .imgproc import pad_to_16
from .patchkey import (
    KEY_LENGTH, LEVELS, all_one_key, all_zero_key, check_level, key_level,
    keys_to_digits, tile_keys, _HEX,
)

CHUNK_SIZE = 1000
CONVERGENCE_LAGS = (1, 10, 100, 1000)
EPSILON = {2: 1e-5, 4: 1e-5, 8: 1e-6, 16: 1e-6}
TRACKED_SYMBOLS = 100

DICT_MAGIC = b"MLDICT"
DICT_VERSION = 1
MANIFEST_NAME = "manifest.json"


class Dictionary:
    """Frequency table of level-``n`` patch keys.

    ``meta`` holds training provenance: ``corpus`` (list of tags),
    ``patches`` (number of patches counted) and ``created`` (free-form
    timestamp or None). Mutate counts only through :meth:`update` so the
    cached rank order stays valid.
    """

    def __init__(self, level, counts=None, meta=None):
        self.level = check_level(level)
        self._counts = Counter()
        self.total = 0
        self.meta = {"corpus": [], "patches": 0, "created": None}
        if meta:
            self.meta.update(meta)
        self._ranked = None
        self._rank = None
        if counts:
            for key, c in dict(counts).items():
                if key_level(key) != level:
                    raise InputError(f"key {key!r} does not belong to level {level}")
                if c < 1:
                    raise InputError(f"key {key!r} has count {c} < 1")
                self._counts[key] = int(c)
            self.total = sum(self._counts.values())

    # -- queries -----------------------------------------------------------

    @property
    def counts(self):
        return self._counts

    def __len__(self):
        return len(self._counts)

    def __contains__(self, key):
        return key in self._counts

    def __getitem__(self, key):
        return self._counts[key]

    def get(self, key, default=0):
        return self._counts.get(key, default)

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return (self.level == other.level and self._counts == other._counts
                and self.meta == other.meta)

    def __repr__(self):
        return f"Dictionary(level={self.level}, entries={len(self)}, total={self.total})"

    def ranked(self):
        """Entries as (key, count), most frequent first, ties by key."""
        if self._ranked is None:
            self._ranked = sorted(self._counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return self._ranked

    def ranked_keys(self):
        return [k for k, _ in self.ranked()]

    def rank_of(self, key):
        if self._rank is None:
            self._rank = {k: i for i, (k, _) in enumerate(self.ranked())}
        return self._rank.get(key)

    def rank_and_probability(self, key):
        """(rank, frequency / total), or None if ``key`` was never seen."""
        rank = self.rank_of(key)
        if rank is None:
            return None
        return rank, self._counts[key] / self.total

    def probabilities(self):
        return {k: c / self.total for k, c in self._counts.items()}

    # -- mutation ----------------------------------------------------------

    def update(self, keys):
        """Count every key in the iterable ``keys`` once."""
        if not isinstance(keys, (list, tuple)):
            keys = list(keys)
        self._counts.update(keys)
        self.total += len(keys)
        self._ranked = self._rank = None

    def copy(self):
        d = Dictionary(self.level, meta=json.loads(json.dumps(self.meta)))
        d._counts = Counter(self._counts)
        d.total = self.total
        return d

    def completed(self):
        """Copy with every absent level-2 pattern inserted at count 1."""
        if self.level != 2:
            return self
        missing = [f"{v:X}" for v in range(16) if f"{v:X}" not in self._counts]
        if not missing:
            return self
        d = self.copy()
        for key in missing:
            d._counts[key] = 1
        d.total += len(missing)
        return d

    # -- (de)serialization -------------------------------------------------

    def to_bytes(self):
        ranked = self.ranked()
        meta = json.dumps(self.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
        out = bytearray(DICT_MAGIC)
        out += struct.pack("<HBQQI", DICT_VERSION, self.level, len(ranked), self.total, len(meta))
        out += meta
        key_bytes = _pack_keys([k for k, _ in ranked], self.level)
        width = _packed_key_width(self.level)
        for i, (_, c) in enumerate(ranked):
            out += key_bytes[i * width:(i + 1) * width]
            out += encode_varint(c)
        out += struct.pack("<I", zlib.crc32(out))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        head = len(DICT_MAGIC) + struct.calcsize("<HBQQI")
        if not data.startswith(DICT_MAGIC):
            if DICT_MAGIC.startswith(data):
                raise TruncationError("dictionary file is truncated")
            raise FormatError("not a dictionary file (bad magic)")
        if len(data) < head:
            raise TruncationError("dictionary header is truncated")
        version, level, count, total, meta_len = struct.unpack_from("<HBQQI", data, len(DICT_MAGIC))
        if version != DICT_VERSION:
            raise VersionError(f"unsupported dictionary version {version}")
        if level not in KEY_LENGTH:
            raise FormatError(f"invalid level {level}")
        pos = head
        if pos + meta_len > len(data):
            raise TruncationError("dictionary metadata is truncated")
        try:
            meta = json.loads(data[pos:pos + meta_len].decode("utf-8"))
        except ValueError:
            raise FormatError("dictionary metadata is not valid JSON") from None
        pos += meta_len
        width = _packed_key_width(level)
        raw_keys = bytearray()
        counts = []
        for _ in range(count):
            if pos + width > len(data):
                raise TruncationError("dictionary entries are truncated")
            raw_keys += data[pos:pos + width]
            pos += width
            c, pos = decode_varint(data, pos)
            counts.append(c)
        if pos + 4 > len(data):
            raise TruncationError("dictionary checksum is missing")
        if pos + 4 != len(data):
            raise FormatError("trailing bytes after dictionary checksum")
        (crc,) = struct.unpack_from("<I", data, pos)
        if crc != zlib.crc32(data[:pos]):
            raise ChecksumError("dictionary checksum mismatch")
        keys = _unpack_keys(bytes(raw_keys), level, count)
        d = cls(level, meta=meta)
        d._counts = Counter(dict(zip(keys, counts)))
        if len(d._counts) != count or any(c < 1 for c in counts):
            raise FormatError("duplicate keys or zero counts in dictionary")
        d.total = sum(counts)
        if d.total != total:
            raise FormatError(f"stored total {total} != sum of counts {d.total}")
        return d

    def save(self, path):
        data = self.to_bytes()
        with open(path, "wb") as f:
            f.write(data)
        return data

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


def encode_varint(value):
    if value < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def decode_varint(data, pos):
    """Returns (value, new position); raises TruncationError on a cut varint."""
    value = shift = 0
    while True:
        if pos >= len(data):
            raise TruncationError("varint is truncated")
        b = data[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise FormatError("varint is too long")


def _packed_key_width(level):
    return (KEY_LENGTH[level] + 1) // 2


def _pack_keys(keys, level):
    if not keys:
        return b""
    digits = keys_to_digits(keys, level)
    if digits.shape[1] % 2:
        digits = np.concatenate([digits, np.zeros((len(keys), 1), np.uint8)], axis=1)
    return ((digits[:, 0::2] << 4) | digits[:, 1::2]).astype(np.uint8).tobytes()


def _unpack_keys(raw, level, count):
    if count == 0:
        return []
    width = _packed_key_width(level)
    packed = np.frombuffer(raw, dtype=np.uint8).reshape(count, width)
    digits = np.empty((count, 2 * width), dtype=np.uint8)
    digits[:, 0::2] = packed >> 4
    digits[:, 1::2] = packed & 0xF
    length = KEY_LENGTH[level]
    if length % 2 and digits[:, length:].any():
        raise FormatError("nonzero padding nibble in packed key")
    text = _HEX[digits[:, :length]].tobytes().decode("ascii")
    return [text[i:i + length] for i in range(0, len(text), length)]


# -- merge / prune -----------------------------------------------------------

def merge(a, b):
    """Pointwise sum of two same-level dictionaries."""
    if a.level != b.level:
        raise InputError(f"cannot merge level {a.level} with level {b.level}")
    meta = {
        "corpus": sorted(set(a.meta.get("corpus", [])) | set(b.meta.get("corpus", []))),
        "patches": a.meta.get("patches", 0) + b.meta.get("patches", 0),
        "created": None,
    }
    d = Dictionary(a.level, meta=meta)
    d._counts = a.counts + b.counts
    d.total = a.total + b.total
    return d


@dataclass
class PrunePolicy:
    """Pruning rules. Unit-frequency removal, the mass prefix and the entry cap
    apply to levels 8 and 16; level 4 only loses unit-frequency entries when
    ``drop_unit_level4`` is set; level 2 is never pruned."""

    drop_unit: bool = True
    drop_unit_level4: bool = False
    mass_fraction: float | None = 0.99
    max_entries: int | None = 2 ** 20

    def __post_init__(self):
        if self.mass_fraction is not None and not 0 < self.mass_fraction <= 1:
            raise InputError("mass_fraction must lie in (0, 1]")
        if self.max_entries is not None and self.max_entries < 1:
            raise InputError("max_entries must be positive")


def mass_prefix_length(counts_desc, fraction):
    """Smallest k whose k largest counts reach ``fraction`` of the total mass.

    ``counts_desc`` must already be sorted in decreasing order.
    """
    if not 0 < fraction <= 1:
        raise InputError(f"mass fraction {fraction} outside (0, 1]")
    counts = np.asarray(counts_desc, dtype=np.int64)
    if counts.size == 0:
        return 0
    cum = np.cumsum(counts) / counts.sum()
    return int(np.argmax(cum >= fraction)) + 1 if fraction < 1 else int(counts.size)


def prune(d, policy=None):
    policy = policy or PrunePolicy()
    if d.level == 2:
        return d.copy()
    guard = {all_zero_key(d.level), all_one_key(d.level)}
    ranked = d.ranked()
    if d.level == 4:
        if policy.drop_unit_level4:
            ranked = [(k, c) for k, c in ranked if c > 1 or k in guard]
    else:
        if policy.drop_unit:
            ranked = [(k, c) for k, c in ranked if c > 1 or k in guard]
        keep = len(ranked)
        if policy.mass_fraction is not None and ranked:
            keep = mass_prefix_length([c for _, c in ranked], policy.mass_fraction)
        if policy.max_entries is not None:
            keep = min(keep, policy.max_entries)
        ranked = ranked[:keep] + [(k, c) for k, c in ranked[keep:] if k in guard]
    out = Dictionary(d.level, meta=json.loads(json.dumps(d.meta)))
    out._counts = Counter(dict(ranked))
    out.total = sum(out._counts.values())
    return out


# -- convergence -------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceStatus:
    converged: bool | None  # None while the history is shorter than the largest lag
    per_symbol: dict


class ConvergenceMonitor:
    """Tracks running probability estimates of a fixed symbol set, one sample
    per processed chunk, and tests |p[n] - p[n-k]| < epsilon for every lag k."""

    def __init__(self, symbols, epsilon=1e-5, lags=CONVERGENCE_LAGS):
        if epsilon <= 0:
            raise InputError("epsilon must be positive")
        self.symbols = list(symbols)
        self.epsilon = epsilon
        self.lags = tuple(sorted(lags))
        self._rows = []
        self._series = None

    def __len__(self):
        return len(self._rows) if self._series is None else self._series.shape[0]

    def record(self, probabilities):
        self._flatten_to_rows()
        self._rows.append(np.asarray(probabilities, dtype=np.float64))

    def record_counts(self, counts, total):
        self.record([counts.get(s, 0) / total for s in self.symbols])

    def extend(self, rows):
        """Append many samples at once, ``rows`` shaped (chunks, symbols)."""
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, len(self.symbols))
        self._series = np.concatenate([self.series, rows])
        self._rows = []

    def _flatten_to_rows(self):
        if self._series is not None:
            self._rows = list(self._series)
            self._series = None

    @property
    def series(self):
        """History as a (chunks, symbols) array; row i is the estimate after i + 1 chunks."""
        if self._series is None:
            if self._rows:
                self._series = np.vstack(self._rows)
            else:
                self._series = np.zeros((0, len(self.symbols)))
            self._rows = []
        return self._series

    def check(self):
        h = self.series
        n = h.shape[0]
        if n <= self.lags[-1]:
            return ConvergenceStatus(None, {s: None for s in self.symbols})
        ok = np.ones(len(self.symbols), dtype=bool)
        for k in self.lags:
            ok &= np.abs(h[n - 1] - h[n - 1 - k]) < self.epsilon
        return ConvergenceStatus(bool(ok.all()), dict(zip(self.symbols, map(bool, ok))))

    def first_converged(self):
        """Smallest chunk count at which every symbol met the criterion, or None."""
        h = self.series
        n = h.shape[0]
        big = self.lags[-1]
        if n <= big:
            return None
        ok = np.ones(n - big, dtype=bool)
        for k in self.lags:
            ok &= (np.abs(h[big:] - h[big - k:n - k]) < self.epsilon).all(axis=1)
        hits = np.flatnonzero(ok)
        return int(hits[0]) + big + 1 if hits.size else None


# -- training ----------------------------------------------------------------

class Trainer:
    """Accumulates patches from binary images into per-level dictionaries.

    Keys are buffered, shuffled with a seeded generator and counted in chunks
    of ``chunk_size``; after each chunk the level's convergence monitor takes
    one sample of the running probabilities of its tracked symbols (the top
    ``track`` keys at the first flush). Final counts do not depend on the
    shuffle; only the monitor trajectory does.
    """

    def __init__(self, seed=0, chunk_size=CHUNK_SIZE, levels=LEVELS,
                 track=TRACKED_SYMBOLS, epsilon=None, tags=()):
        if chunk_size < 1:
            raise InputError("chunk_size must be >= 1")
        self.rng = np.random.default_rng(seed)
        self.chunk_size = chunk_size
        self.levels = tuple(levels)
        self.track = track
        self.epsilon = {**EPSILON, **(epsilon or {})}
        self.dicts = {n: Dictionary(n, meta={"corpus": list(tags)}) for n in self.levels}
        self.buffers = {n: [] for n in self.levels}
        self.monitors = {}
        self.chunks = {n: 0 for n in self.levels}

    def ingest(self, img):
        padded = pad_to_16(img)
        for n in self.levels:
            keys = tile_keys(padded, n)
            self.buffers[n].extend(keys)
            self.dicts[n].meta["patches"] += len(keys)

    def flush(self, final=False):
        """Count every full chunk in the buffers; with ``final`` also the remainder."""
        for n in self.levels:
            buf = self.buffers[n]
            if not buf:
                continue
            perm = self.rng.permutation(len(buf))
            buf = [buf[i] for i in perm]
            d = self.dicts[n]
            mon = self.monitors.get(n)
            if mon is None:
                seen = d.counts + Counter(buf)
                top = sorted(seen.items(), key=lambda kv: (-kv[1], kv[0]))[:self.track]
                mon = self.monitors[n] = ConvergenceMonitor(
                    [k for k, _ in top], epsilon=self.epsilon[n])
            size = self.chunk_size
            full = len(buf) // size * size
            stop = len(buf) if final else full
            for start in range(0, stop, size):
                d.update(buf[start:start + size])
                mon.record_counts(d.counts, d.total)
                self.chunks[n] += 1
            self.buffers[n] = buf[stop:]

    def finalize(self):
        self.flush(final=True)
        return dict(self.dicts)


def train(images, seed=0, chunk_size=CHUNK_SIZE, flush_every=1, **kw):
    """Train on an iterable of BinaryImages; returns the Trainer after finalize."""
    t = Trainer(seed=seed, chunk_size=chunk_size, **kw)
    for i, img in enumerate(images, 1):
        t.ingest(img)
        if i % flush_every == 0:
            t.flush()
    t.finalize()
    return t


# -- dictionary sets ---------------------------------------------------------

def level_filename(n):
    return f"level{n:02d}.mldict"


class DictionarySet:
    """The four per-level dictionaries used by the codec.

    ``manifest_hash`` identifies the set: SHA-256 over the SHA-256 of each
    level's serialized file, levels in ascending order. Indexing returns the
    coding view, in which the level-2 dictionary is completed to all 16
    patterns.
    """

    def __init__(self, dicts):
        dicts = dict(dicts)
        self.originals = {}
        for n in LEVELS:
            d = dicts.get(n)
            if d is None:
                d = Dictionary(n)
            if d.level != n:
                raise InputError(f"dictionary for level {n} has level {d.level}")
            self.originals[n] = d
        self.file_bytes = {n: self.originals[n].to_bytes() for n in LEVELS}
        self.file_hashes = {n: hashlib.sha256(b).hexdigest() for n, b in self.file_bytes.items()}
        h = hashlib.sha256()
        for n in LEVELS:
            h.update(bytes.fromhex(self.file_hashes[n]))
        self.manifest_hash = h.digest()
        self._coding = {n: self.originals[n] for n in LEVELS}
        self._coding[2] = self.originals[2].completed()

    def __getitem__(self, n):
        return self._coding[n]

    def manifest(self):
        return {
            "version": DICT_VERSION,
            "manifest_hash": self.manifest_hash.hex(),
            "levels": {str(n): {"file": level_filename(n), "sha256": self.file_hashes[n]}
                       for n in LEVELS},
        }

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        for n in LEVELS:
            with open(os.path.join(directory, level_filename(n)), "wb") as f:
                f.write(self.file_bytes[n])
        with open(os.path.join(directory, MANIFEST_NAME), "w") as f:
            json.dump(self.manifest(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, directory):
        path = os.path.join(directory, MANIFEST_NAME)
        try:
            with open(path) as f:
                manifest = json.load(f)
        except FileNotFoundError:
            raise InputError(f"no {MANIFEST_NAME} in {directory}") from None
        except ValueError:
            raise FormatError(f"{path} is not valid JSON") from None
        if manifest.get("version") != DICT_VERSION:
            raise VersionError(f"unsupported manifest version {manifest.get('version')}")
        dicts = {}
        for n in LEVELS:
            entry = manifest.get("levels", {}).get(str(n))
            if entry is None:
                raise FormatError(f"manifest lacks level {n}")
            with open(os.path.join(directory, entry["file"]), "rb") as f:
                data = f.read()
            if hashlib.sha256(data).hexdigest() != entry["sha256"]:
                raise ChecksumError(f"{entry['file']} does not match its manifest hash")
            dicts[n] = Dictionary.from_bytes(data)
            if dicts[n].level != n:
                raise FormatError(f"{entry['file']} holds level {dicts[n].level}, not {n}")
        return cls(dicts)
