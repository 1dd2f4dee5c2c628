"""Subword vocabulary: pair-merge training, greedy longest-match tokenization.

Word-initial units carry the marker ``▁`` (``"▁cross", "m", "in", ...``); every
trained unit exists in both a marked and a bare form so any word over the
training alphabet can be segmented.
"""
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

MARKER = "▁"
RESERVED = ("ctc_blank", "blank_ctx", "sos", "eos", "unk", "mask")
FORMAT_VERSION = 1


def _reserved_unit(name):
    return f"<{name}>"


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple = ()
    word_spans: tuple = ()

    def __len__(self):
        return len(self.ids)

    def word_units(self, i):
        start, end = self.word_spans[i]
        return self.ids[start:end]


class Vocab:
    """Immutable unit inventory with reserved symbols at fixed ids."""

    def __init__(self, units, reserved=None):
        units = tuple(units)
        if reserved is None:
            reserved = {name: units.index(_reserved_unit(name)) for name in RESERVED}
        self.units = units
        self.ids = {u: i for i, u in enumerate(units)}
        if len(self.ids) != len(units):
            raise ConfigError("duplicate units in vocabulary")
        self.reserved = dict(reserved)
        if sorted(self.reserved) != sorted(RESERVED) or len(set(self.reserved.values())) != len(RESERVED):
            raise ConfigError(f"vocabulary must declare distinct ids for {RESERVED}")
        self._reserved_ids = frozenset(self.reserved.values())
        self._bare = {u for u in units if not u.startswith(MARKER) and self.ids[u] not in self._reserved_ids}
        self._max_len = max((len(u) for u in self._bare), default=1)

    def __len__(self):
        return len(self.units)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.units == other.units and self.reserved == other.reserved

    def __hash__(self):
        return hash(self.units)

    def __repr__(self):
        return f"Vocab(size={len(self)})"

    @property
    def ctc_blank(self):
        return self.reserved["ctc_blank"]

    @property
    def blank_ctx(self):
        return self.reserved["blank_ctx"]

    @property
    def sos(self):
        return self.reserved["sos"]

    @property
    def eos(self):
        return self.reserved["eos"]

    @property
    def unk(self):
        return self.reserved["unk"]

    @property
    def mask(self):
        return self.reserved["mask"]

    def is_reserved(self, i):
        return i in self._reserved_ids

    def starts_word(self, i):
        return self.units[i].startswith(MARKER)

    def text_of(self, i):
        """Surface text of a unit, marker removed; reserved units give ''."""
        if i < 0 or i >= len(self.units):
            raise IndexError(f"token id {i} outside vocabulary of size {len(self.units)}")
        if i in self._reserved_ids:
            return ""
        u = self.units[i]
        return u[len(MARKER):] if u.startswith(MARKER) else u

    def segment_word(self, word):
        """Greedy longest-match split of one word into unit ids."""
        out, pos = [], 0
        while pos < len(word):
            for size in range(min(self._max_len, len(word) - pos), 0, -1):
                piece = word[pos:pos + size]
                if piece in self._bare:
                    out.append(self.ids[MARKER + piece] if pos == 0 else self.ids[piece])
                    pos += size
                    break
            else:
                out.append(self.unk)
                pos += 1
        return out

    # -- persistence -------------------------------------------------------

    def dumps(self):
        lines = ["# lcbnet subword vocabulary", f"@version {FORMAT_VERSION}"]
        lines += [f"@{name} {self.reserved[name]}" for name in RESERVED]
        for u in self.units:
            lines.append("\\" + u if u[:1] in ("#", "@", "\\") else u)
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text):
        reserved, units, version = {}, [], None
        for line in text.split("\n"):
            if not line or line.startswith("#"):
                continue
            if line.startswith("@"):
                key, _, value = line[1:].partition(" ")
                if key == "version":
                    version = int(value)
                else:
                    reserved[key] = int(value)
                continue
            units.append(line[1:] if line.startswith("\\") else line)
        if version != FORMAT_VERSION:
            raise ConfigError(f"unsupported vocabulary format version {version}")
        return cls(units, reserved)

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def train_vocab(corpus, merges=200):
    """Learn ``merges`` pair merges from whitespace-split words.

    The most frequent adjacent pair is merged first; equal counts go to the
    lexicographically smallest pair. Stops early when no pair remains.
    """
    words = Counter(w for line in corpus for w in line.split())
    if not words:
        raise ConfigError("cannot train a vocabulary on an empty corpus")
    if merges < 0:
        raise ConfigError(f"merges must be >= 0, got {merges}")
    alphabet = sorted({ch for w in words for ch in w})
    segs = {w: tuple(w) for w in words}
    learned = []
    for _ in range(merges):
        pairs = Counter()
        for w, n in words.items():
            s = segs[w]
            for a, b in zip(s, s[1:]):
                pairs[(a, b)] += n
        if not pairs:
            break
        best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        merged = best[0] + best[1]
        learned.append(merged)
        for w, s in segs.items():
            if len(s) < 2:
                continue
            out, i = [], 0
            while i < len(s):
                if i + 1 < len(s) and (s[i], s[i + 1]) == best:
                    out.append(merged)
                    i += 2
                else:
                    out.append(s[i])
                    i += 1
            segs[w] = tuple(out)
    units = [_reserved_unit(name) for name in RESERVED]
    seen = set(units)
    for u in alphabet + learned:
        for form in (MARKER + u, u):
            if form not in seen:
                seen.add(form)
                units.append(form)
    return Vocab(units)


def tokenize(text, vocab):
    ids, spans = [], []
    for word in text.split():
        start = len(ids)
        ids.extend(vocab.segment_word(word))
        spans.append((start, len(ids)))
    return TokenSeq(tuple(ids), tuple(spans))


def from_ids(ids, vocab):
    """Build a TokenSeq from raw ids, e.g. a decoder hypothesis.

    Reserved ids are dropped; a marked unit opens a new word.
    """
    kept = [int(i) for i in ids if not vocab.is_reserved(int(i))]
    spans = []
    for pos, i in enumerate(kept):
        if vocab.starts_word(i) or not spans:
            spans.append([pos, pos + 1])
        else:
            spans[-1][1] = pos + 1
    return TokenSeq(tuple(kept), tuple(tuple(s) for s in spans))


def word_strings(seq, vocab):
    """The surface word of each span."""
    words = []
    for start, end in seq.word_spans:
        w = "".join(vocab.text_of(i) for i in seq.ids[start:end])
        if w:
            words.append(w)
    return words


def detokenize(seq, vocab):
    for i in seq.ids:
        if i < 0 or i >= len(vocab):
            raise IndexError(f"token id {i} outside vocabulary of size {len(vocab)}")
    return " ".join(word_strings(seq, vocab))
