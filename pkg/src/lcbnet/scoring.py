"""Word alignment and the WER / U-WER / B-WER breakdown."""
import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import DataError


class OpKind(str, enum.Enum):
    MATCH = "match"
    SUBSTITUTION = "substitution"
    DELETION = "deletion"
    INSERTION = "insertion"


@dataclass(frozen=True)
class AlignmentOp:
    kind: OpKind
    ref_word: str = None
    hyp_word: str = None


def normalize(text):
    return text.lower().split()


def align(ref_words, hyp_words):
    """Minimum-edit alignment; backtrace prefers match, substitution, deletion, insertion."""
    ref_words, hyp_words = list(ref_words), list(hyp_words)
    index = {}
    ref_ids = np.array([index.setdefault(w, len(index)) for w in ref_words], dtype=np.int64)
    hyp_ids = np.array([index.setdefault(w, len(index)) for w in hyp_words], dtype=np.int64)
    d = kernels.edit_distance_table(ref_ids, hyp_ids)
    ops = []
    i, j = len(ref_words), len(hyp_words)
    while i > 0 or j > 0:
        c = d[i, j]
        if i > 0 and j > 0 and ref_ids[i - 1] == hyp_ids[j - 1] and d[i - 1, j - 1] == c:
            ops.append(AlignmentOp(OpKind.MATCH, ref_words[i - 1], hyp_words[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i - 1, j - 1] + 1 == c:
            ops.append(AlignmentOp(OpKind.SUBSTITUTION, ref_words[i - 1], hyp_words[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and d[i - 1, j] + 1 == c:
            ops.append(AlignmentOp(OpKind.DELETION, ref_words[i - 1], None))
            i -= 1
        else:
            ops.append(AlignmentOp(OpKind.INSERTION, None, hyp_words[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def edit_distance(ops):
    return sum(op.kind is not OpKind.MATCH for op in ops)


@dataclass
class BucketCounts:
    sub: int = 0
    dele: int = 0
    ins: int = 0
    ref_words: int = 0

    @property
    def errors(self):
        return self.sub + self.dele + self.ins

    @property
    def rate(self):
        """Exact error rate; 0 when the bucket has no reference words."""
        return Fraction(self.errors, self.ref_words) if self.ref_words else Fraction(0)

    @property
    def undefined(self):
        return self.ref_words == 0

    def __iadd__(self, other):
        self.sub += other.sub
        self.dele += other.dele
        self.ins += other.ins
        self.ref_words += other.ref_words
        return self


@dataclass
class TriWerReport:
    unbiased: BucketCounts = field(default_factory=BucketCounts)
    biased: BucketCounts = field(default_factory=BucketCounts)
    per_word: list = field(default_factory=list)  # (word, "u"|"b", OpKind)

    @property
    def total(self):
        t = BucketCounts()
        t += self.unbiased
        t += self.biased
        return t

    @property
    def wer(self):
        return self.total.rate

    @property
    def u_wer(self):
        return self.unbiased.rate

    @property
    def b_wer(self):
        return self.biased.rate

    def merge(self, other):
        self.unbiased += other.unbiased
        self.biased += other.biased
        self.per_word.extend(other.per_word)
        return self

    def summary(self):
        return f"WER {_pct(self.wer)} (U: {_pct(self.u_wer)} / B: {_pct(self.b_wer)})"

    def key_values(self):
        lines = []
        for name, b in (("wer", self.total), ("u_wer", self.unbiased), ("b_wer", self.biased)):
            lines += [
                f"{name}={float(b.rate) * 100:.4f}",
                f"{name}.errors={b.errors}",
                f"{name}.ref_words={b.ref_words}",
                f"{name}.sub={b.sub}",
                f"{name}.del={b.dele}",
                f"{name}.ins={b.ins}",
                f"{name}.undefined={int(b.undefined)}",
            ]
        return "\n".join(lines) + "\n"


def _pct(x):
    return f"{float(x) * 100:.1f}%"


def tri_wer(ops, biasing_vocab, insertion_bucket="hyp"):
    """Split alignment errors between biased and unbiased reference words.

    Insertions go to the biased bucket when the inserted word is in the biasing
    vocabulary (``insertion_bucket="hyp"``), or always to the unbiased bucket
    (``insertion_bucket="u"``).
    """
    if insertion_bucket not in ("hyp", "u"):
        raise ValueError(f"insertion_bucket must be 'hyp' or 'u', got {insertion_bucket!r}")
    report = TriWerReport()
    for op in ops:
        if op.kind is OpKind.INSERTION:
            biased = insertion_bucket == "hyp" and op.hyp_word in biasing_vocab
            bucket = report.biased if biased else report.unbiased
            bucket.ins += 1
            report.per_word.append((op.hyp_word, "b" if biased else "u", op.kind))
            continue
        biased = op.ref_word in biasing_vocab
        bucket = report.biased if biased else report.unbiased
        bucket.ref_words += 1
        if op.kind is OpKind.SUBSTITUTION:
            bucket.sub += 1
        elif op.kind is OpKind.DELETION:
            bucket.dele += 1
        report.per_word.append((op.ref_word, "b" if biased else "u", op.kind))
    return report


def score_corpus(pairs, biasing_lists, insertion_bucket="hyp"):
    """Micro-averaged report over ``(ref, hyp)`` string pairs.

    ``biasing_lists[i]`` is an iterable of phrases for utterance i; each word of
    each phrase joins that utterance's biasing vocabulary.
    """
    pairs, biasing_lists = list(pairs), list(biasing_lists)
    if len(pairs) != len(biasing_lists):
        raise DataError(f"{len(pairs)} utterances but {len(biasing_lists)} biasing lists")
    total = TriWerReport()
    for (ref, hyp), phrases in zip(pairs, biasing_lists):
        vocab = {w.lower() for p in phrases for w in p.split()}
        total.merge(tri_wer(align(normalize(ref), normalize(hyp)), vocab, insertion_bucket))
    return total
