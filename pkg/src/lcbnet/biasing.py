"""Long-context biasing input, token-level bias labels, phrase-list simulation."""
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .tokenizer import tokenize, word_strings

# The 100 most frequent English words; never chosen as simulated phrases.
STOP_WORDS = frozenset("""
the be to of and a in that have i it for not on with he as you do at this but his by from
they we say her she or an will my one all would there their what so up out if about who get
which go me when make can like time no just him know take people into year your good some
could them see other than then now look only come its over think also back after use two how
our work first well way even new want because any these give day most us
""".split())


class PhraseSource(str, enum.Enum):
    PROVIDED = "provided"
    SIMULATED_WORD = "simulated_word"
    SIMULATED_BPE = "simulated_bpe"
    SIMULATED = "simulated"  # union of both simulators


@dataclass
class PhraseList:
    phrases: list = field(default_factory=list)
    source: PhraseSource = PhraseSource.PROVIDED
    # selection statistics from the simulators
    n_eligible: int = 0
    n_selected: int = 0

    def __post_init__(self):
        seen, out = set(), []
        for p in self.phrases:
            p = " ".join(str(p).split())
            if p and p not in seen:
                seen.add(p)
                out.append(p)
        self.phrases = out
        self.source = PhraseSource(self.source)

    def __len__(self):
        return len(self.phrases)

    def __iter__(self):
        return iter(self.phrases)

    def words(self):
        """Lower-cased set of words across all phrases (the scoring bias vocabulary)."""
        return {w.lower() for p in self.phrases for w in p.split()}

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls([line.strip() for line in f])

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.writelines(p + "\n" for p in self.phrases)


@dataclass(frozen=True)
class LongContextSequence:
    ids: tuple
    bias_labels: tuple
    phrase_spans: tuple  # (start, end, phrase_index)
    phrases: tuple       # phrase text by phrase_index
    separator: int

    def __len__(self):
        return len(self.ids)

    def separator_mask(self):
        return np.array([i == self.separator for i in self.ids], dtype=bool)

    def span_of(self, phrase):
        for start, end, k in self.phrase_spans:
            if self.phrases[k] == phrase:
                return start, end
        return None


@dataclass
class SimulationConfig:
    word_ratio: float = 0.3
    bpe_ratio: float = 0.5
    max_phrases_per_batch: int = 0  # 0 means no cap
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("word_ratio", "bpe_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"sim.{name} must lie in [0, 1], got {v}")
        if self.max_phrases_per_batch < 0:
            raise ConfigError(f"sim.max_phrases_per_batch must be >= 0, got {self.max_phrases_per_batch}")


def build_long_context(phrases, vocab, rng):
    """Shuffle the phrases and join them with single separators.

    An empty phrase list yields the lone separator. Labels start at zero.
    """
    texts = list(phrases)
    sep = vocab.blank_ctx
    if not texts:
        return LongContextSequence((sep,), (0,), (), (), sep)
    ids, spans = [], []
    for k in rng.permutation(len(texts)):
        if ids:
            ids.append(sep)
        start = len(ids)
        ids.extend(tokenize(texts[k], vocab).ids)
        spans.append((start, len(ids), int(k)))
    return LongContextSequence(tuple(ids), (0,) * len(ids), tuple(spans), tuple(texts), sep)


def _contains_window(words, needle):
    n = len(needle)
    return n > 0 and any(words[i:i + n] == needle for i in range(len(words) - n + 1))


def label_bias_tokens(ctx, reference, vocab=None):
    """Label each phrase span 1 if its words occur contiguously in the reference.

    ``reference`` is a TokenSeq (requires ``vocab``), a transcript string, or a
    list of words. Matching is whole-word and case-insensitive.
    """
    if isinstance(reference, str):
        ref_words = reference.split()
    elif isinstance(reference, (list, tuple)):
        ref_words = list(reference)
    else:
        ref_words = word_strings(reference, vocab)
    ref_words = [w.lower() for w in ref_words]
    labels = [0] * len(ctx.ids)
    for start, end, k in ctx.phrase_spans:
        if _contains_window(ref_words, ctx.phrases[k].lower().split()):
            labels[start:end] = [1] * (end - start)
    return replace(ctx, bias_labels=tuple(labels))


def eligible(word):
    return len(word) >= 4 and word.lower() not in STOP_WORDS


def _select(batch_refs, vocab, ratio, rng):
    """Yield (seq, word_index, word) for each eligible word drawn with prob ``ratio``."""
    n_eligible, picked = 0, []
    for seq in batch_refs:
        words = word_strings(seq, vocab)
        cand = [i for i, w in enumerate(words) if eligible(w)]
        n_eligible += len(cand)
        draws = rng.random(len(cand))
        picked.extend((seq, i, words[i]) for i, u in zip(cand, draws) if u < ratio)
    return n_eligible, picked


def _cap(phrases, limit, rng):
    if limit and len(phrases) > limit:
        keep = np.sort(rng.choice(len(phrases), size=limit, replace=False))
        return [phrases[i] for i in keep]
    return phrases


def simulate_word_phrases(batch_refs, vocab, cfg, rng):
    """Whole eligible words from the batch, each kept with probability ``word_ratio``."""
    n_eligible, picked = _select(batch_refs, vocab, cfg.word_ratio, rng)
    phrases = PhraseList([w for _, _, w in picked], PhraseSource.SIMULATED_WORD)
    phrases.phrases = _cap(phrases.phrases, cfg.max_phrases_per_batch, rng)
    phrases.n_eligible, phrases.n_selected = n_eligible, len(picked)
    return phrases


def subword_phrase(units_text, start, end):
    """Concatenate unit texts ``[start, end)`` (markers already removed)."""
    return "".join(units_text[start:end])


def simulate_bpe_phrases(batch_refs, vocab, cfg, rng):
    """Contiguous runs of subword units cut from eligible words.

    Words are drawn with probability ``bpe_ratio``; a word of n > 1 units gives a
    run of random length in [1, n] at a random offset, a one-unit word is kept whole.
    """
    n_eligible, picked = _select(batch_refs, vocab, cfg.bpe_ratio, rng)
    out = []
    for seq, i, word in picked:
        units = [vocab.text_of(t) for t in seq.word_units(i)]
        n = len(units)
        if n <= 1:
            out.append(word)
            continue
        length = int(rng.integers(1, n + 1))
        start = int(rng.integers(0, n - length + 1))
        out.append(subword_phrase(units, start, start + length))
    phrases = PhraseList(out, PhraseSource.SIMULATED_BPE)
    phrases.phrases = _cap(phrases.phrases, cfg.max_phrases_per_batch, rng)
    phrases.n_eligible, phrases.n_selected = n_eligible, len(picked)
    return phrases


def simulate_phrases(batch_refs, vocab, cfg, rng):
    """Union of word-based and subword-based simulation for one batch."""
    word = simulate_word_phrases(batch_refs, vocab, cfg, rng)
    bpe = simulate_bpe_phrases(batch_refs, vocab, cfg, rng)
    return PhraseList(word.phrases + bpe.phrases, PhraseSource.SIMULATED,
                      n_eligible=word.n_eligible, n_selected=word.n_selected + bpe.n_selected)


def mask_context(ctx, mask_prob, rng, vocab):
    """Replace each non-separator token by the mask symbol with probability ``mask_prob``."""
    if not 0.0 <= mask_prob <= 1.0:
        raise ConfigError(f"mask_prob must lie in [0, 1], got {mask_prob}")
    draws = rng.random(len(ctx.ids))
    ids = tuple(vocab.mask if (i != ctx.separator and u < mask_prob) else i
                for i, u in zip(ctx.ids, draws))
    return replace(ctx, ids=ids)
