import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcbnet.biasing import (
    STOP_WORDS, LongContextSequence, PhraseList, PhraseSource, SimulationConfig, build_long_context,
    eligible, label_bias_tokens, mask_context, simulate_bpe_phrases, simulate_phrases, simulate_word_phrases,
    subword_phrase,
)
from lcbnet.errors import ConfigError
from lcbnet.tokenizer import MARKER, RESERVED, Vocab, tokenize, train_vocab

CORPUS = ["a kathy b", "kathy zzz cat", "the cross ministerial platforms", "marcus met kathleen today"]


@pytest.fixture(scope="module")
def vocab():
    return train_vocab(CORPUS, merges=60)


def check_invariants(ctx, vocab, n_phrases):
    assert len(ctx.bias_labels) == len(ctx.ids)
    seps = [i for i, t in enumerate(ctx.ids) if t == vocab.blank_ctx]
    assert all(ctx.bias_labels[i] == 0 for i in seps)
    if n_phrases == 0:
        assert ctx.ids == (vocab.blank_ctx,)
        return
    assert len(seps) == max(0, n_phrases - 1)
    covered = sorted(p for s, e, _ in ctx.phrase_spans for p in range(s, e))
    assert covered == [i for i in range(len(ctx.ids)) if i not in seps]


def test_empty_list_is_single_separator(vocab):
    ctx = build_long_context(PhraseList([]), vocab, np.random.default_rng(0))
    assert ctx.ids == (vocab.blank_ctx,) and ctx.bias_labels == (0,)


def test_single_phrase_has_no_separator():
    v = train_vocab(["ca ca", "t"], merges=1)
    ctx = build_long_context(PhraseList(["cat"]), v, np.random.default_rng(0))
    assert ctx.ids == (v.ids[MARKER + "ca"], v.ids["t"])
    assert ctx.phrase_spans == ((0, 2, 0),)


def test_fixed_seed_replays(vocab):
    phrases = PhraseList(["kathy", "marcus", "cross ministerial"])
    a = build_long_context(phrases, vocab, np.random.default_rng(5))
    b = build_long_context(phrases, vocab, np.random.default_rng(5))
    assert a == b
    orders = {tuple(k for _, _, k in build_long_context(phrases, vocab, np.random.default_rng(s)).phrase_spans)
              for s in range(30)}
    assert len(orders) > 1


WORDS = ["kathy", "marcus", "cross", "ministerial", "cat", "zzz", "today", "met"]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.sampled_from(WORDS), min_size=1, max_size=3).map(" ".join), max_size=6),
       st.integers(0, 2**32 - 1))
def test_construction_invariants(phrases, seed):
    v = train_vocab(CORPUS, merges=60)
    pl = PhraseList(phrases)
    ctx = build_long_context(pl, v, np.random.default_rng(seed))
    check_invariants(ctx, v, len(pl))
    ref = " ".join(np.random.default_rng(seed).choice(WORDS, size=5))
    labelled = label_bias_tokens(ctx, ref)
    check_invariants(labelled, v, len(pl))
    assert label_bias_tokens(labelled, ref) == labelled
    # brute-force word-window oracle
    ref_words = ref.split()
    for s, e, k in labelled.phrase_spans:
        needle = pl.phrases[k].split()
        hit = any(ref_words[i:i + len(needle)] == needle for i in range(len(ref_words)))
        assert set(labelled.bias_labels[s:e]) == {int(hit)}


def test_labels_example(vocab):
    ctx = build_long_context(PhraseList(["kathy", "zzz"]), vocab, np.random.default_rng(1))
    out = label_bias_tokens(ctx, tokenize("a kathy b", vocab), vocab)
    ks, ke = ctx.span_of("kathy")
    expected = [1 if ks <= i < ke else 0 for i in range(len(ctx.ids))]
    assert list(out.bias_labels) == expected


def test_label_matching_is_whole_word_case_insensitive(vocab):
    ctx = build_long_context(PhraseList(["Kathy", "kath"]), vocab, np.random.default_rng(0))
    out = label_bias_tokens(ctx, "a KATHY b")
    ks, ke = ctx.span_of("Kathy")
    ps, pe = ctx.span_of("kath")
    assert set(out.bias_labels[ks:ke]) == {1}
    assert set(out.bias_labels[ps:pe]) == {0}


def test_phrase_list_dedupes():
    assert PhraseList(["a", " a ", "b", "", "a"]).phrases == ["a", "b"]


def test_stop_list():
    assert len(STOP_WORDS) == 100
    assert not eligible("would") and not eligible("cat") and eligible("kathy")


def refs_of(vocab, texts):
    return [tokenize(t, vocab) for t in texts]


def test_word_ratio_extremes(vocab):
    refs = refs_of(vocab, CORPUS)
    assert simulate_word_phrases(refs, vocab, SimulationConfig(word_ratio=0.0), np.random.default_rng(0)).phrases == []
    full = simulate_word_phrases(refs, vocab, SimulationConfig(word_ratio=1.0), np.random.default_rng(0))
    expected = PhraseList([w for t in CORPUS for w in t.split() if eligible(w)]).phrases
    assert full.phrases == expected
    assert full.source is PhraseSource.SIMULATED_WORD


def test_phrase_cap(vocab):
    refs = refs_of(vocab, CORPUS)
    cfg = SimulationConfig(word_ratio=1.0, max_phrases_per_batch=2)
    out = simulate_word_phrases(refs, vocab, cfg, np.random.default_rng(0))
    assert len(out) == 2


def _big_batch(vocab, n_words, seed):
    rng = np.random.default_rng(seed)
    words = ["kathy", "marcus", "ministerial", "platforms", "kathleen", "today"]
    texts = [" ".join(rng.choice(words, size=10)) for _ in range(n_words // 10)]
    return refs_of(vocab, texts)


def test_word_selection_concentrates(vocab):
    refs = _big_batch(vocab, 10000, 0)
    out = simulate_word_phrases(refs, vocab, SimulationConfig(word_ratio=0.3), np.random.default_rng(1))
    assert out.n_eligible == 10000
    assert 0.27 <= out.n_selected / out.n_eligible <= 0.33


def test_single_unit_word_passes_through():
    v = train_vocab(["kathy kathy kathy"], merges=50)
    out = simulate_bpe_phrases([tokenize("kathy", v)], v, SimulationConfig(bpe_ratio=1.0), np.random.default_rng(0))
    assert out.phrases == ["kathy"]


def _cross_vocab():
    units = [f"<{n}>" for n in RESERVED]
    for u in ["cross", "m", "in", "ist", "erial", "c", "r", "o", "s", "e", "a", "l", "t", "i", "n"]:
        units += [MARKER + u, u]
    return Vocab(units)


def test_subword_span_example():
    v = _cross_vocab()
    seq = tokenize("crossministerial", v)
    units = [v.text_of(i) for i in seq.ids]
    assert units == ["cross", "m", "in", "ist", "erial"]
    assert subword_phrase(units, 2, 4) == "inist"


def test_bpe_phrases_are_contiguous_subspans():
    v = _cross_vocab()
    seq = tokenize("crossministerial", v)
    units = [v.text_of(i) for i in seq.ids]
    allowed = {subword_phrase(units, a, b) for a in range(5) for b in range(a + 1, 6)}
    seen = set()
    for seed in range(200):
        out = simulate_bpe_phrases([seq], v, SimulationConfig(bpe_ratio=1.0), np.random.default_rng(seed))
        assert len(out) == 1 and out.phrases[0] in allowed
        seen.add(out.phrases[0])
    assert len(seen) > 5


def test_bpe_ratio_zero(vocab):
    refs = refs_of(vocab, CORPUS)
    assert simulate_bpe_phrases(refs, vocab, SimulationConfig(bpe_ratio=0.0), np.random.default_rng(0)).phrases == []


def test_simulators_deterministic_and_derivable(vocab):
    refs = refs_of(vocab, CORPUS)
    cfg = SimulationConfig()
    a = simulate_phrases(refs, vocab, cfg, np.random.default_rng(9))
    b = simulate_phrases(refs, vocab, cfg, np.random.default_rng(9))
    assert a.phrases == b.phrases
    text = " ".join(CORPUS)
    assert all(p in text for p in a.phrases)


def test_mask_context(vocab):
    phrases = PhraseList(["kathy", "marcus", "cross ministerial"])
    ctx = build_long_context(phrases, vocab, np.random.default_rng(0))
    assert mask_context(ctx, 0.0, np.random.default_rng(0), vocab) == ctx
    full = mask_context(ctx, 1.0, np.random.default_rng(0), vocab)
    for orig, new in zip(ctx.ids, full.ids):
        assert new == (vocab.blank_ctx if orig == vocab.blank_ctx else vocab.mask)
    assert full.bias_labels == ctx.bias_labels


def test_mask_rate_concentrates(vocab):
    ids = tuple(range(6, 16)) * 1000
    ctx = LongContextSequence(ids, (0,) * len(ids), ((0, len(ids), 0),), ("x",), vocab.blank_ctx)
    out = mask_context(ctx, 0.15, np.random.default_rng(3), vocab)
    frac = np.mean([i == vocab.mask for i in out.ids])
    assert 0.13 <= frac <= 0.17


def test_config_validation():
    with pytest.raises(ConfigError):
        SimulationConfig(word_ratio=1.5)
    with pytest.raises(ConfigError):
        SimulationConfig(max_phrases_per_batch=-1)
