"""Decoding and diagnostics over loaded utterances."""
import zlib

import numpy as np

from .biasing import PhraseList, build_long_context, label_bias_tokens
from .numerics import no_grad
from .tokenizer import detokenize


def utterance_context(utt, vocab, with_bias=True, seed=0):
    """Long context for evaluation: the utterance's own list, or the empty context.

    Phrase order is shuffled with a generator keyed by ``seed`` and the utterance
    id, so repeated runs build identical sequences.
    """
    phrases = utt.phrases if (with_bias and utt.phrases is not None) else PhraseList()
    rng = np.random.default_rng([seed, zlib.crc32(utt.utt_id.encode())])
    return label_bias_tokens(build_long_context(phrases, vocab, rng), utt.transcript)


def decode(model, utts, with_bias=True, max_len=50, seed=0):
    """Greedy transcripts as ``[(utt_id, text)]``."""
    out = []
    for utt in utts:
        ctx = utterance_context(utt, model.vocab, with_bias, seed)
        out.append((utt.utt_id, detokenize(model.greedy_decode(utt.features, ctx.ids, max_len), model.vocab)))
    return out


def bias_scores(model, utts, seed=0):
    """Predicted alpha and its label for every non-separator context token."""
    alphas, labels = [], []
    for utt in utts:
        ctx = utterance_context(utt, model.vocab, True, seed)
        with no_grad():
            h_a = model.encode_audio(utt.features)
            h_c = model.encode_context(ctx.ids)
            h_ca, _ = model.cross_attention(h_c, h_a, "ca")
            alpha = model.biasing_prediction(h_ca)[0].data.reshape(-1)
        keep = ~ctx.separator_mask()
        alphas.append(alpha[keep])
        labels.append(np.asarray(ctx.bias_labels)[keep])
    if not alphas:
        return np.zeros(0), np.zeros(0, dtype=int)
    return np.concatenate(alphas), np.concatenate(labels)


def bias_summary(alphas, labels, threshold=0.5):
    pred = (alphas >= threshold).astype(int)
    pos, neg = alphas[labels == 1], alphas[labels == 0]
    return {
        "tokens": int(len(labels)),
        "accuracy": float(np.mean(pred == labels)) if len(labels) else float("nan"),
        "mean_alpha_pos": float(pos.mean()) if len(pos) else float("nan"),
        "mean_alpha_neg": float(neg.mean()) if len(neg) else float("nan"),
    }


def attention_hit_rate(model, utts, word_frames, seed=0):
    """Share of queried encoder frames whose strongest context position lies in the
    matching phrase span.

    ``word_frames(utt)`` returns ``[(word, first_frame, end_frame)]`` in encoder
    frames for the words to check; words absent from the phrase list are skipped.
    Attention is averaged over heads before the argmax.
    """
    hits = total = 0
    for utt in utts:
        ctx = utterance_context(utt, model.vocab, True, seed)
        weights = model.ac_attention_matrix(utt.features, ctx.ids).mean(axis=0)
        for word, lo, hi in word_frames(utt):
            span = ctx.span_of(word)
            if span is None:
                continue
            best = np.argmax(weights[lo:hi], axis=-1)
            hits += int(np.sum((best >= span[0]) & (best < span[1])))
            total += hi - lo
    return hits / total if total else float("nan")
