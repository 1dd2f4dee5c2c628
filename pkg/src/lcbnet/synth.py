"""Synthetic speech-like corpus with acoustically confusable rare words.

Every lexicon word owns a fixed random feature template (``frames_per_word``
frames). Rare words come in groups whose members share one base template plus
a small offset, so they are near-indistinguishable from audio alone; the
per-utterance phrase list names the right member. Templates and the vocabulary
depend only on ``lexicon_seed``, so corpora drawn with different ``seed`` values
share acoustics and units.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .biasing import PhraseList
from .data import ManifestEntry, write_manifest
from .errors import ConfigError
from .matrix_io import write_matrix
from .model.network import receptive_field
from .tokenizer import train_vocab

COMMON_WORDS = ("the", "and", "that", "have", "with", "this", "from", "they", "what", "about", "which", "when")
RARE_GROUPS = (
    ("kathy", "kathleen", "katrina"),
    ("marcus", "marius", "martin"),
    ("sophia", "sofia", "sonia"),
    ("daniel", "danielle", "daniela"),
    ("brandon", "brendan", "branson"),
    ("elena", "eleanor", "elaine"),
    ("oliver", "olivia", "olive"),
    ("victor", "viktor", "victoria"),
)


@dataclass
class SynthConfig:
    n_utterances: int = 50
    seed: int = 0
    lexicon_seed: int = 1234
    feature_dim: int = 80
    frames_per_word: int = 8
    min_words: int = 3
    max_words: int = 5
    rare_fraction: float = 0.5
    n_distractors: int = 4
    sibling_offset: float = 0.02  # scale of the per-member offset inside a rare group
    noise: float = 0.3
    vocab_merges: int = 200

    def validate(self):
        if self.n_utterances < 0:
            raise ConfigError("synth.n_utterances must be >= 0")
        if not 0.0 <= self.rare_fraction <= 1.0:
            raise ConfigError("synth.rare_fraction must lie in [0, 1]")
        if self.min_words < 1 or self.max_words < self.min_words:
            raise ConfigError("synth word counts must satisfy 1 <= min_words <= max_words")
        if self.frames_per_word * self.min_words < 7:
            raise ConfigError("utterances would be shorter than the 7-frame minimum")
        if self.n_distractors > len(RARE_GROUPS) - 1:
            raise ConfigError(f"at most {len(RARE_GROUPS) - 1} distractor groups are available")
        return self


class Lexicon:
    def __init__(self, cfg):
        rng = np.random.default_rng(cfg.lexicon_seed)
        shape = (cfg.frames_per_word, cfg.feature_dim)
        self.templates = {w: rng.normal(size=shape) for w in COMMON_WORDS}
        self.group_of = {}
        for g, members in enumerate(RARE_GROUPS):
            base = rng.normal(size=shape)
            for w in members:
                self.templates[w] = base + cfg.sibling_offset * rng.normal(size=shape)
                self.group_of[w] = g
        self.rare_words = [w for group in RARE_GROUPS for w in group]

    def words(self):
        return list(self.templates)


def synth_vocab(cfg):
    return train_vocab(Lexicon(cfg).words(), cfg.vocab_merges)


def generate(cfg):
    """Yield ``(utt_id, features, transcript, phrases)`` tuples."""
    cfg.validate()
    lex = Lexicon(cfg)
    rng = np.random.default_rng(cfg.seed)
    for n in range(cfg.n_utterances):
        n_words = int(rng.integers(cfg.min_words, cfg.max_words + 1))
        words = []
        for _ in range(n_words):  # no word directly repeats its predecessor
            choices = [w for w in COMMON_WORDS if not words or w != words[-1]]
            words.append(str(rng.choice(choices)))
        rare = []
        if rng.random() < cfg.rare_fraction:
            word = str(rng.choice(lex.rare_words))
            words[int(rng.integers(0, n_words))] = word
            rare.append(word)
        used = {lex.group_of[w] for w in rare}
        free = [g for g in range(len(RARE_GROUPS)) if g not in used]
        groups = rng.choice(free, size=cfg.n_distractors, replace=False)
        distractors = [str(rng.choice(RARE_GROUPS[g])) for g in groups]
        phrases = PhraseList(rare + distractors)
        feats = np.concatenate([lex.templates[w] for w in words], axis=0)
        feats = feats + cfg.noise * rng.normal(size=feats.shape)
        yield f"utt{n:05d}", feats, " ".join(words), phrases


def write_corpus(cfg, out_dir):
    """Write features, phrase files, ``manifest.tsv`` and ``vocab.txt`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "phrases").mkdir(parents=True, exist_ok=True)
    entries = []
    n_rare = 0
    rare = set(Lexicon(cfg).rare_words) if cfg.n_utterances else set()
    for utt_id, feats, text, phrases in generate(cfg):
        fpath = out / "features" / f"{utt_id}.mat"
        ppath = out / "phrases" / f"{utt_id}.txt"
        write_matrix(fpath, feats)
        phrases.write(ppath)
        entries.append(ManifestEntry(utt_id, fpath, text, ppath))
        n_rare += any(w in rare for w in text.split())
    write_manifest(out / "manifest.tsv", entries)
    synth_vocab(cfg).save(out / "vocab.txt")
    return {"utterances": len(entries), "with_rare_word": n_rare}


def encoder_frames(word_index, frames_per_word):
    """Encoder frames ``[lo, hi)`` whose whole front-end receptive field lies inside the word.

    Frames straddling a word boundary mix two words and are left out; words
    shorter than the receptive field get an empty range.
    """
    start = word_index * frames_per_word
    end = start + frames_per_word - 1
    first, last = receptive_field(0)
    lo = -(-(start - first) // 4)
    hi = (end - last) // 4 + 1
    return lo, max(lo, hi)


def rare_word_frames(transcript, frames_per_word):
    rare = {w for group in RARE_GROUPS for w in group}
    return [(w, *encoder_frames(i, frames_per_word))
            for i, w in enumerate(transcript.split()) if w in rare]
