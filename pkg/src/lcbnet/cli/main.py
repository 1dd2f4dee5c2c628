import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import evaluate
from ..biasing import PhraseList, simulate_bpe_phrases, simulate_word_phrases
from ..data import load_utterances, read_hypotheses, read_manifest, write_hypotheses
from ..errors import ConfigError, DataError, LcbError
from ..model import LCBNet, export_attention, load_checkpoint, save_checkpoint
from ..scoring import score_corpus
from ..synth import write_corpus
from ..tokenizer import Vocab, tokenize
from ..training import Trainer
from .config import load_config

EXIT_CONFIG = 2
EXIT_DATA = 3


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _load_vocab(cfg):
    path = cfg.path("vocab")
    if not path.is_file():
        raise DataError(f"vocabulary file {path} does not exist")
    return Vocab.load(path)


def _manifest(cfg, args, key):
    return Path(args.manifest) if getattr(args, "manifest", None) else cfg.path(key)


def cmd_synth(cfg, args):
    out = Path(args.out) if args.out else cfg.path("out_dir")
    stats = write_corpus(cfg.synth, out)
    print(f"utterances={stats['utterances']} with_rare_word={stats['with_rare_word']} out={str(out)!r}")
    return 0


def cmd_train(cfg, args):
    if args.single_thread:
        cfg.train = replace(cfg.train, workers=1)
    cfg.validate()
    vocab = _load_vocab(cfg)
    if cfg.model.vocab_size == 0:
        cfg.model = replace(cfg.model, vocab_size=len(vocab))
    cfg.validate(need_vocab_size=True)
    entries = read_manifest(_manifest(cfg, args, "train_manifest"))
    data = load_utterances(entries, vocab)
    model = LCBNet(cfg.model, vocab, seed=cfg.train.seed)

    ckpt_dir = cfg.path("checkpoint_dir")
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_path = ckpt_dir / "train.log"
    with log_path.open("w", encoding="utf-8") as log_file:
        def log(line):
            print(line)
            log_file.write(line + "\n")
            log_file.flush()

        for key, value in cfg.items():
            log(f"config {key} = {value}")
        trainer = Trainer(model, cfg.train, cfg.sim)
        trainer.fit(data, log=log)
    ckpt = ckpt_dir / "model.ckpt"
    save_checkpoint(model, ckpt, meta={"epochs": trainer.epoch, "seed": cfg.train.seed})
    print(f"checkpoint={str(ckpt)!r}")
    return 0


def _load_model(cfg, args):
    vocab = _load_vocab(cfg)
    model, _ = load_checkpoint(args.checkpoint, vocab)
    return model


def cmd_decode(cfg, args):
    model = _load_model(cfg, args)
    with_bias = args.mode == "with_bias"
    entries = read_manifest(_manifest(cfg, args, "eval_manifest"))
    if with_bias:
        for e in entries:
            if e.phrase_path is None or not e.phrase_path.is_file():
                _warn(f"{e.utt_id}: phrase file {e.phrase_path} missing, decoding with empty context")
    utts = load_utterances(entries, model.vocab, with_phrases=with_bias)
    hyps = evaluate.decode(model, utts, with_bias, cfg.decode.max_len, cfg.decode.seed)
    if args.out:
        write_hypotheses(args.out, hyps)
    else:
        for utt_id, text in hyps:
            print(f"{utt_id}\t{text}")
    return 0


def cmd_score(cfg, args):
    entries = read_manifest(args.manifest, check_files=False)
    hyps = read_hypotheses(args.hyp)
    missing = [e.utt_id for e in entries if e.utt_id not in hyps]
    if missing:
        raise DataError(f"no hypothesis for {len(missing)} utterance(s), first {missing[0]!r}")
    extra = set(hyps) - {e.utt_id for e in entries}
    if extra:
        raise DataError(f"hypothesis for unknown utterance {sorted(extra)[0]!r}")
    lists = []
    for e in entries:
        if e.phrase_path is not None and e.phrase_path.is_file():
            lists.append(PhraseList.read(e.phrase_path).phrases)
        else:
            lists.append([])
    report = score_corpus([(e.transcript, hyps[e.utt_id]) for e in entries], lists, args.insertion_bucket)
    text = report.summary() + "\n" + report.key_values()
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_simulate(cfg, args):
    vocab = _load_vocab(cfg)
    entries = read_manifest(_manifest(cfg, args, "train_manifest"), check_files=False)
    refs = [tokenize(e.transcript, vocab) for e in entries]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.sim.rng_seed)
    totals = {"word": [0, 0], "bpe": [0, 0]}
    size = args.batch_size or cfg.train.batch_size
    for b, start in enumerate(range(0, len(refs), size)):
        batch = refs[start:start + size]
        word = simulate_word_phrases(batch, vocab, cfg.sim, rng)
        bpe = simulate_bpe_phrases(batch, vocab, cfg.sim, rng)
        word.write(out / f"batch{b:05d}.word.txt")
        bpe.write(out / f"batch{b:05d}.bpe.txt")
        for name, pl in (("word", word), ("bpe", bpe)):
            totals[name][0] += pl.n_selected
            totals[name][1] += pl.n_eligible
    for name, ratio in (("word", cfg.sim.word_ratio), ("bpe", cfg.sim.bpe_ratio)):
        sel, elig = totals[name]
        rate = sel / elig if elig else float("nan")
        print(f"{name}_eligible={elig} {name}_selected={sel} {name}_rate={rate!r} {name}_target={ratio!r}")
    return 0


def cmd_attention(cfg, args):
    model = _load_model(cfg, args)
    entries = [e for e in read_manifest(_manifest(cfg, args, "eval_manifest")) if e.utt_id == args.utt]
    if not entries:
        raise DataError(f"utterance {args.utt!r} not in manifest")
    with_bias = args.mode == "with_bias"
    utt = load_utterances(entries, model.vocab, with_phrases=with_bias)[0]
    ctx = evaluate.utterance_context(utt, model.vocab, with_bias, cfg.decode.seed)
    weights = model.ac_attention_matrix(utt.features, ctx.ids)
    export_attention(weights, args.out)
    print(f"heads={weights.shape[0]} frames={weights.shape[1]} context={weights.shape[2]} out={args.out!r}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lcbnet", description="Long-context biasing ASR on synthetic corpora.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config file (section.key = value lines)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config setting (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--out", help="output directory (default paths.out_dir)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train and write a checkpoint")
    p.add_argument("--manifest", help="training manifest (default paths.train_manifest)")
    p.add_argument("--single-thread", action="store_true", help="force the bit-reproducible single-thread path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", parents=[common], help="greedy decoding to a hypothesis file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("with_bias", "without_bias"), default="with_bias")
    p.add_argument("--manifest", help="manifest to decode (default paths.eval_manifest)")
    p.add_argument("--out", help="hypothesis file (default stdout)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", parents=[common], help="WER with unbiased/biased breakdown")
    p.add_argument("--manifest", required=True, help="reference manifest with phrase files")
    p.add_argument("--hyp", required=True, help="hypothesis file")
    p.add_argument("--insertion-bucket", choices=("hyp", "u"), default="hyp")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", parents=[common], help="write simulated phrase lists per batch")
    p.add_argument("--manifest", help="manifest (default paths.train_manifest)")
    p.add_argument("--batch-size", type=int, default=0, help="default train.batch_size")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attention", parents=[common], help="export AC attention weights for one utterance")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--utt", required=True)
    p.add_argument("--mode", choices=("with_bias", "without_bias"), default="with_bias")
    p.add_argument("--manifest", help="manifest (default paths.eval_manifest)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attention)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LcbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
