"""Manifests, hypothesis files and in-memory utterances."""
from dataclasses import dataclass
from pathlib import Path

from .biasing import PhraseList
from .errors import DataError
from .matrix_io import read_matrix
from .tokenizer import tokenize


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    feature_path: Path
    transcript: str
    phrase_path: Path = None


@dataclass
class Utterance:
    utt_id: str
    features: object  # ndarray [frames, feature_dim]
    transcript: str
    reference: object  # TokenSeq
    phrases: PhraseList = None


def read_manifest(path, check_files=True):
    """Parse ``utt_id \\t feature_path \\t transcript \\t phrase_path`` lines.

    Relative paths resolve against the manifest's directory; an empty or ``-``
    phrase column means no phrase file.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    entries, seen = [], set()
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise DataError(f"{path}:{n}: expected 3 or 4 tab-separated columns, got {len(cols)}")
        utt_id, feat, text = cols[:3]
        phrase = cols[3].strip() if len(cols) == 4 else ""
        if utt_id in seen:
            raise DataError(f"{path}:{n}: duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        entry = ManifestEntry(utt_id, base / feat, " ".join(text.split()),
                              base / phrase if phrase and phrase != "-" else None)
        if check_files and not entry.feature_path.is_file():
            raise DataError(f"{path}:{n}: feature file {entry.feature_path} does not exist")
        entries.append(entry)
    return entries


def write_manifest(path, entries):
    path = Path(path)
    base = path.parent
    with path.open("w", encoding="utf-8") as f:
        for e in entries:
            phrase = "" if e.phrase_path is None else _rel(e.phrase_path, base)
            f.write(f"{e.utt_id}\t{_rel(e.feature_path, base)}\t{e.transcript}\t{phrase}\n")


def _rel(p, base):
    p = Path(p)
    try:
        return str(p.relative_to(base))
    except ValueError:
        return str(p)


def load_utterances(entries, vocab, with_phrases=True):
    out = []
    for e in entries:
        phrases = None
        if with_phrases and e.phrase_path is not None and e.phrase_path.is_file():
            phrases = PhraseList.read(e.phrase_path)
        out.append(Utterance(e.utt_id, read_matrix(e.feature_path), e.transcript,
                             tokenize(e.transcript, vocab), phrases))
    return out


def read_hypotheses(path):
    hyps = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read hypothesis file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        utt_id, _, text = line.partition("\t")
        if utt_id in hyps:
            raise DataError(f"{path}:{n}: duplicate utterance id {utt_id!r}")
        hyps[utt_id] = " ".join(text.split())
    return hyps


def write_hypotheses(path, hyps):
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(f"{utt_id}\t{text}\n" for utt_id, text in hyps)
