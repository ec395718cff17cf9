"""辞書＋ルールベースの感情スコアリング

単語ごとの感情値（-4〜+4）を辞書から引き、強調語・否定語・全大文字・
"but" 節・慣用句・感嘆符/疑問符の規則で補正して合算し、
compound（-1〜+1）と neg/neu/pos の割合を求める。
"""
from __future__ import annotations

import logging
import math
import string
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

from .config import (
    BOOSTER_INCREMENT,
    CAPS_INCREMENT,
    DEFAULT_EMOJI_PATH,
    DEFAULT_LEXICON_PATH,
    EXCLAIM_CAP,
    EXCLAIM_INCREMENT,
    NEG_THRESHOLD,
    NEGATION_SCALAR,
    NEGATION_WINDOW,
    NORMALIZATION_ALPHA,
    POS_THRESHOLD,
    QUESTION_CAP,
    QUESTION_FLOOD_AMPLIFIER,
    QUESTION_INCREMENT,
    QUESTION_MIN_COUNT,
)
from .corpus import Document
from .errors import ConfigError, DataError
from .utils import file_sha256

logger = logging.getLogger(__name__)

VALENCE_LIMIT = 4.0

# 否定語（"n't" を含む語も否定として扱う）
NEGATIONS = frozenset({
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt",
    "ain't", "aren't", "can't", "couldn't", "daren't", "didn't", "doesn't",
    "dont", "hadnt", "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither",
    "don't", "hadn't", "hasn't", "haven't", "isn't", "mightn't", "mustn't",
    "neednt", "needn't", "never", "none", "nope", "nor", "not", "nothing", "nowhere",
    "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
    "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't",
    "without", "wont", "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
})

# 強調語（+1）と緩和語（-1）。実際の増減量は RuleConfig.booster_increment 倍
_INTENSIFIERS = (
    "absolutely", "amazingly", "awfully", "completely", "considerable", "considerably",
    "decidedly", "deeply", "effing", "enormous", "enormously", "entirely", "especially",
    "exceptional", "exceptionally", "extreme", "extremely", "fabulously", "flipping",
    "flippin", "frackin", "fracking", "fricking", "frickin", "frigging", "friggin",
    "fully", "fuckin", "fucking", "fuggin", "fugging", "greatly", "hella", "highly",
    "hugely", "incredible", "incredibly", "intensely", "major", "majorly", "more",
    "most", "particularly", "purely", "quite", "really", "remarkably", "so",
    "substantially", "thoroughly", "total", "totally", "tremendous", "tremendously",
    "uber", "unbelievably", "unusually", "utter", "utterly", "very",
)
_DAMPENERS = (
    "almost", "barely", "hardly", "just enough", "kind of", "kinda", "kindof", "kind-of",
    "less", "little", "marginal", "marginally", "occasional", "occasionally", "partly",
    "scarce", "scarcely", "slight", "slightly", "somewhat", "sort of", "sorta", "sortof",
    "sort-of",
)
BOOSTERS: Mapping[str, int] = {
    **{w: 1 for w in _INTENSIFIERS},
    **{w: -1 for w in _DAMPENERS},
}

# 辞書語を含む慣用句（一致したらその値で置き換え）
SPECIAL_CASES: Mapping[str, float] = {
    "the shit": 3, "the bomb": 3, "bad ass": 1.5, "badass": 1.5, "bus stop": 0.0,
    "yeah right": -2, "kiss of death": -1.5, "to die for": 3,
    "beating heart": 3.1, "broken heart": -2.9,
}

_NEVER_SO_SCALAR = 1.25
_BOOSTER_DAMPING = (1.0, 0.95, 0.9)  # 対象語からの距離 1, 2, 3
_BUT_BEFORE = 0.5
_BUT_AFTER = 1.5


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class RuleConfig:
    """スコアリング規則の定数"""
    exclaim_increment: float = EXCLAIM_INCREMENT
    question_increment: float = QUESTION_INCREMENT
    exclaim_cap: int = EXCLAIM_CAP
    question_cap: int = QUESTION_CAP
    question_min_count: int = QUESTION_MIN_COUNT  # これ未満の "?" は加点しない
    question_flood_amplifier: float = QUESTION_FLOOD_AMPLIFIER  # "?" が上限を超えた場合の加点
    negation_window: int = NEGATION_WINDOW
    negation_scalar: float = NEGATION_SCALAR
    caps_increment: float = CAPS_INCREMENT
    booster_increment: float = BOOSTER_INCREMENT
    normalization_alpha: float = NORMALIZATION_ALPHA
    pos_threshold: float = POS_THRESHOLD
    neg_threshold: float = NEG_THRESHOLD
    but_rule: bool = True  # "but" 節の重み付けと慣用句

    def __post_init__(self):
        increments = {
            "exclaim_increment": self.exclaim_increment,
            "question_increment": self.question_increment,
            "question_flood_amplifier": self.question_flood_amplifier,
            "caps_increment": self.caps_increment,
            "booster_increment": self.booster_increment,
        }
        for name, value in increments.items():
            if value < 0:
                raise ConfigError(f"{name} は 0 以上にしてください: {value}")
        if not self.neg_threshold < 0 < self.pos_threshold:
            raise ConfigError(
                f"閾値は neg_threshold < 0 < pos_threshold を満たす必要があります: "
                f"{self.neg_threshold}, {self.pos_threshold}"
            )
        if not self.normalization_alpha > 0:
            raise ConfigError(f"normalization_alpha は正にしてください: {self.normalization_alpha}")
        if not 1 <= self.negation_window <= len(_BOOSTER_DAMPING):
            raise ConfigError(f"negation_window は 1〜{len(_BOOSTER_DAMPING)}: {self.negation_window}")
        if self.exclaim_cap < 0 or self.question_cap < 0 or self.question_min_count < 0:
            raise ConfigError("句読点の上限・最小数は 0 以上にしてください")


DEFAULT_RULES = RuleConfig()


@dataclass(frozen=True)
class SentimentScores:
    """1文書の感情スコア"""
    neg: float
    neu: float
    pos: float
    compound: float

    def as_dict(self) -> dict[str, float]:
        return {"neg": self.neg, "neu": self.neu, "pos": self.pos, "compound": self.compound}


def _lowercase_keys(valences: Mapping[str, float]) -> dict[str, float]:
    lowered = {token: value for token, value in valences.items() if token == token.lower()}
    for token, value in valences.items():
        lowered.setdefault(token.lower(), value)
    return lowered


@dataclass(frozen=True)
class Lexicon:
    """感情辞書

    valences のキーは小文字に揃える（参照は小文字化した単語で行う）。
    ":D" と ":d" のように小文字化で重なる場合は、元から小文字の項目を優先する。
    """
    valences: Mapping[str, float]
    boosters: Mapping[str, int] = field(default_factory=lambda: dict(BOOSTERS))
    negations: frozenset[str] = NEGATIONS
    special_cases: Mapping[str, float] = field(default_factory=lambda: dict(SPECIAL_CASES))
    emojis: Mapping[str, str] = field(default_factory=dict)  # 絵文字 → 英語の説明
    sha256: str = ""  # 辞書ファイルのハッシュ

    def __post_init__(self):
        if not self.valences:
            raise DataError("感情辞書が空です")
        for token, value in self.valences.items():
            if not -VALENCE_LIMIT <= value <= VALENCE_LIMIT:
                raise DataError(f"感情値が範囲外です: {token}={value}")
        object.__setattr__(self, "valences", _lowercase_keys(self.valences))

    def __contains__(self, token: str) -> bool:
        return token in self.valences

    def flipped(self) -> "Lexicon":
        """全感情値の符号を反転した辞書"""
        return Lexicon(
            valences={k: -v for k, v in self.valences.items()},
            boosters=self.boosters,
            negations=self.negations,
            special_cases={k: -v for k, v in self.special_cases.items()},
            emojis=self.emojis,
            sha256=self.sha256,
        )


@dataclass(frozen=True)
class TokenizedText:
    """トークン列と文全体の感嘆符・疑問符の数"""
    tokens: list[str]
    exclaim_count: int = 0
    question_count: int = 0


def _read_tsv_pairs(path: Path, what: str) -> list[tuple[int, str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"{what}を読み込めません: {path}: {e}") from e
    pairs = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.strip().split("\t")
        if len(cols) < 2:
            raise DataError(f"{what}の形式が不正です: {Path(path).name}:{line_no}")
        pairs.append((line_no, cols[0], cols[1]))
    return pairs


def load_emoji_table(path: Path) -> dict[str, str]:
    """絵文字 → 説明文の対応表（タブ区切り）"""
    return {emoji: description for _, emoji, description in _read_tsv_pairs(path, "絵文字表")}


def load_lexicon(
    path: Path = DEFAULT_LEXICON_PATH,
    emoji_path: Optional[Path] = DEFAULT_EMOJI_PATH,
) -> Lexicon:
    """感情辞書を読み込む

    形式: token <TAB> mean_valence [<TAB> 以降は無視]

    Raises:
        DataError: 読めない、数値でない、範囲外の値、空の辞書
    """
    valences: dict[str, float] = {}
    for line_no, token, value in _read_tsv_pairs(path, "感情辞書"):
        try:
            valences[token] = float(value)
        except ValueError as e:
            raise DataError(f"感情値が数値ではありません: {Path(path).name}:{line_no} {value}") from e
    emojis = load_emoji_table(emoji_path) if emoji_path is not None else {}
    lex = Lexicon(valences=valences, emojis=emojis, sha256=file_sha256(Path(path)))
    logger.info("感情辞書: %s (%d 語, sha256=%s)", Path(path).name, len(valences), lex.sha256[:12])
    return lex


def _replace_emojis(text: str, emojis: Mapping[str, str]) -> str:
    if not emojis:
        return text
    out: list[str] = []
    prev_space = True
    for ch in text:
        if ch in emojis:
            if not prev_space:
                out.append(" ")
            out.append(emojis[ch])
            prev_space = False
        else:
            out.append(ch)
            prev_space = ch == " "
    return "".join(out).strip()


def _strip_punctuation(token: str) -> str:
    # 前後の記号を除いて2文字以下になるもの（":)" や "$BP"）はそのまま残す
    stripped = token.strip(string.punctuation)
    if len(stripped) <= 2:
        return token
    return stripped


def tokenize(text: str, lex: Optional[Lexicon] = None) -> TokenizedText:
    """空白で分割し、単語の前後の記号を落とす

    大文字小文字は保持する。辞書に絵文字表があれば先に説明文へ置き換える。

    Args:
        text: 入力文
        lex: 絵文字表を持つ辞書（省略可）

    Returns:
        TokenizedText: トークン列と "!" / "?" の数
    """
    if lex is not None:
        text = _replace_emojis(text, lex.emojis)
    tokens = [_strip_punctuation(t) for t in text.split()]
    return TokenizedText(tokens=tokens, exclaim_count=text.count("!"), question_count=text.count("?"))


def _is_negated(word: str, negations: frozenset[str]) -> bool:
    return word in negations or "n't" in word


def _allcap_differential(words: list[str]) -> bool:
    """一部だけが全大文字なら True（全部・ゼロなら False）"""
    allcaps = sum(1 for w in words if w.isupper())
    return 0 < len(words) - allcaps < len(words)


def _booster_scalar(word: str, valence: float, cap_diff: bool, lex: Lexicon, cfg: RuleConfig) -> float:
    sign = lex.boosters.get(word.lower())
    if sign is None:
        return 0.0
    scalar = sign * cfg.booster_increment
    if valence < 0:
        scalar *= -1
    if word.isupper() and cap_diff:
        scalar += cfg.caps_increment if valence > 0 else -cfg.caps_increment
    return scalar


def _negation_check(valence: float, lowered: list[str], start_i: int, i: int,
                    lex: Lexicon, cfg: RuleConfig) -> float:
    if start_i == 0:
        if _is_negated(lowered[i - 1], lex.negations):
            valence *= cfg.negation_scalar
    elif start_i == 1:
        if lowered[i - 2] == "never" and lowered[i - 1] in ("so", "this"):
            valence *= _NEVER_SO_SCALAR
        elif lowered[i - 2] == "without" and lowered[i - 1] == "doubt":
            pass
        elif _is_negated(lowered[i - 2], lex.negations):
            valence *= cfg.negation_scalar
    elif start_i == 2:
        if (lowered[i - 3] == "never" and lowered[i - 2] in ("so", "this")) or lowered[i - 1] in ("so", "this"):
            valence *= _NEVER_SO_SCALAR
        elif lowered[i - 3] == "without" and "doubt" in (lowered[i - 2], lowered[i - 1]):
            pass
        elif _is_negated(lowered[i - 3], lex.negations):
            valence *= cfg.negation_scalar
    return valence


def _special_idioms_check(valence: float, lowered: list[str], i: int, lex: Lexicon, cfg: RuleConfig) -> float:
    onezero = f"{lowered[i - 1]} {lowered[i]}"
    twoonezero = f"{lowered[i - 2]} {lowered[i - 1]} {lowered[i]}"
    twoone = f"{lowered[i - 2]} {lowered[i - 1]}"
    threetwoone = f"{lowered[i - 3]} {lowered[i - 2]} {lowered[i - 1]}"
    threetwo = f"{lowered[i - 3]} {lowered[i - 2]}"

    for seq in (onezero, twoonezero, twoone, threetwoone, threetwo):
        if seq in lex.special_cases:
            valence = lex.special_cases[seq]
            break

    if len(lowered) - 1 > i:
        zeroone = f"{lowered[i]} {lowered[i + 1]}"
        if zeroone in lex.special_cases:
            valence = lex.special_cases[zeroone]
    if len(lowered) - 1 > i + 1:
        zeroonetwo = f"{lowered[i]} {lowered[i + 1]} {lowered[i + 2]}"
        if zeroonetwo in lex.special_cases:
            valence = lex.special_cases[zeroonetwo]

    # "sort of" などの2語の強調・緩和語
    for ngram in (threetwoone, threetwo, twoone):
        if ngram in lex.boosters:
            valence += lex.boosters[ngram] * cfg.booster_increment
    return valence


def _least_check(valence: float, lowered: list[str], i: int, lex: Lexicon, cfg: RuleConfig) -> float:
    if i > 1 and lowered[i - 1] not in lex and lowered[i - 1] == "least":
        if lowered[i - 2] not in ("at", "very"):
            valence *= cfg.negation_scalar
    elif i > 0 and lowered[i - 1] not in lex and lowered[i - 1] == "least":
        valence *= cfg.negation_scalar
    return valence


def _token_valence(i: int, words: list[str], lowered: list[str], cap_diff: bool,
                   lex: Lexicon, cfg: RuleConfig) -> float:
    word = words[i]
    low = lowered[i]
    if low not in lex:
        return 0.0
    valence = lex.valences[low]

    # "no" は直後が辞書語なら否定語として働く
    if low == "no" and i != len(words) - 1 and lowered[i + 1] in lex:
        valence = 0.0
    if (
        (i > 0 and lowered[i - 1] == "no")
        or (i > 1 and lowered[i - 2] == "no")
        or (i > 2 and lowered[i - 3] == "no" and lowered[i - 1] in ("or", "nor"))
    ):
        valence = lex.valences[low] * cfg.negation_scalar

    if word.isupper() and cap_diff:
        valence += cfg.caps_increment if valence > 0 else -cfg.caps_increment

    for start_i in range(cfg.negation_window):
        if i > start_i and lowered[i - (start_i + 1)] not in lex:
            s = _booster_scalar(words[i - (start_i + 1)], valence, cap_diff, lex, cfg)
            if s != 0:
                s *= _BOOSTER_DAMPING[start_i]
            valence += s
            valence = _negation_check(valence, lowered, start_i, i, lex, cfg)
            if start_i == 2 and cfg.but_rule:
                valence = _special_idioms_check(valence, lowered, i, lex, cfg)

    return _least_check(valence, lowered, i, lex, cfg)


def _but_check(lowered: list[str], sentiments: list[float]) -> list[float]:
    # 最初の "but" より前を弱め、後ろを強める
    if "but" not in lowered:
        return sentiments
    bi = lowered.index("but")
    return [
        s * _BUT_BEFORE if si < bi else s * _BUT_AFTER if si > bi else s
        for si, s in enumerate(sentiments)
    ]


def _punctuation_emphasis(tokenized: TokenizedText, cfg: RuleConfig) -> float:
    ep = min(tokenized.exclaim_count, cfg.exclaim_cap) * cfg.exclaim_increment
    qm = 0.0
    qc = tokenized.question_count
    if qc >= max(cfg.question_min_count, 1):
        qm = qc * cfg.question_increment if qc <= cfg.question_cap else cfg.question_flood_amplifier
    return ep + qm


def normalize(score: float, alpha: float = NORMALIZATION_ALPHA) -> float:
    """x / sqrt(x² + α) で -1〜+1 に正規化"""
    norm = score / math.sqrt(score * score + alpha)
    return max(-1.0, min(1.0, norm))


def _score_valence(sentiments: list[float], tokenized: TokenizedText, cfg: RuleConfig) -> SentimentScores:
    total_valence = float(sum(sentiments))
    emphasis = _punctuation_emphasis(tokenized, cfg)
    if total_valence > 0:
        total_valence += emphasis
    elif total_valence < 0:
        total_valence -= emphasis
    compound = normalize(total_valence, cfg.normalization_alpha)

    # 中立語を 1 と数えるため感情語には ±1 を足す
    pos_sum = 0.0
    neg_sum = 0.0
    neu_count = 0
    for s in sentiments:
        if s > 0:
            pos_sum += float(s) + 1
        if s < 0:
            neg_sum += float(s) - 1
        if s == 0:
            neu_count += 1

    if pos_sum > math.fabs(neg_sum):
        pos_sum += emphasis
    elif pos_sum < math.fabs(neg_sum):
        neg_sum -= emphasis

    total = pos_sum + math.fabs(neg_sum) + neu_count
    return SentimentScores(
        neg=math.fabs(neg_sum / total),
        neu=math.fabs(neu_count / total),
        pos=math.fabs(pos_sum / total),
        compound=compound,
    )


def score_text(text: str, lex: Lexicon, cfg: RuleConfig = DEFAULT_RULES) -> SentimentScores:
    """文字列の感情スコアを計算

    トークンが無い場合は neg=0, neu=1, pos=0, compound=0。
    """
    tokenized = tokenize(text, lex)
    words = tokenized.tokens
    if not words:
        return SentimentScores(neg=0.0, neu=1.0, pos=0.0, compound=0.0)

    lowered = [w.lower() for w in words]
    cap_diff = _allcap_differential(words)

    sentiments: list[float] = []
    for i, low in enumerate(lowered):
        # 強調語自体と "kind of" の "kind" は感情値を持たない
        if low in lex.boosters:
            sentiments.append(0.0)
            continue
        if i < len(words) - 1 and low == "kind" and lowered[i + 1] == "of":
            sentiments.append(0.0)
            continue
        sentiments.append(_token_valence(i, words, lowered, cap_diff, lex, cfg))

    if cfg.but_rule:
        sentiments = _but_check(lowered, sentiments)
    return _score_valence(sentiments, tokenized, cfg)


def score_document(doc: Document, lex: Lexicon, cfg: RuleConfig = DEFAULT_RULES) -> SentimentScores:
    """文書の感情スコア"""
    return score_text(doc.text, lex, cfg)


def classify_polarity(s: SentimentScores, cfg: RuleConfig = DEFAULT_RULES) -> Polarity:
    """compound を閾値で positive / negative / neutral に分類（境界値は含む）"""
    if s.compound >= cfg.pos_threshold:
        return Polarity.POSITIVE
    if s.compound <= cfg.neg_threshold:
        return Polarity.NEGATIVE
    return Polarity.NEUTRAL
