"""感情スコアリングのテスト（pytest不要）

実行:
    python -m scripts.test_sentiment

確認内容:
  1. 手計算の値との一致（否定、強調語、全大文字、感嘆符・疑問符、but 節）
  2. 性質（compound の範囲、割合の和、辞書の符号反転）
  3. vaderSentiment がある場合は fixtures/sentences.txt の全文で照合
"""
from __future__ import annotations

import math
import random
import sys

from scripts._testkit import FIXTURES, close, require_module, run_tests, tempdir

from src.config import DEFAULT_EMOJI_PATH
from src.errors import ConfigError, DataError
from src.sentiment import (
    DEFAULT_RULES,
    Lexicon,
    Polarity,
    RuleConfig,
    SentimentScores,
    classify_polarity,
    load_lexicon,
    normalize,
    score_text,
    tokenize,
)
from src.utils import file_sha256

LEX = load_lexicon()
ALPHA = 15.0


def _compound(total: float) -> float:
    return total / math.sqrt(total * total + ALPHA)


def _sentences() -> list[str]:
    text = (FIXTURES / "sentences.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip() and not line.startswith("#")]


# ----------------------------------------------------------------------
# 手計算との一致
# ----------------------------------------------------------------------

def test_single_positive_word():
    s = score_text("good", LEX)
    assert close(s.compound, _compound(1.9), 1e-12)
    assert (s.neg, s.neu, s.pos) == (0.0, 0.0, 1.0)


def test_negation_flips_and_scales():
    s = score_text("not good", LEX)
    v = 1.9 * -0.74
    assert close(s.compound, _compound(v), 1e-12)
    assert close(s.neg, (1 - v) / (1 - v + 1), 1e-12)
    assert close(s.neu, 1 / (1 - v + 1), 1e-12)


def test_booster_increases_intensity():
    s = score_text("very good", LEX)
    assert close(s.compound, _compound(1.9 + 0.293), 1e-12)
    assert s.compound > score_text("good", LEX).compound


def test_dampener_decreases_intensity():
    s = score_text("slightly good", LEX)
    assert close(s.compound, _compound(1.9 - 0.293), 1e-12)


def test_allcaps_emphasis():
    s = score_text("GOOD day", LEX)
    assert close(s.compound, _compound(1.9 + 0.733), 1e-12)
    # 全部が大文字なら強調しない
    assert close(score_text("GOOD DAY", LEX).compound, _compound(1.9), 1e-12)


def test_exclamation_marks_add_0292_each_up_to_four():
    for n in range(0, 7):
        s = score_text("good" + "!" * n, LEX)
        assert close(s.compound, _compound(1.9 + min(n, 4) * 0.292), 1e-12), n


def test_question_marks():
    assert close(score_text("good?", LEX).compound, _compound(1.9), 1e-12)
    assert close(score_text("good??", LEX).compound, _compound(1.9 + 2 * 0.18), 1e-12)
    assert close(score_text("good???", LEX).compound, _compound(1.9 + 3 * 0.18), 1e-12)
    assert close(score_text("good????", LEX).compound, _compound(1.9 + 0.96), 1e-12)


def test_literal_question_rule_is_configurable():
    cfg = RuleConfig(question_min_count=1, question_flood_amplifier=3 * 0.18)
    assert close(score_text("good?", LEX, cfg).compound, _compound(1.9 + 0.18), 1e-12)
    assert close(score_text("good?????", LEX, cfg).compound, _compound(1.9 + 3 * 0.18), 1e-12)


def test_but_clause_weighting():
    s = score_text("good but bad", LEX)
    before, after = 1.9 * 0.5, -2.5 * 1.5
    assert close(s.compound, _compound(before + after), 1e-12)
    pos_sum, neg_sum = before + 1, after - 1
    total = pos_sum + abs(neg_sum) + 1
    assert close(s.pos, pos_sum / total, 1e-12)
    assert close(s.neg, abs(neg_sum) / total, 1e-12)


def test_but_rule_can_be_disabled():
    s = score_text("good but bad", LEX, RuleConfig(but_rule=False))
    assert close(s.compound, _compound(1.9 - 2.5), 1e-12)


def test_no_as_negator():
    s = score_text("no good", LEX)
    assert close(s.compound, _compound(1.9 * -0.74), 1e-12)


def test_empty_text():
    for text in ["", "   "]:
        assert score_text(text, LEX) == SentimentScores(neg=0.0, neu=1.0, pos=0.0, compound=0.0)


def test_neutral_text():
    s = score_text("The board meets on Tuesday", LEX)
    assert s.compound == 0.0
    assert s.neu == 1.0
    assert classify_polarity(s) is Polarity.NEUTRAL


def test_emoticon_tokens_survive():
    tok = tokenize("Strong quarter :) $BP!", LEX)
    assert tok.tokens == ["Strong", "quarter", ":)", "$BP!"]
    assert tok.exclaim_count == 1


def test_emoji_replaced_by_description():
    s = score_text("😢", LEX)
    assert close(s.compound, _compound(-2.1), 1e-12)  # "crying face"


# ----------------------------------------------------------------------
# 性質
# ----------------------------------------------------------------------

def _random_texts(n: int, seed: int, exclude: frozenset[str] = frozenset()) -> list[str]:
    rng = random.Random(seed)
    words = list(LEX.valences) + ["not", "very", "but", "the", "market", "kind", "of", "least", "no", "BIG", "GOOD"]
    words = [w for w in words if w not in exclude]
    texts = []
    for _ in range(n):
        toks = [rng.choice(words) for _ in range(rng.randint(1, 12))]
        texts.append(" ".join(toks) + rng.choice(["", "!", "!!", "?", "??", "????"]))
    return texts


def test_compound_in_range_and_proportions_sum_to_one():
    for text in _random_texts(300, 1):
        s = score_text(text, LEX)
        assert -1.0 <= s.compound <= 1.0, text
        assert close(s.neg + s.neu + s.pos, 1.0, 1e-9), text
        assert min(s.neg, s.neu, s.pos) >= 0.0, text


def test_flipped_lexicon_negates_compound():
    # "no" の直後が辞書語の場合と慣用句・2語の緩和語は符号に依存しない補正なので除く
    cfg = RuleConfig(but_rule=False)
    flipped = LEX.flipped()
    for text in _random_texts(200, 2, exclude=frozenset({"no"})):
        a = score_text(text, LEX, cfg).compound
        b = score_text(text, flipped, cfg).compound
        assert close(a, -b, 1e-12), text


def test_normalize_limits():
    assert normalize(0.0) == 0.0
    assert normalize(1e6) <= 1.0
    assert normalize(-1e6) >= -1.0
    assert close(normalize(1e6), 1.0, 1e-9)


def test_polarity_thresholds_inclusive():
    assert classify_polarity(SentimentScores(0, 1, 0, 0.05)) is Polarity.POSITIVE
    assert classify_polarity(SentimentScores(0, 1, 0, -0.05)) is Polarity.NEGATIVE
    assert classify_polarity(SentimentScores(0, 1, 0, 0.0499)) is Polarity.NEUTRAL


def test_invalid_rule_config():
    for kwargs in [{"exclaim_increment": -0.1}, {"pos_threshold": -0.1}, {"normalization_alpha": 0.0}]:
        try:
            RuleConfig(**kwargs)
        except ConfigError:
            continue
        raise AssertionError(f"ConfigError が送出されませんでした: {kwargs}")


def test_lexicon_validation():
    try:
        Lexicon(valences={})
    except DataError:
        pass
    else:
        raise AssertionError("空の辞書で DataError が送出されませんでした")
    with tempdir() as d:
        path = d / "lex.tsv"
        path.write_text("good\t9.0\t0.1\n", encoding="utf-8")
        try:
            load_lexicon(path, None)
        except DataError:
            pass
        else:
            raise AssertionError("範囲外の値で DataError が送出されませんでした")


LEXICON_SHA256 = "1ec9c6e9ee19aade328f8beb393a6afa71a5bb3acf7d3cc22d4ef568df374bf5"
EMOJI_SHA256 = "b8d54223ae1ce22a3e12c1f745316b71678c328eb5f5d3063a842f37cfbe2823"


def test_shipped_lexicon_is_pinned():
    assert LEX.sha256 == LEXICON_SHA256
    assert file_sha256(DEFAULT_EMOJI_PATH) == EMOJI_SHA256
    assert len(LEX.emojis) > 3000
    # 金融向けの語を独自に足していない
    for token in ["rally", "slump", "plunge", "surge", "bullish"]:
        assert token not in LEX, token
    for token, value in [("solid", 0.6), ("gain", 2.4), ("disappoint", -1.7), ("good", 1.9), ("crash", -1.7)]:
        assert LEX.valences[token] == value, token


def test_lexicon_lookup_is_case_insensitive():
    lex = Lexicon(valences={"Profit": 1.9, ":D": 2.3, "LOL": 2.9, "lol": 1.8})
    assert "profit" in lex and ":d" in lex
    # 小文字の項目がある場合はそちらを使う
    assert lex.valences["lol"] == 1.8
    assert close(score_text("PROFIT up", lex).compound, _compound(1.9 + 0.733), 1e-12)
    assert close(score_text(":D", lex).compound, _compound(2.3), 1e-12)
    with tempdir() as d:
        path = d / "lex.tsv"
        path.write_text("Gain\t2.4\t0.5\n", encoding="utf-8")
        assert load_lexicon(path, None).valences == {"gain": 2.4}


def test_emoji_table_keeps_keycap_entries():
    assert [v for k, v in LEX.emojis.items() if k.startswith("#")] == ["keycap: #", "keycap: #"]


def test_lexicon_extra_columns_ignored_and_hash_recorded():
    with tempdir() as d:
        path = d / "lex.tsv"
        path.write_text("good\t1.9\t0.9\t[2, 2, 1]\n", encoding="utf-8")
        lex = load_lexicon(path, None)
        assert lex.valences == {"good": 1.9}
        assert len(lex.sha256) == 64


# ----------------------------------------------------------------------
# vaderSentiment との照合
# ----------------------------------------------------------------------

def test_shipped_tables_match_vader():
    vader = require_module("vaderSentiment.vaderSentiment")
    analyzer = vader.SentimentIntensityAnalyzer()
    for token, value in analyzer.lexicon.items():
        assert LEX.valences[token.lower()] == analyzer.lexicon.get(token.lower(), value), token
    assert dict(LEX.emojis) == dict(analyzer.emojis)
    assert {w: (1 if v > 0 else -1) for w, v in vader.BOOSTER_DICT.items()} == dict(LEX.boosters)
    assert frozenset(vader.NEGATE) == LEX.negations
    assert dict(vader.SPECIAL_CASES) == dict(LEX.special_cases)


def test_matches_vader_on_sentence_fixture():
    vader = require_module("vaderSentiment.vaderSentiment")
    analyzer = vader.SentimentIntensityAnalyzer()
    sentences = _sentences()
    assert len(sentences) == 50
    for text in sentences:
        ref = analyzer.polarity_scores(text)
        ours = score_text(text, LEX, DEFAULT_RULES)
        assert round(ours.neg, 3) == ref["neg"], (text, ours, ref)
        assert round(ours.neu, 3) == ref["neu"], (text, ours, ref)
        assert round(ours.pos, 3) == ref["pos"], (text, ours, ref)
        assert abs(ours.compound - ref["compound"]) <= 1e-4, (text, ours, ref)


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "sentiment"))
