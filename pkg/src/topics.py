"""トピックモデル（LDA、崩壊型ギブスサンプリング）

- 語彙の構築（小文字化・英字のみ・ストップワード除去・文書頻度で絞り込み）
- 学習: p(z=k) ∝ (n_dk + α)(n_kw + β)/(n_k + Vβ)
- 未知文書のトピック分布（学習済みの単語カウントを固定した fold-in）
- 日次の特徴ベクトル（分布モード / 件数モード）
"""
from __future__ import annotations

import bisect
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from .aggregate import DailySentiment
from .config import (
    DEFAULT_STOPWORDS_PATH,
    INFER_BURN_IN,
    INFER_SAMPLES,
    LDA_BETA,
    LDA_ITERATIONS,
    MAX_DF_FRACTION,
    MIN_DF,
    N_TOPICS,
    TOP_WORDS,
)
from .corpus import DayBucket, Document
from .errors import DataError
from .utils import artifact_meta, read_json, stable_int, write_json

logger = logging.getLogger(__name__)

MODEL_FORMAT = "senvol-lda"
MODEL_VERSION = 1

_WORD_RE = re.compile(r"[a-z]+")

TopicMode = Literal["distribution", "count"]

# (sweep, 文書×トピックのカウント, トピック合計, 文書長)
SweepCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def analyze(text: str) -> list[str]:
    """小文字化して英字の連続（2文字以上）を取り出す"""
    return [w for w in _WORD_RE.findall(text.lower()) if len(w) >= 2]


def load_stopwords(path: Path = DEFAULT_STOPWORDS_PATH) -> frozenset[str]:
    """ストップワード（1行1語、# はコメント）"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"ストップワードを読み込めません: {path}: {e}") from e
    return frozenset(
        line.strip().lower() for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


@dataclass
class Vocabulary:
    """語彙（id は 0..V-1 の連番、トークンの辞書順）"""
    tokens: list[str]
    doc_freq: list[int]
    stopwords: frozenset[str] = frozenset()
    min_df: int = MIN_DF
    max_df_fraction: float = MAX_DF_FRACTION
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, text: str) -> list[int]:
        """語彙 id の列（語彙外は落とす）"""
        return [self.index[w] for w in analyze(text) if w in self.index]


def build_vocab(
    docs: Sequence[Document],
    stopwords: frozenset[str] = frozenset(),
    min_df: int = MIN_DF,
    max_df_fraction: float = MAX_DF_FRACTION,
) -> Vocabulary:
    """語彙を作る

    文書頻度が min_df 未満、または max_df_fraction·D を超える語とストップワードを除く。

    Raises:
        DataError: 文書が無い、または絞り込み後に語彙が空
    """
    if not docs:
        raise DataError("語彙を作る文書がありません")
    df: dict[str, int] = {}
    for doc in docs:
        for w in set(analyze(doc.text)):
            df[w] = df.get(w, 0) + 1

    max_df = max_df_fraction * len(docs)
    kept = sorted(
        w for w, n in df.items()
        if w not in stopwords and min_df <= n <= max_df
    )
    if not kept:
        raise DataError(
            f"絞り込み後の語彙が空です（文書数={len(docs)}, min_df={min_df}, max_df_fraction={max_df_fraction}）"
        )
    logger.info("語彙: %d 語（候補 %d 語）", len(kept), len(df))
    return Vocabulary(
        tokens=kept,
        doc_freq=[df[w] for w in kept],
        stopwords=frozenset(stopwords),
        min_df=min_df,
        max_df_fraction=max_df_fraction,
    )


@dataclass(eq=False)
class LdaModel:
    """学習済み LDA モデル"""
    vocab: Vocabulary
    n_topics: int
    alpha: float
    beta: float
    topic_word_counts: np.ndarray  # K×V（int64）
    seed: int
    iterations: int
    checkpoints: list[tuple[int, float]] = field(default_factory=list)  # (sweep, perplexity)
    _phi: Optional[np.ndarray] = field(default=None, init=False, repr=False)
    _phi_rows: Optional[list[list[float]]] = field(default=None, init=False, repr=False)

    @property
    def topic_totals(self) -> np.ndarray:
        return self.topic_word_counts.sum(axis=1)

    @property
    def phi(self) -> np.ndarray:
        """トピック-単語分布 K×V（各行の和は 1）"""
        if self._phi is None:
            v_beta = len(self.vocab) * self.beta
            self._phi = (self.topic_word_counts + self.beta) / (self.topic_totals[:, None] + v_beta)
        return self._phi

    @property
    def phi_rows(self) -> list[list[float]]:
        """φ を単語ごとの行（V×K）にしたリスト（fold-in 用）"""
        if self._phi_rows is None:
            self._phi_rows = self.phi.T.tolist()
        return self._phi_rows


@dataclass(frozen=True)
class DocTopicDist:
    """文書のトピック分布 θ"""
    theta: np.ndarray


@dataclass(frozen=True)
class DayFeatureVector:
    """取引日の特徴ベクトル"""
    trading_day: date
    features: np.ndarray
    mode: str = "distribution"


def _doc_rng(seed: int, doc_id: str) -> np.random.Generator:
    # 文書ごとのサブストリーム（文書の並び順に依存しない）
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, stable_int(doc_id)]))


def _draw(cum: list[float], u: float) -> int:
    # cum は累積の重み。u·合計 を超える最初の位置
    k = bisect.bisect_right(cum, u * cum[-1])
    return min(k, len(cum) - 1)


def gibbs_train(
    docs: Sequence[Document],
    vocab: Vocabulary,
    n_topics: int = N_TOPICS,
    alpha: Optional[float] = None,
    beta: float = LDA_BETA,
    iterations: int = LDA_ITERATIONS,
    seed: int = 0,
    on_sweep: Optional[SweepCallback] = None,
    checkpoint_every: int = 0,
    held_out: Optional[Sequence[Document]] = None,
) -> LdaModel:
    """崩壊型ギブスサンプリングで LDA を学習

    文書は id 順に並べ替えてから処理し、初期割り当ては (seed, 文書 id) から作る
    サブストリームで決める。同じ seed なら結果はビット単位で一致する。

    Args:
        docs: 学習文書
        vocab: 語彙（語彙外の語は落とす）
        n_topics: トピック数 K
        alpha: 文書-トピック事前分布（None なら 50/K）
        beta: トピック-単語事前分布
        iterations: スイープ回数
        seed: 乱数シード
        on_sweep: 各スイープ後に呼ぶ関数（カウントの検査用）
        checkpoint_every: この間隔で held_out のパープレキシティを記録（0 なら記録しない）
        held_out: パープレキシティ計算用の文書

    Raises:
        DataError: V < K、全文書が空
    """
    k_topics = n_topics
    v_size = len(vocab)
    if k_topics < 1:
        raise DataError(f"トピック数は1以上にしてください: {k_topics}")
    if v_size < k_topics:
        raise DataError(f"語彙数がトピック数より少ないです: V={v_size} < K={k_topics}")
    if iterations < 1:
        raise DataError(f"イテレーション数は1以上にしてください: {iterations}")
    alpha = 50.0 / k_topics if alpha is None else alpha

    doc_ids: list[str] = []
    doc_words: list[list[int]] = []
    n_empty = 0
    for doc in sorted(docs, key=lambda d: d.id):
        words = vocab.encode(doc.text)
        if not words:
            n_empty += 1
            continue
        doc_ids.append(doc.id)
        doc_words.append(words)
    if n_empty:
        logger.warning("語彙内の語を含まない文書 %d 件をスキップしました", n_empty)
    if not doc_words:
        raise DataError("学習に使える文書がありません（全て空）")

    n_docs = len(doc_words)
    # 1トークンごとの更新は要素数 K の小さな配列になるので、カウントは Python のリストで持つ
    n_dk = [[0] * k_topics for _ in range(n_docs)]
    n_wk = [[0] * k_topics for _ in range(v_size)]  # 行アクセス用に V×K
    n_k = [0] * k_topics
    doc_len = np.array([len(w) for w in doc_words], dtype=np.int64)

    z: list[list[int]] = []
    for d, (doc_id, words) in enumerate(zip(doc_ids, doc_words)):
        zd = _doc_rng(seed, doc_id).integers(k_topics, size=len(words)).tolist()
        for w, k in zip(words, zd):
            n_dk[d][k] += 1
            n_wk[w][k] += 1
            n_k[k] += 1
        z.append(zd)

    v_beta = v_size * beta
    topics = range(k_topics)
    cum = [0.0] * k_topics
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 1]))
    checkpoints: list[tuple[int, float]] = []
    logger.info("LDA 学習開始: 文書=%d 語彙=%d K=%d α=%r β=%r 反復=%d", n_docs, v_size, k_topics, alpha, beta, iterations)

    for sweep in range(1, iterations + 1):
        for d in range(n_docs):
            words = doc_words[d]
            zd = z[d]
            ndk = n_dk[d]
            u = rng.random(len(words)).tolist()
            for i, w in enumerate(words):
                k = zd[i]
                nwk = n_wk[w]
                ndk[k] -= 1
                nwk[k] -= 1
                n_k[k] -= 1
                total = 0.0
                for t in topics:
                    total += (ndk[t] + alpha) * (nwk[t] + beta) / (n_k[t] + v_beta)
                    cum[t] = total
                k = _draw(cum, u[i])
                zd[i] = k
                ndk[k] += 1
                nwk[k] += 1
                n_k[k] += 1

        if on_sweep is not None:
            on_sweep(sweep, np.array(n_dk, dtype=np.int64), np.array(n_k, dtype=np.int64), doc_len)
        if checkpoint_every and held_out and (sweep % checkpoint_every == 0 or sweep == 1):
            snapshot = LdaModel(vocab, k_topics, alpha, beta, np.array(n_wk, dtype=np.int64).T.copy(), seed, sweep)
            try:
                ppl = perplexity(snapshot, held_out, seed=seed)
            except DataError as e:
                logger.warning("held-out パープレキシティを計算できません: %s", e)
                checkpoint_every = 0
                continue
            checkpoints.append((sweep, ppl))
            logger.info("LDA sweep %d: held-out perplexity=%.4f", sweep, ppl)

    return LdaModel(
        vocab=vocab,
        n_topics=k_topics,
        alpha=alpha,
        beta=beta,
        topic_word_counts=np.ascontiguousarray(np.array(n_wk, dtype=np.int64).T),
        seed=seed,
        iterations=iterations,
        checkpoints=checkpoints,
    )


def _fold_in(model: LdaModel, words: list[int], rng: np.random.Generator, burn_in: int, samples: int) -> np.ndarray:
    k_topics = model.n_topics
    alpha = model.alpha
    phi_rows = model.phi_rows  # V×K（固定）
    n_dk = [0] * k_topics
    zd = rng.integers(k_topics, size=len(words)).tolist()
    for k in zd:
        n_dk[k] += 1

    topics = range(k_topics)
    cum = [0.0] * k_topics
    denom = len(words) + k_topics * alpha
    acc = np.zeros(k_topics)
    for sweep in range(burn_in + samples):
        u = rng.random(len(words)).tolist()
        for i, w in enumerate(words):
            k = zd[i]
            n_dk[k] -= 1
            phi_w = phi_rows[w]
            total = 0.0
            for t in topics:
                total += (n_dk[t] + alpha) * phi_w[t]
                cum[t] = total
            k = _draw(cum, u[i])
            zd[i] = k
            n_dk[k] += 1
        if sweep >= burn_in:
            acc += (np.array(n_dk, dtype=np.float64) + alpha) / denom
    theta = acc / samples
    return theta / theta.sum()


def infer_theta(
    model: LdaModel,
    doc: Document,
    burn_in: int = INFER_BURN_IN,
    samples: int = INFER_SAMPLES,
    seed: int = 0,
) -> DocTopicDist:
    """未知文書のトピック分布

    学習済みの単語カウントを固定してギブスサンプリングし、
    burn-in 後の (n_dk + α)/(N_d + Kα) を平均する。語彙内の語が無ければ一様分布。
    """
    if samples < 1:
        raise DataError(f"サンプル数は1以上にしてください: {samples}")
    words = model.vocab.encode(doc.text)
    if not words:
        return DocTopicDist(theta=np.full(model.n_topics, 1.0 / model.n_topics))
    theta = _fold_in(model, words, _doc_rng(seed, doc.id), burn_in, samples)
    return DocTopicDist(theta=theta)


def top_words(model: LdaModel, topic: int, m: int = TOP_WORDS) -> list[tuple[str, float]]:
    """φ の大きい順に m 語（同値は辞書順）"""
    if not 0 <= topic < model.n_topics:
        raise DataError(f"トピック番号が範囲外です: {topic}")
    if m < 1:
        raise DataError(f"語数は1以上にしてください: {m}")
    row = model.phi[topic]
    order = sorted(range(len(model.vocab)), key=lambda w: (-row[w], model.vocab.tokens[w]))
    return [(model.vocab.tokens[w], float(row[w])) for w in order[:m]]


def topics_report(model: LdaModel, m: int = TOP_WORDS) -> list[dict]:
    """トピックごとの上位語（JSON 出力用）"""
    return [
        {"topic_id": k, "top_words": [[tok, phi] for tok, phi in top_words(model, k, m)]}
        for k in range(model.n_topics)
    ]


def day_feature_vector(
    model: LdaModel,
    bucket: DayBucket,
    mode: TopicMode = "distribution",
    seed: int = 0,
    burn_in: int = INFER_BURN_IN,
    samples: int = INFER_SAMPLES,
) -> DayFeatureVector:
    """取引日の特徴ベクトル

    distribution: その日の文書の θ の平均（文書が無ければ一様）
    count: 文書ごとに θ が最大のトピックを数える（文書が無ければ 0 ベクトル）
    """
    k_topics = model.n_topics
    thetas = [infer_theta(model, doc, burn_in, samples, seed).theta for doc in bucket.documents]
    if mode == "distribution":
        if not thetas:
            features = np.full(k_topics, 1.0 / k_topics)
        else:
            features = np.mean(np.vstack(thetas), axis=0)
    elif mode == "count":
        features = np.zeros(k_topics)
        for theta in thetas:
            features[int(np.argmax(theta))] += 1
    else:
        raise DataError(f"未知の特徴量モードです: {mode}")
    return DayFeatureVector(trading_day=bucket.trading_day, features=features, mode=mode)


def with_sentiment(fv: DayFeatureVector, daily: DailySentiment) -> DayFeatureVector:
    """トピック特徴に日次感情（neg, neu, pos, compound, sentd）を連結"""
    extra = np.array([daily.mean_neg, daily.mean_neu, daily.mean_pos, daily.mean_compound, daily.sentd])
    return DayFeatureVector(
        trading_day=fv.trading_day,
        features=np.concatenate([fv.features, extra]),
        mode="topics+sentiment",
    )


def perplexity(
    model: LdaModel,
    docs: Sequence[Document],
    burn_in: int = 10,
    samples: int = 5,
    seed: int = 0,
) -> float:
    """文書集合のパープレキシティ exp(-Σ log p(w|d) / N)

    Raises:
        DataError: 語彙内の語が1つも無い
    """
    phi = model.phi
    log_lik = 0.0
    n_tokens = 0
    for doc in docs:
        words = model.vocab.encode(doc.text)
        if not words:
            continue
        theta = _fold_in(model, words, _doc_rng(seed, doc.id), burn_in, samples)
        probs = theta @ phi[:, words]
        log_lik += float(np.log(probs).sum())
        n_tokens += len(words)
    if n_tokens == 0:
        raise DataError("パープレキシティを計算できる語がありません")
    return math.exp(-log_lik / n_tokens)


def save_model(path: Path, model: LdaModel, config_hash: str = "") -> Path:
    """モデルを JSON で保存（カウントは整数、実数は repr で往復一致）"""
    data = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "meta": artifact_meta("topics", config_hash, model.seed),
        "n_topics": model.n_topics,
        "alpha": model.alpha,
        "beta": model.beta,
        "seed": model.seed,
        "iterations": model.iterations,
        "vocab": {
            "tokens": model.vocab.tokens,
            "doc_freq": model.vocab.doc_freq,
            "stopwords": sorted(model.vocab.stopwords),
            "min_df": model.vocab.min_df,
            "max_df_fraction": model.vocab.max_df_fraction,
        },
        "topic_word_counts": model.topic_word_counts.tolist(),
        "checkpoints": [[s, p] for s, p in model.checkpoints],
    }
    return write_json(path, data)


def load_model(path: Path) -> LdaModel:
    """保存したモデルを読み込む

    Raises:
        DataError: 形式・バージョンが違う、または内容が壊れている
    """
    data = read_json(path)
    if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
        raise DataError(f"LDA モデルファイルではありません: {path}")
    if data.get("version") != MODEL_VERSION:
        raise DataError(f"未対応のモデルバージョンです: {data.get('version')}")
    try:
        v = data["vocab"]
        vocab = Vocabulary(
            tokens=list(v["tokens"]),
            doc_freq=list(v["doc_freq"]),
            stopwords=frozenset(v["stopwords"]),
            min_df=int(v["min_df"]),
            max_df_fraction=float(v["max_df_fraction"]),
        )
        counts = np.asarray(data["topic_word_counts"], dtype=np.int64)
        model = LdaModel(
            vocab=vocab,
            n_topics=int(data["n_topics"]),
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            topic_word_counts=counts,
            seed=int(data["seed"]),
            iterations=int(data["iterations"]),
            checkpoints=[(int(s), float(p)) for s, p in data.get("checkpoints", [])],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"LDA モデルファイルが壊れています: {path}: {e}") from e
    if counts.shape != (model.n_topics, len(vocab)):
        raise DataError(f"カウント行列の形が不正です: {counts.shape}")
    return model
