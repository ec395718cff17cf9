"""設定ファイル

パス・既定値・実行設定（RunConfig）をまとめる。
設定ファイルは KEY=VALUE 形式のプレーンテキストで、python-dotenv の
dotenv_values() で読む（os.environ には一切触れない）。
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

TOOL_NAME = "senvol"
TOOL_VERSION = "1.0.0"

# パス設定
BASE_DIR = Path(__file__).parent.parent
DATA_DIR = Path(__file__).parent / "data"
OUTPUT_DIR = BASE_DIR / "output"
FIXTURES_DIR = BASE_DIR / "fixtures"
DEFAULT_LEXICON_PATH = DATA_DIR / "lexicon.tsv"
DEFAULT_EMOJI_PATH = DATA_DIR / "emoji.tsv"
DEFAULT_STOPWORDS_PATH = DATA_DIR / "stopwords.txt"

# 入力検証
MALFORMED_FATAL_RATIO = 0.5  # これを超える不正行があれば読み込み失敗
MALFORMED_MIN_LINES = 2  # 比率判定に必要な最小行数

# 感情スコア
EXCLAIM_INCREMENT = 0.292
QUESTION_INCREMENT = 0.18
EXCLAIM_CAP = 4
QUESTION_CAP = 3
QUESTION_MIN_COUNT = 2
QUESTION_FLOOD_AMPLIFIER = 0.96
NEGATION_WINDOW = 3
NEGATION_SCALAR = -0.74
CAPS_INCREMENT = 0.733
BOOSTER_INCREMENT = 0.293
NORMALIZATION_ALPHA = 15.0
POS_THRESHOLD = 0.05
NEG_THRESHOLD = -0.05

# 市場データ
ANNUALIZATION = 252
VOLATILITY_WINDOW = 10

# 統計
SIGNIFICANCE_LEVEL = 0.05
GRANGER_LAGS = (1, 2, 3)
SENTIMENT_DIMS = ("neg", "pos", "neu", "sentd")
MARKET_TARGETS = ("returns", "volatility")
CORRELATION_LAGS = (0, 1)

# トピックモデル（α は None のとき 50/K）
N_TOPICS = 15
LDA_ALPHA: Optional[float] = None
LDA_BETA = 0.01
LDA_ITERATIONS = 1000
INFER_BURN_IN = 50
INFER_SAMPLES = 20
MIN_DF = 2
MAX_DF_FRACTION = 0.5
TOP_WORDS = 10

# 分類器
SPLIT_FRACTION = 0.8
LEARNING_RATE = 0.1
EPOCHS = 500
L2_LAMBDA = 1e-3

DEFAULT_SEED = 42

FeatureMode = Literal["distribution", "count", "topics+sentiment"]
SourceName = Literal["headline", "tweet", "story"]


def _split_list(value: Any) -> Any:
    """"a,b,c" 形式の文字列をリストに変換（設定ファイル用）"""
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return value


class RunConfig(BaseModel):
    """パイプライン実行設定

    設定ファイルのキーとコマンドフラグは同名（`volatility_window` ⇔ `--volatility-window`）。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    documents: list[Path] = Field(default_factory=list)
    dataset_names: list[str] = Field(default_factory=list)
    prices: Optional[Path] = None
    lexicon: Path = DEFAULT_LEXICON_PATH
    emoji_lexicon: Optional[Path] = DEFAULT_EMOJI_PATH
    stopwords: Path = DEFAULT_STOPWORDS_PATH
    output_dir: Path = OUTPUT_DIR

    source: Optional[SourceName] = None
    cashtag_only: bool = False
    but_rule: bool = True

    volatility_window: int = Field(VOLATILITY_WINDOW, ge=2)
    sample_variance: bool = False
    lags: list[int] = Field(default_factory=lambda: list(GRANGER_LAGS))

    n_topics: int = Field(N_TOPICS, ge=1)
    lda_alpha: Optional[float] = Field(LDA_ALPHA, gt=0)
    lda_beta: float = Field(LDA_BETA, gt=0)
    lda_iterations: int = Field(LDA_ITERATIONS, ge=1)
    infer_burn_in: int = Field(INFER_BURN_IN, ge=0)
    infer_samples: int = Field(INFER_SAMPLES, ge=1)
    min_df: int = Field(MIN_DF, ge=1)
    max_df_fraction: float = Field(MAX_DF_FRACTION, gt=0, le=1)
    feature_mode: FeatureMode = "distribution"

    split_fraction: float = Field(SPLIT_FRACTION, gt=0, lt=1)
    learning_rate: float = Field(LEARNING_RATE, gt=0)
    epochs: int = Field(EPOCHS, ge=1)
    l2_lambda: float = Field(L2_LAMBDA, ge=0)
    standardize: bool = True

    seed: int = DEFAULT_SEED

    @field_validator("documents", "dataset_names", "lags", mode="before")
    @classmethod
    def _split_comma(cls, v: Any) -> Any:
        return _split_list(v)

    @field_validator("lags")
    @classmethod
    def _check_lags(cls, v: list[int]) -> list[int]:
        if not v or any(k < 1 for k in v):
            raise ValueError("lags は 1 以上の整数のリストで指定してください")
        return sorted(set(v))

    @model_validator(mode="after")
    def _check_names(self) -> "RunConfig":
        if self.dataset_names and len(self.dataset_names) != len(self.documents):
            raise ValueError(
                f"dataset_names の数 ({len(self.dataset_names)}) が documents の数 "
                f"({len(self.documents)}) と一致しません"
            )
        return self

    # ------------------------------------------------------------------
    @property
    def alpha(self) -> float:
        """LDA の文書-トピック事前分布（未指定なら 50/K）"""
        return self.lda_alpha if self.lda_alpha is not None else 50.0 / self.n_topics

    def datasets(self) -> list[tuple[str, Path]]:
        """(データセット名, 文書ファイル) の一覧。名前が無ければファイル名の stem"""
        names = self.dataset_names or [p.stem for p in self.documents]
        return list(zip(names, self.documents))

    def require(self, *fields: str) -> None:
        """指定フィールドの参照ファイルが存在することを確認

        Raises:
            ConfigError: 未指定またはファイルが存在しない場合
        """
        for name in fields:
            value = getattr(self, name)
            paths = value if isinstance(value, list) else [value]
            if value is None or (isinstance(value, list) and not value):
                raise ConfigError(f"{name} が指定されていません")
            for p in paths:
                if not Path(p).is_file():
                    raise ConfigError(f"{name} のファイルが見つかりません: {p}")

    def config_hash(self, keys: Optional[list[str]] = None) -> str:
        """設定ハッシュ（sha256）

        パスはファイル内容のハッシュに置き換えるため、置き場所が違っても
        同じ入力・同じ設定なら同じ値になる。output_dir は含めない。

        Args:
            keys: 対象キー（None なら output_dir 以外の全キー）
        """
        data = self.model_dump(mode="json")
        data.pop("output_dir", None)
        if keys is not None:
            data = {k: data[k] for k in keys}
        for name in ("documents", "prices", "lexicon", "emoji_lexicon", "stopwords"):
            if name not in data or data[name] is None:
                continue
            if isinstance(data[name], list):
                data[name] = [_content_id(Path(p)) for p in data[name]]
            else:
                data[name] = _content_id(Path(data[name]))
        data["tool_version"] = TOOL_VERSION
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _content_id(path: Path) -> str:
    from .utils import file_sha256

    return file_sha256(path) if path.is_file() else f"missing:{path.name}"


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_run_config(
    config_path: Optional[Path] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """設定ファイル + コマンドフラグから RunConfig を作成

    フラグで指定された値（None 以外）が設定ファイルの値を上書きする。
    設定ファイル中の相対パスは設定ファイルの場所を基準に解決する。

    Args:
        config_path: KEY=VALUE 形式の設定ファイル（省略可）
        overrides: コマンドフラグ由来の値

    Raises:
        ConfigError: 設定ファイルが読めない、未知のキー、値が不正な場合
    """
    values: dict[str, Any] = {}
    if config_path is not None:
        if not config_path.is_file():
            raise ConfigError(f"設定ファイルが見つかりません: {config_path}")
        raw = dotenv_values(config_path)
        base = config_path.parent
        for key, value in raw.items():
            if value is None or value == "":
                continue
            name = _normalize_key(key)
            if name in _PATH_FIELDS:
                value = _resolve_paths(value, base, many=name == "documents")
            values[name] = value

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, list) and not value:
            continue
        values[_normalize_key(key)] = value

    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"設定が不正です:\n{e}") from e


_PATH_FIELDS = {"documents", "prices", "lexicon", "emoji_lexicon", "stopwords", "output_dir"}


def _resolve_paths(value: str, base: Path, many: bool) -> Any:
    parts = _split_list(value) if many else [value.strip()]
    resolved = [str(p if Path(p).is_absolute() else (base / p)) for p in parts]
    return resolved if many else resolved[0]
