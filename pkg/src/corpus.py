"""文書・株価の読み込みと取引日への振り分け

- 文書: 1行1レコードの JSON（id, ts, text, source）
- 株価: "date,close" ヘッダ付き CSV
- 取引日カレンダーは株価ファイルに現れる日付そのもの
- 非取引日（週末・祝日）の文書は次の取引日に繰り越す
"""
from __future__ import annotations

import bisect
import logging
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, TypeVar, overload

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .config import MALFORMED_FATAL_RATIO, MALFORMED_MIN_LINES
from .errors import DataError
from .utils import parse_date, parse_utc_timestamp, read_csv_rows

logger = logging.getLogger(__name__)

# $BP, $TSLA, $BRK.B など
CASHTAG_RE = re.compile(r"\$[A-Za-z][A-Za-z0-9.]{0,9}\b")

T = TypeVar("T")


class Source(str, Enum):
    """文書の種類"""
    HEADLINE = "headline"
    TWEET = "tweet"
    STORY = "story"


@dataclass(frozen=True)
class Document:
    """タイムスタンプ付きの文書1件"""
    id: str
    ts: datetime  # UTC
    text: str
    source: Source

    @property
    def date(self) -> date:
        """有効日付（UTC の暦日。日中の締め時刻は設けない）"""
        return self.ts.date()

    @property
    def has_cashtag(self) -> bool:
        return CASHTAG_RE.search(self.text) is not None


@dataclass(frozen=True)
class PriceBar:
    """日次終値"""
    date: date
    close: float


class _DocumentRecord(BaseModel):
    """文書ファイル1行分の検証用モデル"""

    model_config = ConfigDict(extra="ignore", str_strip_whitespace=False)

    id: str
    ts: str
    text: str
    source: Source

    @field_validator("id")
    @classmethod
    def _id_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("id が空です")
        return v

    @field_validator("text")
    @classmethod
    def _text_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("text が空です")
        return v

    @field_validator("ts")
    @classmethod
    def _ts_parseable(cls, v: str) -> str:
        parse_utc_timestamp(v)
        return v


class _RecordView(Sequence[T]):
    """結果オブジェクトを読み取り専用のシーケンスとして扱うための基底"""

    def _items(self) -> list[T]:
        raise NotImplementedError

    @overload
    def __getitem__(self, index: int) -> T: ...

    @overload
    def __getitem__(self, index: slice) -> list[T]: ...

    def __getitem__(self, index):
        return self._items()[index]

    def __len__(self) -> int:
        return len(self._items())

    def __iter__(self) -> Iterator[T]:
        return iter(self._items())


@dataclass
class LoadReport:
    """文書読み込みの結果報告"""
    path: Path
    n_lines: int = 0  # 空行を除いた行数
    n_loaded: int = 0
    n_filtered: int = 0  # source / cashtag フィルタで除外した件数
    skipped: list[tuple[int, str]] = field(default_factory=list)  # (行番号, 理由)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)


@dataclass
class DocumentSet(_RecordView[Document]):
    """読み込んだ文書（ファイル順）と読み込み報告"""
    documents: list[Document]
    report: LoadReport

    def _items(self) -> list[Document]:
        return self.documents


@dataclass
class PriceLoad(_RecordView[PriceBar]):
    """読み込んだ株価（日付昇順）"""
    bars: list[PriceBar]
    reordered: bool = False  # 入力が昇順でなく並べ替えた

    def _items(self) -> list[PriceBar]:
        return self.bars


@dataclass(frozen=True)
class TradingCalendar:
    """取引日カレンダー（株価データに現れる日付）"""
    trading_days: tuple[date, ...]

    def __post_init__(self):
        if not self.trading_days:
            raise DataError("取引日カレンダーが空です")
        if any(a >= b for a, b in zip(self.trading_days, self.trading_days[1:])):
            raise DataError("取引日カレンダーが昇順ではありません")

    @classmethod
    def from_prices(cls, bars: Sequence[PriceBar]) -> "TradingCalendar":
        return cls(tuple(bar.date for bar in bars))

    @property
    def first(self) -> date:
        return self.trading_days[0]

    @property
    def last(self) -> date:
        return self.trading_days[-1]

    def roll_forward(self, d: date) -> Optional[date]:
        """d 以上で最小の取引日（最終取引日より後なら None）"""
        idx = bisect.bisect_left(self.trading_days, d)
        if idx >= len(self.trading_days):
            return None
        return self.trading_days[idx]


@dataclass
class DayBucket:
    """1取引日に割り当てられた文書"""
    trading_day: date
    documents: list[Document] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)


@dataclass
class BucketResult(_RecordView[DayBucket]):
    """取引日ごとのバケット（全取引日分）と除外件数"""
    buckets: list[DayBucket]
    excluded: int = 0  # 最終取引日より後の文書数

    def _items(self) -> list[DayBucket]:
        return self.buckets


def load_documents(
    path: Path,
    source_filter: Optional[Source] = None,
    cashtag_only: bool = False,
) -> DocumentSet:
    """文書ファイルを読み込む

    不正な行は警告を出して読み飛ばし、LoadReport.skipped に記録する。
    id の重複（2件目以降）とタイムゾーン無しのタイムスタンプも不正行として扱う。

    Args:
        path: 1行1レコードの JSON ファイル
        source_filter: 指定した種類の文書だけを残す
        cashtag_only: $TICKER 形式のキャッシュタグを含む文書だけを残す

    Returns:
        DocumentSet: ファイル順の文書と読み込み報告

    Raises:
        DataError: ファイルが読めない、または不正行が半数を超える場合
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"文書ファイルを読み込めません: {path}: {e}") from e

    report = LoadReport(path=path)
    documents: list[Document] = []
    seen_ids: set[str] = set()

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        report.n_lines += 1
        try:
            record = _DocumentRecord.model_validate_json(line)
        except ValidationError as e:
            reason = "; ".join(err["msg"] for err in e.errors())
            report.skipped.append((line_no, reason))
            logger.warning("%s:%d 不正な行をスキップ: %s", path.name, line_no, reason)
            continue
        if record.id in seen_ids:
            report.skipped.append((line_no, f"id が重複しています: {record.id}"))
            logger.warning("%s:%d id が重複しています: %s", path.name, line_no, record.id)
            continue
        seen_ids.add(record.id)

        doc = Document(
            id=record.id,
            ts=parse_utc_timestamp(record.ts),
            text=record.text,
            source=record.source,
        )
        if source_filter is not None and doc.source != source_filter:
            report.n_filtered += 1
            continue
        if cashtag_only and not doc.has_cashtag:
            report.n_filtered += 1
            continue
        documents.append(doc)

    if report.n_lines >= MALFORMED_MIN_LINES and report.n_skipped > MALFORMED_FATAL_RATIO * report.n_lines:
        raise DataError(
            f"不正な行が多すぎます: {path} ({report.n_skipped}/{report.n_lines} 行)"
        )
    if report.n_lines == 0:
        logger.warning("文書ファイルが空です: %s", path)

    report.n_loaded = len(documents)
    logger.info(
        "文書読み込み: %s 読込=%d スキップ=%d 除外=%d",
        path.name, report.n_loaded, report.n_skipped, report.n_filtered,
    )
    return DocumentSet(documents=documents, report=report)


def load_prices(path: Path) -> PriceLoad:
    """株価 CSV（date,close）を読み込む

    Raises:
        DataError: 読めない行、終値が正でない、日付が重複している場合
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"株価ファイルが見つかりません: {path}")

    bars: list[PriceBar] = []
    for row_no, row in enumerate(read_csv_rows(path), start=2):
        try:
            d = parse_date(row["date"])
            close = float(row["close"])
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"株価の行を解析できません: {path.name}:{row_no}: {e}") from e
        if not (math.isfinite(close) and close > 0):
            raise DataError(f"終値が正の有限値ではありません: {d} close={row['close'].strip()}")
        bars.append(PriceBar(date=d, close=close))

    reordered = any(a.date > b.date for a, b in zip(bars, bars[1:]))
    if reordered:
        logger.warning("株価の日付が昇順ではないため並べ替えました: %s", path.name)
        bars.sort(key=lambda b: b.date)

    for a, b in zip(bars, bars[1:]):
        if a.date == b.date:
            raise DataError(f"株価の日付が重複しています: {a.date}")

    return PriceLoad(bars=bars, reordered=reordered)


def bucket_by_day(docs: Sequence[Document], cal: TradingCalendar) -> BucketResult:
    """文書を取引日に振り分ける

    取引日の文書はその日に、非取引日の文書は次の取引日に入る。
    最終取引日より後の文書は除外して件数を返す。文書の無い取引日も空のバケットとして出力する。
    """
    buckets = {d: DayBucket(trading_day=d) for d in cal.trading_days}
    excluded = 0
    for doc in docs:
        day = cal.roll_forward(doc.date)
        if day is None:
            excluded += 1
            continue
        buckets[day].documents.append(doc)

    if excluded:
        logger.warning("最終取引日 %s より後の文書 %d 件を除外しました", cal.last, excluded)
    return BucketResult(buckets=[buckets[d] for d in cal.trading_days], excluded=excluded)
