"""ユーティリティ関数"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Sequence

from .config import TOOL_NAME, TOOL_VERSION
from .errors import DataError


def parse_utc_timestamp(value: str) -> datetime:
    """ISO-8601（オフセット付き）の文字列を UTC の datetime に変換

    例:
    - "2019-08-02T09:15:00Z" → 2019-08-02 09:15:00+00:00
    - "2019-08-03T01:00:00+09:00" → 2019-08-02 16:00:00+00:00

    Args:
        value: タイムスタンプ文字列

    Returns:
        datetime: UTC に正規化した日時（秒精度）

    Raises:
        ValueError: 解析できない、またはオフセットが無い場合
    """
    text = value.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError(f"タイムゾーンのオフセットがありません: {value}")
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def parse_date(value: str) -> date:
    """YYYY-MM-DD 形式の日付を解析"""
    return datetime.strptime(value.strip(), "%Y-%m-%d").date()


def format_float(x: Optional[float]) -> str:
    """CSV 出力用の浮動小数点表記（repr でビット単位に再現可能）"""
    if x is None:
        return ""
    return repr(float(x))


def file_sha256(path: Path) -> str:
    """ファイル内容の sha256"""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def meta_line(stage: str, config_hash: str, seed: int) -> str:
    """成果物に埋め込むメタ情報行（CSV ではコメント行として先頭に置く）"""
    return f"# {TOOL_NAME}={TOOL_VERSION} stage={stage} config={config_hash} seed={seed}"


def artifact_meta(stage: str, config_hash: str, seed: int) -> dict[str, Any]:
    """JSON 成果物に埋め込むメタ情報"""
    return {
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "stage": stage,
        "config_hash": config_hash,
        "seed": seed,
    }


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    meta: Optional[str] = None,
) -> Path:
    """CSV を書き出す（改行は LF 固定、メタ情報はコメント行）"""
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv_rows(path: Path) -> Iterator[dict[str, str]]:
    """CSV を dict 行で読む（'#' で始まるコメント行は読み飛ばす）

    Raises:
        DataError: ファイルが読めない場合
    """
    try:
        text = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"ファイルを読み込めません: {path}: {e}") from e
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    yield from csv.DictReader(lines)


def write_json(path: Path, data: Any) -> Path:
    """JSON を決定的な形式で書き出す（キー順固定・末尾改行あり）"""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def read_json(path: Path) -> Any:
    """JSON を読む

    Raises:
        DataError: 読めない・壊れている場合
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"JSON を読み込めません: {path}: {e}") from e


def stable_int(*parts: object) -> int:
    """文字列化した値から決定的な 64bit 整数を作る（乱数サブストリームの種）"""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
