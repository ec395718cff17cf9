"""テストスクリプト共通の部品（pytest不要）

各 scripts/test_*.py は test_* 関数（pytest でも収集できる）を定義し、
`python -m scripts.test_xxx` で実行すると run_tests() が全関数を順に実行する。
"""
from __future__ import annotations

import math
import sys
import tempfile
import traceback
import unittest
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

FIXTURES = PROJECT_ROOT / "fixtures"

_PASS = 0
_FAIL = 0
_SKIP = 0


def check(name: str, cond: bool, detail: str = ""):
    global _PASS, _FAIL
    if cond:
        _PASS += 1
        print(f"  ✅ {name}")
    else:
        _FAIL += 1
        print(f"  ❌ {name}  {detail}")


def section(title: str):
    print(f"\n=== {title} ===")


def close(a: float, b: float, tol: float) -> bool:
    """絶対誤差 tol 以内"""
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def skip(reason: str):
    raise unittest.SkipTest(reason)


def require_module(name: str):
    """オラクル用パッケージを読み込む（無ければスキップ）"""
    try:
        return __import__(name, fromlist=["_"])
    except ImportError:
        skip(f"{name} がインストールされていません")


@contextmanager
def tempdir() -> Iterator[Path]:
    with tempfile.TemporaryDirectory() as d:
        yield Path(d)


def run_tests(module_globals: dict, title: str) -> int:
    """モジュール内の test_* 関数を全て実行して結果を表示"""
    global _SKIP
    section(title)
    tests: list[tuple[str, Callable[[], None]]] = [
        (name, fn) for name, fn in module_globals.items()
        if name.startswith("test_") and callable(fn)
    ]
    for name, fn in tests:
        try:
            fn()
        except unittest.SkipTest as e:
            _SKIP += 1
            print(f"  ⏭  {name}  （スキップ: {e}）")
            continue
        except Exception as e:  # noqa: BLE001
            check(name, False, f"{type(e).__name__}: {e}")
            traceback.print_exc()
            continue
        check(name, True)

    print()
    print("=" * 50)
    print(f"  結果: {_PASS} PASS / {_FAIL} FAIL / {_SKIP} SKIP")
    print("=" * 50)
    return 1 if _FAIL else 0
