from __future__ import annotations
import os, json, datetime
from typing import Dict, Any, Optional


def make_run_folder(base_dir: str, stamp: Optional[str] = None) -> str:
    os.makedirs(base_dir, exist_ok=True)
    ts = stamp or datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
    folder = os.path.join(base_dir, ts)
    os.makedirs(folder, exist_ok=True)
    return folder


def save_run(folder: str, report: Dict[str, Any], summary_text: str) -> str:
    os.makedirs(folder, exist_ok=True)

    with open(os.path.join(folder, "report.json"), "w", encoding="utf-8") as f:
        json.dump(report or {}, f, ensure_ascii=False, indent=2)
    with open(os.path.join(folder, "summary.txt"), "w", encoding="utf-8") as f:
        f.write(summary_text or "")

    return folder
