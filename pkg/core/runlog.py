from __future__ import annotations

import datetime
import os
from typing import List, Optional


class RunLog:
    """Timestamped console lines, mirrored into ``verify_debug.log`` when a folder is set."""

    FILE_NAME = "verify_debug.log"

    def __init__(self, folder: Optional[str] = None, echo: bool = True):
        self.folder = folder
        self.echo = echo
        self.lines: List[str] = []

    def attach(self, folder: str) -> None:
        """Start writing to ``folder``; lines logged before are flushed there first."""
        self.folder = folder
        self._write(self.lines)

    def __call__(self, msg: str) -> None:
        self.log(msg)

    def log(self, msg: str) -> None:
        ts = datetime.datetime.now().strftime('%H:%M:%S')
        line = f'[{ts}] {msg}'
        self.lines.append(line)
        if self.echo:
            print(line, flush=True)
        self._write([line])

    def _write(self, lines: List[str]) -> None:
        if not self.folder or not lines:
            return
        try:
            with open(os.path.join(self.folder, self.FILE_NAME), 'a', encoding='utf-8') as f:
                f.write('\n'.join(lines) + '\n')
        except Exception:
            pass
