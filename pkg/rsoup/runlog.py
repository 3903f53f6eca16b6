"""
runlog.py - Append-only run log + logging setup

Every command writes its lifecycle to <out>/events.jsonl, one JSON object
per line. Reports stay byte-identical across reruns; the wall-clock
timestamps live here and nowhere else.

    command.start -> run.start -> run.end ... -> file.written ... -> command.end
                                 +-> run.diverged              +-> command.error
"""

import json
import logging
import sys
import time
from pathlib import Path

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str = "INFO") -> None:
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format=LOG_FORMAT, stream=sys.stderr, force=True)


class RunLog:
    def __init__(self, event_log_path: Path):
        self.path = Path(event_log_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists():
            self.path.write_text("")

    def emit(self, event: str, **fields):
        payload = {"event": event, "ts": time.time(), **fields}
        with self.path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(payload, default=str) + "\n")

    def recent(self, limit: int = 20) -> list:
        n = max(1, int(limit or 20))
        items = []
        for line in self.path.read_text(encoding="utf-8").splitlines()[-n:]:
            try:
                items.append(json.loads(line))
            except json.JSONDecodeError:
                items.append({"event": "parse_error", "raw": line})
        return items
