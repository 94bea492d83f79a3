"""
Batch mode: run many documents on a thread pool and summarize them in a CSV table.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .config import DEFAULT_CONFIG, SolverConfig
from .document_parser import parse, run, serialize
from .errors import PuiseuxError

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["document", "command", "status", "exit_code", "elapsed"]


class BatchItem:
    """Outcome of one document."""

    def __init__(self, document: str, command: Optional[str], status: str, exit_code: int,
                 rendered: str, elapsed: float):
        self.document = document
        self.command = command
        self.status = status
        self.exit_code = exit_code
        self.rendered = rendered
        self.elapsed = elapsed

    def to_row(self) -> Dict[str, Any]:
        return {
            "document": self.document,
            "command": self.command,
            "status": self.status,
            "exit_code": self.exit_code,
            "elapsed": round(self.elapsed, 3),
        }


def collect_documents(sources: Sequence[str], pattern: str = "*.txt") -> List[Path]:
    """
    Expand directories into their matching files, keeping the given order.

    Args:
        sources: Files or directories
        pattern: Glob used inside directories
    """
    paths: List[Path] = []
    for source in sources:
        path = Path(source)
        if path.is_dir():
            paths.extend(sorted(path.glob(pattern)))
        elif path.exists():
            paths.append(path)
        else:
            raise FileNotFoundError(f"Batch input not found: {source}")
    return paths


def _process(path: Path, config: SolverConfig, fmt: str, overrides: Dict[str, Any]) -> BatchItem:
    start = time.time()
    command = overrides.get("command")
    try:
        doc = parse(path.read_text(encoding="utf-8"), config, **overrides)
        command = doc.command
        rendered = serialize(run(doc, config), fmt)
        return BatchItem(str(path), command, "ok", 0, rendered, time.time() - start)
    except PuiseuxError as e:
        logger.warning("%s failed: %s", path, e.message)
        return BatchItem(str(path), command, e.kind, e.exit_code, e.message, time.time() - start)


def run_batch(sources: Sequence[str], config: SolverConfig = DEFAULT_CONFIG, fmt: str = "json",
              overrides: Optional[Dict[str, Any]] = None, workers: Optional[int] = None,
              pattern: str = "*.txt") -> List[BatchItem]:
    """
    Run every document concurrently.

    Args:
        sources: Document files or directories
        config: Solver configuration shared by all documents
        fmt: Output format for each document
        overrides: Command-line overrides applied to every document
        workers: Thread count (config.batch_workers when None)

    Returns:
        BatchItems in input order
    """
    paths = collect_documents(sources, pattern)
    overrides = overrides or {}
    workers = workers or config.batch_workers
    logger.info("Batch of %d document(s) on %d worker(s)", len(paths), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        items = list(pool.map(lambda path: _process(path, config, fmt, overrides), paths))
    failures = sum(1 for item in items if item.exit_code)
    logger.info("Batch finished: %d ok, %d failed", len(items) - failures, failures)
    return items


def summary_frame(items: Sequence[BatchItem]) -> pd.DataFrame:
    return pd.DataFrame([item.to_row() for item in items], columns=SUMMARY_COLUMNS)


def write_outputs(items: Sequence[BatchItem], output_dir: str, fmt: str = "json") -> Path:
    """
    Write one output file per document plus summary.csv.

    Returns:
        Path of the CSV summary
    """
    directory = Path(output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = {"json": ".json", "text": ".txt", "svg": ".svg"}[fmt]
    for index, item in enumerate(items):
        if item.exit_code == 0:
            target = directory / f"{index:03d}_{Path(item.document).stem}{suffix}"
            target.write_text(item.rendered, encoding="utf-8")
    summary_path = directory / "summary.csv"
    summary_frame(items).to_csv(summary_path, index=False)
    return summary_path
