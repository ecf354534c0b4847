"""
Append-only storage for timestamped records.

This module provides the RecordStore class, the file-backed replacement for the server database. Each store is a
newline-delimited JSON file holding one record per line, ordered by the record's ``"date"`` field. Reading back a
store gives exactly the records written to it, so a run can be replayed and diffed.

Note:
    The store file is created if it doesn't exist.
    Apart from ordering violations (which are programming errors and raise ``ValidationError``), RecordStore does not
    raise exceptions. Corrupt lines are skipped and disk errors are logged.
    :class:`BuildingHub` keeps one RecordStore per store of a run.
"""

import json
import traceback
from logging import getLogger
from pathlib import Path
from typing import Any, Iterable

from .ahu_data import ValidationError


class RecordStore:
    """
    Append-only, date-ordered store of JSON records.

    Records must carry a ``"date"`` string in ``YYYY-MM-DDTHH:MM`` format. Dates must not decrease from one append to
    the next, which keeps range reads cheap and the file diffable.

    Args:
        store_path: Path to the NDJSON file. If the path is empty (=``Path()``), the store operates in memory only.
        logger_name: Name of the logger to use. Use empty string for root logger.

    Example::

        from pathlib import Path

        store = RecordStore(Path("./run/sensor-db.jsonl"), logger_name="ahumpc")
        store.append({"sensor_id": 1, "temperature": 21.0, "humidity": 40.0, "date": "2023-01-02T06:00"})
        store.read_range("2023-01-02T00:00", "2023-01-02T23:55")
    """

    def __init__(self, store_path: Path, logger_name: str):
        self._store_path = store_path
        self._memory: list[dict[str, Any]] = []
        self._last_date = ""
        self._log = getLogger(logger_name)
        if store_path.name:
            self._ensure_store_exists()
            records = self.read_all()
            if records:
                self._last_date = records[-1]["date"]
        self._log.info(f"Initialized RecordStore at {store_path} (last date: {self._last_date or '-'})")

    @property
    def path(self) -> Path:
        return self._store_path

    @property
    def last_date(self) -> str:
        """Date of the newest record, empty for an empty store."""
        return self._last_date

    def append(self, record: dict[str, Any]) -> None:
        """
        Append a single record.

        Raises:
            ValidationError: If the record has no ``"date"`` or its date is older than the newest stored record.
        """
        self.append_many([record])

    def append_many(self, records: Iterable[dict[str, Any]]) -> None:
        """
        Append records in the given order with a single write.

        Args:
            records: Records with non-decreasing ``"date"`` values, none older than :attr:`last_date`.

        Raises:
            ValidationError: On a missing or out-of-order date. Nothing is written in that case.

        Note:
            A failed disk write is logged and does not raise. :attr:`last_date` then keeps its old value.
        """
        records = list(records)
        last = self._last_date
        for record in records:
            date = record.get("date")
            if not isinstance(date, str):
                raise ValidationError(f"Record without a date: {record}")
            if date < last:
                raise ValidationError(f"Record dated {date} appended after {last}")
            last = date
        if not records:
            return
        if not self._store_path.name:
            self._memory.extend(dict(r) for r in records)
            self._last_date = last
            return
        lines = "".join(json.dumps(r) + "\n" for r in records)
        try:
            with open(self._store_path, "a", encoding="utf-8") as file:
                file.write(lines)
        except Exception as e:
            self._log.warning(
                f"Error while appending to {self._store_path}: {e} with details: {traceback.format_exc()}"
            )
        else:
            self._last_date = last

    def read_all(self) -> list[dict[str, Any]]:
        """Every record in store order. Corrupt lines are skipped with a warning."""
        if not self._store_path.name:
            return [dict(r) for r in self._memory]
        records = []
        try:
            with open(self._store_path, "r", encoding="utf-8") as file:
                for number, line in enumerate(file, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                    except ValueError:
                        self._log.warning(f"Skipping corrupt line {number} of {self._store_path}")
                        continue
                    if not isinstance(record, dict) or not isinstance(record.get("date"), str):
                        self._log.warning(f"Skipping undated line {number} of {self._store_path}")
                        continue
                    records.append(record)
        except FileNotFoundError:
            self._log.warning(f"Store {self._store_path} does not exist")
        except Exception as e:
            self._log.warning(
                f"Error reading {self._store_path}: {e} with details: {traceback.format_exc()}"
            )
        return records

    def read_range(self, start: str | None = None, stop: str | None = None) -> list[dict[str, Any]]:
        """
        Records with ``start <= date <= stop`` (closed interval). A bound of None leaves that side open.

        Example::

            store.read_range("2023-01-02T06:00", "2023-01-02T21:00")
        """
        return [
            r
            for r in self.read_all()
            if (start is None or r["date"] >= start) and (stop is None or r["date"] <= stop)
        ]

    def __len__(self) -> int:
        return len(self.read_all())

    def _ensure_store_exists(self) -> None:
        """
        Ensure the store directory and file exist.

        Creates the parent directory structure if it doesn't exist and an empty store file if one isn't present.
        """
        try:
            self._store_path.parent.mkdir(parents=True, exist_ok=True)
            if not self._store_path.exists():
                self._store_path.write_text("", encoding="utf-8")
        except Exception as e:
            self._log.warning(
                f"Error creating {self._store_path}: {e} with details: {traceback.format_exc()}"
            )
