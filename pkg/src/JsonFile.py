from __future__ import annotations

import json
from pathlib import Path

from .errors import InputError


class JsonFile:
    """
    Wrapper class for working with json files.

    This serves as the store for run artifacts (report.json, manifest.json).
    Output is key-sorted and indented so identical data gives identical bytes.
    """
    def __init__(self, filename: str | Path, data: dict | None = None):
        self.filename = Path(filename)
        self.data: dict = data or {}

    def save(self) -> Path:
        self.filename.parent.mkdir(parents=True, exist_ok=True)
        with open(self.filename, "w", encoding="utf-8") as f:
            f.write(str(self))
        return self.filename

    def write(self, data: dict) -> Path:
        self.data = data
        return self.save()

    def read(self) -> dict:
        try:
            with open(self.filename, encoding="utf-8") as f:
                self.data = json.load(f)
        except (OSError, json.JSONDecodeError) as error:
            raise InputError(f"cannot read json file {self.filename}: {error}") from error
        return self.data

    def __str__(self):
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"
