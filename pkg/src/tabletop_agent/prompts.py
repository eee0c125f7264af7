"""Prompt templates shipped as text assets under ``prompts/``."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from string import Template

_VERSION_LINE = re.compile(r"^# prompt-version: *(\S+)\n")


@lru_cache(maxsize=None)
def _read(name: str) -> str:
    return resources.files(__package__).joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")


def prompt_version(name: str) -> str | None:
    m = _VERSION_LINE.match(_read(name))
    return m.group(1) if m else None


def load_prompt(name: str, **values: str) -> str:
    """Return the prompt text, with ``$placeholders`` substituted when values are given."""
    text = _VERSION_LINE.sub("", _read(name), count=1).strip()
    return Template(text).substitute(values) if values else text
