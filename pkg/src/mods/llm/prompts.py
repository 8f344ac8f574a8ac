"""Prompt templates, one file per stage under ``mods/prompts/<version>/``.

Templates use ``string.Template`` placeholders (``$query``, ``$topic``, ...).
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template

PROMPT_VERSION = "v1"


@lru_cache(maxsize=None)
def load_template(name: str, version: str = PROMPT_VERSION) -> Template:
    path = resources.files("mods").joinpath("prompts", version, f"{name}.txt")
    return Template(path.read_text(encoding="utf-8"))


def render_prompt(name: str, **fields) -> str:
    return load_template(name).substitute({k: str(v) for k, v in fields.items()}).strip()


def system_prompt() -> str:
    return render_prompt("system")
