"""Speaker personas and the name pool, loaded from bundled data."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def _personalities() -> dict:
    text = resources.files("dialweave.data").joinpath("personalities.json").read_text("utf-8")
    return json.loads(text)


def agent_personality() -> str:
    return _personalities()["agent_default"]


def caller_personalities() -> list[str]:
    return list(_personalities()["caller"])


@lru_cache(maxsize=1)
def name_pool() -> tuple[str, ...]:
    text = resources.files("dialweave.data").joinpath("name_pool.json").read_text("utf-8")
    return tuple(json.loads(text))
