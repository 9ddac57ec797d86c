"""Prompt template loading.

Templates live in templates/*.txt and use string.Template placeholders,
which keeps literal JSON braces in the template text inert.
"""

from __future__ import annotations

from importlib import resources
from string import Template


def load_template(name: str) -> Template:
    text = resources.files("bevlang").joinpath(f"templates/{name}.txt").read_text("utf-8")
    return Template(text)
