"""Prompt assembly: system prompt, per-paper prompt, token budgeting.

The two templates live as versioned text assets next to this module and are
substituted verbatim, so prompt bytes are stable across runs. Token counts
are a chars/4 heuristic used for budgeting only; provider-reported usage
overwrites the estimate after each call.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .taxonomy import Taxonomy

TRUNCATION_MARKER = "[TRUNCATED]"
EMPTY_IFR_MARKER = "(no IFR proposals provided)"

# Chars per token for the budgeting heuristic.
_CHARS_PER_TOKEN = 4


class PromptError(ValueError):
    pass


@dataclass
class PromptBundle:
    system_text: str
    user_text: str
    estimated_input_tokens: int
    truncated: bool


@lru_cache(maxsize=None)
def _asset_text(name: str) -> str:
    return (resources.files(__package__) / "assets" / name).read_text(encoding="utf-8")


def system_template() -> str:
    return _asset_text("system_prompt.txt")


def paper_template() -> str:
    return _asset_text("paper_prompt.txt")


def prompt_digest() -> str:
    """Digest over both templates, recorded into every classification record."""
    h = hashlib.sha256()
    h.update(system_template().encode("utf-8"))
    h.update(paper_template().encode("utf-8"))
    return h.hexdigest()


def _suffix_sort_key(target: str):
    suffix = target.split(".", 1)[1]
    return (0, int(suffix)) if suffix.isdigit() else (1, suffix)


def serialize_sdg_text(taxonomy: Taxonomy) -> str:
    """Deterministic rendering of the goal/target corpus for the prompt."""
    parts = []
    for sdg in sorted(taxonomy.goals):
        goal = taxonomy.goals[sdg]
        parts.append(f"SDG {sdg}: {goal.title}")
        for target in sorted(goal.targets, key=_suffix_sort_key):
            parts.append(f"{target}: {goal.targets[target]}")
        parts.append("")
    return "\n".join(parts).rstrip("\n")


def serialize_ifr_text(taxonomy: Taxonomy) -> str:
    parts = []
    for sdg in sorted(taxonomy.ifr_proposals):
        cases = taxonomy.ifr_proposals[sdg]
        if not cases:
            continue
        parts.append(f"SDG {sdg}:")
        parts.extend(f"- {case}" for case in cases)
        parts.append("")
    if not parts:
        return EMPTY_IFR_MARKER
    return "\n".join(parts).rstrip("\n")


def build_system_prompt(taxonomy: Taxonomy) -> str:
    """Substitute the serialized corpora into the system template.

    Pure function of the taxonomy content: identical inputs yield
    byte-identical output.
    """
    text = system_template()
    text = text.replace("{sdg_text}", serialize_sdg_text(taxonomy))
    text = text.replace("{ifr_text}", serialize_ifr_text(taxonomy))
    if "{sdg_text}" in text or "{ifr_text}" in text:
        raise PromptError("unsubstituted placeholder remains in system prompt")
    return text


def estimate_tokens(text: str) -> int:
    """Heuristic token count: ceil(len/4). An estimate, not a tokenizer."""
    return (len(text) + _CHARS_PER_TOKEN - 1) // _CHARS_PER_TOKEN


def truncate_text(text: str, budget_tokens: int) -> tuple[str, bool]:
    """Cut text to the token budget, keeping the head.

    The cut lands on the last whitespace before the budget boundary (papers
    state their motivation up front, so the head is the valuable part); the
    marker is appended so truncation is visible downstream. Slicing operates
    on code points, so output is always valid UTF-8.
    """
    if budget_tokens <= 0:
        raise PromptError("budget_tokens must be positive")
    if estimate_tokens(text) <= budget_tokens:
        return text, False
    boundary = budget_tokens * _CHARS_PER_TOKEN
    head = text[:boundary]
    cut = max(head.rfind(" "), head.rfind("\n"), head.rfind("\t"))
    if cut > 0:
        head = head[:cut]
    return head.rstrip() + TRUNCATION_MARKER, True


def build_paper_prompt(title: str, text: str, budget_tokens: int) -> tuple[str, bool]:
    """Fill the per-paper template; returns (user_text, truncated)."""
    if not title and not text:
        raise PromptError("paper prompt needs a title or text")
    body, truncated = truncate_text(text, budget_tokens)
    user = paper_template()
    user = user.replace("{paper_title}", title)
    user = user.replace("{paper_text}", body)
    return user, truncated


def build_bundle(system_text: str, title: str, text: str, budget_tokens: int) -> PromptBundle:
    user, truncated = build_paper_prompt(title, text, budget_tokens)
    return PromptBundle(
        system_text=system_text,
        user_text=user,
        estimated_input_tokens=estimate_tokens(system_text) + estimate_tokens(user),
        truncated=truncated,
    )
