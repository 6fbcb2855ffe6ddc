"""SDG goal/target corpus and IFR proposal corpus loading and validation.

The corpora are plain text files. SDG corpus: a goal header line
``SDG <n>: <title>`` followed by target lines ``<n>.<suffix>: <text>``.
IFR corpus: a header line ``SDG <n>:`` followed by ``- <use case>`` bullets.
Lines starting with ``#`` and blank lines are ignored.

Note for users of the published UN / IFR source documents: convert them to
this line-oriented format (one goal header, one line per target / bullet)
before loading; the loader does not scrape free-form documents.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

SDG_COUNT = 17

_GOAL_HEADER_RE = re.compile(r"^SDG\s+(\d{1,2})\s*:\s*(.*)$")
_TARGET_LINE_RE = re.compile(r"^(\d{1,2})\.([0-9]{1,2}|[a-c])\s*:\s*(.+)$")
_TARGET_ID_RE = re.compile(r"^(\d{1,2})\.([0-9]{1,2}|[a-c])$")


class TaxonomyError(ValueError):
    """Raised for missing or malformed corpus files."""


class TargetVerdict(Enum):
    VALID = "valid"
    UNKNOWN_TARGET = "unknown_target"
    PREFIX_MISMATCH = "prefix_mismatch"


def is_valid_sdg(value: int) -> bool:
    return isinstance(value, int) and 1 <= value <= SDG_COUNT


def parse_sdg_id(text: str) -> int:
    """Parse a goal number, enforcing the 1..17 range."""
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise TaxonomyError(f"not an SDG number: {text!r}")
    if not is_valid_sdg(value):
        raise TaxonomyError(f"SDG number out of range 1..{SDG_COUNT}: {value}")
    return value


def is_target_id(text: str) -> bool:
    return bool(_TARGET_ID_RE.match(text))


def target_goal_part(target: str) -> int:
    """Goal number embedded in a target id such as ``9.5`` or ``8.b``."""
    m = _TARGET_ID_RE.match(target)
    if not m:
        raise TaxonomyError(f"not a target id: {target!r}")
    return parse_sdg_id(m.group(1))


@dataclass
class Goal:
    title: str
    targets: dict[str, str] = field(default_factory=dict)


@dataclass
class Taxonomy:
    """Loaded SDG corpus plus optional IFR proposals.

    Treated as immutable after loading; safe to share across threads.
    """

    goals: dict[int, Goal] = field(default_factory=dict)
    ifr_proposals: dict[int, list[str]] = field(default_factory=dict)
    source_digests: dict[str, str] = field(default_factory=dict)

    def target_text(self, target: str) -> str | None:
        goal = self.goals.get(target_goal_part(target))
        if goal is None:
            return None
        return goal.targets.get(target)


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _corpus_lines(path: Path):
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def load_sdg_corpus(path: str | Path) -> Taxonomy:
    """Load the SDG goal/target corpus.

    Returns a taxonomy with all 17 goals populated. Raises TaxonomyError on
    a missing file, a malformed line, or a goal count different from 17.
    """
    path = Path(path)
    if not path.exists():
        raise TaxonomyError(f"SDG corpus file not found: {path}")

    goals: dict[int, Goal] = {}
    current: int | None = None
    for lineno, line in _corpus_lines(path):
        header = _GOAL_HEADER_RE.match(line)
        if header:
            sdg = parse_sdg_id(header.group(1))
            title = header.group(2).strip()
            if not title:
                raise TaxonomyError(f"{path}:{lineno}: goal header without title")
            if sdg in goals:
                raise TaxonomyError(f"{path}:{lineno}: duplicate header for SDG {sdg}")
            goals[sdg] = Goal(title=title)
            current = sdg
            continue
        target = _TARGET_LINE_RE.match(line)
        if target:
            sdg = parse_sdg_id(target.group(1))
            if current is None:
                raise TaxonomyError(f"{path}:{lineno}: target line before any goal header")
            if sdg != current:
                raise TaxonomyError(
                    f"{path}:{lineno}: target {target.group(1)}.{target.group(2)} "
                    f"listed under SDG {current}"
                )
            goals[sdg].targets[f"{target.group(1)}.{target.group(2)}"] = target.group(3).strip()
            continue
        raise TaxonomyError(f"{path}:{lineno}: malformed line: {line!r}")

    if not goals:
        raise TaxonomyError(f"{path}: no goals found")
    if len(goals) != SDG_COUNT:
        raise TaxonomyError(f"{path}: expected {SDG_COUNT} goals, found {len(goals)}")

    return Taxonomy(goals=goals, source_digests={"sdg": _file_digest(path)})


def load_ifr_corpus(path: str | Path, taxonomy: Taxonomy) -> Taxonomy:
    """Load IFR proposals into a copy of an already-loaded taxonomy.

    Goals absent from the file map to empty lists. Raises TaxonomyError on a
    missing file or a header referencing an invalid SDG number.
    """
    path = Path(path)
    if not taxonomy.goals:
        raise TaxonomyError("SDG corpus must be loaded before the IFR corpus")
    if not path.exists():
        raise TaxonomyError(f"IFR corpus file not found: {path}")

    proposals: dict[int, list[str]] = {sdg: [] for sdg in range(1, SDG_COUNT + 1)}
    current: int | None = None
    for lineno, line in _corpus_lines(path):
        header = re.match(r"^SDG\s+(\d{1,2})\s*:", line)
        if header:
            current = parse_sdg_id(header.group(1))
            continue
        if line.startswith("-"):
            if current is None:
                raise TaxonomyError(f"{path}:{lineno}: use case before any SDG header")
            text = line[1:].strip()
            if text:
                proposals[current].append(text)
            continue
        raise TaxonomyError(f"{path}:{lineno}: malformed line: {line!r}")

    digests = dict(taxonomy.source_digests)
    digests["ifr"] = _file_digest(path)
    return Taxonomy(goals=taxonomy.goals, ifr_proposals=proposals, source_digests=digests)


def validate_target(sdg: int, target: str, taxonomy: Taxonomy) -> TargetVerdict:
    """Check a target id against an SDG and the loaded corpus.

    Total function: any (sdg, target) pair yields a verdict. A target whose
    goal part differs from ``sdg`` is a PREFIX_MISMATCH; a well-prefixed
    target absent from the corpus is an UNKNOWN_TARGET.
    """
    m = _TARGET_ID_RE.match(target or "")
    if not m:
        return TargetVerdict.UNKNOWN_TARGET
    goal_part = int(m.group(1))
    if goal_part != sdg:
        return TargetVerdict.PREFIX_MISMATCH
    goal = taxonomy.goals.get(sdg)
    if goal is None or target not in goal.targets:
        return TargetVerdict.UNKNOWN_TARGET
    return TargetVerdict.VALID
