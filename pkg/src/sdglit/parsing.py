"""Parser for the numbered "Point 0..5" classification response format.

Responses are semi-structured text. The parser is deliberately tolerant: it
accepts ``Point N.`` or ``N.`` section headers, ``**bold**`` markers, dash
rulers, backslash-escaped quotes, and indentation drift, because real model
output exhibits all of these. Anything it cannot read becomes a warning on
the record rather than a crash, except for missing mandatory sections in
strict mode.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .taxonomy import SDG_COUNT, Taxonomy, TargetVerdict, validate_target

SCHEMA_VERSION = "1"

PAPER_TYPES = ("survey", "experimental", "theoretical", "report", "other")

# Sections 0,1,2,3,5 must be present; 4 (IFR) is optional in practice.
MANDATORY_SECTIONS = (0, 1, 2, 3, 5)


class ParseError(ValueError):
    """Raised when a mandatory structure cannot be located.

    ``section`` carries the section number for missing sections; ``fragment``
    carries the offending text for unreadable list fragments.
    """

    def __init__(self, message: str, section: int | None = None, fragment: str | None = None):
        super().__init__(message)
        self.section = section
        self.fragment = fragment


@dataclass
class MentionFlags:
    un_sdgs: bool = False
    sustainability: bool = False
    ecological: bool = False
    social: bool = False


@dataclass
class SdgAssignment:
    """An ordered SDG list with per-SDG target lists and free-text evidence."""

    sdgs: list[int] = field(default_factory=list)
    targets: list[list[str]] = field(default_factory=list)
    evidence: list[str] = field(default_factory=list)


@dataclass
class IfrAlignment:
    sdgs: list[int] = field(default_factory=list)
    use_cases: list[str] = field(default_factory=list)
    justification: str = ""


@dataclass
class ClassificationRecord:
    arxiv_id: str = ""
    paper_type: set[str] = field(default_factory=set)
    motivated: SdgAssignment = field(default_factory=SdgAssignment)
    aligned: SdgAssignment = field(default_factory=SdgAssignment)
    mentions: MentionFlags = field(default_factory=MentionFlags)
    ifr: IfrAlignment = field(default_factory=IfrAlignment)
    reasoning: str = ""
    model_id: str = ""
    prompt_digest: str = ""
    run_id: str = ""
    schema_version: str = SCHEMA_VERSION
    warnings: list[str] = field(default_factory=list)


_HEADER_RE = re.compile(r"^\s{0,3}(?:\*\*)?(?:Point\s+)?([0-5])[.)]\s*(.*)$")
_RULER_RE = re.compile(r"^\s*-{4,}\s*$")
_SDG_TOKEN_RE = re.compile(r"^SDG\s*(\d{1,2})$", re.IGNORECASE)
_TARGET_TOKEN_RE = re.compile(r"^(\d{1,2})\.([0-9]{1,2}|[a-c])$")
_YES_NO_RE = re.compile(r"^(yes|no)\b", re.IGNORECASE)

_LABEL_SDGS = re.compile(r"^[-*\s]*(?:\*\*)?\s*SDGs?\s*(?:\*\*)?\s*:\s*(.*)$", re.IGNORECASE)
_LABEL_TARGETS = re.compile(r"^[-*\s]*(?:\*\*)?\s*Targets?\s*(?:\*\*)?\s*:\s*(.*)$", re.IGNORECASE)
_LABEL_IFR_SDGS = re.compile(
    r"^[-*\s]*(?:\*\*)?\s*IFR[- ]aligned\s+SDGs(?:/targets)?\s*(?:\*\*)?\s*:\s*(.*)$",
    re.IGNORECASE,
)
_LABEL_USE_CASES = re.compile(
    r"^[-*\s]*(?:\*\*)?\s*Matching\s+IFR\s+use\s+cases[^:]*:\s*(.*)$", re.IGNORECASE
)
_LABEL_EVIDENCE = re.compile(
    r"^[-*\s]*(?:\*\*)?\s*(?:Quote\(?s?\)?[^:]*|Brief\s+justification[^:]*|Justification)\s*:\s*(.*)$",
    re.IGNORECASE,
)
_LABEL_TYPE = re.compile(r"(?:paper\s+)?type\s*:\s*(.*)$", re.IGNORECASE)
_LABEL_REASONING = re.compile(r"^\s*(?:\*\*)?\s*Reasoning\s*(?:\*\*)?\s*:?\s*(.*)$", re.IGNORECASE)

_MENTION_LABELS = (
    ("un_sdgs", re.compile(r"UN(?:'s)?\s*(?:17\s*)?SDGs?\b[^:]*:\s*(.*)$", re.IGNORECASE)),
    ("sustainability", re.compile(r"Sustainability(?:\s+impact)?\s*:\s*(.*)$", re.IGNORECASE)),
    ("ecological", re.compile(r"Ecological(?:\s+impact)?\s*:\s*(.*)$", re.IGNORECASE)),
    ("social", re.compile(r"Social(?:\s+impact)?\s*:\s*(.*)$", re.IGNORECASE)),
)


def _strip_quotes(text: str) -> str:
    # One symmetric layer only, so stripping is the exact inverse of the
    # quote-wrapping done by serialize_record.
    text = text.strip()
    if len(text) >= 2 and text[0] in "\"'“”‘’" and text[-1] in "\"'“”‘’":
        text = text[1:-1].strip()
    return text


def _collapse_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def split_sections(raw: str) -> dict[int, list[str]]:
    """Split response text into numbered sections.

    Section numbers must be strictly increasing; a stray numbered line inside
    a section (e.g. an enumerated quote) therefore does not open a new one.
    """
    sections: dict[int, list[str]] = {}
    current: int | None = None
    for line in raw.replace('\\"', '"').splitlines():
        if _RULER_RE.match(line):
            continue
        m = _HEADER_RE.match(line)
        if m:
            number = int(m.group(1))
            if current is None or number > current:
                current = number
                sections[number] = [m.group(2)]
                continue
        if current is not None:
            sections[current].append(line)
    return sections


def parse_sdg_list(fragment: str, warnings: list[str] | None = None) -> list[int]:
    """Parse ``[SDG 13, SDG 15]`` style lists; duplicates dropped with a warning."""
    text = fragment.replace("**", "").strip()
    if text.startswith("["):
        text = text[1:]
    end = text.find("]")
    if end != -1:
        text = text[:end]
    text = text.strip()
    result: list[int] = []
    if not text:
        return result
    for token in text.split(","):
        token = _strip_quotes(token.strip())
        if not token:
            continue
        m = _SDG_TOKEN_RE.match(token)
        if not m:
            raise ParseError(f"not an SDG token: {token!r}", fragment=fragment)
        value = int(m.group(1))
        if not 1 <= value <= SDG_COUNT:
            raise ParseError(f"SDG number out of range: {token!r}", fragment=fragment)
        if value in result:
            if warnings is not None:
                warnings.append(f"duplicate SDG {value} dropped")
            continue
        result.append(value)
    return result


def parse_target_matrix(fragment: str) -> list[list[str]]:
    """Parse nested target lists like ``[[13.1, 13.3], [15.1, 15.5]]``.

    Tolerates whitespace, trailing commas, and flat lists (``[9.5]`` reads as
    one inner list). The inner list count may differ from the SDG list; the
    normalizer reconciles shapes.
    """
    text = fragment.replace("**", "").strip()
    rows: list[list[str]] = []
    row: list[str] | None = None
    implicit = False  # row opened by a bare token rather than its own bracket
    depth = 0
    buf = ""

    def flush_token():
        nonlocal buf, row, implicit
        token = _strip_quotes(buf.strip())
        buf = ""
        if not token:
            return
        if row is None:
            if depth < 1:
                raise ParseError(f"target outside brackets: {token!r}", fragment=fragment)
            row = []
            implicit = True
        if not _TARGET_TOKEN_RE.match(token):
            raise ParseError(f"not a target token: {token!r}", fragment=fragment)
        row.append(token)

    for ch in text:
        if ch == "[":
            if implicit and row is not None:
                rows.append(row)
                row, implicit = None, False
            depth += 1
            if depth == 2 and row is None:
                row = []
            elif depth > 2:
                raise ParseError("over-nested target list", fragment=fragment)
        elif ch == "]":
            flush_token()
            if row is not None and (depth == 2 or implicit):
                rows.append(row)
                row, implicit = None, False
            depth = max(depth - 1, 0)
        elif ch == ",":
            flush_token()
        else:
            buf += ch
    flush_token()
    if row is not None:
        rows.append(row)
    return rows


def _parse_yes_no(value: str) -> bool:
    m = _YES_NO_RE.match(value.strip())
    if not m:
        raise ParseError(f"expected yes/no, got {value!r}")
    return m.group(1).lower() == "yes"


def parse_mentions(fragment: str, warnings: list[str] | None = None) -> MentionFlags:
    """Parse the four mention flags; an absent line reads as ``no`` with a warning."""
    flags = MentionFlags()
    seen = set()
    for line in fragment.splitlines():
        for name, pattern in _MENTION_LABELS:
            if name in seen:
                continue
            m = pattern.search(line)
            if m:
                setattr(flags, name, _parse_yes_no(m.group(1)))
                seen.add(name)
                break
    for name, _ in _MENTION_LABELS:
        if name not in seen and warnings is not None:
            warnings.append(f"mention flag {name} absent, assumed no")
    return flags


def _parse_paper_type(section: list[str], warnings: list[str]) -> set[str]:
    text = " ".join(section)
    m = _LABEL_TYPE.search(text)
    if m:
        text = m.group(1)
    found = {t for t in PAPER_TYPES if re.search(rf"\b{t}\b", text, re.IGNORECASE)}
    if not found:
        warnings.append("type unknown")
        return {"other"}
    return found


def _balanced(text: str) -> bool:
    return text.count("[") <= text.count("]")


def _parse_assignment(section: list[str], warnings: list[str], recover: bool) -> SdgAssignment:
    """Extract SDGs / Targets lines and remaining evidence from a section.

    Lines before the first recognized label are header prose and ignored;
    everything after the structured lines is collected as evidence.
    """
    assignment = SdgAssignment()
    lines = list(section)
    evidence: list[str] = []
    current_evidence: str | None = None
    sdgs_done = targets_done = started = False
    i = 0
    while i < len(lines):
        line = lines[i]
        if not sdgs_done:
            m = _LABEL_SDGS.match(line)
            if m:
                try:
                    assignment.sdgs = parse_sdg_list(m.group(1), warnings)
                except ParseError as exc:
                    if not recover:
                        raise
                    warnings.append(f"unreadable SDG list: {exc}")
                sdgs_done = started = True
                i += 1
                continue
        if not targets_done:
            m = _LABEL_TARGETS.match(line)
            if m:
                fragment = m.group(1)
                while not _balanced(fragment) and i + 1 < len(lines):
                    i += 1
                    fragment += " " + lines[i].strip()
                try:
                    assignment.targets = parse_target_matrix(fragment)
                except ParseError as exc:
                    if not recover:
                        raise
                    warnings.append(f"unreadable target list: {exc}")
                targets_done = started = True
                i += 1
                continue
        m = _LABEL_EVIDENCE.match(line)
        if m:
            if current_evidence:
                evidence.append(current_evidence)
            current_evidence = m.group(1).strip() or None
            started = True
            i += 1
            continue
        stripped = line.strip()
        if not started:
            i += 1
            continue
        if stripped.startswith("-"):
            if current_evidence:
                evidence.append(current_evidence)
            current_evidence = stripped.lstrip("-").strip()
        elif stripped:
            current_evidence = f"{current_evidence} {stripped}" if current_evidence else stripped
        i += 1
    if current_evidence:
        evidence.append(current_evidence)
    assignment.evidence = [_strip_quotes(e) for e in evidence if _strip_quotes(e)]
    return assignment


def _parse_ifr(section: list[str], warnings: list[str], recover: bool) -> IfrAlignment:
    ifr = IfrAlignment()
    justification: str | None = None
    collecting_cases = False
    for line in section:
        m = _LABEL_IFR_SDGS.match(line)
        if m:
            collecting_cases = False
            try:
                ifr.sdgs = parse_sdg_list(m.group(1), warnings)
            except ParseError as exc:
                if not recover:
                    raise
                warnings.append(f"unreadable IFR SDG list: {exc}")
            continue
        m = _LABEL_USE_CASES.match(line)
        if m:
            inline = m.group(1).strip()
            collecting_cases = inline in ("", "[]") is False and False or True
            collecting_cases = True
            if inline and inline != "[]":
                ifr.use_cases.append(_strip_quotes(inline.strip("[]")))
            if inline == "[]":
                collecting_cases = False
            continue
        m = _LABEL_EVIDENCE.match(line)
        if m:
            collecting_cases = False
            justification = m.group(1).strip() or None
            continue
        stripped = line.strip()
        if not stripped:
            continue
        if collecting_cases and stripped.startswith("-"):
            case = _strip_quotes(stripped.lstrip("-").strip())
            if case:
                ifr.use_cases.append(case)
        elif collecting_cases and ifr.use_cases:
            ifr.use_cases[-1] = _collapse_ws(ifr.use_cases[-1] + " " + stripped)
        elif justification is not None:
            justification = f"{justification} {stripped}"
        elif not collecting_cases and not stripped.startswith("-"):
            # Header continuation before any label; ignore.
            continue
    ifr.justification = _strip_quotes(justification or "")
    return ifr


def parse_response(raw: str, recover: bool = False, arxiv_id: str = "") -> ClassificationRecord:
    """Parse raw response text into a draft record (pre-normalization).

    In strict mode a missing mandatory section raises ParseError with the
    section id. With ``recover=True`` the parser returns a partial record and
    lists the problems in ``warnings`` instead.
    """
    warnings: list[str] = []
    sections = split_sections(raw)

    missing = [n for n in MANDATORY_SECTIONS if n not in sections]
    if missing and not recover:
        raise ParseError(f"mandatory section {missing[0]} not found", section=missing[0])
    for n in missing:
        warnings.append(f"section {n} missing")

    record = ClassificationRecord(arxiv_id=arxiv_id, warnings=warnings)

    if 0 in sections:
        record.paper_type = _parse_paper_type(sections[0], warnings)
    else:
        record.paper_type = {"other"}

    if 1 in sections:
        record.motivated = _parse_assignment(sections[1], warnings, recover)
    if 2 in sections:
        record.aligned = _parse_assignment(sections[2], warnings, recover)

    if 3 in sections:
        try:
            record.mentions = parse_mentions("\n".join(sections[3]), warnings)
        except ParseError as exc:
            if not recover:
                raise
            warnings.append(f"unreadable mention flags: {exc}")

    if 4 in sections:
        record.ifr = _parse_ifr(sections[4], warnings, recover)
    else:
        warnings.append("section 4 missing")

    if 5 in sections:
        text = "\n".join(sections[5])
        m = _LABEL_REASONING.match(sections[5][0])
        if m:
            text = "\n".join([m.group(1)] + sections[5][1:])
        record.reasoning = _strip_quotes(_collapse_ws(text))

    return record


def _dedup_sdgs(assignment: SdgAssignment, which: str, warnings: list[str]) -> None:
    seen = []
    kept_targets = []
    for idx, sdg in enumerate(assignment.sdgs):
        row = assignment.targets[idx] if idx < len(assignment.targets) else []
        if sdg in seen:
            warnings.append(f"duplicate SDG {sdg} dropped from {which}")
            pos = seen.index(sdg)
            merged = kept_targets[pos] + [t for t in row if t not in kept_targets[pos]]
            kept_targets[pos] = merged
            continue
        seen.append(sdg)
        kept_targets.append(list(row))
    extra = assignment.targets[len(assignment.sdgs):]
    assignment.sdgs = seen
    assignment.targets = kept_targets
    if extra:
        if assignment.targets:
            warnings.append(f"surplus target lists merged into last SDG of {which}")
            for row in extra:
                assignment.targets[-1].extend(t for t in row if t not in assignment.targets[-1])
        else:
            flat = [t for row in extra for t in row]
            if flat:
                warnings.append(f"target lists without SDGs dropped from {which}: {flat}")


def _reconcile_shape(assignment: SdgAssignment, which: str, warnings: list[str]) -> None:
    if len(assignment.targets) < len(assignment.sdgs):
        if assignment.targets or assignment.sdgs:
            missing = len(assignment.sdgs) - len(assignment.targets)
            if missing and assignment.targets:
                warnings.append(f"{which} target lists padded to match SDG count")
        assignment.targets.extend([] for _ in range(len(assignment.sdgs) - len(assignment.targets)))
    deduped = []
    for row in assignment.targets:
        new_row = []
        for t in row:
            if t not in new_row:
                new_row.append(t)
        deduped.append(new_row)
    assignment.targets = deduped


def _validate_targets(assignment: SdgAssignment, which: str, taxonomy: Taxonomy, warnings: list[str]) -> None:
    for idx, sdg in enumerate(assignment.sdgs):
        kept = []
        for target in assignment.targets[idx]:
            verdict = validate_target(sdg, target, taxonomy)
            if verdict is TargetVerdict.VALID:
                kept.append(target)
            else:
                warnings.append(f"target {target} dropped from {which} SDG {sdg}: {verdict.value}")
        assignment.targets[idx] = kept


def normalize_record(draft: ClassificationRecord, taxonomy: Taxonomy) -> ClassificationRecord:
    """Enforce record invariants; problems become warnings, never errors.

    After normalization: motivated SDGs are a subset of aligned SDGs, target
    lists are parallel to SDG lists, every surviving target is valid against
    the corpus, and free-text fields are whitespace-collapsed.
    """
    record = replace(
        draft,
        paper_type=set(draft.paper_type),
        motivated=SdgAssignment(
            list(draft.motivated.sdgs),
            [list(r) for r in draft.motivated.targets],
            list(draft.motivated.evidence),
        ),
        aligned=SdgAssignment(
            list(draft.aligned.sdgs),
            [list(r) for r in draft.aligned.targets],
            list(draft.aligned.evidence),
        ),
        mentions=replace(draft.mentions),
        ifr=IfrAlignment(list(draft.ifr.sdgs), list(draft.ifr.use_cases), draft.ifr.justification),
        warnings=list(draft.warnings),
    )
    warnings = record.warnings

    canonical = {t for t in record.paper_type if t in PAPER_TYPES}
    if canonical != record.paper_type:
        warnings.append("non-canonical paper types dropped")
    if not canonical:
        canonical = {"other"}
        if "type unknown" not in warnings:
            warnings.append("type unknown")
    record.paper_type = canonical

    for which, assignment in (("motivated", record.motivated), ("aligned", record.aligned)):
        _dedup_sdgs(assignment, which, warnings)
        _reconcile_shape(assignment, which, warnings)

    added = False
    for idx, sdg in enumerate(record.motivated.sdgs):
        if sdg not in record.aligned.sdgs:
            record.aligned.sdgs.append(sdg)
            record.aligned.targets.append(list(record.motivated.targets[idx]))
            added = True
    if added:
        warnings.append("alignment completed from motivation")

    _validate_targets(record.motivated, "motivated", taxonomy, warnings)
    _validate_targets(record.aligned, "aligned", taxonomy, warnings)

    ifr_kept = []
    for sdg in record.ifr.sdgs:
        if sdg in ifr_kept:
            warnings.append(f"duplicate SDG {sdg} dropped from ifr")
            continue
        ifr_kept.append(sdg)
    record.ifr.sdgs = ifr_kept
    if not record.ifr.sdgs and record.ifr.use_cases:
        warnings.append("IFR use cases without IFR SDGs dropped")
        record.ifr.use_cases = []

    record.motivated.evidence = [_collapse_ws(e) for e in record.motivated.evidence if _collapse_ws(e)]
    record.aligned.evidence = [_collapse_ws(e) for e in record.aligned.evidence if _collapse_ws(e)]
    record.ifr.use_cases = [_collapse_ws(c) for c in record.ifr.use_cases if _collapse_ws(c)]
    record.ifr.justification = _collapse_ws(record.ifr.justification)
    record.reasoning = _collapse_ws(record.reasoning)

    return record


def _format_sdg_list(sdgs: list[int]) -> str:
    return "[" + ", ".join(f"SDG {s}" for s in sdgs) + "]"


def _format_target_matrix(targets: list[list[str]]) -> str:
    return "[" + ", ".join("[" + ", ".join(row) + "]" for row in targets) + "]"


def serialize_record(record: ClassificationRecord) -> str:
    """Emit the canonical response-format block for a record.

    Deterministic: equal records serialize to identical bytes. Warnings and
    provenance fields (ids, digests) are artifact metadata and are not part
    of the canonical text. ``parse_response`` + ``normalize_record`` over the
    output reproduces the record.
    """
    types = [t for t in PAPER_TYPES if t in record.paper_type]
    lines = ["---------------------------"]
    lines.append(f"0. Paper type: {', '.join(types)}")
    lines.append("1. SDGs and targets the paper is explicitly motivated by or aims to address:")
    lines.append(f"   - SDGs: {_format_sdg_list(record.motivated.sdgs)}")
    lines.append(f"   - Targets: {_format_target_matrix(record.motivated.targets)}")
    if record.motivated.evidence:
        lines.append("   - Quote(s) from the motivation/introduction:")
        lines.extend(f'   - "{e}"' for e in record.motivated.evidence)
    lines.append("2. SDGs and targets relevant to the technologies or methods developed in the paper:")
    lines.append(f"   - SDGs: {_format_sdg_list(record.aligned.sdgs)}")
    lines.append(f"   - Targets: {_format_target_matrix(record.aligned.targets)}")
    if record.aligned.evidence:
        lines.append("   - Brief justification for each:")
        lines.extend(f'   - "{e}"' for e in record.aligned.evidence)
    lines.append("3. Authors mention in the text:")
    lines.append(f"   - UN SDGs: {'yes' if record.mentions.un_sdgs else 'no'}")
    lines.append(f"   - Sustainability impact: {'yes' if record.mentions.sustainability else 'no'}")
    lines.append(f"   - Ecological impact: {'yes' if record.mentions.ecological else 'no'}")
    lines.append(f"   - Social impact: {'yes' if record.mentions.social else 'no'}")
    lines.append("4. IFR Proposals:")
    lines.append(f"   - IFR-aligned SDGs/targets: {_format_sdg_list(record.ifr.sdgs)}")
    if record.ifr.use_cases:
        lines.append("   - Matching IFR use cases:")
        lines.extend(f'   - "{c}"' for c in record.ifr.use_cases)
    else:
        lines.append("   - Matching IFR use cases: []")
    if record.ifr.justification:
        lines.append(f'   - Brief justification/explanation: "{record.ifr.justification}"')
    lines.append(f'5. Reasoning: "{record.reasoning}"')
    lines.append("------------------------")
    return "\n".join(lines)
