"""Teacher-driven dataset curation.

A curation job walks each preprompt through a fixed conversation with a
teacher model, parses the quasi-Python list of prompt-answer pairs the
teacher returns, filters refusals and duplicates, and assembles training
datapoints in the `Area : ... Question : ... Answer : ...` grammar.

The pair parser is a hand-written tolerant scanner, not eval(): teacher
output is untrusted text that only usually looks like a Python literal.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .client import TEACHER_TOKEN_ENV, ChatCompletionClient, ClientError
from .util import read_jsonl, round_half_up, write_jsonl
from .verbalize import normalize_spaces

log = logging.getLogger(__name__)

# Conversation templates sent to the teacher, kept word-for-word from the
# working protocol (including its idiosyncratic spelling); {n} is the
# requested pair count, {preprompt} the verbatim area description.
TEMPLATES = {
    "instruction": (
        "I will give these types of preprompts and you will generate "
        "prompt-answer pairs in python list of dictionaries format. These "
        "prompts should be questions that businessmen, citizens, tourists "
        "would demand based on the data in the preprompt. Generate {n} "
        "prompt-answer pairs with very diverse topics. Important : Do not "
        "generate prompts that data in preprompt is not sufficient to answer !"
    ),
    "preprompt": "preprompt = '{preprompt}'",
    "diversity": (
        "Generate {n} prompt-answer pairs, but be creative. Try to cover very "
        "different aspects in prompts, such as which type of commercial "
        "venture would suit here, whether it is residential or touristic, "
        "how you can describe this area etc."
    ),
    "affirmation": (
        'Important Warning : "Do not include questions that we dont have '
        'sufficient data in preprompt to answer" Before generating, repeat '
        "this last Important warning i gave, for affirmation. So, dont "
        'generate answers like "the preprmpt does not provide sufficient info ..."'
    ),
    "topics": (
        "Topics shall be extremely variant : what type of commercial venture "
        "can be opened here, does it look like a transportation hub, what "
        "type of an urban area is this (residential, commercial, touristic, "
        "bussiness, industrial etc.) , does it look like a place where a "
        "grocery shop would earn much, is there a tram line, does it look "
        "like a central quarter in the city, etc. etc. should be extremely "
        "variant. Note, in python list of dictionaries"
    ),
}

DEFAULT_REFUSAL_FILTERS = ("does not provide sufficient", "not enough information")

# Substrings that would make an assembled datapoint ambiguous to split.
MARKERS = (" Question : ", " Answer : ")

PROMPT_KEYS = ("prompt", "question")
ANSWER_KEYS = ("answer", "response")


class PairParseError(ValueError):
    """No parseable list of pairs in the teacher text; carries it for audit."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


@dataclass(frozen=True)
class QAPair:
    prompt: str
    answer: str
    source_preprompt_id: str = ""
    teacher_batch: str = ""

    def __post_init__(self):
        if not self.prompt.strip() or not self.answer.strip():
            raise ValueError("prompt and answer must be nonempty")


@dataclass(frozen=True)
class Datapoint:
    text: str
    preprompt_id: str
    pair_index: int

    def to_json(self) -> dict:
        return {"text": self.text, "preprompt_id": self.preprompt_id,
                "pair_index": self.pair_index}


@dataclass(frozen=True)
class Preprompt:
    id: str
    text: str


@dataclass
class CurationJob:
    """Everything needed to run one curation pass."""

    preprompts: list[Preprompt]
    pairs_per_request: int = 50
    endpoint: str = ""
    model: str = ""
    token_env: str = TEACHER_TOKEN_ENV
    temperature: float = 1.0
    max_retries: int = 3
    rate_limit_per_minute: float = 20.0
    refusal_filters: tuple[str, ...] = DEFAULT_REFUSAL_FILTERS
    # Each turn appends its templates as user messages, then issues one
    # request; the default single turn matches the observed ~50 pairs per
    # preprompt economy.
    turns: tuple[tuple[str, ...], ...] = (("instruction", "preprompt"),)

    def __post_init__(self):
        if self.pairs_per_request < 1:
            raise ValueError("pairs_per_request must be >= 1")
        if self.rate_limit_per_minute <= 0:
            raise ValueError("rate limit must be positive")
        for turn in self.turns:
            for template_id in turn:
                if template_id not in TEMPLATES:
                    raise ValueError(f"unknown template id: {template_id!r}")


def render_teacher_messages(preprompt: str, template_id: str,
                            pairs_per_request: int = 50) -> list[dict]:
    """One chat message for the given template, preprompt spliced verbatim."""
    if template_id not in TEMPLATES:
        raise ValueError(f"unknown template id: {template_id!r}")
    if not preprompt.strip():
        raise ValueError("preprompt must be nonempty")
    content = TEMPLATES[template_id].format(n=pairs_per_request, preprompt=preprompt)
    return [{"role": "user", "content": content}]


# --------------------------------------------------------------------------
# Tolerant pair-list parsing

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"'}


class _Fail(Exception):
    pass


def _skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def _parse_string(text: str, i: int) -> tuple[str, int]:
    quote = text[i]
    i += 1
    out = []
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            out.append(_ESCAPES.get(text[i + 1], text[i + 1]))
            i += 2
        elif ch == quote:
            return "".join(out), i + 1
        else:
            out.append(ch)
            i += 1
    raise _Fail("unterminated string")


def _parse_value(text: str, i: int) -> tuple[object, int]:
    if i < len(text) and text[i] in "\"'":
        return _parse_string(text, i)
    # Bare token (number, true/false, stray word) up to a delimiter; kept
    # only so one odd field does not sink the whole entry.
    start = i
    while i < len(text) and text[i] not in ",}]":
        i += 1
    token = text[start:i].strip()
    if not token:
        raise _Fail("empty value")
    return token, i


def _parse_key(text: str, i: int) -> tuple[str, int]:
    if i < len(text) and text[i] in "\"'":
        return _parse_string(text, i)
    start = i
    while i < len(text) and (text[i].isalnum() or text[i] == "_"):
        i += 1
    if i == start:
        raise _Fail("expected key")
    return text[start:i], i


def _parse_dict(text: str, i: int) -> tuple[dict, int]:
    if i >= len(text) or text[i] != "{":
        raise _Fail("expected '{'")
    i = _skip_ws(text, i + 1)
    entries: dict = {}
    while i < len(text) and text[i] != "}":
        key, i = _parse_key(text, i)
        i = _skip_ws(text, i)
        if i >= len(text) or text[i] != ":":
            raise _Fail("expected ':'")
        i = _skip_ws(text, i + 1)
        value, i = _parse_value(text, i)
        entries[key.strip().lower()] = value
        i = _skip_ws(text, i)
        if i < len(text) and text[i] == ",":
            i = _skip_ws(text, i + 1)  # also tolerates a trailing comma
        elif i < len(text) and text[i] != "}":
            raise _Fail("expected ',' or '}'")
    if i >= len(text):
        raise _Fail("unterminated dict")
    return entries, i + 1


def _parse_dict_list(text: str, i: int) -> tuple[list[dict], int]:
    if text[i] != "[":
        raise _Fail("expected '['")
    i = _skip_ws(text, i + 1)
    dicts = []
    while i < len(text) and text[i] != "]":
        entry, i = _parse_dict(text, i)
        dicts.append(entry)
        i = _skip_ws(text, i)
        if i < len(text) and text[i] == ",":
            i = _skip_ws(text, i + 1)
        elif i < len(text) and text[i] != "]":
            raise _Fail("expected ',' or ']'")
    if i >= len(text):
        raise _Fail("unterminated list")
    return dicts, i + 1


def parse_pairs_stats(teacher_text: str, source_preprompt_id: str = "",
                      teacher_batch: str = "") -> tuple[list[QAPair], int]:
    """(pairs, skipped entry count) from the first parseable dict list.

    Scans every '[' in the text so surrounding prose and code fences are
    ignored; raises PairParseError if no candidate parses.
    """
    dicts: Optional[list[dict]] = None
    for i, ch in enumerate(teacher_text):
        if ch != "[":
            continue
        try:
            dicts, _ = _parse_dict_list(teacher_text, i)
            break
        except _Fail:
            continue
    if dicts is None:
        raise PairParseError("no parseable list of pairs", raw_text=teacher_text)

    pairs = []
    skipped = 0
    for entry in dicts:
        prompt = next((entry[k] for k in PROMPT_KEYS
                       if isinstance(entry.get(k), str)), "")
        answer = next((entry[k] for k in ANSWER_KEYS
                       if isinstance(entry.get(k), str)), "")
        if not prompt.strip() or not answer.strip():
            skipped += 1
            continue
        pairs.append(QAPair(prompt.strip(), answer.strip(),
                            source_preprompt_id, teacher_batch))
    return pairs, skipped


def parse_pairs(teacher_text: str, source_preprompt_id: str = "",
                teacher_batch: str = "") -> list[QAPair]:
    return parse_pairs_stats(teacher_text, source_preprompt_id, teacher_batch)[0]


# --------------------------------------------------------------------------
# Filtering and assembly


def filter_pairs(pairs: list[QAPair], job: Optional[CurationJob] = None,
                 seen: Optional[set] = None) -> list[QAPair]:
    """Drop refusals, marker collisions, and duplicates; keep order.

    Passing a shared `seen` set deduplicates across calls (whole-job
    scope); without it, within this call only.
    """
    filters = job.refusal_filters if job is not None else DEFAULT_REFUSAL_FILTERS
    if seen is None:
        seen = set()
    kept = []
    for pair in pairs:
        answer_lc = pair.answer.lower()
        if any(f.lower() in answer_lc for f in filters):
            continue
        if any(marker in pair.prompt or marker in pair.answer for marker in MARKERS):
            continue
        key = (pair.prompt, pair.answer)
        if key in seen:
            continue
        seen.add(key)
        kept.append(pair)
    return kept


def assemble_datapoint(preprompt: str, pair: QAPair, preprompt_id: str = "",
                       pair_index: int = 0) -> Datapoint:
    text = normalize_spaces(
        f"Area : {preprompt} Question : {pair.prompt} Answer : {pair.answer}")
    return Datapoint(text=text, preprompt_id=preprompt_id, pair_index=pair_index)


def parse_datapoint(text: str) -> tuple[str, str, str]:
    """Invert assemble_datapoint; raises ValueError on grammar violations."""
    if not text.startswith("Area : "):
        raise ValueError("datapoint must start with 'Area : '")
    body = text[len("Area : "):]
    q = body.find(" Question : ")
    if q < 0:
        raise ValueError("datapoint has no ' Question : ' marker")
    rest = body[q + len(" Question : "):]
    a = rest.find(" Answer : ")
    if a < 0:
        raise ValueError("datapoint has no ' Answer : ' marker")
    return body[:q], rest[:a], rest[a + len(" Answer : "):]


def split_dataset(datapoints: list, train_fraction: float = 0.99,
                  seed: int = 0) -> tuple[list, list]:
    """Deterministic shuffled split; validation gets max(1, round((1-f)N))."""
    n = len(datapoints)
    if n < 2:
        raise ValueError(f"need at least 2 datapoints to split, got {n}")
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    val_size = min(n - 1, max(1, round_half_up((1.0 - train_fraction) * n)))
    val_idx = set(order[:val_size])
    train = [datapoints[i] for i in order if i not in val_idx]
    val = [datapoints[i] for i in order[:val_size]]
    return train, val


# --------------------------------------------------------------------------
# Job runner


def _blank_stats() -> dict:
    return {"status": "ok", "requests": 0, "parsed": 0, "unparsed_responses": 0,
            "skipped_entries": 0, "filtered_out": 0, "kept": 0, "retries": 0}


def run_curation(job: CurationJob, dataset_path, report_path,
                 client: Optional[ChatCompletionClient] = None) -> dict:
    """Run (or resume) a curation job; returns the written report.

    Resumable: preprompts that already contributed datapoints to the
    dataset file are skipped, and their report entries carried over. The
    dataset file is appended after every preprompt so an interrupted run
    loses at most one preprompt's work.
    """
    if client is None:
        client = ChatCompletionClient(
            endpoint=job.endpoint, model=job.model, token_env=job.token_env,
            temperature=job.temperature, max_retries=job.max_retries,
            rate_limit_per_minute=job.rate_limit_per_minute)

    dataset_path = Path(dataset_path)
    report_path = Path(report_path)

    done_ids: set[str] = set()
    seen_pairs: set = set()
    if dataset_path.exists():
        for record in read_jsonl(dataset_path):
            done_ids.add(record["preprompt_id"])
            try:
                _, prompt, answer = parse_datapoint(record["text"])
                seen_pairs.add((prompt, answer))
            except ValueError:
                log.warning("existing datapoint for %s does not parse; "
                            "dedup may miss it", record["preprompt_id"])

    prior_entries: dict = {}
    if report_path.exists():
        try:
            prior_entries = json.loads(report_path.read_text()).get("preprompts", {})
        except (json.JSONDecodeError, OSError):
            log.warning("existing report at %s unreadable; starting fresh", report_path)

    report = {"model": client.model, "temperature": client.temperature,
              "preprompts": {}, "totals": _blank_stats()}
    report["totals"].pop("status")

    for pp in job.preprompts:
        if pp.id in done_ids:
            entry = dict(prior_entries.get(pp.id, _blank_stats()))
            entry["status"] = "skipped"
            report["preprompts"][pp.id] = entry
            continue

        stats = _blank_stats()
        pairs: list[QAPair] = []
        conversation: list[dict] = []
        for turn_no, turn in enumerate(job.turns):
            for template_id in turn:
                conversation.extend(render_teacher_messages(
                    pp.text, template_id, job.pairs_per_request))
            try:
                reply = client.complete(conversation)
            except ClientError as exc:
                stats["status"] = "failed"
                stats["error"] = str(exc)
                log.warning("preprompt %s failed: %s", pp.id, exc)
                break
            stats["requests"] += 1
            stats["retries"] += reply.retries
            conversation.append({"role": "assistant", "content": reply.content})
            try:
                batch, skipped = parse_pairs_stats(
                    reply.content, source_preprompt_id=pp.id,
                    teacher_batch=f"{pp.id}/turn{turn_no}")
            except PairParseError:
                stats["unparsed_responses"] += 1
                continue
            stats["parsed"] += len(batch)
            stats["skipped_entries"] += skipped
            pairs.extend(batch)

        kept = filter_pairs(pairs, job, seen=seen_pairs)
        stats["filtered_out"] = len(pairs) - len(kept)
        stats["kept"] = len(kept)
        datapoints = [assemble_datapoint(pp.text, pair, pp.id, i)
                      for i, pair in enumerate(kept)]
        if datapoints:
            write_jsonl(dataset_path, [d.to_json() for d in datapoints], append=True)
        report["preprompts"][pp.id] = stats

    for entry in report["preprompts"].values():
        for key, value in entry.items():
            if key in report["totals"] and isinstance(value, int):
                report["totals"][key] += value
    report["totals"]["preprompt_count"] = len(report["preprompts"])

    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n",
                           encoding="utf-8")
    return report
