"""Deciding which words refer to protected attributes.

Three interchangeable backends annotate words against the nine protected
categories of the UK Equality Act 2010: a static dictionary lookup, an
LLM chat endpoint driven by a fixed prompt protocol, and human annotation
sessions collected through the bundled HTTP service (vote sheets with trap
filtering and majority voting). Agreement between any two annotation
sources is compared with Cohen's kappa on the binary protected/not
decision.
"""

from __future__ import annotations

import enum
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import requests

logger = logging.getLogger(__name__)

API_KEY_ENV = "UNAWARE_LLM_API_KEY"
ENDPOINT_ENV = "UNAWARE_LLM_ENDPOINT"


class ProtectedCategory(enum.Enum):
    AGE = "age"
    DISABILITY = "disability"
    GENDER_REASSIGNMENT = "gender_reassignment"
    MARRIAGE_CIVIL_PARTNERSHIP = "marriage_civil_partnership"
    PREGNANCY_MATERNITY = "pregnancy_maternity"
    RACE = "race"
    RELIGION_BELIEF = "religion_belief"
    SEX = "sex"
    SEXUAL_ORIENTATION = "sexual_orientation"


# Names used in the LLM exchange; replies echo these back.
CATEGORY_DISPLAY = {
    ProtectedCategory.AGE: "Age",
    ProtectedCategory.DISABILITY: "Disability",
    ProtectedCategory.GENDER_REASSIGNMENT: "Gender reassignment",
    ProtectedCategory.MARRIAGE_CIVIL_PARTNERSHIP: "Marriage and civil partnership",
    ProtectedCategory.PREGNANCY_MATERNITY: "Pregnancy and maternity",
    ProtectedCategory.RACE: "Race",
    ProtectedCategory.RELIGION_BELIEF: "Religion and belief",
    ProtectedCategory.SEX: "Sex",
    ProtectedCategory.SEXUAL_ORIENTATION: "Sexual orientation",
}

# Answer options shown to human annotators, in fixed presentation order.
ANNOTATION_OPTIONS = (
    "Age",
    "Disability",
    "Gender reassignment",
    "Marriage and civil partnership",
    "Pregnancy and maternity",
    "Race",
    "Religion or belief",
    "Sex",
    "Sexual orientation",
    "None of the above",
)

NONE_OF_THE_ABOVE = "none_of_the_above"

_CATEGORY_ALIASES: dict[str, ProtectedCategory] = {}
for _cat in ProtectedCategory:
    _CATEGORY_ALIASES[_cat.value] = _cat
    _CATEGORY_ALIASES[CATEGORY_DISPLAY[_cat].lower()] = _cat
_CATEGORY_ALIASES["religion or belief"] = ProtectedCategory.RELIGION_BELIEF
_CATEGORY_ALIASES["marriage or civil partnership"] = ProtectedCategory.MARRIAGE_CIVIL_PARTNERSHIP
_CATEGORY_ALIASES["pregnancy or maternity"] = ProtectedCategory.PREGNANCY_MATERNITY


def parse_category(name: str) -> ProtectedCategory | None:
    """Resolve a category name (any alias, case-insensitive); "none" maps to None."""
    key = " ".join(name.strip().lower().replace("_", " ").split())
    if key in ("none", "none of the above", ""):
        return None
    cat = _CATEGORY_ALIASES.get(key) or _CATEGORY_ALIASES.get(key.replace(" ", "_"))
    if cat is None:
        raise ValueError(f"unknown protected category: {name!r}")
    return cat


@dataclass(frozen=True)
class Annotation:
    """One word's protected-category judgment."""

    word: str
    category: ProtectedCategory | None
    reliability: int
    explanation: str = ""
    source: str = "dictionary"

    def __post_init__(self) -> None:
        if not 0 <= self.reliability <= 100:
            raise ValueError("reliability must be in [0, 100]")
        if self.source not in ("dictionary", "llm", "human", "expert"):
            raise ValueError(f"unknown annotation source: {self.source!r}")

    @property
    def is_protected(self) -> bool:
        return self.category is not None


@dataclass(frozen=True)
class VoteSheet:
    """Accumulated human votes for one word (nine categories + none-of-the-above)."""

    word: str
    votes: Mapping[str, int]

    def __post_init__(self) -> None:
        valid = {c.value for c in ProtectedCategory} | {NONE_OF_THE_ABOVE}
        for key, count in self.votes.items():
            if key not in valid:
                raise ValueError(f"unknown vote bucket: {key!r}")
            if count < 0:
                raise ValueError("vote counts must be non-negative")
        if self.total() < 1:
            raise ValueError("a vote sheet needs at least one vote")

    def total(self) -> int:
        return sum(self.votes.values())


class TrapBand(enum.Enum):
    LOW = "low"    # expected answer 1 or 2
    HIGH = "high"  # expected answer 4 or 5


@dataclass(frozen=True)
class TrapItem:
    word: str
    expected_band: TrapBand


class TrapResult(NamedTuple):
    reliable: bool
    violations: tuple[str, ...]


def identify_dictionary(
    words: Sequence[str], dictionary: Mapping[str, ProtectedCategory]
) -> list[Annotation]:
    """Annotate words by dictionary lookup (case-insensitive).

    Hits carry reliability 100; words absent from the dictionary get
    category None with reliability 0.
    """
    table = {w.lower(): c for w, c in dictionary.items()}
    out = []
    for word in words:
        cat = table.get(word.lower())
        if cat is not None:
            out.append(Annotation(word=word, category=cat, reliability=100, source="dictionary"))
        else:
            out.append(Annotation(word=word, category=None, reliability=0, source="dictionary"))
    return out


# ---------------------------------------------------------------------------
# LLM backend

CATEGORY_DEFINITIONS_PROMPT = """Consider these 9 protected categories defined by the Equality Act law to avoid discrimination of automatic decision-making algorithms:
"Age": A person belonging to a particular age or range of ages (for example, teenagers).
"Disability": A person has a disability if she or he has a physical or mental impairment which has a substantial and long-term adverse effect on that person's ability to carry out normal day-to-day activities.
"Gender reassignment": The process of transitioning from one sex to another.
"Marriage and civil partnership": Marriage is a union between a man and a woman or between a same-sex couple. Same-sex couples can also have their relationships legally recognised as 'civil partnerships'. Civil partners must not be treated less favourably than married couples.
"Pregnancy and maternity": Pregnancy is the condition of being pregnant or expecting a baby. Maternity refers to the period after the birth, and is linked to maternity leave in the employment context. In the non-work context, protection against maternity discrimination is for 26 weeks after giving birth, and this includes treating a woman unfavourably because she is breastfeeding.
"Race": Refers to the protected characteristic of race. It refers to a group of people defined by their race, colour, and nationality (including citizenship) ethnic or national origins.
"Religion and belief": Religion refers to any religion, including a lack of religion. Belief refers to any religious or philosophical belief and includes a lack of belief. Generally, a belief should affect your life choices or the way you live for it to be included in the definition.
"Sex": A man or a woman.
"Sexual orientation": Whether a person's sexual attraction is towards their own sex, the opposite sex, or both sexes."""

CATEGORY_LINKS_PROMPT = """You can learn more about the discrimination along each protected attribute on the following URLs:
"Age": https://www.equalityhumanrights.com/en/advice-and-guidance/age-discrimination
"Disability": https://www.equalityhumanrights.com/en/disability-advice-and-guidance
"Gender reassignment": https://www.equalityhumanrights.com/en/advice-and-guidance/gender-reassignment-discrimination
"Marriage and civil partnership": https://www.equalityhumanrights.com/en/advice-and-guidance/marriage-and-civil-partnership-discrimination
"Pregnancy and maternity": https://www.equalityhumanrights.com/en/node/5916
"Race": https://www.equalityhumanrights.com/en/advice-and-guidance/race-discrimination
"Religion and belief": https://www.equalityhumanrights.com/en/religion-or-belief-work
"Sex": https://www.equalityhumanrights.com/en/advice-and-guidance/sex-discrimination
"Sexual orientation": https://www.equalityhumanrights.com/en/advice-and-guidance/sexual-orientation-discrimination"""

WORD_PROMPT_TEMPLATE = """Given the previously defined protected categories "Age", "Disability", "Gender reassignment", "Marriage and civil partnership", "Pregnancy and maternity", "Race", "Religion and belief", "Sex", and "Sexual orientation". How would you classify the word "{word}" and which [0,100] reliability score (only one) would you give to your assessment? You must assign one category. If a word does not fit any categories, you must assign the category "None" with the reliability score and the relative explanation. Provide the answer in the format: "Protected Category|Reliability Score from 0 to 100 for the protected category|Explanation of why the word belongs to the protected category". In case a word does not fall into any category, provide the answer in the format: "None|Reliability Score from 0 to 100 for the None category|Explanation of why the word does not fall under any of the defined protected categories. Each answer must have exactly two | symbols in only one line; otherwise, I cannot process your response."""


@dataclass(frozen=True)
class LlmConfig:
    """Connection and protocol settings for the LLM annotation backend.

    ``batch_size`` controls how many words share one conversation: the two
    context prompts are sent once per batch, then each word is asked in
    turn with the running history attached.
    """

    endpoint: str
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.3
    max_retries: int = 3
    timeout: float = 30.0
    concurrency: int = 4
    batch_size: int = 1
    api_key_env: str = API_KEY_ENV

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.concurrency < 1 or self.batch_size < 1:
            raise ValueError("concurrency and batch_size must be >= 1")


def format_llm_reply(category: ProtectedCategory | None, reliability: int, explanation: str) -> str:
    """Canonical reply line: ``Category | score | explanation``."""
    name = CATEGORY_DISPLAY[category] if category is not None else "None"
    return f"{name} | {reliability} | {explanation}"


def parse_llm_reply(reply: str) -> tuple[ProtectedCategory | None, int, str]:
    """Parse a ``Category|score|explanation`` reply line.

    The reply must contain exactly two ``|`` symbols; the category must be
    one of the nine names or "None" (case-insensitive); the score must be
    an integer in [0, 100]. Anything else raises :class:`ValueError`.
    """
    parts = reply.split("|")
    if len(parts) != 3:
        raise ValueError(f"reply must have exactly two '|' symbols, got {len(parts) - 1}: {reply!r}")
    category = parse_category(parts[0])
    score_text = parts[1].strip()
    try:
        score = int(score_text)
    except ValueError:
        raise ValueError(f"reliability score is not an integer: {score_text!r}") from None
    if not 0 <= score <= 100:
        raise ValueError(f"reliability score outside [0, 100]: {score}")
    return category, score, parts[2].strip()


def _chat(config: LlmConfig, messages: list[dict]) -> str:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {"model": config.model, "temperature": config.temperature, "messages": messages}
    response = requests.post(config.endpoint, json=payload, headers=headers, timeout=config.timeout)
    response.raise_for_status()
    body = response.json()
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"malformed chat response: {body!r}") from exc


def _annotate_batch(batch: Sequence[str], config: LlmConfig) -> list[Annotation]:
    history: list[dict] = [
        {"role": "user", "content": CATEGORY_DEFINITIONS_PROMPT},
        {"role": "user", "content": CATEGORY_LINKS_PROMPT},
    ]
    annotations = []
    for word in batch:
        question = {"role": "user", "content": WORD_PROMPT_TEMPLATE.format(word=word)}
        attempts = config.max_retries + 1
        annotation = None
        failure = ""
        for attempt in range(attempts):
            try:
                reply = _chat(config, history + [question])
                category, score, explanation = parse_llm_reply(reply)
                annotation = Annotation(
                    word=word, category=category, reliability=score,
                    explanation=explanation, source="llm",
                )
                history.extend([question, {"role": "assistant", "content": reply}])
                break
            except (requests.RequestException, ValueError) as exc:
                failure = str(exc)
                if attempt + 1 < attempts:
                    time.sleep(min(0.5 * 2**attempt, 8.0))
        if annotation is None:
            logger.warning("annotation failed for %r after %d attempt(s): %s", word, attempts, failure)
            annotation = Annotation(
                word=word, category=None, reliability=0,
                explanation=f"annotation-failure: {failure}", source="llm",
            )
        annotations.append(annotation)
    return annotations


def identify_llm(words: Sequence[str], config: LlmConfig) -> list[Annotation]:
    """Annotate words through an OpenAI-style chat endpoint.

    Malformed replies and transport errors are retried up to
    ``config.max_retries`` times with exponential backoff; a word whose
    retries are exhausted yields a failure annotation (category None,
    explanation prefixed ``annotation-failure:``) and the batch continues.
    Output order always matches input order regardless of concurrency.
    """
    batches = [words[i : i + config.batch_size] for i in range(0, len(words), config.batch_size)]
    if not batches:
        return []
    if config.concurrency == 1 or len(batches) == 1:
        results = [_annotate_batch(b, config) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            results = list(pool.map(lambda b: _annotate_batch(b, config), batches))
    return [ann for chunk in results for ann in chunk]


def annotation_failed(annotation: Annotation) -> bool:
    return annotation.explanation.startswith("annotation-failure:")


# ---------------------------------------------------------------------------
# Human annotation arithmetic

def trap_filter(
    session: Sequence[tuple[str, int]], traps: Sequence[TrapItem]
) -> TrapResult:
    """Decide whether a session's trap answers make it reliable.

    Reliable iff every low-band trap was answered 1 or 2 and every
    high-band trap 4 or 5. A trap without a response in the session is a
    precondition violation and raises :class:`ValueError`.
    """
    answers: dict[str, int] = {}
    for word, likert in session:
        if not 1 <= likert <= 5:
            raise ValueError(f"likert answer outside 1..5 for {word!r}: {likert}")
        answers[word] = likert
    violations = []
    for trap in traps:
        if trap.word not in answers:
            raise ValueError(f"session has no response for trap word {trap.word!r}")
        value = answers[trap.word]
        band = (1, 2) if trap.expected_band is TrapBand.LOW else (4, 5)
        if value not in band:
            violations.append(trap.word)
    return TrapResult(reliable=not violations, violations=tuple(violations))


def majority_vote(sheet: VoteSheet) -> Annotation:
    """Resolve a vote sheet into an annotation.

    The word is protected iff the summed category votes strictly exceed the
    none-of-the-above votes. The category is the plurality winner among the
    nine; an exact tie picks the lexicographically first contender and says
    so in the explanation. Reliability is the winning side's vote share,
    rounded to a percentage.
    """
    category_votes = {
        c: sheet.votes.get(c.value, 0) for c in ProtectedCategory
    }
    protected_total = sum(category_votes.values())
    none_votes = sheet.votes.get(NONE_OF_THE_ABOVE, 0)
    total = protected_total + none_votes
    protected = protected_total > none_votes
    if protected:
        best = max(category_votes.values())
        contenders = sorted(c.value for c, n in category_votes.items() if n == best)
        category = ProtectedCategory(contenders[0])
        explanation = ""
        if len(contenders) > 1:
            explanation = f"tie between {', '.join(contenders)}; chose {contenders[0]}"
        reliability = round(100 * protected_total / total)
    else:
        category = None
        explanation = ""
        reliability = round(100 * none_votes / total)
    return Annotation(
        word=sheet.word, category=category, reliability=reliability,
        explanation=explanation, source="human",
    )


def cohen_kappa(a: Mapping[str, bool], b: Mapping[str, bool]) -> float:
    """Cohen's kappa over two binary protected/not annotations of one word set.

    Chance agreement uses the marginal products of the 2x2 table. When both
    annotators are constant and identical (chance agreement 1), kappa is
    defined as 1.0. The raw value is returned, which can be negative.
    """
    if set(a) != set(b):
        raise ValueError("annotations cover different word sets")
    n = len(a)
    if n < 2:
        raise ValueError("kappa needs at least 2 words")
    yy = sum(1 for w in a if a[w] and b[w])
    nn = sum(1 for w in a if not a[w] and not b[w])
    p_o = (yy + nn) / n
    pa = sum(1 for w in a if a[w]) / n
    pb = sum(1 for w in b if b[w]) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def protected_map(annotations: Iterable[Annotation]) -> dict[str, bool]:
    """Binary protected/not view of annotations (failures count as not protected)."""
    return {a.word: a.is_protected and not annotation_failed(a) for a in annotations}


def cohen_kappa_per_category(
    a: Iterable[Annotation], b: Iterable[Annotation]
) -> dict[ProtectedCategory, float]:
    """Kappa computed separately per category over the common word set."""
    map_a = {ann.word: ann.category for ann in a}
    map_b = {ann.word: ann.category for ann in b}
    common = sorted(set(map_a) & set(map_b))
    out = {}
    for cat in ProtectedCategory:
        out[cat] = cohen_kappa(
            {w: map_a[w] is cat for w in common},
            {w: map_b[w] is cat for w in common},
        )
    return out


# ---------------------------------------------------------------------------
# File formats and bundled data

def load_dictionary(path: str | Path | None = None) -> dict[str, ProtectedCategory]:
    """Load a protected-word dictionary from TSV (word, category[, score]).

    Without a path, the bundled default lexicon is returned.
    """
    if path is None:
        source = resources.files("unaware.data").joinpath("protected_dictionary.tsv")
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    table: dict[str, ProtectedCategory] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"dictionary line {lineno}: expected word<TAB>category")
        category = parse_category(parts[1])
        if category is None:
            raise ValueError(f"dictionary line {lineno}: category may not be 'none'")
        table[parts[0].strip().lower()] = category
    return table


def load_trap_words(path: str | Path | None = None) -> list[TrapItem]:
    """Load trap items from TSV (word, band); defaults to the bundled fixture."""
    if path is None:
        source = resources.files("unaware.data").joinpath("trap_words.tsv")
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    traps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"trap file line {lineno}: expected word<TAB>band")
        traps.append(TrapItem(word=parts[0].strip().lower(), expected_band=TrapBand(parts[1].strip())))
    return traps


def save_annotations_tsv(annotations: Iterable[Annotation], path: str | Path) -> None:
    """Write annotations as ``word<TAB>category<TAB>reliability<TAB>source``."""
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            category = ann.category.value if ann.category is not None else "none"
            fh.write(f"{ann.word}\t{category}\t{ann.reliability}\t{ann.source}\n")


def load_annotations_tsv(path: str | Path) -> list[Annotation]:
    annotations = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}: line {lineno}: expected at least word<TAB>category")
            word = parts[0]
            category = parse_category(parts[1])
            reliability = int(parts[2]) if len(parts) > 2 and parts[2] else 0
            source = parts[3] if len(parts) > 3 and parts[3] else "expert"
            annotations.append(
                Annotation(word=word, category=category, reliability=reliability, source=source)
            )
    return annotations
