"""Prompt construction (zero-shot, few-shot, chain-of-thought) and answer extraction."""

import json
import re
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

from .config import (
    CONTRADICTION_CUES,
    ENTAILMENT_CUES,
    FINQA_EXEMPLARS,
    MAX_PROMPT_TOKENS,
    SARA_EXEMPLARS,
)
from .errors import ConfigError, DataError
from .llm import count_tokens_approx
from .utils import read_jsonl


class PromptMode(StrEnum):
    ZERO = "zero"
    FEW = "few"
    COT = "cot"


class Template(StrEnum):
    SARA = "sara"
    FINQA = "finqa"


class Verdict(StrEnum):
    ENTAILMENT = "Entailment"
    CONTRADICTION = "Contradiction"


INSTRUCTIONS = {
    Template.SARA: "Determine whether the statement is Entailment or Contradiction given the statute.",
    Template.FINQA: "Answer the question using the report; show a program.",
}
DEFAULT_EXEMPLARS = {Template.SARA: SARA_EXEMPLARS, Template.FINQA: FINQA_EXEMPLARS}
BLOCK_SEPARATOR = "\n\n###\n\n"


class PromptTooLong(DataError):
    """A prompt whose token estimate exceeds the configured budget."""


class MissingCot(ConfigError):
    """Chain-of-thought prompting with an exemplar that has no explanation."""


class EmptyPromptInput(DataError):
    pass


class NoVerdictFound(DataError):
    pass


class NoAnswerFound(DataError):
    pass


@dataclass(frozen=True)
class Exemplar:
    context: str
    question: str
    answer: str
    cot: str | None = None
    program: str | None = None
    id: str = ""

    def __post_init__(self):
        if not self.answer.strip():
            raise DataError(f"exemplar {self.id or self.question[:40]!r} has an empty answer")


@dataclass(frozen=True)
class PromptConfig:
    mode: PromptMode
    exemplar_bank: tuple[Exemplar, ...] = ()
    n_exemplars: int | None = None
    template: Template = Template.SARA
    max_prompt_tokens: int = MAX_PROMPT_TOKENS

    def __post_init__(self):
        if self.n_exemplars is None:
            object.__setattr__(self, "n_exemplars", DEFAULT_EXEMPLARS[Template(self.template)])
        if self.mode != PromptMode.ZERO and self.n_exemplars > len(self.exemplar_bank):
            raise ConfigError(
                f"{self.n_exemplars} exemplars requested but the bank holds {len(self.exemplar_bank)}"
            )

    def exemplars(self) -> tuple[Exemplar, ...]:
        if self.mode == PromptMode.ZERO:
            return ()
        return self.exemplar_bank[: self.n_exemplars]


@dataclass(frozen=True)
class BuiltPrompt:
    text: str
    approx_tokens: int
    exemplar_ids: tuple[str, ...]
    cue: str  # last line of the prompt, which the completion continues


def load_exemplar_bank(path: Path) -> tuple[Exemplar, ...]:
    """Exemplars from a JSON Lines file, in file order."""
    path = Path(path)
    bank = []
    try:
        for lineno, record in read_jsonl(path):
            try:
                bank.append(
                    Exemplar(
                        context=record["context"],
                        question=record["question"],
                        answer=str(record["answer"]),
                        cot=record.get("cot"),
                        program=record.get("program"),
                        id=str(record.get("id", f"{path.stem}-{lineno}")),
                    )
                )
            except KeyError as e:
                raise DataError(f"{path}:{lineno}: exemplar missing {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON line ({e})") from e
    return tuple(bank)


def _cue(config: PromptConfig) -> str:
    if config.mode == PromptMode.COT:
        return "Explanation:"
    if config.template == Template.FINQA:
        return "Program:"
    return "Answer:"


def _exemplar_block(exemplar: Exemplar, config: PromptConfig) -> str:
    lines = ["Context:", exemplar.context, "", f"Question: {exemplar.question}"]
    if config.mode == PromptMode.COT:
        if not exemplar.cot:
            raise MissingCot(f"exemplar {exemplar.id!r} has no explanation for chain-of-thought mode")
        lines.append(f"Explanation: {exemplar.cot}")
    if config.template == Template.FINQA and exemplar.program:
        lines.append(f"Program: {exemplar.program}")
    lines.append(f"Answer: {exemplar.answer}")
    return "\n".join(lines)


def build_prompt(config: PromptConfig, context: str, question: str) -> BuiltPrompt:
    """Instruction, exemplar blocks in bank order, then the test block."""
    if not context.strip() or not question.strip():
        raise EmptyPromptInput("prompt needs a nonempty context and question")

    exemplars = config.exemplars()
    cue = _cue(config)
    blocks = [_exemplar_block(e, config) for e in exemplars]
    blocks.append("\n".join(["Context:", context, "", f"Question: {question}", cue]))
    text = INSTRUCTIONS[Template(config.template)] + "\n\n" + BLOCK_SEPARATOR.join(blocks)

    tokens = count_tokens_approx(text)
    if tokens > config.max_prompt_tokens:
        raise PromptTooLong(
            f"prompt is ~{tokens} tokens, over the budget of {config.max_prompt_tokens}"
        )
    return BuiltPrompt(text, tokens, tuple(e.id for e in exemplars), cue)


def _cue_pattern(cues) -> str:
    return "|".join(re.escape(c) for c in sorted(cues, key=len, reverse=True))


def extract_sara_verdict(
    completion: str,
    entailment_cues=ENTAILMENT_CUES,
    contradiction_cues=CONTRADICTION_CUES,
) -> Verdict:
    """The last verdict cue in the completion wins.

    Cues are the configured words plus yes/no right after an "Answer" cue.
    """
    found: list[tuple[int, Verdict]] = []
    pairs = ((entailment_cues, Verdict.ENTAILMENT), (contradiction_cues, Verdict.CONTRADICTION))
    for cues, verdict in pairs:
        if cues:
            for match in re.finditer(rf"\b(?:{_cue_pattern(cues)})\b", completion, re.IGNORECASE):
                found.append((match.start(), verdict))
    for match in re.finditer(r"\banswer\b[^\w\n]*(?:is\s+)?(yes|no)\b", completion, re.IGNORECASE):
        verdict = Verdict.ENTAILMENT if match.group(1).lower() == "yes" else Verdict.CONTRADICTION
        found.append((match.start(1), verdict))
    if not found:
        raise NoVerdictFound("no Entailment/Contradiction cue in the completion")
    return max(found)[1]


def extract_finqa_answer(completion: str) -> tuple[str | None, str | None]:
    """(answer, program) from the last "Answer:" and "Program:" lines."""
    answer = program = None
    for line in completion.splitlines():
        line = line.strip()
        if line.startswith("Program:"):
            program = line[len("Program:") :].strip()
        elif line.startswith("Answer:"):
            answer = line[len("Answer:") :].strip()
    if answer is None and program is None:
        raise NoAnswerFound("no Answer: or Program: line in the completion")
    return answer, program
