"""Fine-tuning dataset preparation under three entity-ordering strategies.

``base`` shuffles the entity lists rendered into each RE prompt (seeded),
``document_order`` keeps them in appearance order, and ``augmented`` adds one
extra independently-shuffled copy per example, dropping copies whose
ordering coincides with the base record, so the total lands between N and
2N. Assistant answers always use the pseudo format, never JSON: the hosted
fine-tuning pipeline produced unreliable JSON, and the pseudo format is
parsed back locally by ``parse_pseudo_format``.

Strategies only affect RE records; NER prompts carry no entity lists to
reorder, so every strategy emits identical NER records.
"""

import json
import random
from dataclasses import dataclass

from .corpus import Document, RelationGroup
from .errors import EmptyCorpusError
from .evaluation import derive_subseed, shuffle_entities
from .prompts import (
    NER_SYSTEM_TEMPLATE,
    MATERIAL_USER_PROMPT,
    QUANTITY_USER_PROMPT,
    RE_SYSTEM_PROMPT,
    RE_RULES_BLOCK,
    RE_USER_TEMPLATE,
    render_entity_lists,
)

STRATEGIES = ("base", "document_order", "augmented")
RELATION_CLASSES = ("material", "tc", "pressure")

# reshuffle attempts before conceding that a different ordering is impossible
_MAX_RESHUFFLES = 8


@dataclass(frozen=True)
class FineTuneRecord:
    """One conversation-format training example."""

    messages: tuple[dict, ...]
    strategy: str
    source_doc: str

    def to_wire(self) -> dict:
        return {"messages": [dict(m) for m in self.messages]}


def render_pseudo_relations(relations: list[RelationGroup]) -> str:
    """Expected-answer text for RE: one ``key: value`` line per relation."""
    if not relations:
        return "None"
    lines = []
    for group in relations:
        line = f"material: {group.material}, tc: {group.tc}"
        if group.pressure is not None:
            line += f", pressure: {group.pressure}"
        lines.append(line)
    return "\n".join(lines)


def render_pseudo_entities(class_: str, texts: list[str]) -> str:
    """Expected-answer text for NER: a labelled bullet list."""
    if not texts:
        return "None"
    label = "materials" if class_ == "material" else "quantities"
    return "\n".join([f"{label}:"] + [f" - {t}" for t in texts])


def _re_user_prompt(doc: Document, entities: dict[str, list[str]]) -> str:
    user = RE_USER_TEMPLATE.replace("{text}", doc.text).replace(
        "{entities}", render_entity_lists(entities)
    )
    return f"{user}\n\n{RE_RULES_BLOCK}"


def _re_record(doc: Document, entities: dict[str, list[str]], strategy: str) -> FineTuneRecord:
    return FineTuneRecord(
        messages=(
            {"role": "system", "content": RE_SYSTEM_PROMPT},
            {"role": "user", "content": _re_user_prompt(doc, entities)},
            {"role": "assistant", "content": render_pseudo_relations(doc.relations)},
        ),
        strategy=strategy,
        source_doc=doc.id,
    )


def _ner_record(doc: Document, task: str, strategy: str) -> FineTuneRecord:
    class_ = "material" if task == "ner_material" else "quantity"
    user = MATERIAL_USER_PROMPT if task == "ner_material" else QUANTITY_USER_PROMPT
    return FineTuneRecord(
        messages=(
            {"role": "system", "content": NER_SYSTEM_TEMPLATE.replace("{text}", doc.text)},
            {"role": "user", "content": user},
            {
                "role": "assistant",
                "content": render_pseudo_entities(class_, doc.entity_texts(class_)),
            },
        ),
        strategy=strategy,
        source_doc=doc.id,
    )


def _doc_entities(doc: Document) -> dict[str, list[str]]:
    return {c: doc.entity_texts(c) for c in RELATION_CLASSES if doc.entity_texts(c)}


def _shuffled_copy(
    entities: dict[str, list[str]], seed: int, doc_id: str, copy: int
) -> dict[str, list[str]]:
    return shuffle_entities(entities, derive_subseed(seed, doc_id, str(copy)))


def _doc_records(doc: Document, task: str, strategy: str, seed: int) -> list[FineTuneRecord]:
    if task in ("ner_material", "ner_quantity"):
        return [_ner_record(doc, task, strategy)]
    if task != "re":
        raise ValueError(f"unknown task {task!r}")
    entities = _doc_entities(doc)
    if not entities:
        return []
    if strategy == "document_order":
        return [_re_record(doc, entities, strategy)]
    base_entities = _shuffled_copy(entities, seed, doc.id, 0)
    records = [_re_record(doc, base_entities, strategy)]
    if strategy == "augmented":
        for attempt in range(1, _MAX_RESHUFFLES + 1):
            candidate = _shuffled_copy(entities, seed, doc.id, attempt)
            if candidate != base_entities:
                records.append(_re_record(doc, candidate, strategy))
                break
        # single-ordering examples (all lists length <= 1) stay unduplicated
    return records


def prepare_finetune(
    documents: list[Document],
    task: str,
    strategy: str,
    seed: int = 0,
    split_ratio: float = 0.7,
    split_unit: str = "record",
) -> tuple[list[FineTuneRecord], list[FineTuneRecord]]:
    """Build (train, test) fine-tune records from a corpus.

    With the default ``split_unit="record"`` (the unit behind reported
    dataset sizes), records are shuffled with the seeded PRNG after
    generation and cut at ``floor(split_ratio * n)``; augmented copies of
    one document can then land on both sides. ``split_unit="document"``
    partitions documents first, keeping all records of a document together,
    which avoids that leakage. Both are disjoint, exhaustive, and
    reproducible under the seed.

    Raises:
        EmptyCorpusError: no usable documents.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not 0 < split_ratio < 1:
        raise ValueError("split_ratio must be in (0, 1)")
    if split_unit not in ("record", "document"):
        raise ValueError(f"unknown split unit {split_unit!r}")
    if not documents:
        raise EmptyCorpusError("no documents to prepare")

    if split_unit == "document":
        order = list(range(len(documents)))
        random.Random(derive_subseed(seed, "split")).shuffle(order)
        cut = int(split_ratio * len(documents))
        train, test = [], []
        for side, indexes in ((train, order[:cut]), (test, order[cut:])):
            for i in sorted(indexes):
                side.extend(_doc_records(documents[i], task, strategy, seed))
        if not train and not test:
            raise EmptyCorpusError("no documents with usable entities")
        return train, test

    records: list[FineTuneRecord] = []
    for doc in documents:
        records.extend(_doc_records(doc, task, strategy, seed))
    if not records:
        raise EmptyCorpusError("no documents with usable entities")
    order = list(range(len(records)))
    random.Random(derive_subseed(seed, "split")).shuffle(order)
    cut = int(split_ratio * len(records))
    train = [records[i] for i in order[:cut]]
    test = [records[i] for i in order[cut:]]
    return train, test


def write_finetune_file(records: list[FineTuneRecord], path: str) -> None:
    """Write records in the hosted fine-tuning JSONL format (messages only)."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_wire(), ensure_ascii=False) + "\n")
