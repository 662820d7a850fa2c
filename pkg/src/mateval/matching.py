"""String matchers used to compare predicted entities against gold ones.

Four tiers: strict (exact after whitespace normalization), soft
(Ratcliff/Obershelp similarity with a threshold), semantic (external
cross-encoder service behind :class:`SimilarityProvider`), and formula
matching (normalize both sides to chemical compositions and compare
element by element, expanding substitution clauses).
"""

import re
from dataclasses import dataclass
from difflib import SequenceMatcher

import requests

from .errors import MatEvalError, ProviderUnavailableError
from .materials import (
    DEFAULT_TOL,
    compositions_equal,
    expand_substitutions,
    format_composition,
    parse_material,
)

DEFAULT_THRESHOLD = 0.9

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class MatchOutcome:
    """Verdict of a matcher, with the tier that decided it.

    ``tier`` is one of ``strict``, ``soft``, ``semantic``, ``formula`` or
    ``none`` (always ``none`` when ``matched`` is false). ``similarity`` is
    populated by the soft and semantic tiers.
    """

    matched: bool
    tier: str = "none"
    similarity: float | None = None
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "tier": self.tier,
            "similarity": self.similarity,
            "detail": self.detail,
        }


def normalize_whitespace(text: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return _WS_RE.sub(" ", text.strip())


def strict_match(a: str, b: str) -> bool:
    """Exact comparison after whitespace normalization."""
    return normalize_whitespace(a) == normalize_whitespace(b)


def ratcliff_obershelp(a: str, b: str) -> float:
    """Ratcliff/Obershelp similarity: 2*K/(len(a)+len(b)).

    K is the character total matched by recursive longest-common-substring
    decomposition with the leftmost-in-``a`` tie-break (the stdlib
    SequenceMatcher algorithm; junk heuristics disabled so the value is
    exact for any input). Returns 1.0 when both strings are empty.
    """
    return SequenceMatcher(None, a, b, autojunk=False).ratio()


def soft_match(a: str, b: str, threshold: float = DEFAULT_THRESHOLD) -> MatchOutcome:
    """Match when the Ratcliff/Obershelp similarity reaches ``threshold``.

    Both sides are whitespace-normalized first, so anything strict matching
    accepts scores 1.0 here, whatever the threshold.
    """
    similarity = ratcliff_obershelp(normalize_whitespace(a), normalize_whitespace(b))
    if similarity >= threshold:
        return MatchOutcome(True, "soft", similarity)
    return MatchOutcome(False, "none", similarity)


class SimilarityProvider:
    """Scorer contract for semantic matching: ``score(a, b) -> [0, 1]``.

    Conforming providers must return 1.0 for identical inputs. The bundled
    implementation calls an external HTTP service; tests may substitute any
    object with a compatible ``score``.
    """

    def score(self, a: str, b: str) -> float:
        raise NotImplementedError


class HttpSimilarityProvider(SimilarityProvider):
    """Client for the similarity service wire contract.

    Request body ``{"text_a": ..., "text_b": ...}``, response
    ``{"score": <decimal>}``. A shared instance is safe to use from
    multiple threads; each call enforces ``timeout``.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def score(self, a: str, b: str) -> float:
        try:
            response = requests.post(
                self.endpoint,
                json={"text_a": a, "text_b": b},
                timeout=self.timeout,
            )
            response.raise_for_status()
            return float(response.json()["score"])
        except (requests.RequestException, ValueError, KeyError) as exc:
            raise ProviderUnavailableError(
                f"similarity service at {self.endpoint} failed: {exc}"
            ) from exc


def semantic_match(
    a: str,
    b: str,
    threshold: float = DEFAULT_THRESHOLD,
    provider: SimilarityProvider | None = None,
) -> MatchOutcome:
    """Match when the provider's semantic similarity reaches ``threshold``.

    Raises:
        ProviderUnavailableError: no provider, transport failure, or timeout.
            Callers running evaluations must report the matcher as skipped,
            never silently score zero.
    """
    if provider is None:
        raise ProviderUnavailableError("no similarity provider configured")
    similarity = provider.score(a, b)
    if similarity >= threshold:
        return MatchOutcome(True, "semantic", similarity)
    return MatchOutcome(False, "none", similarity)


def material_variants(
    text: str, lexicon: tuple[str, ...] | None = None
) -> list[dict] | None:
    """Candidate compositions of a material expression, or None.

    Parses the expression and expands its substitution sets; any parse or
    expansion failure yields None. This is the per-string half of formula
    matching, split out so evaluations can cache it per entity instead of
    re-parsing on every pair.
    """
    try:
        return [
            v.composition for v in expand_substitutions(parse_material(text, lexicon))
        ]
    except MatEvalError:
        return None


def formula_match(
    a: str,
    b: str,
    tol: float = DEFAULT_TOL,
    lexicon: tuple[str, ...] | None = None,
) -> MatchOutcome:
    """Compare two material expressions by normalized chemical composition.

    Extends strict matching: identical strings match at tier ``strict``.
    Otherwise both sides are parsed (descriptors from ``lexicon`` stripped
    first) and every pair drawn from the two substitution expansions is
    compared with :func:`compositions_equal`. Parse or expansion failures on
    either side fold into a non-match with the failure recorded in
    ``detail``.
    """
    if strict_match(a, b):
        return MatchOutcome(True, "strict")
    try:
        left = expand_substitutions(parse_material(a, lexicon))
    except MatEvalError as exc:
        return MatchOutcome(False, "none", detail=f"left side unparseable: {exc}")
    try:
        right = expand_substitutions(parse_material(b, lexicon))
    except MatEvalError as exc:
        return MatchOutcome(False, "none", detail=f"right side unparseable: {exc}")
    for va in left:
        for vb in right:
            if compositions_equal(va.composition, vb.composition, tol):
                detail = (
                    f"{format_composition(va.composition)} ~ "
                    f"{format_composition(vb.composition)}"
                )
                return MatchOutcome(True, "formula", detail=detail)
    return MatchOutcome(False, "none", detail="no composition variant pair matched")
