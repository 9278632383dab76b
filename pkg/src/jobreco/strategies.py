"""Recommendation strategies and slate assembly.

Similar-jobs slates hold 3 items. Homepage slates hold 25 items: 5 from the
strategy (popularity when it cannot personalize) followed by the newest active
jobs. Every slate excludes the jobs already seen in the current session, and
similar-jobs slates exclude the anchor.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

from .core import (ColdStartUser, EmptyHistory, MissingEmbedding, SlateRequest, Surface,
                   UnknownJob, ZeroVector)
from .profile import build_profile

SIMILAR_SLATE_SIZE = 3
HOMEPAGE_SLATE_SIZE = 25
PERSONALIZED_SLOTS = 5

# Deterministic cost model used when replay runs without wall-clock timing.
VIRTUAL_BASE_MS = 1.0
VIRTUAL_MS_PER_OP = 1e-4


class StrategyId(str, enum.Enum):
    CBF = "CBF"
    LAST = "LAST"
    BLL = "BLL"
    CF = "CF"
    HYB_BLL = "HYB_BLL"
    POP = "POP"


SIMILAR_STRATEGIES = frozenset({StrategyId.CBF, StrategyId.LAST, StrategyId.BLL})
HOMEPAGE_STRATEGIES = frozenset({StrategyId.CF, StrategyId.BLL, StrategyId.HYB_BLL,
                                 StrategyId.POP})


@dataclass
class Slate:
    surface: Surface
    items: list[str]
    strategy: StrategyId
    latency_ms: float = 0.0
    fallback_used: bool = False
    personalized: int = 0
    work: int = 0
    scores: list[float | None] = field(default_factory=list)

    @property
    def virtual_latency_ms(self) -> float:
        return VIRTUAL_BASE_MS + self.work * VIRTUAL_MS_PER_OP


def round_robin(a: list, b: list, k: int) -> list:
    """Interleave ``a`` and ``b`` starting with ``a``.

    An item already emitted is skipped without using up its source's turn, and
    once one list runs out the other continues alone.
    """
    out, seen = [], set()
    ia = ib = 0
    turn_a = True
    while len(out) < k and (ia < len(a) or ib < len(b)):
        from_a = ib >= len(b) or (turn_a and ia < len(a))
        if from_a:
            item, ia = a[ia], ia + 1
        else:
            item, ib = b[ib], ib + 1
        if item in seen:
            continue
        seen.add(item)
        out.append(item)
        turn_a = not from_a
    return out


class _Work:
    __slots__ = ("ops",)

    def __init__(self):
        self.ops = 0


def _last_reference(engine, req: SlateRequest, work: _Work):
    history = engine.interactions.history(req.user_id)
    work.ops += len(history)
    for ev in reversed(history):
        vec = engine.vectors.get(ev.job_id)
        if vec is not None:
            return vec
    vec = engine.vectors.get(req.anchor_job_id)
    if vec is None:
        raise MissingEmbedding(f"no embedding for anchor {req.anchor_job_id!r}", "job_id")
    return vec


def _bll_reference(engine, req: SlateRequest, d: float, work: _Work):
    history = engine.interactions.history(req.user_id)
    work.ops += len(history)
    profile = build_profile(req.user_id, history, engine.vectors, req.requested_at, d)
    if not profile.reference.any():
        raise ZeroVector("profile reference vector is zero", "reference")
    return profile.reference


def _vector_topk(engine, reference, k, exclude, work: _Work):
    work.ops += len(engine.vectors)
    try:
        return engine.vectors.top_k(reference, k, exclude)
    except ZeroVector:
        raise MissingEmbedding("reference vector is zero", "reference") from None


def _cbf(engine, anchor, k, exclude, work: _Work):
    if anchor not in engine.text:
        return []
    work.ops += engine.text.doc_count
    return engine.text.similar_to(anchor, k, exclude)


def _pad_popular(engine, items: list[str], k: int, exclude: set[str], now: int,
                 work: _Work) -> list[str]:
    need = k - len(items)
    if need <= 0:
        return items
    work.ops += engine.interactions.popular_size()
    items = items + engine.interactions.most_popular(need, exclude | set(items), now)
    if len(items) < k:
        # popularity window too thin: newest active jobs as a last resort
        taken = exclude | set(items)
        for j in engine.jobs_by_recency():
            work.ops += 1
            if len(items) >= k:
                break
            if j not in taken and engine.is_active(j):
                items.append(j)
    return items


def recommend_similar(engine, req: SlateRequest, strategy: StrategyId,
                      d: float | None = None, fallback_to_cbf: bool = True) -> Slate:
    """3-item similar-jobs slate for the job the user is viewing.

    LAST queries with the embedding of the user's most recent job (the anchor
    when the history has none); BLL with the activation-weighted profile.
    When the reference cannot be resolved and ``fallback_to_cbf`` is set, the
    text-similarity list is used instead and the slate is flagged.
    """
    start = time.perf_counter()
    strategy = StrategyId(strategy)
    if strategy not in SIMILAR_STRATEGIES:
        raise ValueError(f"{strategy.value} is not a similar-jobs strategy")
    anchor = req.anchor_job_id
    if anchor not in engine.catalog:
        raise UnknownJob(f"unknown anchor job {anchor!r}", "job_id")
    d = engine.config.decay if d is None else d
    work = _Work()
    exclude = engine.interactions.session_seen(req.user_id, req.session_id) | {anchor}
    fallback = False
    try:
        if strategy is StrategyId.CBF:
            ranked = _cbf(engine, anchor, SIMILAR_SLATE_SIZE, exclude, work)
        else:
            if strategy is StrategyId.LAST:
                ref = _last_reference(engine, req, work)
            else:
                try:
                    ref = _bll_reference(engine, req, d, work)
                except (EmptyHistory, ZeroVector):
                    # nothing resolvable in the history: anchor-only profile
                    ref = _last_reference(engine, req, work)
            ranked = _vector_topk(engine, ref, SIMILAR_SLATE_SIZE, exclude, work)
    except MissingEmbedding:
        if not fallback_to_cbf:
            raise
        fallback = True
        ranked = _cbf(engine, anchor, SIMILAR_SLATE_SIZE, exclude, work)
    items = [j for j, _ in ranked]
    scores: list[float | None] = [s for _, s in ranked]
    if len(items) < SIMILAR_SLATE_SIZE:
        fallback = True
        items = _pad_popular(engine, items, SIMILAR_SLATE_SIZE, exclude, req.requested_at, work)
        scores += [None] * (len(items) - len(scores))
    return Slate(Surface.SIMILAR_JOBS, items, strategy,
                 latency_ms=(time.perf_counter() - start) * 1000.0,
                 fallback_used=fallback, personalized=len(ranked), work=work.ops,
                 scores=scores)


def _personal_bll(engine, req, d, exclude, work) -> list[str]:
    ref = _bll_reference(engine, req, d, work)
    return [j for j, _ in _vector_topk(engine, ref, PERSONALIZED_SLOTS, exclude, work)]


def _personal_cf(engine, req, exclude, work) -> list[str]:
    work.ops += len(engine.interactions.cf.user_items.get(req.user_id, ()))
    ranked = engine.interactions.recommend_cf(req.user_id, PERSONALIZED_SLOTS, exclude,
                                              engine.config.cf_neighbors)
    work.ops += len(ranked)
    return [j for j, _ in ranked]


def recommend_homepage(engine, req: SlateRequest, strategy: StrategyId,
                       d: float | None = None) -> Slate:
    """25-item homepage slate whose first 5 slots come from ``strategy``.

    Cold-start users, and any slots the strategy cannot fill, get the most
    popular jobs. The remaining slots list the newest active jobs.
    """
    start = time.perf_counter()
    strategy = StrategyId(strategy)
    if strategy not in HOMEPAGE_STRATEGIES:
        raise ValueError(f"{strategy.value} is not a homepage strategy")
    d = engine.config.decay if d is None else d
    work = _Work()
    now = req.requested_at
    seen = engine.interactions.session_seen(req.user_id, req.session_id)
    fallback = False
    personal: list[str] = []
    unresolved = (EmptyHistory, ColdStartUser, MissingEmbedding, ZeroVector)
    if strategy is StrategyId.BLL:
        try:
            personal = _personal_bll(engine, req, d, seen, work)
        except unresolved:
            fallback = True
    elif strategy is StrategyId.CF:
        try:
            personal = _personal_cf(engine, req, seen, work)
        except unresolved:
            fallback = True
    elif strategy is StrategyId.HYB_BLL:
        sources = []
        for source in (lambda: _personal_bll(engine, req, d, seen, work),
                       lambda: _personal_cf(engine, req, seen, work)):
            try:
                sources.append(source())
            except unresolved:
                sources.append(None)
        if sources[0] is None and sources[1] is None:
            fallback = True
        else:
            personal = round_robin(sources[0] or [], sources[1] or [], PERSONALIZED_SLOTS)
    if len(personal) < PERSONALIZED_SLOTS:
        fallback = fallback or strategy is not StrategyId.POP
        personal = _pad_popular(engine, personal, PERSONALIZED_SLOTS, seen, now, work)
    rest_needed = HOMEPAGE_SLATE_SIZE - len(personal)
    taken = seen | set(personal)
    rest = []
    for j in engine.jobs_by_recency():
        work.ops += 1
        if len(rest) >= rest_needed:
            break
        if j not in taken and engine.is_active(j):
            rest.append(j)
    return Slate(Surface.HOMEPAGE, personal + rest, strategy,
                 latency_ms=(time.perf_counter() - start) * 1000.0,
                 fallback_used=fallback, personalized=len(personal), work=work.ops)


def recommend(engine, req: SlateRequest, strategy: StrategyId, d: float | None = None) -> Slate:
    if req.surface is Surface.SIMILAR_JOBS:
        return recommend_similar(engine, req, strategy, d)
    return recommend_homepage(engine, req, strategy, d)
