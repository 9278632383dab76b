"""The engine: catalog plus every store, kept consistent on each write."""

from __future__ import annotations

import dataclasses
import threading
from pathlib import Path
from dataclasses import dataclass, field

from .core import (DEFAULT_DIMENSION, EmptyDocument, Interaction, InvalidParams, JobPosting,
                   RecordError, UnknownJob, as_vector, check_positive, embedding_from_dict,
                   job_from_dict, job_to_dict, load_records, validate_job, write_jsonl)
from .interactions import DEFAULT_WINDOW_DAYS, InteractionStore
from .profile import DEFAULT_DECAY
from .strategies import Slate, StrategyId, recommend
from .text_index import TfIdfIndex, tokenize
from .vector_index import VectorStore


@dataclass
class EngineConfig:
    dimension: int = DEFAULT_DIMENSION
    decay: float = DEFAULT_DECAY
    cf_neighbors: int = 10
    window_days: int = DEFAULT_WINDOW_DAYS
    experiments: list = field(default_factory=list)
    listen: str = "127.0.0.1:8000"
    default_similar: StrategyId = StrategyId.LAST
    default_homepage: StrategyId = StrategyId.BLL

    def __post_init__(self):
        check_positive("dimension", self.dimension, allow_float=False)
        check_positive("decay", self.decay)
        check_positive("cf_neighbors", self.cf_neighbors, allow_float=False)
        check_positive("window_days", self.window_days, allow_float=False)
        self.default_similar = StrategyId(self.default_similar)
        self.default_homepage = StrategyId(self.default_homepage)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        from .experiment import ExperimentConfig

        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}", sorted(unknown)[0])
        data["experiments"] = [e if isinstance(e, ExperimentConfig) else
                               ExperimentConfig.from_dict(e)
                               for e in data.get("experiments") or []]
        return cls(**data)


class Engine:
    """Catalog, embedding store, text index and interaction log behind one API.

    Every write completes before the method returns, so the next request sees it.
    """

    def __init__(self, config: EngineConfig | None = None, clock=None):
        self.config = config or EngineConfig()
        self.clock = clock
        self.catalog: dict[str, JobPosting] = {}
        self.vectors = VectorStore(self.config.dimension)
        self.text = TfIdfIndex()
        self.interactions = InteractionStore(clock, self.config.window_days, self.is_active)
        self._recency: list[str] | None = None
        self._catalog_lock = threading.Lock()

    def is_active(self, job_id: str) -> bool:
        job = self.catalog.get(job_id)
        return job is not None and job.active

    # -- writes ----------------------------------------------------------------

    def add_job(self, job: JobPosting, embedding=None) -> None:
        validate_job(job, self.config.dimension, embedding)
        vector = None if embedding is None else as_vector(embedding, self.config.dimension,
                                                          "embedding")
        has_text = bool(tokenize(job.description))
        if vector is None and not has_text:
            raise EmptyDocument(f"description of {job.job_id!r} has no indexable terms",
                                "description")
        with self._catalog_lock:
            if vector is not None:
                self.vectors.upsert(job.job_id, vector, active=job.active)
            elif job.job_id in self.vectors:
                self.vectors.set_active(job.job_id, job.active)
            if has_text:
                self.text.index_job(job.job_id, job.description)
            self.text.set_active(job.job_id, job.active)
            self.catalog[job.job_id] = job
            self._recency = None

    def add_embedding(self, job_id: str, vector) -> None:
        job = self.catalog.get(job_id)
        if job is None:
            raise UnknownJob(f"embedding for unknown job {job_id!r}", "job_id")
        self.vectors.upsert(job_id, vector, active=job.active)

    def set_active(self, job_id: str, active: bool) -> None:
        with self._catalog_lock:
            job = self.catalog.get(job_id)
            if job is None:
                raise UnknownJob(f"unknown job {job_id!r}", "job_id")
            self.catalog[job_id] = dataclasses.replace(job, active=active)
            self.vectors.set_active(job_id, active)
            self.text.set_active(job_id, active)
            self._recency = None

    def record(self, ev: Interaction) -> Interaction:
        return self.interactions.record(ev)

    # -- reads -----------------------------------------------------------------

    def jobs_by_recency(self) -> list[str]:
        """All catalog ids, newest first, ties by ascending id."""
        order = self._recency
        if order is None:
            with self._catalog_lock:
                jobs = list(self.catalog.values())
            order = [j.job_id for j in sorted(jobs, key=lambda j: (-j.created_at, j.job_id))]
            self._recency = order
        return order

    def recommend(self, req, strategy: StrategyId, d: float | None = None) -> Slate:
        return recommend(self, req, strategy, d)

    def stats(self) -> dict:
        return {
            "jobs": len(self.catalog),
            "active_jobs": sum(1 for j in self.catalog.values() if j.active),
            "embeddings": len(self.vectors),
            "indexed_documents": self.text.doc_count,
            "interactions": len(self.interactions),
            "users": len(self.interactions.users()),
        }

    # -- files -----------------------------------------------------------------

    def load_jobs(self, path, strict: bool = True) -> tuple[int, list[RecordError]]:
        """Load job lines; a line may carry an optional ``embedding`` array."""
        return load_records(path, lambda obj, line: self.add_job(job_from_dict(obj, line),
                                                                 obj.get("embedding")), strict)

    def load_embeddings(self, path, strict: bool = True) -> tuple[int, list[RecordError]]:
        return load_records(path, lambda obj, line: self.add_embedding(
            *embedding_from_dict(obj, line)), strict)

    def load_interactions(self, path, strict: bool = True) -> tuple[int, list[RecordError]]:
        return self.interactions.load_jsonl(path, strict)

    def dump(self, directory) -> dict[str, int]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        return {
            "jobs": write_jsonl(out / "jobs.jsonl", (job_to_dict(j) for j in self.catalog.values())),
            "embeddings": self.vectors.dump_jsonl(out / "embeddings.jsonl"),
            "interactions": self.interactions.dump_jsonl(out / "interactions.jsonl"),
        }
