"""
Database Repository — Trained Model Persistence Layer

Three public functions:
    create_model    — insert a trained-model row with atomic version
    store_artifact  — insert a single model artifact row
    finalize_model  — update the model row with final status and scores

Advisory lock strategy:
    pg_advisory_xact_lock(hashtext(slug)) on PostgreSQL
    prevents concurrent version collisions within a single transaction.
    Other dialects (SQLite in tests) rely on the (slug, version) unique constraint.

Deterministic. No network calls beyond the database.
"""

from datetime import datetime, timezone

from sqlalchemy import func, select, text
from sqlalchemy.orm import Session

from db.models import ModelArtifact, TrainedModel


def create_model(db: Session, name: str, slug: str, *, seed: int = None,
                 hidden_sizes=None, created_at=None) -> TrainedModel:
    """Insert a trained-model row with the next atomic version for slug.

    Args:
        db: Active SQLAlchemy session (caller manages commit/rollback).
        name: Display name (e.g. "Baseline 42").
        slug: Kebab-case slug (e.g. "baseline-42").
        seed: Training seed.
        hidden_sizes: [h1, h2].
        created_at: Optional datetime; defaults to utcnow.

    Returns:
        The newly created TrainedModel ORM instance (id, version populated).
    """
    if db.get_bind().dialect.name == "postgresql":
        db.execute(
            text("SELECT pg_advisory_xact_lock(hashtext(:slug))"),
            {"slug": slug},
        )

    version = db.execute(
        select(func.coalesce(func.max(TrainedModel.version), 0) + 1)
        .where(TrainedModel.slug == slug)
    ).scalar()

    ts = created_at if isinstance(created_at, datetime) else datetime.now(timezone.utc)

    model = TrainedModel(
        name=name,
        slug=slug,
        version=version,
        seed=seed,
        hidden_sizes=list(hidden_sizes) if hidden_sizes is not None else None,
        created_at=ts,
    )
    db.add(model)
    db.flush()
    return model


def store_artifact(db: Session, model_id, artifact_type: str,
                   content_json=None, content_text=None):
    """Insert a single model artifact.

    Exactly one of content_json / content_text should be provided.
    """
    if (content_json is None) == (content_text is None):
        raise ValueError(f"artifact '{artifact_type}' needs exactly one of content_json / content_text")
    artifact = ModelArtifact(
        model_id=model_id,
        artifact_type=artifact_type,
        content_json=content_json,
        content_text=content_text,
    )
    db.add(artifact)
    db.flush()


def finalize_model(db: Session, model_id, status: str, *,
                   epochs_run=None, final_mse=None, converged=None,
                   fis_accuracy=None, bp_accuracy=None, failure_reason=None):
    """Update a trained-model row with its final status and scores."""
    model = db.execute(select(TrainedModel).where(TrainedModel.id == model_id)).scalar_one()
    model.status = status
    model.epochs_run = epochs_run
    model.final_mse = final_mse
    model.converged = converged
    model.fis_accuracy = fis_accuracy
    model.bp_accuracy = bp_accuracy
    model.failure_reason = failure_reason
    if status == "deployed":
        model.deployed_at = datetime.now(timezone.utc)
    db.flush()
