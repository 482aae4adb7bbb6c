"""
SQLAlchemy ORM Models

Tables: trained_models, model_artifacts.
All enum-like columns use plain TEXT — no PostgreSQL enum types.
JSON columns are JSONB on PostgreSQL and generic JSON elsewhere (SQLite in tests).
"""

import uuid
from datetime import datetime, timezone

from sqlalchemy import (
    JSON, Column, Integer, Float, Boolean, Text, Uuid,
    DateTime, ForeignKey, UniqueConstraint,
)
from sqlalchemy.dialects.postgresql import JSONB
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()

JSONDocument = JSON().with_variant(JSONB, "postgresql")


class TrainedModel(Base):
    __tablename__ = "trained_models"

    id = Column(Uuid, primary_key=True, default=uuid.uuid4)
    name = Column(Text, nullable=False)
    slug = Column(Text, nullable=False)
    version = Column(Integer, nullable=False)
    status = Column(Text, nullable=False, default="draft")
    seed = Column(Integer)
    epochs_run = Column(Integer)
    hidden_sizes = Column(JSONDocument)
    final_mse = Column(Float)
    converged = Column(Boolean)
    fis_accuracy = Column(Float)
    bp_accuracy = Column(Float)
    created_at = Column(
        DateTime(timezone=True), nullable=False,
        default=lambda: datetime.now(timezone.utc),
    )
    deployed_at = Column(DateTime(timezone=True))
    failure_reason = Column(Text)

    artifacts = relationship(
        "ModelArtifact", back_populates="model",
        cascade="all, delete-orphan",
    )

    __table_args__ = (
        UniqueConstraint("slug", "version", name="uq_trained_models_slug_version"),
    )


class ModelArtifact(Base):
    __tablename__ = "model_artifacts"

    id = Column(Uuid, primary_key=True, default=uuid.uuid4)
    model_id = Column(
        Uuid,
        ForeignKey("trained_models.id", ondelete="CASCADE"),
        nullable=False,
    )
    artifact_type = Column(Text, nullable=False)
    content_json = Column(JSONDocument)
    content_text = Column(Text)
    created_at = Column(
        DateTime(timezone=True), nullable=False,
        default=lambda: datetime.now(timezone.utc),
    )

    model = relationship("TrainedModel", back_populates="artifacts")

    __table_args__ = (
        UniqueConstraint(
            "model_id", "artifact_type",
            name="uq_model_artifacts_model_type",
        ),
    )
