import hashlib

from sqlalchemy import Column, DateTime, Float, Integer, String, Text, UniqueConstraint
from sqlalchemy.orm import declarative_base
from sqlalchemy.sql import func

# SQLAlchemy Models
Base = declarative_base()


class RegisteredModel(Base):
    __tablename__ = "registered_models"
    __table_args__ = (UniqueConstraint("run_label", "model_id", name="uq_run_model"),)

    id = Column(Integer, primary_key=True, index=True)
    run_label = Column(String(200), nullable=False, index=True)
    model_id = Column(String(64), nullable=False, index=True)
    learner_kind = Column(String(20), nullable=False)
    trained_on_window = Column(Integer, nullable=False)
    trained_at = Column(DateTime(timezone=True), nullable=False)
    train_time_seconds = Column(Float, default=0.0)
    payload = Column(Text, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    @staticmethod
    def generate_id(spec_json: str, trained_on_window: int) -> str:
        """Stable id for the model a given learner fits on a given window"""
        combined = f"{spec_json}:window={trained_on_window}"
        return hashlib.sha256(combined.encode()).hexdigest()[:16]


class WindowAssignment(Base):
    __tablename__ = "window_assignments"
    __table_args__ = (UniqueConstraint("run_label", "window_index", name="uq_run_window"),)

    id = Column(Integer, primary_key=True, index=True)
    run_label = Column(String(200), nullable=False, index=True)
    window_index = Column(Integer, nullable=False)
    model_id = Column(String(64), nullable=False)
