import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker

from app.config import settings
from app.models import Base

logger = logging.getLogger(__name__)

# Create session factory; bound once the engine is configured
SessionLocal = sessionmaker(autocommit=False, autoflush=False)
_engine: Optional[Engine] = None


def default_database_url(output_dir: Optional[str] = None) -> str:
    return settings.database_url or f"sqlite:///{Path(output_dir or settings.output_dir) / 'registry.db'}"


def configure_database(url: Optional[str] = None) -> Engine:
    """Create the engine for `url` (DATABASE_URL or a sqlite file in the output dir)."""
    global _engine
    url = url or default_database_url()
    if url.startswith("sqlite:///"):
        Path(url[len("sqlite:///"):]).parent.mkdir(parents=True, exist_ok=True)
    _engine = create_engine(
        url,
        connect_args={"check_same_thread": False} if "sqlite" in url else {},
    )
    SessionLocal.configure(bind=_engine)
    return _engine


def init_database(url: Optional[str] = None):
    """Initialize database tables"""
    engine = configure_database(url)
    Base.metadata.create_all(bind=engine)
    logger.info(f"Registry database initialized at {engine.url}")


@contextmanager
def get_db_session():
    """Get database session with automatic cleanup"""
    if _engine is None:
        init_database()
    session = SessionLocal()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
