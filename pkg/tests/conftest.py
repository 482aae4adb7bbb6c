import os

# Before anything imports db.session: keep the suite off PostgreSQL.
os.environ.setdefault("DATABASE_URL", "sqlite://")

import pytest

from tools.dataset import SplitSpec, embedded_dataset, split
from tools.knowledge_base import build_default_kb


@pytest.fixture(scope="session")
def kb():
    return build_default_kb()


@pytest.fixture(scope="session")
def records():
    return embedded_dataset()


@pytest.fixture(scope="session")
def paper_split(records):
    return split(records, SplitSpec.paper())


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    root = tmp_path / "output"
    monkeypatch.setenv("FLOWFIS_OUTPUT_ROOT", str(root))
    return str(root)


@pytest.fixture
def db_session():
    from sqlalchemy import create_engine
    from sqlalchemy.orm import sessionmaker
    from sqlalchemy.pool import StaticPool

    from db.models import Base

    engine = create_engine("sqlite://", connect_args={"check_same_thread": False},
                           poolclass=StaticPool)
    Base.metadata.create_all(engine)
    factory = sessionmaker(bind=engine, autocommit=False, autoflush=False)
    session = factory()
    try:
        yield session
    finally:
        session.close()
        engine.dispose()
