from sqlalchemy import Column, Integer, String, Text, DateTime, JSON
from sqlalchemy.sql import func
from database import Base


class ExperimentRun(Base):
    """One archived CLI/API experiment: its config, seed and CSV output"""
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    kind = Column(String, nullable=False, index=True)  # "overlap-scan", "emulate", ...
    config_hash = Column(String(64), nullable=False, index=True)
    config_json = Column(JSON, nullable=False)
    csv_text = Column(Text, nullable=False)
    seed = Column(String, nullable=True)  # 64-bit seeds overflow SQL integers
    software_version = Column(String, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
