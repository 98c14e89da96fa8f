"""Experiment run archive

Revision ID: 001_experiment_runs
Revises:
Create Date: 2026-10-18
"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


revision: str = '001_experiment_runs'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    op.create_table('experiment_runs',
        sa.Column('id', sa.Integer(), autoincrement=True, nullable=False),
        sa.Column('kind', sa.String(), nullable=False),
        sa.Column('config_hash', sa.String(length=64), nullable=False),
        sa.Column('config_json', sa.JSON(), nullable=False),
        sa.Column('csv_text', sa.Text(), nullable=False),
        sa.Column('seed', sa.String(), nullable=True),
        sa.Column('software_version', sa.String(), nullable=False),
        sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.func.now()),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_experiment_runs_kind'), 'experiment_runs', ['kind'], unique=False)
    op.create_index(op.f('ix_experiment_runs_config_hash'), 'experiment_runs', ['config_hash'], unique=False)


def downgrade() -> None:
    op.drop_index(op.f('ix_experiment_runs_config_hash'), table_name='experiment_runs')
    op.drop_index(op.f('ix_experiment_runs_kind'), table_name='experiment_runs')
    op.drop_table('experiment_runs')
