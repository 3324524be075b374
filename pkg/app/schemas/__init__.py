from app.schemas.data import MnistConfig, TwoMoonConfig
from app.schemas.reports import SpinBudgetReport, SpinBudgetRow
from app.schemas.run import AnnealSchedule, RunConfig

__all__ = [
    "AnnealSchedule",
    "MnistConfig",
    "RunConfig",
    "SpinBudgetReport",
    "SpinBudgetRow",
    "TwoMoonConfig",
]
