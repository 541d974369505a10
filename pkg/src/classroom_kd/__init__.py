# -*- coding: utf-8 -*-
"""
Classroom KD - multi-mentor knowledge distillation with rank-based mentor
filtering and adaptive temperatures, on a NumPy model zoo.
"""
__version__ = "1.0.0"

from .errors import ClassroomKDError  # noqa: E402
from .models import AblationSuite, ExperimentConfig  # noqa: E402
from .trainer import RunResult, distill_student, pretrain_mentor  # noqa: E402

__all__ = [
    "AblationSuite",
    "ClassroomKDError",
    "ExperimentConfig",
    "RunResult",
    "distill_student",
    "pretrain_mentor",
    "__version__",
]
