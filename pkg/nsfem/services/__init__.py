"""
Services: Newton solver, convergence studies and report persistence.
"""
from .newton_service import NewtonService, newton_service, sparse_lu_solve
from .report_persistence import ReportPersistence, report_persistence
from .study_service import StudyService, run_study, study_service

__all__ = [
    "NewtonService",
    "newton_service",
    "sparse_lu_solve",
    "ReportPersistence",
    "report_persistence",
    "StudyService",
    "study_service",
    "run_study",
]
