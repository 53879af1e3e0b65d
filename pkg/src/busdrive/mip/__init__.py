from .bnb import branch_and_bound_solve
from .brute import TooManyBinaries, brute_force_solve
from .lp import lp_relax_solve
from .model import MipModel, ModelError, Solution, Status, VarKind, relative_gap

__all__ = [
    "MipModel",
    "ModelError",
    "Solution",
    "Status",
    "TooManyBinaries",
    "VarKind",
    "branch_and_bound_solve",
    "brute_force_solve",
    "lp_relax_solve",
    "relative_gap",
]
