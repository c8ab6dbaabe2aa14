"""Sparse linear algebra and nonlinear solvers."""

from .fieldsplit import FieldSplitOptions, FieldSplitSchur, fieldsplit_schur_apply, schur_approximation
from .ilu import ILU0, Jacobi, ilu0
from .krylov import GMRESResult, KrylovOptions, gmres
from .newton import NewtonOptions, NewtonResult, jfnk_matvec, line_search_basic, make_preconditioner, newton_solve
from .sparse import LUFactor, SparseMatrixCSR, lu_direct, read_matrix_market, spmv, write_matrix_market
