from encrelay.core.birth_death import (
    balance_solve as balance_solve,
    generator_matrix as generator_matrix,
    product_form as product_form,
)
from encrelay.core.simplex import (
    LinearProgramResult as LinearProgramResult,
    linprog as linprog,
)
