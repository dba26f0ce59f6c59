"""Mixed finite element pairs for the linear rotating shallow-water equations.

The PnDG-P(n+1) pairs (discontinuous degree-n velocity, continuous
degree-(n+1) elevation) keep geostrophically balanced states exactly steady
on arbitrary triangulations.  P1-P1 is provided as a counterexample.
"""
from .mesh import Mesh, affine_map, generate_square_mesh, load_mesh, dump_mesh
from .elements import lagrange_basis, quadrature
from .spaces import make_pair, build_scalar_space, interpolate_scalar, evaluate
from .assembly import assemble
from .model import ModelParams, State, params_from_ro_fr, random_balanced_state, project_balanced, run

__version__ = "0.1.0"
