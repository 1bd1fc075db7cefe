"""Isometries of low-dimensional classical geometries as flipper pairs.

Every isometry of E1/E2/E3, the sphere and projective plane, the hyperbolic
plane and 3-space, and the Moebius sphere is encoded by a biflipper: an
ordered pair of involution fixed sets whose flips compose to the isometry.
The package provides the encoding, classification, equivalence moves,
head-to-tail composition with replayable traces, the quaternion double
cover over sphere biflippers, and a rewriting engine for plane-reflection
words, all checked against matrix oracles.
"""

from .biflipper import (
    Biflipper,
    IsometryClass,
    Pencil,
    classify,
    conjugate,
    decompose,
    encode,
    equivalent,
    invariant_pencil,
    product_biflipper,
    rebase,
    strong_reversibility_witness,
    synthesize,
    transform_commuting,
)
from .flips import (
    Flipper,
    Isometry,
    flip_of,
    flipper_of_involution,
    flippers_equal,
    identity,
    move_flipper,
)
from .headtotail import H2TResult, Move, compose_screws, compose_with_fallback, head_to_tail, linked
from .numkernel import (
    AffineSubspace,
    BilinearForm,
    LinearSubspace,
    Tolerance,
    approx_equal,
    model_convert,
    reflection_matrix,
)
from .quaternion import (
    Quaternion,
    VectorArc,
    arc_mul,
    axis_angle,
    lift_biflipper,
    project_to_biflipper,
    qconj,
    qmul,
    qnorm,
    rotate,
    vector_factorization,
)
from .wordreduce import Derivation, RewriteStep, is_identity, reduce, word_isometry

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
