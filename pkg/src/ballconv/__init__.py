"""Volumetric convolution, moment fitting and axial-symmetry analysis of
functions on the unit ball, plus a small trainable descriptor pipeline."""

from .basis import (
    BallPoint,
    HarmonicIndex,
    ZernikeIndex,
    assoc_legendre,
    sph_harmonic,
    zernike_eval,
    zernike_radial,
    zernike_radial_coeff,
)
from .convolve import (
    DirectionGrid,
    Kernel,
    KernelBank,
    ResponseMapB3,
    ResponseMapS2,
    ShellDecomposition,
    ShellTranslationOperators,
    build_shell_operators,
    conv_b3,
    conv_s2,
    spectral_response,
    spherical_conv,
)
from .layout import LAYOUT_VERSION, MomentLayout, get_layout
from .moments import (
    ComplexMomentSet,
    DesignMatrix,
    MomentVector,
    SampleSet,
    build_design_matrix,
    complex_to_real,
    fit_moments,
    pinv_newton_schulz,
    quadrature_moments,
    real_to_complex,
    reconstruct,
    reconstruct_complex,
    reconstruction_error,
)
from .quadrature import orthogonality_constant
from .symmetry import Axis, normalized_symmetry, symmetry_descriptor, symmetry_power

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
