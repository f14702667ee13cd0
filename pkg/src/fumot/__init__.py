"""
fumot
=====

Transport-based tools for fluorescence ultrasound modulated optical
tomography in two dimensions:

grid
    Lattices on the unit square and unit disk, discrete ordinates, exit times
    and along-ray quadrature.
transport
    Source-iteration solves of the stationary transport equation and their
    exact discrete adjoints.
functionals
    Internal data ``H`` and ``S``, the angular correlator ``psi``, auxiliary
    fields, boundary currents and noise.
reconstruct
    Adjoint-gradient L-BFGS recovery of the fluorophore absorption and CG
    recovery of the quantum efficiency.
skeleton
    Boundary packings, chord skeletons and ballistic ratio recovery of the
    total attenuation.
harness
    Phantoms, file formats, experiment drivers and the command line.
"""
__version__ = "0.1.0"
