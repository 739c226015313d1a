"""Laplace-Dirichlet rule-based fiber generation for the ventricles and
atria, and monodomain electrophysiology on hexahedral meshes.

Submodules: ``mesh``, ``generators``, ``laplace``, ``frames``,
``ventricular``, ``atrial``, ``ep``, ``metrics``, ``config``, ``cli``.
"""

__version__ = "0.1.0"
