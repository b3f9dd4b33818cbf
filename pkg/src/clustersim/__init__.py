"""Simulators for two cluster-state generation schemes.

``cavity_qed``
    Three-level atoms sent pairwise through a resonant vacuum cavity, with
    optional no-jump cavity decay and spontaneous emission.
``ensembles``
    Dual-rail collective excitations of atomic ensembles with post-selected
    GHZ preparation, Bell measurements and a measurement-based CNOT.
"""

__version__ = "0.1.0"
