"""Stratified Weil-Petersson model target.

Import from the submodules (``cusp``, ``metric``, ``isometry``, ``strata``,
``delta``, ``paths``).  The package itself stays empty because the cusp
factor in ``harmlab.npc`` depends on ``harmlab.wp.cusp``.
"""
