"""Numerical laboratory for the free Majorana field and its scaling limit.

Modules:
    quadrature     adaptive momentum-space integration with error budgets
    spinor_core    gamma matrices, SL(2, C) covering map, energy projections
    one_particle   test functions, Gamma involution, mass-shell inner products
    quasifree_car  field polynomials, Pfaffian Wick rule, Fock oracle
    scaling_lab    scaled families, containment deficits, limit flows, clustering
    cli            ``majorana-lab`` command-line front end
"""
__version__ = "0.1.0"
