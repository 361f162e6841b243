"""
Fracture package

Cohesive interface law, two-block patch rigs, specimen mesher and the explicit
distinct-element solver.
"""
