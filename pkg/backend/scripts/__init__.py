# Harness, run service scripts and the fracture package live here; importable as ``scripts``.
