"""
Numerical kernels: N-functions, meshes, reference elements, spaces and assembly.
"""
