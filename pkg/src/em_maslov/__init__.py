"""Electromagnetic geodesics, Jacobi fields, Maslov indices and spectral flow."""
