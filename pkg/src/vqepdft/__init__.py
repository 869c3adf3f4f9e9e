"""Desk-scale VQE-PDFT workbench.

Simulated VQE-CASCI on small active spaces, measured reduced density
matrices, translated-PBE on-top energies and Marcus electron-transfer
kinetics.
"""

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a file shipped in ``vqepdft/data``."""
    from importlib.resources import files

    return files(__name__).joinpath("data", name)
