from .fos_plant import FosPlant

__all__ = [
    "FosPlant",
]
