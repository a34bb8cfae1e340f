"""
Base class for voxel-wise classifiers.
"""

from abc import ABC, abstractmethod


class VoxelClassifier(ABC):
    """Anything that maps an image volume to a same-shaped prediction volume."""

    name = "base"

    @abstractmethod
    def predict_volume(self, volume):
        """Return a Volume3 of per-voxel scores in [0, 1], same dims as the input."""
        pass
