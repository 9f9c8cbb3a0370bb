from colorsys import hsv_to_rgb

import numpy as np
from numpy.typing import ArrayLike, NDArray

UNASSIGNED_COLOR = (128, 128, 128)


def _build_palette(n: int = 64) -> NDArray[np.uint8]:
    # Hues advance by the golden ratio
    colors = []
    for i in range(n):
        hue = (i * 0.618033988749895) % 1.0
        saturation = 0.55 + 0.35 * ((i // 2) % 2)
        value = 0.95 - 0.25 * ((i // 4) % 2)
        colors.append([round(255 * c) for c in hsv_to_rgb(hue, saturation, value)])
    return np.asarray(colors, dtype=np.uint8)


PALETTE = _build_palette()


def label_colors(labels: ArrayLike) -> NDArray[np.uint8]:
    """
    Map plane labels to RGB colours.

    Labels index the 64-entry palette modulo its size; label -1 is grey.

    Args:
        labels: (N,) integer labels.

    Returns:
        NDArray: (N, 3) uint8 colours.
    """
    lab = np.asarray(labels, dtype=np.int64)
    colors = PALETTE[np.mod(lab, len(PALETTE))]
    colors[lab < 0] = UNASSIGNED_COLOR
    return colors
