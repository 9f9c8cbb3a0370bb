import numpy as np

from planeable.views.utils import PALETTE, UNASSIGNED_COLOR, label_colors


def test_palette_is_distinct():
    assert PALETTE.shape == (64, 3)
    assert PALETTE.dtype == np.uint8
    assert len({tuple(c) for c in PALETTE.tolist()}) == 64


def test_label_colors():
    colors = label_colors([0, 1, -1, 64])
    assert colors[0].tolist() == PALETTE[0].tolist()
    assert colors[1].tolist() == PALETTE[1].tolist()
    assert tuple(colors[2].tolist()) == UNASSIGNED_COLOR
    # the palette wraps around
    assert colors[3].tolist() == PALETTE[0].tolist()


def test_label_colors_does_not_touch_palette():
    before = PALETTE.copy()
    label_colors([-1, -1, 0])
    assert (PALETTE == before).all()
