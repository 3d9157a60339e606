"""The patch placement rule, worked by hand.

Given an edit region R, its bounding box of width W and height H is filled
with uniformly spaced w x h patches:

    N_w = floor(W / w)               patches per row
    dx  = (W - N_w * w) / (N_w + 1)  uniform horizontal gap
    x_i = i * w + (i + 1) * dx       left edge of patch column i

and the same vertically.  Patches fully inside R are kept whole, patches
that miss R are discarded, and border patches keep only their overlap.
"""

import numpy as np

from scribbletex import plan_placement
from scribbletex.texturing import stamp_patches, TexturePatch


def main():
    # The textbook case: a 100 x 50 box tiled with 30 x 20 patches.
    region = np.zeros((60, 110), dtype=bool)
    region[0:50, 0:100] = True
    plan = plan_placement(region, (30, 20))
    print(f"counts   N_w, N_h = {plan.counts}")
    print(f"spacing  dx, dy   = ({plan.spacing[0]:.4g}, {plan.spacing[1]:.4g})")
    xs = sorted({p[0] for p in plan.positions})
    print(f"columns  x_i      = {xs}")
    # -> (3, 2), dx = 2.5, columns at 2.5, 35, 67.5.  Positions stay
    # fractional in the plan; rounding happens only when stamping.

    # Carve a bite out of the region and watch the classification change.
    region[10:40, 60:100] = False
    plan = plan_placement(region, (30, 20))
    for idx, cls in enumerate(plan.kept):
        print(f"  patch {idx} at {plan.texel_rect(idx)[:2]}: {cls}")

    # Stamping erodes each footprint by a small disk so that every patch
    # is surrounded by a gap for the inpainting stage to blend.
    atlas = np.zeros((60, 110, 3), dtype=np.uint8)
    patch = TexturePatch(np.full((20, 30, 3), 230, dtype=np.uint8))
    stamped, gap = stamp_patches(atlas, plan, region, patch, erosion_radius=2)
    print(f"stamped texels: {int((stamped != 0).any(axis=-1).sum())}, "
          f"gap texels awaiting inpainting: {int(gap.sum())}")


if __name__ == "__main__":
    main()
