"""One complete scribble-to-texture edit, offline.

Every model backend (vision chat, image generation, inpainting,
segmentation) defaults to a deterministic mock, so this runs without
network access or keys and produces the same atlas every time for a given
seed.  Swap any backend for a live endpoint via PipelineConfig or the
SCRIBBLESENSE_*_URL / SCRIBBLESENSE_*_KEY environment variables.
"""

import os
import shutil

import numpy as np

from scribbletex import (PipelineConfig, Session, export_session, images,
                        run_edit)
from scribbletex.scribble import Stroke

from _demo_assets import demo_assets, output_dir


def main():
    obj, png = demo_assets()
    out = output_dir("04_full_edit")
    sdir = os.path.join(out, "session")
    shutil.rmtree(sdir, ignore_errors=True)

    config = PipelineConfig(resolution=256, gen_size=128, seed=42)
    session = Session.create(sdir, obj, png, config)

    # Paint on the front view; one region per connected stroke component.
    stroke = Stroke(view_id="t+000_p000.0", color=(235, 60, 60), radius=10,
                    points=((110, 110), (150, 150)))
    rid, = session.add_strokes([stroke], hint=None)
    print(f"created region {rid}, state = {session.region_state(rid)}")

    def on_event(stage, status, data):
        if status == "finished":
            print(f"  {stage:<10} {data['seconds']:6.2f}s  "
                  f"{data['backend_calls']} backend call(s)")

    final, report = run_edit(session, rid, on_event=on_event)
    print(f"chosen intent: {report['chosen_intent']['semantic']!r}")
    print(f"total backend calls: {report['backend_calls']}")

    # Edits are confined to the refined region; everything else is
    # byte-identical to the input atlas.
    original = images.load_png(png, "RGBA")
    tmask = images.u8_to_mask(images.load_png(
        os.path.join(session.region_dir(rid), "texel_mask.png"), "L"))
    assert np.array_equal(final[~tmask], original[~tmask])

    obj_out, png_out = export_session(session, out)
    print(f"exported {obj_out} and {png_out}")
    print(f"stage artifacts kept under {sdir}")


if __name__ == "__main__":
    main()
