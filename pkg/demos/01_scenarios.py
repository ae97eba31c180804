"""Procedural worlds and the simulated depth camera.

Builds one world per preset, reports its obstacle count, writes it to the
text world format and reads it back, then renders a depth frame from the
start pose and prints how much of the image hits something.
"""

import tempfile
from pathlib import Path

import numpy as np

from adaptnav.scenario import PRESETS, CameraModel, Pose, generate_scenario, load_world, render_depth_frame, save_world

cam = CameraModel()
with tempfile.TemporaryDirectory() as tmp:
    for preset in PRESETS:
        world = generate_scenario(preset, seed=0)
        path = Path(tmp) / f"{preset}.world"
        save_world(world, path)
        again = load_world(path)
        frame = render_depth_frame(world, Pose(world.start, 0.0), cam)
        hits = np.mean(frame.ranges < cam.d_per)
        print(f"{preset:12s} obstacles={len(world.obstacles):3d}  reloaded={len(again.obstacles):3d}  "
              f"nearest={frame.ranges.min():5.2f} m  pixels with a return={100 * hits:5.1f}%")
