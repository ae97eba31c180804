"""Environmental complexity for a handful of scenes seen from one pose.

The camera sits at the origin looking along +x. Each scene places pillars
at different bearings and ranges; the printout shows how many depth layers
the nearest return produces and the resulting index.

The nearest return sets the first layer boundary, so that layer never
holds a hit. A lone distant pillar lands in a single layer and scores
high, while a near one spreads the weight over more, mostly empty, layers.
Bearing matters at equal range: the off-axis pillar scores lower.
"""

import math

from adaptnav.eci import EciComputer
from adaptnav.scenario import Cylinder, CameraModel, Pose, World, render_depth_frame

cam = CameraModel()
start = (0.0, 0.0, 1.5)


def pillar(distance, bearing_deg, radius=0.4):
    a = math.radians(bearing_deg)
    return Cylinder(distance * math.cos(a), distance * math.sin(a), radius, 0.0, 6.0)


scenes = {
    "empty": [],
    "pillar ahead, 7 m": [pillar(7, 0)],
    "pillar ahead, 3 m": [pillar(3, 0)],
    "pillar 35 deg left, 3 m": [pillar(3, 35)],
    "pillars ahead at 3 and 7 m": [pillar(3, 0), pillar(7, 10)],
    "five pillars, 2-8 m": [pillar(2 + 1.5 * k, -30 + 15 * k) for k in range(5)],
}
for name, obstacles in scenes.items():
    world = World(((-1.0, -20.0, 0.0), (30.0, 20.0, 6.0)), tuple(obstacles), start, (29.0, 0.0, 1.5))
    report = EciComputer(cam).evaluate(render_depth_frame(world, Pose(start, 0.0), cam), v_cur=1.5)
    print(f"{name:28s} nearest {report.d0:5.2f} m  layers {report.lay}  eci {report.eci:.3f}")
