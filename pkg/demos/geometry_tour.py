"""Walkthrough: the planar geometry the descriptor is built on.

Everything happens in a local tangent plane centered on the study circle;
this script shows the projection round trip, circle discretization, and
the two clipping primitives.

    python3 demos/geometry_tour.py
"""

import math

from cartoprompt.geo import (
    CircleSpec,
    circle_ngon,
    clip_polyline_circle,
    haversine,
    intersection_area,
    polygon_area,
    project_local,
    unproject_local,
)


def main():
    circle = CircleSpec(center=(41.013, 28.955), radius_m=300.0)

    # Projection: meters east/north of the center. Going 200 m east and
    # back recovers the coordinates to sub-millimeter.
    point = unproject_local(circle, (200.0, 0.0))
    print(f"200 m east of center -> lat/lon {point[0]:.6f}, {point[1]:.6f}")
    xy = project_local(circle, point)
    print(f"projected back -> ({xy[0]:.9f}, {xy[1]:.9f}) meters")
    print(f"haversine check: {haversine(circle.center, point):.4f} m\n")

    # The circle itself is discretized as an inscribed 64-gon for polygon
    # clipping; its area deficit is a known 0.161%.
    ngon = circle_ngon(circle)
    true_area = math.pi * circle.radius_m ** 2
    ngon_area = polygon_area(ngon)
    print(f"circle area     {true_area:12.1f} m^2")
    print(f"64-gon area     {ngon_area:12.1f} m^2 "
          f"({100 * (1 - ngon_area / true_area):.3f}% low)\n")

    # Polygon clipping: a 200x200 m square straddling the boundary. Half
    # of it lies inside, and the clipped area says so.
    square = [(100.0, -100.0), (500.0, -100.0), (500.0, 100.0),
              (100.0, 100.0), (100.0, -100.0)]
    inside = intersection_area(square, ngon)
    print(f"square of {400 * 200} m^2 straddling the rim -> "
          f"{inside:.1f} m^2 inside")

    # Polyline clipping is exact (quadratic per segment), so a chord
    # through the center measures the full diameter.
    chord = clip_polyline_circle([(-1000.0, 0.0), (1000.0, 0.0)],
                                 circle.radius_m)
    print(f"chord through center -> {chord:.9f} m (diameter {2 * circle.radius_m})")


if __name__ == "__main__":
    main()
