"""A walking tour of the floor-to-screen geometry.

Run: python demos/demo_geometry.py
"""

from wallspace.geometry import (
    ActivationState,
    FloorPoint,
    RoomSpec,
    ZoneTracker,
    arc_to_pixel,
    column_index,
    feedback_anchor,
    project_to_perimeter,
    update_activation,
)

room = RoomSpec()
print(f"room: {room.width_m} x {room.depth_m} m, screen {room.px_w} x {room.px_h} px")
print(f"perimeter: {room.perimeter_m()} m -> {room.px_w / room.perimeter_m():.1f} px/m\n")

print("A visitor walks from the room center toward the left wall:")
path = [FloorPoint(6.0 - i * 0.55, 5.0) for i in range(10)]
state = ActivationState()
tracker = ZoneTracker(room)
for p in path:
    pp, clearance = project_to_perimeter(p, room)
    state = update_activation(state, clearance, room)
    zone, changed = tracker.update(pp.s)
    anchor = feedback_anchor(p, room)
    region, col = column_index(pp, room)
    marker = "*" if changed else " "
    print(
        f"  ({p.x:5.2f}, {p.y:4.1f})  clearance {clearance:5.2f} m  "
        f"{'ACTIVE  ' if state.active else 'inactive'}  "
        f"wall={pp.wall.value:<5} zone={str(zone.key):<22}{marker} ring @ u={anchor.u}"
    )

print("\nThe same clearance leaving again (hysteresis keeps them active to 2.2 m):")
for clearance in (1.9, 2.05, 2.15, 2.25):
    state = update_activation(state, clearance, room)
    print(f"  clearance {clearance:4.2f} -> {'ACTIVE' if state.active else 'inactive'}")

print("\nArc-to-pixel landmarks:")
for s in (0.0, 6.0, 12.0, 22.0, 43.99):
    print(f"  s={s:6.2f} m -> pixel column {arc_to_pixel(s, room)}")
