"""The Mario-turtle worked example, end to end over the wire protocol.

Three simulated workers share one session: w1 demonstrates the stomp
(rotate the turtle upside down, bounce it, import the shell image, delete
the original), w2 remixes the four recorded blocks ((a),(c),(d) instant,
(b) compressed to one second) and arranges them (a)-(b)-(d)-(c), w3
documents the behavior and fires it. Afterwards the retained session is
saved, reloaded, and rendered to SVG frames.

Run from the repository root:  python3 demos/04_turtle_scenario.py
"""

import json
import os
import tempfile

from crowdmix.render import render_svg_dir, replay_frames
from crowdmix.scenario import parse_scenario, run_scenario
from crowdmix.store import load_session, save_session

HERE = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(HERE, "turtle_scenario.json")) as f:
    scenario = parse_scenario(f.read())

report, server = run_scenario(scenario)
print("scenario assertions:")
for line in report.lines():
    print(" ", line)

store = server.session("main").store
behavior = store.behaviors["bhv-0001"]
print("\nretained behavior %r (%s, v%d):" % (behavior.name, behavior.status,
                                             behavior.version))
print("  trigger (P1):      %s" % behavior.triggerDoc)
print("  relationships (P3): %s" % behavior.relationshipDoc)
print("  compiled duration:  %d ms over %d blocks"
      % (behavior.compiled.duration, len(behavior.timeline.items)))

# the session itself is the collective memory: save, reload, replay
archive = store.to_archive()
data = save_session(archive)
reloaded = load_session(data)
print("\nsession file: %d bytes, round-trips: %s"
      % (len(data), save_session(reloaded) == data))

# the fired behavior deleted the turtle; restore the sketch before
# replaying the retained behavior again
from crowdmix.canvas import Element, EditEvent, apply_edit

canvas = reloaded.canvas
canvas = apply_edit(canvas, EditEvent.delete(0, "demo", "shell"))
canvas = apply_edit(canvas, EditEvent.create(0, "demo", Element(
    id="turtle", kind="shape", width=40, height=30,
    pose=reloaded.canvas.elements["shell"].pose)))
reloaded.canvas = canvas

out = os.path.join(tempfile.gettempdir(), "crowdmix-turtle-frames")
frames = replay_frames(reloaded, "turtle-stomp")
names = render_svg_dir(frames, out)
print("rendered %d SVG frames to %s (first: %s)" % (len(names), out, names[0]))
