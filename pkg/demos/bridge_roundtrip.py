"""Sketch an external model over the stdio bridge.

Uses the reference server from the sibling ``model_server`` package (install
it first: ``pip install -e model_server/``).  Any process speaking the same
line-delimited protocol can stand in for it.

Run:  python3 demos/bridge_roundtrip.py
"""

import sys

from amortized_shap import SketchConfig, bridge_connect, sketch

server_cmd = [sys.executable, "-m", "model_server", "--fixture", "trig3"]
print("spawning:", " ".join(server_cmd))

with bridge_connect(server_cmd, q=4, n=3) as model:
    spectrum, diag = sketch(model, SketchConfig(exact=True, lmax=2))

print(f"sketched through the bridge with {diag.queries_used} evaluations")
for y, amp in sorted(spectrum.terms.items()):
    print(f"  F{list(y)} = {amp.real:+.4f} {amp.imag:+.4f}j")
