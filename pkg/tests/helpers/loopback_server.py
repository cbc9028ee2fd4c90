"""Minimal stdio model server used only by the client-side bridge tests.

Implements just enough of the line-delimited protocol to exercise the
client: handshake, eval with a fixed synthetic landscape, optional artificial
reordering of responses, and a mode that answers the handshake with wrong
dimensions.
"""

import argparse
import cmath
import json
import sys

COEFFS = {
    (0, 1, 0): 5 + 2j,
    (0, 3, 0): 5 - 2j,
    (1, 2, 0): -3 - 1j,
    (3, 2, 0): -3 + 1j,
    (1, 0, 3): 1 + 1j,
    (3, 0, 1): 1 - 1j,
}


def score(seq, q):
    total = 0j
    for y, amp in COEFFS.items():
        phase = sum(a * b for a, b in zip(seq, y)) % q
        total += amp * cmath.exp(2j * cmath.pi * phase / q)
    return total.real


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--declare-q", type=int, default=4)
    parser.add_argument("--declare-n", type=int, default=3)
    parser.add_argument("--swap-pairs", action="store_true", help="emit responses pairwise out of order")
    args = parser.parse_args()

    out = sys.stdout
    pending = []

    def flush_pending():
        while pending:
            out.write(json.dumps(pending.pop()) + "\n")
        out.flush()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        if msg["type"] == "hello":
            out.write(
                json.dumps({"type": "hello_ok", "q": args.declare_q, "n": args.declare_n}) + "\n"
            )
            out.flush()
        elif msg["type"] == "eval":
            values = [score(seq, args.declare_q) for seq in msg["sequences"]]
            response = {"type": "result", "id": msg["id"], "values": values}
            if args.swap_pairs:
                pending.append(response)
                if len(pending) == 2:
                    flush_pending()
            else:
                out.write(json.dumps(response) + "\n")
                out.flush()
    flush_pending()


if __name__ == "__main__":
    main()
