#!/usr/bin/env python3
"""Reference external decoder: serves frames of a raw RVC1 container."""
import json
import struct
import sys


def header(path):
    with open(path, "rb") as f:
        h = f.read(24)
    if h[:4] != b"RVC1":
        fail("not an RVC1 container")
    return struct.unpack("<5I", h[4:24])


def fail(msg):
    sys.stderr.write(json.dumps({"error": msg}))
    sys.exit(3)


def main():
    cmd, media = sys.argv[1], sys.argv[2]
    w, h, num, den, n = header(media)
    if cmd == "probe":
        print(json.dumps({"width": w, "height": h, "fps_num": num, "fps_den": den, "frame_count": n}))
    elif cmd == "frame":
        i = int(sys.argv[3])
        if i == int(__import__("os").environ.get("RVC_FAIL_AT", "-1")):
            fail(f"corrupt packet at frame {i}")
        size = w * h * 3
        with open(media, "rb") as f:
            f.seek(24 + i * size)
            sys.stdout.buffer.write(f.read(size))
    else:
        fail(f"unknown command {cmd}")


main()
