"""Stand-in for an external video codec: copies its input to its output.

    fake_codec.py IN OUT [--fail] [--truncate]
"""
import shutil
import sys

src, dst = sys.argv[1], sys.argv[2]
if "--fail" in sys.argv:
    sys.stderr.write("simulated failure\n")
    sys.exit(7)
shutil.copyfile(src, dst)
if "--truncate" in sys.argv:
    with open(dst, "r+b") as f:
        f.truncate(3)
