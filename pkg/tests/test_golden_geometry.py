"""Golden patch-grid file: regression guard and cross-language anchor.

The committed text file pins the exact grid enumeration for a fixed case
list. External exporters (featdump) must reproduce it byte for byte.
"""

from pathlib import Path

from mdpm.featstore import sample_patch_grid

GOLDEN_PATH = Path(__file__).parent / "golden" / "patch_grid_cases.txt"

# (image_w, image_h, patch, stride); includes resize-rule outputs the
# exporter produces for the 3-image fixture (256x256, 384x256, 256x512)
CASES = [
    (256, 256, 128, 32),
    (128, 128, 128, 32),
    (100, 256, 128, 32),
    (300, 200, 128, 32),
    (384, 256, 128, 32),
    (256, 512, 128, 32),
    (512, 256, 128, 32),
    (640, 480, 128, 32),
    (129, 129, 128, 32),
    (160, 160, 128, 32),
    (256, 256, 128, 64),
    (200, 200, 64, 32),
]


def build_golden_text() -> str:
    lines = ["# patch-grid cases v1: W H patch stride : x,y pairs row-major"]
    for w, h, patch, stride in CASES:
        grid = sample_patch_grid(w, h, patch, stride)
        coords = " ".join(f"{g.x},{g.y}" for g in grid)
        lines.append(f"{w} {h} {patch} {stride} : {coords}".rstrip())
    return "\n".join(lines) + "\n"


def test_golden_file_matches_enumeration():
    assert GOLDEN_PATH.read_text() == build_golden_text()


if __name__ == "__main__":
    GOLDEN_PATH.parent.mkdir(exist_ok=True)
    GOLDEN_PATH.write_text(build_golden_text())
    print(f"wrote {GOLDEN_PATH}")
