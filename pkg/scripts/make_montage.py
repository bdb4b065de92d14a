"""Generate the shipped 128-electrode montage (geodesic128_v1.csv).

Electrodes sit on rings of constant polar angle around the vertex, from the
vertex down to 110 degrees (slightly below the equator, as on dense nets).
Ring populations are proportional to the ring circumference and every ring
is mirror-symmetric about the sagittal (x = 0) plane.

Axes: +x right ear, +y nose, +z vertex.
"""
import argparse
from pathlib import Path

import numpy as np

N_ELECTRODES = 128
N_RINGS = 9
THETA_MAX = np.deg2rad(110.0)


def ring_counts(n_total=N_ELECTRODES, n_rings=N_RINGS):
    theta = THETA_MAX * np.arange(1, n_rings + 1) / n_rings
    weights = np.sin(theta)
    raw = weights / weights.sum() * (n_total - 1)
    counts = np.floor(raw).astype(int)
    # hand out the remainder to the rings with the largest fractional part
    for i in np.argsort(-(raw - counts))[: n_total - 1 - counts.sum()]:
        counts[i] += 1
    return theta, counts


def make_positions():
    theta, counts = ring_counts()
    pos = [(0.0, 0.0, 1.0)]
    for th, m in zip(theta, counts):
        phi = np.pi / 2 + 2 * np.pi * np.arange(m) / m
        for p in phi:
            pos.append((np.sin(th) * np.cos(p), np.sin(th) * np.sin(p), np.cos(th)))
    pos = np.asarray(pos)
    pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    # exact zeros on the midline keep the mirror symmetry bit-exact
    pos[np.abs(pos) < 1e-15] = 0.0
    return pos


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    default = Path(__file__).resolve().parents[1] / "src" / "eigtopo" / "data" / "geodesic128_v1.csv"
    parser.add_argument("--out", type=Path, default=default)
    args = parser.parse_args()
    pos = make_positions()
    assert len(pos) == N_ELECTRODES
    with open(args.out, "w") as fh:
        fh.write("label,x,y,z\n")
        for i, (x, y, z) in enumerate(pos, start=1):
            fh.write(f"E{i},{float(x)!r},{float(y)!r},{float(z)!r}\n")
    print(f"wrote {len(pos)} electrodes to {args.out}")


if __name__ == "__main__":
    main()
