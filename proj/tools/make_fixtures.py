#!/usr/bin/env python3
"""Regenerate the grayscale fixtures under data/ from scikit-image samples.

    python3 tools/make_fixtures.py [--out data]

data/train   22 training images, 140x140 (cameraman excluded)
data/test    cameraman, 256x256, held out
data/coding  six 128x128 images for the coding sweeps
"""
import argparse
import pathlib

import numpy as np
import skimage.data as samples
from skimage.color import rgb2gray
from skimage.transform import resize

TRAIN = ['astronaut', 'brick', 'cat', 'chelsea', 'clock', 'coffee', 'coins', 'grass', 'gravel', 'moon', 'page',
         'text', 'rocket', 'retina', 'hubble_deep_field', 'immunohistochemistry', 'cell', 'colorwheel']
# Extra crops from the large images: name, source, rows, cols.
CROPS = [('retina_q', 'retina', (200, 900), (200, 900)),
         ('astronaut_face', 'astronaut', (0, 256), (128, 384)),
         ('coffee_left', 'coffee', (0, 400), (0, 400)),
         ('rocket_top', 'rocket', (0, 320), (160, 480))]
CODING = ['camera', 'coins', 'moon', 'page', 'clock', 'text']


def gray(name):
    a = getattr(samples, name)()
    if a.ndim == 3:
        a = rgb2gray(a[..., :3]) * 255
    return a.astype(np.float64)


def square(a):
    h, w = a.shape
    s = min(h, w)
    return a[(h - s) // 2:(h - s) // 2 + s, (w - s) // 2:(w - s) // 2 + s]


def fit(a, size):
    r = resize(a, (size, size), anti_aliasing=True, preserve_range=True)
    return np.clip(r.round(), 0, 255).astype(np.uint8)


def write_pgm(path, a):
    with open(path, 'wb') as f:
        f.write(b'P5\n%d %d\n255\n' % (a.shape[1], a.shape[0]))
        f.write(a.tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument('--out', default='data')
    root = pathlib.Path(ap.parse_args().out)
    for sub in ('train', 'test', 'coding'):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for name in TRAIN:
        write_pgm(root / 'train' / f'{name}.pgm', fit(square(gray(name)), 140))
    for name, src, (r0, r1), (c0, c1) in CROPS:
        write_pgm(root / 'train' / f'{name}.pgm', fit(gray(src)[r0:r1, c0:c1], 140))
    write_pgm(root / 'test' / 'cameraman.pgm', fit(gray('camera'), 256))
    for name in CODING:
        write_pgm(root / 'coding' / f'{name}.pgm', fit(square(gray(name)), 128))


if __name__ == '__main__':
    main()
