/** Client-side before/after comparison for the inspection slider.
 *
 * The server renders the pre- and post-edit views; the browser only blends
 * the two images per pixel as the slider moves and can highlight where
 * they differ.
 */

/** Linear blend of two same-sized RGBA buffers; t=0 is before, t=1 after. */
export function blendImages(
  before: Uint8ClampedArray,
  after: Uint8ClampedArray,
  t: number,
): Uint8ClampedArray {
  if (before.length !== after.length) {
    throw new Error("image buffers differ in size");
  }
  if (t < 0 || t > 1) throw new Error("blend factor must be in [0, 1]");
  const out = new Uint8ClampedArray(before.length);
  for (let i = 0; i < before.length; i++) {
    out[i] = before[i] + (after[i] - before[i]) * t;
  }
  return out;
}

/** Per-pixel difference mask over RGBA buffers (alpha ignored). */
export function diffMask(
  before: Uint8ClampedArray,
  after: Uint8ClampedArray,
): boolean[] {
  if (before.length !== after.length) {
    throw new Error("image buffers differ in size");
  }
  const pixels = before.length / 4;
  const mask = new Array<boolean>(pixels);
  for (let p = 0; p < pixels; p++) {
    const i = p * 4;
    mask[p] =
      before[i] !== after[i] ||
      before[i + 1] !== after[i + 1] ||
      before[i + 2] !== after[i + 2];
  }
  return mask;
}

/** True when the two images are identical (the slider shows no change). */
export function imagesIdentical(
  before: Uint8ClampedArray,
  after: Uint8ClampedArray,
): boolean {
  return diffMask(before, after).every((d) => !d);
}
