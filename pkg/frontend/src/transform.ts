/**
 * Canvas transform between scene coordinates (meters, y up) and pixel
 * coordinates (y down). The transform is a uniform scale plus offset, chosen
 * so the scene bounds fit the viewport with a margin; the inverse is exact up
 * to floating-point rounding, so click round-trips stay far below the 0.5 px
 * budget.
 */

export interface Bounds {
  xmin: number;
  ymin: number;
  xmax: number;
  ymax: number;
}

export interface Viewport {
  width: number;
  height: number;
}

export class CanvasTransform {
  constructor(
    readonly scale: number, // pixels per meter, > 0
    readonly offsetX: number,
    readonly offsetY: number,
  ) {
    if (!(scale > 0) || !Number.isFinite(scale)) {
      throw new RangeError(`scale must be a positive finite number, got ${scale}`);
    }
  }

  /** Fit the scene bounds inside the viewport, centered, with a pixel margin. */
  static fit(bounds: Bounds, view: Viewport, margin = 24): CanvasTransform {
    const w = bounds.xmax - bounds.xmin;
    const h = bounds.ymax - bounds.ymin;
    if (!(w > 0) || !(h > 0)) {
      throw new RangeError("bounds must have positive extent");
    }
    const usableW = Math.max(view.width - 2 * margin, 1);
    const usableH = Math.max(view.height - 2 * margin, 1);
    const scale = Math.min(usableW / w, usableH / h);
    const cx = (bounds.xmin + bounds.xmax) / 2;
    const cy = (bounds.ymin + bounds.ymax) / 2;
    // scene center maps to viewport center; y axis flips
    return new CanvasTransform(
      scale,
      view.width / 2 - scale * cx,
      view.height / 2 + scale * cy,
    );
  }

  /** Scene (meters) to pixels. */
  toPx(x: number, y: number): [number, number] {
    return [this.scale * x + this.offsetX, -this.scale * y + this.offsetY];
  }

  /** Pixels back to scene (meters). Exact inverse of toPx. */
  toScene(px: number, py: number): [number, number] {
    return [(px - this.offsetX) / this.scale, (this.offsetY - py) / this.scale];
  }

  /** Length conversion for radii and line widths. */
  metersToPx(m: number): number {
    return this.scale * m;
  }
}

export function inBounds(bounds: Bounds, x: number, y: number): boolean {
  return x >= bounds.xmin && x <= bounds.xmax && y >= bounds.ymin && y <= bounds.ymax;
}
