import type { Series } from "./types.js";

export interface PlotBox {
  width: number;
  height: number;
  margin: number;
}

export const DEFAULT_BOX: PlotBox = { width: 320, height: 220, margin: 32 };

export interface Scale {
  x: (v: number) => number;
  y: (v: number) => number;
  xMax: number;
  yMax: number;
}

function finiteYs(series: Series): number[] {
  return series.map(([, y]) => y).filter((y): y is number => y !== null && Number.isFinite(y));
}

export function makeScale(allSeries: Series[], box: PlotBox): Scale {
  const xs = allSeries.flatMap((s) => s.map(([x]) => x));
  const ys = allSeries.flatMap(finiteYs);
  const xMax = Math.max(1e-12, ...xs);
  const yMax = Math.max(1e-12, ...ys);
  const innerW = box.width - 2 * box.margin;
  const innerH = box.height - 2 * box.margin;
  return {
    x: (v) => box.margin + (v / xMax) * innerW,
    y: (v) => box.height - box.margin - (v / yMax) * innerH,
    xMax,
    yMax,
  };
}

/** SVG path for one curve; null gaps (tail underflow) split the stroke. */
export function seriesPath(series: Series, scale: Scale): string {
  const parts: string[] = [];
  let pen = false;
  for (const [x, y] of series) {
    if (y === null || !Number.isFinite(y)) {
      pen = false;
      continue;
    }
    parts.push(`${pen ? "L" : "M"}${scale.x(x).toFixed(2)},${scale.y(y).toFixed(2)}`);
    pen = true;
  }
  return parts.join(" ");
}

/** Step path for the empirical cumulative hazard. */
export function stepPath(points: Array<[number, number]>, scale: Scale): string {
  if (points.length === 0) return "";
  const parts = [`M${scale.x(points[0][0]).toFixed(2)},${scale.y(points[0][1]).toFixed(2)}`];
  for (let i = 1; i < points.length; i++) {
    const [x, y] = points[i];
    const prevY = points[i - 1][1];
    parts.push(`L${scale.x(x).toFixed(2)},${scale.y(prevY).toFixed(2)}`);
    parts.push(`L${scale.x(x).toFixed(2)},${scale.y(y).toFixed(2)}`);
  }
  return parts.join(" ");
}

export function verticalMarker(x: number, scale: Scale, box: PlotBox): string {
  const px = scale.x(x).toFixed(2);
  return `M${px},${box.margin} L${px},${box.height - box.margin}`;
}

export interface PlotLine {
  series: Series;
  cssClass: string;
  step?: boolean;
}

/** Assemble one framed SVG plot with a title and any number of curves. */
export function renderPlot(title: string, lines: PlotLine[],
                           box: PlotBox = DEFAULT_BOX,
                           markerX?: number): string {
  const scale = makeScale(lines.map((l) => l.series), box);
  const paths = lines.map((line) => {
    const d = line.step
      ? stepPath(line.series as Array<[number, number]>, scale)
      : seriesPath(line.series, scale);
    return `<path class="${line.cssClass}" d="${d}" fill="none"/>`;
  });
  if (markerX !== undefined && markerX <= scale.xMax) {
    paths.push(`<path class="cut-marker" d="${verticalMarker(markerX, scale, box)}"/>`);
  }
  const frame = `<rect x="${box.margin}" y="${box.margin}" `
    + `width="${box.width - 2 * box.margin}" height="${box.height - 2 * box.margin}" `
    + `class="frame" fill="none"/>`;
  const label = `<text x="${box.width / 2}" y="${box.margin - 10}" `
    + `text-anchor="middle" class="plot-title">${title}</text>`;
  const axis = `<text x="${box.width - box.margin}" y="${box.height - 8}" `
    + `text-anchor="end" class="axis-label">${scale.xMax.toPrecision(3)}</text>`
    + `<text x="${box.margin - 4}" y="${box.margin + 4}" `
    + `text-anchor="end" class="axis-label">${scale.yMax.toPrecision(3)}</text>`;
  return `<svg viewBox="0 0 ${box.width} ${box.height}" class="plot">`
    + frame + label + axis + paths.join("") + "</svg>";
}
