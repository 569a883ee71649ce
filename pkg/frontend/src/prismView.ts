/**
 * Prism view: triangular heatmap of all-subinterval correlations, drawn on
 * canvas from the server's flat array via the shared index formulas.  The
 * x-axis is the interval-ending day, the y-axis the window size; brushing a
 * day range asks the caller to refetch the sub-range triangle.
 */

import { correlationCss } from "./color.js";
import { indexToCell } from "./indexing.js";
import type { Paint } from "./matrixView.js";
import type { PrismPayload } from "./types.js";

export interface PrismLayout {
	px: number; // pixels per cell edge
	originX: number;
	originY: number;
}

export function defaultLayout(payload: PrismPayload, maxWidth = 900): PrismLayout {
	const px = Math.max(1, Math.floor(maxWidth / payload.n));
	return { px, originX: 0, originY: 0 };
}

/** Pixel rectangle of flat cell i (top-left origin: y = 0 is the tip row). */
export function cellRect(i: number, payload: PrismPayload, layout: PrismLayout): [number, number, number, number] {
	const [x, y] = indexToCell(i, payload.n);
	return [layout.originX + x * layout.px, layout.originY + y * layout.px, layout.px, layout.px];
}

/** Flat cell index under a pixel, or null outside the triangle. */
export function pickCell(pxX: number, pxY: number, payload: PrismPayload, layout: PrismLayout): number | null {
	const x = Math.floor((pxX - layout.originX) / layout.px);
	const y = Math.floor((pxY - layout.originY) / layout.px);
	const n = payload.n;
	if (y < 0 || y >= n || x < n - 1 - y || x > n - 1) return null;
	return (y * (y + 1)) / 2 + x - (n - 1 - y);
}

export function renderPrism(ctx: Paint, payload: PrismPayload, layout: PrismLayout): void {
	for (let i = 0; i < payload.values.length; i++) {
		const value = payload.values[i];
		if (value === null) continue;
		const [rx, ry, w, h] = cellRect(i, payload, layout);
		ctx.fillStyle = correlationCss(value);
		ctx.fillRect(rx, ry, w, h);
	}
}

/** Brush over the x-axis: maps a pixel span to the covered date range. */
export function brushRange(
	pxStart: number,
	pxEnd: number,
	payload: PrismPayload,
	layout: PrismLayout,
): { from: string; to: string } | null {
	const lo = Math.min(pxStart, pxEnd);
	const hi = Math.max(pxStart, pxEnd);
	const first = Math.max(0, Math.floor((lo - layout.originX) / layout.px));
	const last = Math.min(payload.n - 1, Math.floor((hi - layout.originX) / layout.px));
	if (last < first || last - first + 1 < payload.min_window) return null;
	return { from: payload.dates[first], to: payload.dates[last] };
}

/** Hover summary for a cell: ending day, window size, and the value. */
export function cellInfo(i: number, payload: PrismPayload): { end: string; window: number; value: number | null } {
	const [x, y] = indexToCell(i, payload.n);
	return { end: payload.dates[x], window: payload.n - y, value: payload.values[i] };
}
