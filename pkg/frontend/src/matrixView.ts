/**
 * Correlation matrix view: price correlations in the upper-right triangle,
 * volume correlations in the lower-left, market-correlation donuts on the
 * diagonal, return bars on the left, UpSet columns on the right.
 *
 * Cells are drawn immediate-mode on a canvas; above ~40 members there is no
 * per-cell DOM at all.
 */

import { correlationCss, returnCss } from "./color.js";
import { pairIndex } from "./indexing.js";
import type { MatrixPayload, UpsetPayload } from "./types.js";

export type MatrixCell =
	| { kind: "price"; value: number | null }
	| { kind: "volume"; value: number | null }
	| { kind: "diag"; value: number | null };

/**
 * The value shown at (row, col) of the seriated matrix: price above the
 * diagonal (col > row), volume below (col < row), market correlation on it.
 */
export function matrixCell(payload: MatrixPayload, row: number, col: number): MatrixCell {
	const m = payload.members.length;
	if (row < 0 || col < 0 || row >= m || col >= m) {
		throw new RangeError(`cell (${row}, ${col}) outside ${m}x${m} matrix`);
	}
	if (row === col) {
		return { kind: "diag", value: payload.market_diag[row] };
	}
	const k = pairIndex(row, col, m);
	if (col > row) {
		return { kind: "price", value: payload.price_upper[k] };
	}
	return { kind: "volume", value: payload.volume_lower[k] };
}

/** Donut model for a diagonal cell: clockwise angle from zero encodes |corr|. */
export function donutModel(value: number | null): { sweep: number; positive: boolean } {
	if (value === null || Number.isNaN(value)) return { sweep: 0, positive: true };
	return { sweep: Math.abs(value) * 2 * Math.PI, positive: value >= 0 };
}

/** Minimal 2D-context surface used by the renderers (testable without DOM). */
export interface Paint {
	fillStyle: string | CanvasGradient | CanvasPattern;
	strokeStyle: string | CanvasGradient | CanvasPattern;
	lineWidth: number;
	fillRect(x: number, y: number, w: number, h: number): void;
	strokeRect(x: number, y: number, w: number, h: number): void;
	beginPath(): void;
	moveTo(x: number, y: number): void;
	lineTo(x: number, y: number): void;
	arc(x: number, y: number, r: number, a0: number, a1: number, ccw?: boolean): void;
	fill(): void;
	stroke(): void;
}

export interface MatrixLayout {
	cell: number;
	barWidth: number;
	upsetColumn: number;
	gap: number;
}

export const DEFAULT_LAYOUT: MatrixLayout = { cell: 18, barWidth: 70, upsetColumn: 14, gap: 6 };

export function matrixExtent(payload: MatrixPayload, upset: UpsetPayload | null, layout = DEFAULT_LAYOUT): [number, number] {
	const m = payload.members.length;
	const upsetWidth = upset ? upset.items.length * layout.upsetColumn : 0;
	return [
		layout.barWidth + layout.gap + m * layout.cell + layout.gap + upsetWidth,
		m * layout.cell,
	];
}

/**
 * Draw the full composite.  The cornered borders act as embedded legends:
 * top-right corners cue price cells, bottom-left corners cue volume cells.
 */
export function renderMatrix(
	ctx: Paint,
	payload: MatrixPayload,
	upset: UpsetPayload | null = null,
	layout: MatrixLayout = DEFAULT_LAYOUT,
): void {
	const m = payload.members.length;
	const { cell, barWidth, gap } = layout;
	const x0 = barWidth + gap;

	// left return bars, right-aligned at the matrix edge
	const maxAbs = Math.max(1e-9, ...payload.returns.map((r) => Math.abs(r ?? 0)));
	for (let row = 0; row < m; row++) {
		const value = payload.returns[row];
		if (value === null) continue;
		const width = (Math.abs(value) / maxAbs) * (barWidth - 2);
		ctx.fillStyle = returnCss(value);
		ctx.fillRect(barWidth - width, row * cell + 2, width, cell - 4);
	}

	for (let row = 0; row < m; row++) {
		for (let col = 0; col < m; col++) {
			const px = x0 + col * cell;
			const py = row * cell;
			const cellValue = matrixCell(payload, row, col);
			if (cellValue.kind === "diag") {
				drawDonut(ctx, px, py, cell, cellValue.value);
				continue;
			}
			ctx.fillStyle = correlationCss(cellValue.value);
			ctx.fillRect(px, py, cell - 1, cell - 1);
			drawCorneredBorder(ctx, px, py, cell - 1, cellValue.kind);
		}
	}

	// first-phase blocks as outlines
	ctx.strokeStyle = "rgb(255,140,0)";
	ctx.lineWidth = 1.5;
	for (const [start, end] of payload.blocks) {
		const size = (end - start) * cell;
		ctx.strokeRect(x0 + start * cell, start * cell, size, size);
	}

	if (upset) {
		const ux = x0 + m * cell + gap;
		for (let col = 0; col < upset.items.length; col++) {
			for (let row = 0; row < m; row++) {
				// UpSet rows follow the seriated order
				const member = payload.members[row];
				const sessionRow = upset.members.indexOf(member);
				const held = sessionRow >= 0 && upset.membership[sessionRow][col];
				ctx.fillStyle = held ? "rgb(60,60,60)" : "rgb(225,225,225)";
				const cx = ux + col * layout.upsetColumn + layout.upsetColumn / 2;
				ctx.beginPath();
				ctx.arc(cx, row * cell + cell / 2, layout.upsetColumn * 0.3, 0, 2 * Math.PI);
				ctx.fill();
			}
		}
	}
}

function drawDonut(ctx: Paint, px: number, py: number, cell: number, value: number | null): void {
	const r = cell / 2 - 1.5;
	const cx = px + cell / 2;
	const cy = py + cell / 2;
	ctx.strokeStyle = "rgb(210,210,210)";
	ctx.lineWidth = 3;
	ctx.beginPath();
	ctx.arc(cx, cy, r, 0, 2 * Math.PI);
	ctx.stroke();
	const { sweep, positive } = donutModel(value);
	if (sweep > 0) {
		ctx.strokeStyle = positive ? "rgb(27,120,55)" : "rgb(140,81,10)";
		ctx.beginPath();
		ctx.arc(cx, cy, r, -Math.PI / 2, -Math.PI / 2 + sweep);
		ctx.stroke();
	}
}

function drawCorneredBorder(ctx: Paint, px: number, py: number, size: number, kind: "price" | "volume"): void {
	const notch = Math.max(3, size * 0.25);
	ctx.strokeStyle = "rgba(90,90,90,0.55)";
	ctx.lineWidth = 1;
	ctx.beginPath();
	if (kind === "price") {
		// top-right corner
		ctx.moveTo(px + size - notch, py);
		ctx.lineTo(px + size, py);
		ctx.lineTo(px + size, py + notch);
	} else {
		// bottom-left corner
		ctx.moveTo(px, py + size - notch);
		ctx.lineTo(px, py + size);
		ctx.lineTo(px + notch, py + size);
	}
	ctx.stroke();
}
