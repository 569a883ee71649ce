/**
 * Shared color encodings: one symmetric diverging scale over [-1, 1] for both
 * the matrix and the prisms, and green/brown for positive/negative returns.
 */

export type Rgb = [number, number, number];

const NEGATIVE: Rgb = [33, 102, 172]; // deep blue at -1
const MIDPOINT: Rgb = [247, 247, 247]; // near-white at 0
const POSITIVE: Rgb = [178, 24, 43]; // deep red at +1

const RETURN_POSITIVE: Rgb = [27, 120, 55]; // green
const RETURN_NEGATIVE: Rgb = [140, 81, 10]; // brown

function lerp(a: Rgb, b: Rgb, t: number): Rgb {
	return [
		Math.round(a[0] + (b[0] - a[0]) * t),
		Math.round(a[1] + (b[1] - a[1]) * t),
		Math.round(a[2] + (b[2] - a[2]) * t),
	];
}

export function rgbString([r, g, b]: Rgb): string {
	return `rgb(${r},${g},${b})`;
}

/** Diverging correlation color; values are clamped into [-1, 1]. */
export function correlationColor(value: number): Rgb {
	const v = Math.max(-1, Math.min(1, value));
	return v < 0 ? lerp(MIDPOINT, NEGATIVE, -v) : lerp(MIDPOINT, POSITIVE, v);
}

export function correlationCss(value: number | null): string {
	if (value === null || Number.isNaN(value)) return "rgb(255,255,255)";
	return rgbString(correlationColor(value));
}

/** Return bars: green when positive, brown when negative. */
export function returnColor(value: number): Rgb {
	return value >= 0 ? RETURN_POSITIVE : RETURN_NEGATIVE;
}

export function returnCss(value: number | null): string {
	if (value === null || Number.isNaN(value)) return "rgb(200,200,200)";
	return rgbString(returnColor(value));
}
