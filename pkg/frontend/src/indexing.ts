/**
 * Triangle indexing shared with the server.
 *
 * A size-n triangle stores n(n+1)/2 cells in a flat array.  With a top-left
 * origin, index i maps to column x (interval-ending day) and row y, where the
 * window size is w = n - y:
 *
 *     y = floor((sqrt(8i + 1) - 1) / 2)
 *     x = n - 1 - y + i - y(y + 1)/2
 */

export function triangleCells(n: number): number {
	return (n * (n + 1)) / 2;
}

export function indexToCell(i: number, n: number): [number, number] {
	if (!Number.isInteger(i) || i < 0 || i >= triangleCells(n)) {
		throw new RangeError(`index ${i} outside triangle of n=${n}`);
	}
	const y = Math.floor((Math.sqrt(8 * i + 1) - 1) / 2);
	const x = n - 1 - y + i - (y * (y + 1)) / 2;
	return [x, y];
}

export function cellToIndex(x: number, y: number, n: number): number {
	if (y < 0 || y >= n || x < n - 1 - y || x > n - 1) {
		throw new RangeError(`cell (${x}, ${y}) invalid for n=${n}`);
	}
	return (y * (y + 1)) / 2 + x - (n - 1 - y);
}

/** Window size represented by row y of a size-n triangle. */
export function windowOfRow(y: number, n: number): number {
	return n - y;
}

/** Row-major upper-triangle pair index for (i, j), i != j, of m items. */
export function pairIndex(i: number, j: number, m: number): number {
	if (i > j) [i, j] = [j, i];
	return (i * (2 * m - i - 1)) / 2 + (j - i - 1);
}
