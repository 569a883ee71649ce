/**
 * Chord layout for the ego-centric knowledge view: the circle splits into
 * three equal sectors (location, human, business); segment widths follow the
 * server's log-rarity weights; neighbors sit on rings, closer to the center
 * the more items they share with the ego.
 */

import type { EgoNeighbor, EgoSegment } from "./types.js";

export const LAYERS = ["location", "human", "business"] as const;
export type LayerName = (typeof LAYERS)[number];

const SECTOR = (2 * Math.PI) / 3;
const SECTOR_PADDING = 0.06; // radians trimmed at each sector edge

export interface SegmentArc {
	segment: EgoSegment;
	start: number;
	end: number;
}

/** Mirror of the server-side width rule, for offline layout of raw counts. */
export function segmentWidths(counts: number[]): number[] {
	if (counts.length === 0) return [];
	const total = counts.reduce((a, b) => a + b, 0);
	const raw = counts.map((c) => Math.log1p(total / c));
	const scale = raw.reduce((a, b) => a + b, 0);
	return raw.map((w) => w / scale);
}

/** Place one layer's segments inside its 120-degree sector, widths as given. */
export function layoutSegments(segments: EgoSegment[]): SegmentArc[] {
	const arcs: SegmentArc[] = [];
	for (let layerIdx = 0; layerIdx < LAYERS.length; layerIdx++) {
		const layer = LAYERS[layerIdx];
		const inLayer = segments.filter((s) => s.layer === layer);
		const usable = SECTOR - 2 * SECTOR_PADDING;
		let cursor = layerIdx * SECTOR + SECTOR_PADDING;
		const totalWidth = inLayer.reduce((a, s) => a + s.width, 0) || 1;
		for (const segment of inLayer) {
			const span = (segment.width / totalWidth) * usable;
			arcs.push({ segment, start: cursor, end: cursor + span });
			cursor += span;
		}
	}
	return arcs;
}

/**
 * Ring radius for a neighbor: ring 1 (one shared item) sits at the rim,
 * higher rings move strictly inward toward the ego at the center.
 */
export function ringRadius(ring: number, maxRing: number, rimRadius: number): number {
	const clamped = Math.max(1, Math.min(ring, maxRing));
	const innermost = rimRadius * 0.25;
	if (maxRing <= 1) return rimRadius;
	return rimRadius - ((clamped - 1) / (maxRing - 1)) * (rimRadius - innermost);
}

export interface NeighborPlacement {
	neighbor: EgoNeighbor;
	radius: number;
	angle: number;
}

/** Spread neighbors of each ring evenly around their circle. */
export function placeNeighbors(neighbors: EgoNeighbor[], rimRadius: number): NeighborPlacement[] {
	const maxRing = neighbors.reduce((a, n) => Math.max(a, n.ring), 1);
	const byRing = new Map<number, EgoNeighbor[]>();
	for (const n of neighbors) {
		const bucket = byRing.get(n.ring) ?? [];
		bucket.push(n);
		byRing.set(n.ring, bucket);
	}
	const out: NeighborPlacement[] = [];
	for (const [ring, bucket] of byRing) {
		const radius = ringRadius(ring, maxRing, rimRadius);
		bucket.forEach((neighbor, k) => {
			out.push({ neighbor, radius, angle: (2 * Math.PI * k) / bucket.length + ring * 0.35 });
		});
	}
	return out;
}
