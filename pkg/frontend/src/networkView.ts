/**
 * Network view models: one row per year with a correlation-distribution
 * profile on the left and size-sorted community boxes on the right.
 */

import type { CommunitiesResponse, DistributionEntry } from "./types.js";

export interface DistributionPath {
	points: [number, number][]; // polyline over the histogram bins
}

/** Polyline for a histogram, normalized to a width x height box. */
export function distributionPath(entry: DistributionEntry, width: number, height: number): DistributionPath {
	const max = Math.max(1, ...entry.counts);
	const step = width / entry.counts.length;
	const points: [number, number][] = entry.counts.map((count, k) => [
		k * step + step / 2,
		height - (count / max) * height,
	]);
	return { points };
}

export interface CommunityBox {
	start: number; // x offset in dot slots
	size: number;
	tickers: string[];
	visible: boolean[]; // knowledge-cluster flags control dot visibility
}

/** Boxes laid out left to right; members keep their betweenness order. */
export function communityBoxes(response: CommunitiesResponse, gapSlots = 1): CommunityBox[] {
	const boxes: CommunityBox[] = [];
	let cursor = 0;
	for (const community of response.communities) {
		boxes.push({
			start: cursor,
			size: community.size,
			tickers: community.members.map((m) => m.ticker),
			visible: community.members.map((m) => m.in_knowledge_cluster_of_selected),
		});
		cursor += community.size + gapSlots;
	}
	return boxes;
}

/** Total slot width needed for one year row. */
export function rowSlots(boxes: CommunityBox[]): number {
	if (!boxes.length) return 0;
	const last = boxes[boxes.length - 1];
	return last.start + last.size;
}
