import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { correlationCss, correlationColor, returnCss } from "../src/color.js";
import { layoutSegments, placeNeighbors, ringRadius, segmentWidths } from "../src/knowledgeLayout.js";
import { communityBoxes, distributionPath, rowSlots } from "../src/networkView.js";
import { brushRange, cellInfo, cellRect, defaultLayout, pickCell, renderPrism } from "../src/prismView.js";
import { indexToCell } from "../src/indexing.js";
import type { Paint } from "../src/matrixView.js";
import type { CommunitiesResponse, EgoSegment, PrismPayload } from "../src/types.js";

const prismPayload: PrismPayload = JSON.parse(
	readFileSync(new URL("../fixtures/prism_payload.json", import.meta.url), "utf-8"),
);

describe("color encodings", () => {
	it("is a symmetric diverging scale over [-1, 1]", () => {
		expect(correlationColor(0)).toEqual(correlationColor(-0))
		const [rNeg] = correlationColor(-1);
		const [rPos] = correlationColor(1);
		expect(rNeg).toBeLessThan(rPos); // blue end vs red end
		expect(correlationCss(null)).toBe("rgb(255,255,255)");
	});

	it("marks positive returns green and negative brown", () => {
		expect(returnCss(0.1)).toBe("rgb(27,120,55)");
		expect(returnCss(-0.1)).toBe("rgb(140,81,10)");
	});
});

describe("prism view", () => {
	it("the tip cell sits at the top-right and equals full_corr", () => {
		expect(prismPayload.tip).toBe(prismPayload.full_corr);
		expect(prismPayload.values[0]).toBe(prismPayload.tip);
		expect(indexToCell(0, prismPayload.n)).toEqual([prismPayload.n - 1, 0]);
	});

	it("pickCell inverts cellRect", () => {
		const layout = defaultLayout(prismPayload, 600);
		for (const i of [0, 5, 100, prismPayload.values.length - 1]) {
			const [x, y, w, h] = cellRect(i, prismPayload, layout);
			expect(pickCell(x + w / 2, y + h / 2, prismPayload, layout)).toBe(i);
		}
		expect(pickCell(-5, -5, prismPayload, layout)).toBeNull();
	});

	it("brushing maps pixels to a date sub-range", () => {
		const layout = defaultLayout(prismPayload, 600);
		const range = brushRange(
			layout.px * 3,
			layout.px * (3 + prismPayload.min_window + 2),
			prismPayload,
			layout,
		);
		expect(range).not.toBeNull();
		expect(range!.from).toBe(prismPayload.dates[3]);
		// too-narrow brushes are rejected
		expect(brushRange(0, layout.px, prismPayload, layout)).toBeNull();
	});

	it("renders one rect per defined cell", () => {
		const rects: string[] = [];
		const ctx = {
			fillStyle: "",
			strokeStyle: "",
			lineWidth: 1,
			fillRect() {
				rects.push(String(this.fillStyle));
			},
			strokeRect() {},
			beginPath() {},
			moveTo() {},
			lineTo() {},
			arc() {},
			fill() {},
			stroke() {},
		} as Paint;
		renderPrism(ctx, prismPayload, defaultLayout(prismPayload, 600));
		const defined = prismPayload.values.filter((v) => v !== null).length;
		expect(rects.length).toBe(defined);
	});

	it("cellInfo reports window size and ending date", () => {
		const info = cellInfo(0, prismPayload);
		expect(info.window).toBe(prismPayload.n);
		expect(info.end).toBe(prismPayload.dates[prismPayload.n - 1]);
	});
});

describe("knowledge layout", () => {
	const segments: EgoSegment[] = [
		{ layer: "location", attribute: "province", value: "P00", primary: true, holder_count: 10, width: 0.4 },
		{ layer: "location", attribute: "city", value: "P00-C1", primary: false, holder_count: 2, width: 0.6 },
		{ layer: "business", attribute: "industry", value: "IND00", primary: true, holder_count: 8, width: 1.0 },
	];

	it("keeps each layer inside its 120-degree sector", () => {
		const arcs = layoutSegments(segments);
		for (const arc of arcs) {
			const sectorIdx = ["location", "human", "business"].indexOf(arc.segment.layer);
			expect(arc.start).toBeGreaterThanOrEqual((sectorIdx * 2 * Math.PI) / 3);
			expect(arc.end).toBeLessThanOrEqual(((sectorIdx + 1) * 2 * Math.PI) / 3 + 1e-9);
			expect(arc.end).toBeGreaterThan(arc.start);
		}
	});

	it("mirrors the server width rule: rarer is wider, widths sum to 1", () => {
		const widths = segmentWidths([1, 5, 10]);
		expect(widths[0]).toBeGreaterThan(widths[1]);
		expect(widths[1]).toBeGreaterThan(widths[2]);
		expect(widths.reduce((a, b) => a + b, 0)).toBeCloseTo(1.0, 9);
	});

	it("more shared items means closer to the center", () => {
		const rim = 100;
		expect(ringRadius(1, 5, rim)).toBe(rim);
		expect(ringRadius(3, 5, rim)).toBeLessThan(ringRadius(2, 5, rim));
		expect(ringRadius(5, 5, rim)).toBeLessThan(ringRadius(4, 5, rim));
	});

	it("places every neighbor on its ring radius", () => {
		const neighbors = [
			{ ticker: "A", ring: 2, shared: [] },
			{ ticker: "B", ring: 1, shared: [] },
			{ ticker: "C", ring: 2, shared: [] },
		];
		const placed = placeNeighbors(neighbors, 100);
		expect(placed).toHaveLength(3);
		const radiusOf = Object.fromEntries(placed.map((p) => [p.neighbor.ticker, p.radius]));
		expect(radiusOf.A).toBe(radiusOf.C);
		expect(radiusOf.A).toBeLessThan(radiusOf.B);
	});
});

describe("network view", () => {
	it("distribution paths span the box and track counts", () => {
		const entry = { subject: "IDX", year: 2019, counts: [0, 5, 10, 5, 0] };
		const { points } = distributionPath(entry, 100, 40);
		expect(points).toHaveLength(5);
		expect(points[2][1]).toBe(0); // peak touches the top
		expect(points[0][1]).toBe(40);
	});

	it("community boxes are laid out by size order with hidden dots flagged", () => {
		const response: CommunitiesResponse = {
			year: 2019,
			communities: [
				{
					year: 2019,
					size: 3,
					members: [
						{ ticker: "a", in_knowledge_cluster_of_selected: true },
						{ ticker: "b", in_knowledge_cluster_of_selected: false },
						{ ticker: "c", in_knowledge_cluster_of_selected: true },
					],
				},
				{ year: 2019, size: 1, members: [{ ticker: "d", in_knowledge_cluster_of_selected: true }] },
			],
		};
		const boxes = communityBoxes(response);
		expect(boxes[0].start).toBe(0);
		expect(boxes[1].start).toBe(4); // 3 slots + 1 gap
		expect(boxes[0].visible).toEqual([true, false, true]);
		expect(rowSlots(boxes)).toBe(5);
	});
});
