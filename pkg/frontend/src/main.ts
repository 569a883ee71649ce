/**
 * App shell: four coordinated views against the analysis service.
 *
 * Network view -> pick a year row and seeds -> session; matrix view shows the
 * seriated correlations with return bars and UpSet columns; knowledge view
 * explores the ego network (double-click pins items / adds stocks); prism
 * view compares a pair against market and industry across all subintervals.
 */

import { ApiClient, ApiError } from "./api.js";
import { correlationCss } from "./color.js";
import { layoutSegments, placeNeighbors } from "./knowledgeLayout.js";
import { DEFAULT_LAYOUT, matrixExtent, renderMatrix } from "./matrixView.js";
import { communityBoxes, distributionPath } from "./networkView.js";
import { brushRange, cellInfo, defaultLayout, pickCell, renderPrism } from "./prismView.js";
import { SessionStore } from "./session.js";
import type { EgoResponse, PrismPayload } from "./types.js";

const apiBase = new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8400";
const api = new ApiClient(apiBase);

const el = {
	status: document.getElementById("status") as HTMLElement,
	years: document.getElementById("years") as HTMLElement,
	tauS: document.getElementById("tau-s") as HTMLInputElement,
	tauP: document.getElementById("tau-p") as HTMLInputElement,
	must: document.getElementById("must") as HTMLInputElement,
	tags: document.getElementById("tags") as HTMLInputElement,
	refresh: document.getElementById("refresh") as HTMLButtonElement,
	matrix: document.getElementById("matrix") as HTMLCanvasElement,
	matrixMembers: document.getElementById("matrix-members") as HTMLElement,
	knowledge: document.getElementById("knowledge") as HTMLCanvasElement,
	knowledgeInfo: document.getElementById("knowledge-info") as HTMLElement,
	prisms: document.getElementById("prisms") as HTMLElement,
	prismInfo: document.getElementById("prism-info") as HTMLElement,
};

let session: SessionStore | null = null;
let ego: EgoResponse | null = null;

function setStatus(text: string): void {
	el.status.textContent = text;
}

function reportError(error: unknown): void {
	if (error instanceof ApiError) {
		setStatus(`error ${error.code}: ${error.message}`);
	} else {
		setStatus(String(error));
	}
}

async function refreshNetworkView(): Promise<void> {
	const years = await api.years();
	el.years.replaceChildren();
	const must = el.must.value.split(",").map((s) => s.trim()).filter(Boolean);
	const tags = el.tags.value.split(",").map((s) => s.trim()).filter(Boolean);
	for (const { year } of [...years].sort((a, b) => b.year - a.year)) {
		const row = document.createElement("div");
		row.className = "year-row";
		const canvas = document.createElement("canvas");
		canvas.width = 760;
		canvas.height = 46;
		const label = document.createElement("button");
		label.textContent = String(year);
		label.addEventListener("click", () => createSession(year, must));
		row.append(label, canvas);
		el.years.append(row);
		drawYearRow(canvas, year, must, tags).catch(reportError);
	}
}

async function drawYearRow(canvas: HTMLCanvasElement, year: number, must: string[], tags: string[]): Promise<void> {
	const ctx = canvas.getContext("2d")!;
	const dist = await api.distribution(year, must);
	const shadePath = distributionPath(dist.benchmark, 120, 40);
	ctx.fillStyle = "rgba(120,120,150,0.35)";
	ctx.beginPath();
	ctx.moveTo(0, 43);
	for (const [x, y] of shadePath.points) ctx.lineTo(x, y + 3);
	ctx.lineTo(120, 43);
	ctx.fill();
	ctx.strokeStyle = "rgb(60,60,90)";
	for (const subject of dist.subjects) {
		const line = distributionPath(subject, 120, 40);
		ctx.beginPath();
		for (const [x, y] of line.points) ctx.lineTo(x, y + 3);
		ctx.stroke();
	}

	const communities = await api.communities(year, {
		tauSpearman: Number(el.tauS.value),
		tauPearson: Number(el.tauP.value),
		must,
		tags,
	});
	const boxes = communityBoxes(communities);
	const slot = 7;
	for (const box of boxes) {
		const x = 140 + box.start * slot;
		ctx.strokeStyle = "rgb(120,120,120)";
		ctx.strokeRect(x - 2, 8, box.size * slot + 4, 30);
		box.tickers.forEach((_, k) => {
			if (!box.visible[k]) return; // hidden outside selected knowledge clusters
			ctx.fillStyle = "rgb(70,70,120)";
			ctx.beginPath();
			ctx.arc(x + k * slot + slot / 2, 23, 2.4, 0, 2 * Math.PI);
			ctx.fill();
		});
	}
}

async function createSession(year: number, seeds: string[]): Promise<void> {
	if (!seeds.length) {
		setStatus("enter must-have seed tickers first");
		return;
	}
	try {
		session = await SessionStore.create(api, year, seeds, {
			tau_spearman: Number(el.tauS.value),
			tau_pearson: Number(el.tauP.value),
		});
		history.replaceState(null, "", `?api=${encodeURIComponent(apiBase)}&session=${session.id}`);
		setStatus(`session ${session.id.slice(0, 8)}… with ${session.members.length} members`);
		await Promise.all([refreshMatrix(), refreshPrisms()]);
	} catch (error) {
		reportError(error);
	}
}

async function refreshMatrix(): Promise<void> {
	if (!session) return;
	const [matrix, upset] = await Promise.all([api.matrix(session.id), api.upset(session.id)]);
	const [w, h] = matrixExtent(matrix, upset, DEFAULT_LAYOUT);
	el.matrix.width = w;
	el.matrix.height = h;
	renderMatrix(el.matrix.getContext("2d")!, matrix, upset, DEFAULT_LAYOUT);
	el.matrixMembers.replaceChildren(
		...matrix.members.map((ticker) => {
			const chip = document.createElement("button");
			chip.textContent = ticker;
			chip.title = "click: ego search / shift-click: remove";
			chip.addEventListener("click", (event) =>
				event.shiftKey ? removeStock(ticker) : showEgo(ticker),
			);
			return chip;
		}),
	);
}

async function removeStock(ticker: string): Promise<void> {
	if (!session) return;
	try {
		await session.removeStock(ticker, true);
		await refreshMatrix();
	} catch (error) {
		reportError(error);
	}
}

async function showEgo(ticker: string): Promise<void> {
	try {
		ego = await api.ego(ticker);
	} catch (error) {
		reportError(error);
		return;
	}
	const ctx = el.knowledge.getContext("2d")!;
	const W = el.knowledge.width;
	const H = el.knowledge.height;
	ctx.clearRect(0, 0, W, H);
	const cx = W / 2;
	const cy = H / 2;
	const rim = Math.min(W, H) / 2 - 18;

	for (const arc of layoutSegments(ego.segments)) {
		ctx.strokeStyle = arc.segment.primary ? "rgb(40,70,120)" : "rgb(120,150,200)";
		ctx.lineWidth = 12;
		ctx.beginPath();
		ctx.arc(cx, cy, rim + 8, arc.start, arc.end - 0.01);
		ctx.stroke();
	}
	ctx.fillStyle = "rgb(20,20,20)";
	ctx.beginPath();
	ctx.arc(cx, cy, 5, 0, 2 * Math.PI);
	ctx.fill();
	for (const placed of placeNeighbors(ego.neighbors, rim)) {
		ctx.fillStyle = "rgb(90,90,140)";
		const x = cx + placed.radius * Math.cos(placed.angle);
		const y = cy + placed.radius * Math.sin(placed.angle);
		ctx.beginPath();
		ctx.arc(x, y, 4, 0, 2 * Math.PI);
		ctx.fill();
	}
	el.knowledgeInfo.replaceChildren(
		...ego.segments.map((segment) => {
			const chip = document.createElement("button");
			chip.textContent = `${segment.attribute}:${segment.value} (${segment.holder_count})`;
			chip.title = "double-click to pin into the UpSet table";
			chip.addEventListener("dblclick", () => pinSegment(segment));
			return chip;
		}),
		...ego.neighbors.slice(0, 12).map((neighbor) => {
			const chip = document.createElement("button");
			chip.textContent = `${neighbor.ticker} ×${neighbor.ring}`;
			chip.title = "double-click to add to the cluster";
			chip.addEventListener("dblclick", () => addNeighbor(neighbor.ticker));
			return chip;
		}),
	);
	setStatus(`ego ${ticker}: ${ego.neighbors.length} related companies`);
}

async function pinSegment(segment: { layer: string; attribute: string; value: string }): Promise<void> {
	if (!session) return;
	try {
		await session.pinItem({
			layer: segment.layer as "location" | "human" | "business",
			attribute: segment.attribute,
			value: segment.value,
		});
		await refreshMatrix();
	} catch (error) {
		reportError(error);
	}
}

async function addNeighbor(ticker: string): Promise<void> {
	if (!session) return;
	try {
		await session.addStock(ticker);
		await Promise.all([refreshMatrix(), refreshPrisms()]);
	} catch (error) {
		reportError(error);
	}
}

async function refreshPrisms(): Promise<void> {
	if (!session || session.members.length < 2) return;
	const stock = session.members[0].ticker;
	const other = session.members[1].ticker;
	const range = session.state.range;
	let payloads: [string, PrismPayload][];
	try {
		const refs = await api.prismRefs(stock, other, range);
		payloads = [
			[`${stock} vs market`, refs.market],
			[`${stock} vs industry`, refs.industry],
			[`${stock} vs ${other}`, refs.pair],
		];
	} catch {
		const pair = await api.prism(stock, other, range);
		payloads = [[`${stock} vs ${other}`, pair]];
	}
	el.prisms.replaceChildren(
		...payloads.map(([title, payload]) => prismPanel(title, payload)),
	);
}

function prismPanel(title: string, payload: PrismPayload): HTMLElement {
	const panel = document.createElement("figure");
	const caption = document.createElement("figcaption");
	caption.textContent = `${title} | tip ${payload.tip === null ? "n/a" : payload.tip.toFixed(4)}`;
	caption.style.borderLeft = `10px solid ${correlationCss(payload.tip)}`;
	const canvas = document.createElement("canvas");
	const layout = defaultLayout(payload, 300);
	canvas.width = payload.n * layout.px;
	canvas.height = payload.n * layout.px;
	renderPrism(canvas.getContext("2d")!, payload, layout);

	canvas.addEventListener("mousemove", (event) => {
		const rect = canvas.getBoundingClientRect();
		const i = pickCell(event.clientX - rect.left, event.clientY - rect.top, payload, layout);
		if (i !== null) {
			const info = cellInfo(i, payload);
			el.prismInfo.textContent = `${title}: ending ${info.end}, window ${info.window}d, corr ${
				info.value === null ? "n/a" : info.value.toFixed(4)
			}`;
		}
	});
	let brushStart: number | null = null;
	canvas.addEventListener("mousedown", (event) => {
		brushStart = event.clientX - canvas.getBoundingClientRect().left;
	});
	canvas.addEventListener("mouseup", async (event) => {
		if (brushStart === null) return;
		const end = event.clientX - canvas.getBoundingClientRect().left;
		const range = brushRange(brushStart, end, payload, layout);
		brushStart = null;
		if (range && session) {
			try {
				const zoomed = await api.prism(payload.a, payload.b, range, payload.min_window);
				panel.replaceWith(prismPanel(`${title} [${range.from}..${range.to}]`, zoomed));
			} catch (error) {
				reportError(error);
			}
		}
	});
	panel.append(caption, canvas);
	return panel;
}

async function boot(): Promise<void> {
	try {
		const existing = new URLSearchParams(location.search).get("session");
		if (existing) {
			session = await SessionStore.load(api, existing);
			setStatus(`restored session ${existing.slice(0, 8)}… (${session.members.length} members)`);
			await Promise.all([refreshMatrix(), refreshPrisms()]);
		}
		await refreshNetworkView();
	} catch (error) {
		reportError(error);
	}
}

el.refresh.addEventListener("click", () => refreshNetworkView().catch(reportError));
boot();
