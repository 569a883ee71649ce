/** Wire types for the analysis service (all bodies JSON, UTF-8). */

export interface YearEntry {
	year: number;
	instrument_count: number;
}

export interface DistributionEntry {
	subject: string;
	year: number;
	counts: number[];
}

export interface DistributionResponse {
	year: number;
	bin_edges: number[];
	benchmark: DistributionEntry;
	subjects: DistributionEntry[];
}

export interface CommunityMember {
	ticker: string;
	in_knowledge_cluster_of_selected: boolean;
}

export interface CommunityEntry {
	year: number;
	size: number;
	members: CommunityMember[];
}

export interface CommunitiesResponse {
	year: number;
	communities: CommunityEntry[];
}

export interface ItemRef {
	layer: "location" | "human" | "business";
	attribute: string;
	value: string;
	primary?: boolean;
}

export interface EgoSegment extends ItemRef {
	holder_count: number;
	width: number;
}

export interface EgoNeighbor {
	ticker: string;
	ring: number;
	shared: ItemRef[];
}

export interface EgoResponse {
	ego: string;
	segments: EgoSegment[];
	neighbors: EgoNeighbor[];
}

export interface SessionMember {
	ticker: string;
	provenance: "data_driven" | "knowledge_added" | "must_have";
}

export interface SessionState {
	id: string;
	year: number;
	range: { from: string; to: string };
	members: SessionMember[];
	pinned_items: ItemRef[];
	manual_order: string[] | null;
	event_count: number;
}

export interface SessionEvent {
	ts: string;
	op: string;
	args: Record<string, unknown>;
}

export interface SessionResponse {
	state: SessionState;
	log: SessionEvent[];
}

export interface OpResponse {
	applied: boolean;
	state: SessionState;
}

/** Price correlations fill the upper-right triangle, volume the lower-left. */
export interface MatrixPayload {
	members: string[];
	permutation: number[];
	price_upper: (number | null)[];
	volume_lower: (number | null)[];
	market_diag: (number | null)[];
	returns: (number | null)[];
	blocks: [number, number][];
}

export interface UpsetPayload {
	items: ItemRef[];
	members: string[];
	membership: boolean[][];
}

export interface ReturnsPayload {
	from: string;
	to: string;
	returns: Record<string, number | null>;
}

/** Flat triangle: cell i maps to (x, y) via the indexing formulas. */
export interface PrismPayload {
	a: string;
	b: string;
	from: string;
	to: string;
	n: number;
	min_window: number;
	dates: string[];
	values: (number | null)[];
	tip: number | null;
	full_corr: number | null;
}

export interface PrismRefsPayload {
	market: PrismPayload;
	industry: PrismPayload;
	pair: PrismPayload;
}

export interface ApiErrorBody {
	code: string;
	message: string;
	details: Record<string, unknown>;
}
