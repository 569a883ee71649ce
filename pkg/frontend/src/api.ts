/** Typed client for the analysis service; every user gesture maps to one call. */

import type {
	ApiErrorBody,
	CommunitiesResponse,
	DistributionResponse,
	EgoResponse,
	ItemRef,
	MatrixPayload,
	OpResponse,
	PrismPayload,
	PrismRefsPayload,
	ReturnsPayload,
	SessionResponse,
	SessionState,
	UpsetPayload,
	YearEntry,
} from "./types.js";

export class ApiError extends Error {
	constructor(
		public readonly code: string,
		message: string,
		public readonly status: number,
		public readonly details: Record<string, unknown> = {},
	) {
		super(message);
	}
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface CommunityQuery {
	tauSpearman: number;
	tauPearson: number;
	must?: string[];
	tags?: string[];
	maxSize?: number;
}

export interface DateRange {
	from: string;
	to: string;
}

export class ApiClient {
	constructor(
		private readonly baseUrl: string,
		private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
	) {}

	private async request<T>(path: string, init?: RequestInit): Promise<T> {
		const response = await this.fetchFn(this.baseUrl + path, init);
		const body = await response.json();
		if (!response.ok) {
			const err = body as ApiErrorBody;
			throw new ApiError(err.code ?? "Internal", err.message ?? "request failed", response.status, err.details ?? {});
		}
		return body as T;
	}

	private post<T>(path: string, payload: unknown): Promise<T> {
		return this.request<T>(path, {
			method: "POST",
			headers: { "content-type": "application/json" },
			body: JSON.stringify(payload),
		});
	}

	years(): Promise<YearEntry[]> {
		return this.request("/years");
	}

	distribution(year: number, subjects: string[]): Promise<DistributionResponse> {
		const search = subjects.length ? `?subjects=${encodeURIComponent(subjects.join(","))}` : "";
		return this.request(`/years/${year}/distribution${search}`);
	}

	communities(year: number, query: CommunityQuery): Promise<CommunitiesResponse> {
		const params = new URLSearchParams({
			tau_s: String(query.tauSpearman),
			tau_p: String(query.tauPearson),
		});
		if (query.must?.length) params.set("must", query.must.join(","));
		if (query.tags?.length) params.set("tags", query.tags.join(","));
		if (query.maxSize !== undefined) params.set("max_size", String(query.maxSize));
		return this.request(`/years/${year}/communities?${params}`);
	}

	ego(ticker: string): Promise<EgoResponse> {
		return this.request(`/stocks/${encodeURIComponent(ticker)}/ego`);
	}

	itemCompanies(item: ItemRef): Promise<{ item: ItemRef; companies: string[] }> {
		const path = `/knowledge/items/${item.layer}/${item.attribute}/${encodeURIComponent(item.value)}/companies`;
		return this.request(path);
	}

	createSession(year: number, seeds: string[], config: Record<string, number>): Promise<SessionState> {
		return this.post("/sessions", { year, seeds, config });
	}

	getSession(id: string): Promise<SessionResponse> {
		return this.request(`/sessions/${id}`);
	}

	postOp(id: string, op: Record<string, unknown>): Promise<OpResponse> {
		return this.post(`/sessions/${id}/ops`, op);
	}

	matrix(id: string, range?: DateRange): Promise<MatrixPayload> {
		return this.request(`/sessions/${id}/matrix${rangeQuery(range)}`);
	}

	upset(id: string): Promise<UpsetPayload> {
		return this.request(`/sessions/${id}/upset`);
	}

	returns(id: string, range?: DateRange): Promise<ReturnsPayload> {
		return this.request(`/sessions/${id}/returns${rangeQuery(range)}`);
	}

	prism(a: string, b: string, range: DateRange, minWindow = 5): Promise<PrismPayload> {
		const params = new URLSearchParams({ a, b, from: range.from, to: range.to, min_window: String(minWindow) });
		return this.request(`/prism?${params}`);
	}

	prismRefs(stock: string, other: string, range: DateRange, minWindow = 5): Promise<PrismRefsPayload> {
		const params = new URLSearchParams({
			stock,
			other,
			from: range.from,
			to: range.to,
			min_window: String(minWindow),
		});
		return this.request(`/prism/refs?${params}`);
	}
}

function rangeQuery(range?: DateRange): string {
	if (!range) return "";
	return `?${new URLSearchParams({ from: range.from, to: range.to })}`;
}
