/**
 * Client-side session state with optimistic updates and server reconciliation.
 *
 * Every gesture posts exactly one op carrying a fresh idempotency key; the
 * authoritative state returned by the server replaces the optimistic one.
 * Reloading a page reconstructs the same state from GET /sessions/{id}.
 */

import type { ApiClient } from "./api.js";
import type { ItemRef, SessionMember, SessionState } from "./types.js";

function freshEventId(): string {
	const rand =
		typeof crypto !== "undefined" && "randomUUID" in crypto
			? crypto.randomUUID()
			: Math.random().toString(36).slice(2);
	return `ui-${rand}`;
}

export class SessionStore {
	private constructor(
		private readonly api: ApiClient,
		private state_: SessionState,
	) {}

	static async create(
		api: ApiClient,
		year: number,
		seeds: string[],
		config: Record<string, number>,
	): Promise<SessionStore> {
		return new SessionStore(api, await api.createSession(year, seeds, config));
	}

	/** Reconstruct after a reload: server session state is the single source. */
	static async load(api: ApiClient, id: string): Promise<SessionStore> {
		const response = await api.getSession(id);
		return new SessionStore(api, response.state);
	}

	get state(): SessionState {
		return this.state_;
	}

	get id(): string {
		return this.state_.id;
	}

	get members(): SessionMember[] {
		return this.state_.members;
	}

	get pinnedItems(): ItemRef[] {
		return this.state_.pinned_items;
	}

	private async apply(op: Record<string, unknown>, optimistic: SessionState): Promise<void> {
		const previous = this.state_;
		this.state_ = optimistic;
		try {
			const response = await this.api.postOp(this.state_.id, { ...op, event_id: freshEventId() });
			this.state_ = response.state;
		} catch (error) {
			this.state_ = previous; // reconcile: the server refused the gesture
			throw error;
		}
	}

	async addStock(ticker: string, provenance = "knowledge_added"): Promise<void> {
		const optimistic: SessionState = {
			...this.state_,
			members: [...this.state_.members, { ticker, provenance: provenance as SessionMember["provenance"] }],
		};
		await this.apply({ op: "add", ticker, provenance }, optimistic);
	}

	async removeStock(ticker: string, force = false): Promise<void> {
		const optimistic: SessionState = {
			...this.state_,
			members: this.state_.members.filter((m) => m.ticker !== ticker),
		};
		await this.apply({ op: "remove", ticker, force }, optimistic);
	}

	async pinItem(item: ItemRef): Promise<void> {
		const optimistic: SessionState = {
			...this.state_,
			pinned_items: [...this.state_.pinned_items, item],
		};
		await this.apply({ op: "pin", item }, optimistic);
	}

	async unpinItem(item: ItemRef): Promise<void> {
		const optimistic: SessionState = {
			...this.state_,
			pinned_items: this.state_.pinned_items.filter(
				(p) => !(p.layer === item.layer && p.attribute === item.attribute && p.value === item.value),
			),
		};
		await this.apply({ op: "unpin", item }, optimistic);
	}

	async reorder(order: string[]): Promise<void> {
		await this.apply({ op: "reorder", order }, { ...this.state_, manual_order: order });
	}
}
