import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { SessionStore } from "../src/session.js";
import type { ItemRef } from "../src/types.js";
import { MockSessionServer } from "./mockServer.js";

const seed = JSON.parse(
	readFileSync(new URL("../fixtures/session_seed.json", import.meta.url), "utf-8"),
) as {
	year: number;
	members: { ticker: string; provenance: string }[];
	available: string[];
	pinnable_item: ItemRef;
};

function makeServer(): MockSessionServer {
	const members = seed.members.map((m) => [m.ticker, m.provenance] as [string, string]);
	const known = new Set([...seed.members.map((m) => m.ticker), ...seed.available]);
	return new MockSessionServer(members, known, [seed.pinnable_item]);
}

describe("session gestures round-trip through the API", () => {
	it("add, pin, remove, reorder all post ops and reconcile", async () => {
		const server = makeServer();
		const api = new ApiClient("http://mock", server.fetch);
		const session = await SessionStore.create(api, seed.year, [seed.members[0].ticker], {});

		const newcomer = seed.available[0];
		await session.addStock(newcomer);
		expect(session.members.map((m) => m.ticker)).toContain(newcomer);

		await session.pinItem(seed.pinnable_item);
		expect(session.pinnedItems).toHaveLength(1);

		const removable = session.members.find((m) => m.provenance !== "must_have")!;
		await session.removeStock(removable.ticker);
		expect(session.members.map((m) => m.ticker)).not.toContain(removable.ticker);

		const order = [...session.members.map((m) => m.ticker)].reverse();
		await session.reorder(order);
		expect(session.state.manual_order).toEqual(order);

		// one op per gesture: create + 4 events in the server log
		const stored = server.sessions.get(session.id)!;
		expect(stored.events.map((e) => e.op)).toEqual(["create", "add", "pin", "remove", "reorder"]);
	});

	it("state survives a page reload byte-for-byte", async () => {
		const server = makeServer();
		const api = new ApiClient("http://mock", server.fetch);
		const session = await SessionStore.create(api, seed.year, [seed.members[0].ticker], {});
		await session.addStock(seed.available[1]);
		await session.pinItem(seed.pinnable_item);
		const before = JSON.stringify(session.state);

		// a reload constructs a brand-new store from the server alone
		const reloaded = await SessionStore.load(new ApiClient("http://mock", server.fetch), session.id);
		expect(JSON.stringify(reloaded.state)).toBe(before);
	});

	it("rolls the optimistic update back when the server refuses", async () => {
		const server = makeServer();
		const api = new ApiClient("http://mock", server.fetch);
		const session = await SessionStore.create(api, seed.year, [seed.members[0].ticker], {});
		const existing = session.members[0].ticker;
		const before = JSON.stringify(session.state);
		await expect(session.addStock(existing)).rejects.toThrowError(ApiError);
		expect(JSON.stringify(session.state)).toBe(before);
	});

	it("must-have members refuse removal without force", async () => {
		const server = makeServer();
		const api = new ApiClient("http://mock", server.fetch);
		const session = await SessionStore.create(api, seed.year, [seed.members[0].ticker], {});
		const protectedMember = seed.members.find((m) => m.provenance === "must_have")!;
		await expect(session.removeStock(protectedMember.ticker)).rejects.toMatchObject({
			code: "MustHaveProtected",
		});
		await session.removeStock(protectedMember.ticker, true);
		expect(session.members.map((m) => m.ticker)).not.toContain(protectedMember.ticker);
	});

	it("ignores duplicate idempotency keys server-side", async () => {
		const server = makeServer();
		const api = new ApiClient("http://mock", server.fetch);
		const session = await SessionStore.create(api, seed.year, [seed.members[0].ticker], {});
		const direct = await api.postOp(session.id, {
			op: "add",
			ticker: seed.available[2],
			event_id: "fixed-key",
		});
		expect(direct.applied).toBe(true);
		const retry = await api.postOp(session.id, {
			op: "add",
			ticker: seed.available[2],
			event_id: "fixed-key",
		});
		expect(retry.applied).toBe(false);
		const count = retry.state.members.filter((m) => m.ticker === seed.available[2]).length;
		expect(count).toBe(1);
	});
});
