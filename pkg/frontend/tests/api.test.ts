import { describe, expect, it } from "vitest";

import { ApiError, SessionClient } from "../src/api.js";

function fakeFetch(handler: (url: string, init?: RequestInit) => { status: number; body: unknown }) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const { status, body } = handler(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { fetchFn, calls };
}

describe("SessionClient", () => {
  it("hits the documented endpoints with JSON bodies", async () => {
    const { fetchFn, calls } = fakeFetch((url) => {
      if (url.endsWith("/sessions")) {
        return {
          status: 201,
          body: {
            session_id: "abc",
            status: "awaiting_labels",
            rounds_budget: 4,
            round: { round_index: 0, token: "t0", suggestions: [], preview: [], elapsed_ms: 1 },
          },
        };
      }
      return { status: 200, body: [] };
    });
    const client = new SessionClient("http://svc:1234///", fetchFn);
    await client.listDatasets();
    const created = await client.createSession("bench", "probe-01", { rounds: 2 });
    expect(created.session_id).toBe("abc");
    expect(calls[0]?.url).toBe("http://svc:1234/datasets");
    expect(calls[1]?.url).toBe("http://svc:1234/sessions");
    const body = JSON.parse(String(calls[1]?.init?.body));
    expect(body).toEqual({ dataset: "bench", probe: "probe-01", params: { rounds: 2 } });
  });

  it("submits labels against the session path with the round token", async () => {
    const { fetchFn, calls } = fakeFetch(() => ({
      status: 200,
      body: { session_id: "abc", status: "finished", final_ranking: ["x"] },
    }));
    const client = new SessionClient("http://svc", fetchFn);
    const result = await client.submitLabels("abc", "t0", { g1: "relevant" });
    expect(result.final_ranking).toEqual(["x"]);
    expect(calls[0]?.url).toBe("http://svc/sessions/abc/labels");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      token: "t0",
      labels: { g1: "relevant" },
    });
  });

  it("maps service errors to ApiError with code and status", async () => {
    const { fetchFn } = fakeFetch(() => ({
      status: 409,
      body: { code: "stale_token", message: "token does not match" },
    }));
    const client = new SessionClient("http://svc", fetchFn);
    const error = await client.getSession("abc").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(409);
    expect(error.code).toBe("stale_token");
    expect(error.isStaleToken).toBe(true);
  });

  it("tolerates non-JSON error bodies", async () => {
    const fetchFn = async (): Promise<Response> =>
      new Response("boom", { status: 500, headers: { "content-type": "text/plain" } });
    const client = new SessionClient("http://svc", fetchFn);
    const error = await client.health().catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(500);
    expect(error.code).toBe("unknown");
  });
});
