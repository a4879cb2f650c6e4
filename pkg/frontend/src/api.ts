/** REST side of the wire protocol. fetch is injectable for node tests. */

import type { CandidateJson, SceneJson } from "./protocol.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SessionInfo {
  session: string;
  state: string;
  candidates: CandidateJson[];
  failures: { run: number; reason: string }[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function expectOk(response: Response): Promise<unknown> {
  const body = (await response.json().catch(() => ({}))) as Record<string, any>;
  if (!response.ok) {
    const err = body?.error ?? {};
    throw new ApiError(response.status, err.code ?? "http_error", err.message ?? response.statusText);
  }
  return body;
}

export class ServiceApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async createSession(): Promise<string> {
    const body = (await expectOk(
      await this.fetchImpl(`${this.baseUrl}/sessions`, { method: "POST" }),
    )) as { session_id: string };
    return body.session_id;
  }

  async putScene(sessionId: string, scene: SceneJson): Promise<void> {
    await expectOk(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/scene`, {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(scene),
      }),
    );
  }

  async plan(sessionId: string, k?: number, baseSeed?: number): Promise<void> {
    await expectOk(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/plan`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ k, base_seed: baseSeed }),
      }),
    );
  }

  async confirm(sessionId: string, pathId: number): Promise<void> {
    await expectOk(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/confirm`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ path_id: pathId }),
      }),
    );
  }

  async sessionInfo(sessionId: string): Promise<SessionInfo> {
    return (await expectOk(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`),
    )) as SessionInfo;
  }

  async trajectory(sessionId: string): Promise<unknown> {
    return expectOk(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/trajectory`),
    );
  }
}
