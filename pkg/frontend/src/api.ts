/** Typed client for the /v1 run service. All console data comes through here. */

export interface AnnotationItem {
    run_id: string;
    instance_id: string;
    text: string;
    candidate_classes: string[];
    selected_at: number;
    status: string;
}

export interface TrajectoryPoint {
    iteration: number;
    labeled_size: number | null;
    dev_macro_f1: number | null;
}

export interface RunStatus {
    run_id: string;
    phase: string;
    phase_history?: string[];
    error?: string | null;
    pending_count?: number;
    iteration?: number;
    remaining_budget?: number;
    labeled_size?: number;
    class_counts?: Record<string, number>;
    class_count_stddev?: number | null;
    trajectory?: TrajectoryPoint[];
    taxonomy?: string[];
}

export interface RunMetrics {
    iteration: number;
    remaining_budget: number;
    labeled_size: number;
    class_counts: Record<string, number>;
    class_count_stddev: number | null;
    trajectory: TrajectoryPoint[];
    taxonomy: string[];
}

export interface CreateRunRequest {
    config: Record<string, unknown>;
    corpus: { unlabeled: string; bootstrap: string; dev?: string; taxonomy?: string };
    idempotency_key?: string;
}

export interface SubmitResult {
    status: string;
    instance_id: string;
    label: string;
    remaining?: number;
}

export class ApiError extends Error {
    constructor(
        public readonly status: number,
        public readonly detail: string,
    ) {
        super(`HTTP ${status}: ${detail}`);
        this.name = "ApiError";
    }
}

export interface ApiOptions {
    token?: string;
    fetchImpl?: typeof fetch;
}

export class ApiClient {
    private readonly base: string;
    private readonly token?: string;
    private readonly fetchImpl: typeof fetch;

    constructor(baseUrl: string, options: ApiOptions = {}) {
        this.base = baseUrl.replace(/\/+$/, "");
        this.token = options.token;
        this.fetchImpl = options.fetchImpl ?? fetch;
    }

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const headers: Record<string, string> = { "Content-Type": "application/json" };
        if (this.token) {
            headers["Authorization"] = `Bearer ${this.token}`;
        }
        const response = await this.fetchImpl(`${this.base}${path}`, {
            method,
            headers,
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        let payload: unknown = null;
        const text = await response.text();
        if (text) {
            try {
                payload = JSON.parse(text);
            } catch {
                payload = text;
            }
        }
        if (!response.ok) {
            const detail =
                payload && typeof payload === "object" && "detail" in payload
                    ? String((payload as { detail: unknown }).detail)
                    : String(payload ?? response.statusText);
            throw new ApiError(response.status, detail);
        }
        return payload as T;
    }

    createRun(request: CreateRunRequest): Promise<{ run_id: string }> {
        return this.request("POST", "/v1/runs", request);
    }

    getStatus(runId: string): Promise<RunStatus> {
        return this.request("GET", `/v1/runs/${runId}`);
    }

    getQueue(runId: string): Promise<AnnotationItem[]> {
        return this.request("GET", `/v1/runs/${runId}/queue`);
    }

    submitLabel(runId: string, instanceId: string, label: string): Promise<SubmitResult> {
        return this.request("POST", `/v1/runs/${runId}/labels`, { instance_id: instanceId, label });
    }

    getMetrics(runId: string): Promise<RunMetrics> {
        return this.request("GET", `/v1/runs/${runId}/metrics`);
    }

    getEvents(runId: string, tail = 50): Promise<Array<Record<string, unknown>>> {
        return this.request("GET", `/v1/runs/${runId}/events?tail=${tail}`);
    }
}
