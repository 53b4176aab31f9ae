/** Run launcher: form defaults, client-side validation mirroring the service's
 * config schema, and submission. */

import { ApiClient, ApiError, CreateRunRequest } from "./api.js";

export interface LaunchForm {
    strategy: string;
    budget: number;
    batch: number;
    clusters: number;
    variations: number;
    seed: number;
    unlabeled: string;
    bootstrap: string;
    dev: string;
    mockLlm: boolean;
}

export const STRATEGIES = ["random", "topn", "coreset", "cluster_al"] as const;

export function defaultForm(): LaunchForm {
    return {
        strategy: "cluster_al",
        budget: 100,
        batch: 20,
        clusters: 20,
        variations: 5,
        seed: 0,
        unlabeled: "",
        bootstrap: "",
        dev: "",
        mockLlm: true,
    };
}

/** Field name -> message; empty object means the form may be submitted. */
export function validateForm(form: LaunchForm): Record<string, string> {
    const errors: Record<string, string> = {};
    if (!STRATEGIES.includes(form.strategy as (typeof STRATEGIES)[number])) {
        errors.strategy = `strategy must be one of ${STRATEGIES.join(", ")}`;
    }
    if (!Number.isInteger(form.budget) || form.budget < 1) {
        errors.budget = "budget must be a positive integer";
    }
    if (!Number.isInteger(form.batch) || form.batch < 1) {
        errors.batch = "batch must be a positive integer";
    } else if (Number.isInteger(form.budget) && form.batch > form.budget) {
        errors.batch = "batch must not exceed budget";
    }
    if (!Number.isInteger(form.clusters) || form.clusters < 1) {
        errors.clusters = "clusters must be a positive integer";
    }
    if (!Number.isInteger(form.variations) || form.variations < 0) {
        errors.variations = "variations must be zero or more";
    }
    if (!Number.isInteger(form.seed) || form.seed < 0) {
        errors.seed = "seed must be a non-negative integer";
    }
    if (!form.unlabeled.trim()) {
        errors.unlabeled = "unlabeled corpus path is required";
    }
    if (!form.bootstrap.trim()) {
        errors.bootstrap = "bootstrap split path is required";
    }
    return errors;
}

export function toCreateRequest(form: LaunchForm): CreateRunRequest {
    return {
        config: {
            strategy: form.strategy,
            budget: form.budget,
            batch: form.batch,
            clusters: form.clusters,
            variations: form.variations,
            seed: form.seed,
            llm: { mock: form.mockLlm },
        },
        corpus: {
            unlabeled: form.unlabeled,
            bootstrap: form.bootstrap,
            ...(form.dev.trim() ? { dev: form.dev } : {}),
        },
    };
}

export interface LaunchResult {
    runId?: string;
    fieldErrors: Record<string, string>;
    serverError?: string;
}

/** Validate locally first; only a clean form reaches the service. Server-side
 * 422s come back as a banner message rather than a thrown error. */
export async function launchRun(api: ApiClient, form: LaunchForm): Promise<LaunchResult> {
    const fieldErrors = validateForm(form);
    if (Object.keys(fieldErrors).length > 0) {
        return { fieldErrors };
    }
    try {
        const created = await api.createRun(toCreateRequest(form));
        return { runId: created.run_id, fieldErrors: {} };
    } catch (error) {
        if (error instanceof ApiError) {
            return { fieldErrors: {}, serverError: error.detail };
        }
        throw error;
    }
}
