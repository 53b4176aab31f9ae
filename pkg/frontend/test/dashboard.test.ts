import { describe, expect, it } from "vitest";

import { RunMetrics, RunStatus } from "../src/api.js";
import { DashboardModel } from "../src/dashboard.js";

const TAXONOMY = ["Self-Harm", "Medical-Advice", "Legal-Advice", "Financial-Advice", "Emergency-Situation", "Not-Harmful"];

function status(overrides: Partial<RunStatus> = {}): RunStatus {
    return { run_id: "r", phase: "awaiting_labels", ...overrides };
}

function metrics(overrides: Partial<RunMetrics> = {}): RunMetrics {
    return {
        iteration: 2,
        remaining_budget: 60,
        labeled_size: 300,
        class_counts: Object.fromEntries(TAXONOMY.map((c, i) => [c, i * 10])),
        class_count_stddev: 41.42460138233387,
        trajectory: [],
        taxonomy: TAXONOMY,
        ...overrides,
    };
}

describe("DashboardModel", () => {
    it("renders bars in taxonomy order from server counts", () => {
        const model = new DashboardModel();
        model.update(status(), metrics());
        expect(model.bars.map((bar) => bar.label)).toEqual(TAXONOMY);
        expect(model.bars.map((bar) => bar.count)).toEqual([0, 10, 20, 30, 40, 50]);
        expect(model.bars[5].fraction).toBeCloseTo(50 / 150, 12);
    });

    it("shows the server stddev verbatim, never a recomputation", () => {
        const model = new DashboardModel();
        // Deliberately inconsistent: these counts do NOT have this stddev.
        // The dashboard must display the server's number anyway.
        const served = metrics({ class_count_stddev: 123.456000000789 });
        model.update(status(), served);
        expect(model.stddev).toBe(123.456000000789);
        expect(model.stddevText).toBe(String(served.class_count_stddev));
    });

    it("omits the stddev when the server sends null (fresh run)", () => {
        const model = new DashboardModel();
        model.update(
            status({ iteration: 0 }),
            metrics({ class_counts: Object.fromEntries(TAXONOMY.map((c) => [c, 0])), class_count_stddev: null }),
        );
        expect(model.bars.every((bar) => bar.count === 0)).toBe(true);
        expect(model.stddev).toBeNull();
        expect(model.stddevText).toBe("");
    });

    it("falls back to status fields when metrics are unavailable", () => {
        const model = new DashboardModel();
        model.update(
            status({ iteration: 1, remaining_budget: 80, class_counts: { "Self-Harm": 3 }, taxonomy: ["Self-Harm"], class_count_stddev: 0 }),
            null,
        );
        expect(model.iteration).toBe(1);
        expect(model.remainingBudget).toBe(80);
        expect(model.bars).toEqual([{ label: "Self-Harm", count: 3, fraction: 1 }]);
        expect(model.stddevText).toBe("0");
    });

    it("keeps the live phase and error banner", () => {
        const model = new DashboardModel();
        model.update(status({ phase: "failed", error: "boom" }), null);
        expect(model.phase).toBe("failed");
        expect(model.error).toBe("boom");
    });
});
