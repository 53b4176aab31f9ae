/** View model for the run dashboard. Every number shown is fetched from the
 * service; nothing is recomputed client-side, so the displayed class-count
 * standard deviation is byte-for-byte the /metrics value. */

import { RunMetrics, RunStatus, TrajectoryPoint } from "./api.js";

export interface BarDatum {
    label: string;
    count: number;
    fraction: number;
}

export class DashboardModel {
    phase = "unknown";
    phaseHistory: string[] = [];
    iteration: number | null = null;
    remainingBudget: number | null = null;
    labeledSize: number | null = null;
    bars: BarDatum[] = [];
    /** Raw server value; null means "omit from display". */
    stddev: number | null = null;
    trajectory: TrajectoryPoint[] = [];
    events: Array<Record<string, unknown>> = [];
    error: string | null = null;

    /** Text shown next to the distribution chart; empty string when omitted. */
    get stddevText(): string {
        return this.stddev === null ? "" : String(this.stddev);
    }

    update(status: RunStatus, metrics: RunMetrics | null = null): void {
        this.phase = status.phase;
        this.phaseHistory = status.phase_history ?? this.phaseHistory;
        this.error = status.error ?? null;
        const source = metrics ?? status;
        this.iteration = source.iteration ?? this.iteration;
        this.remainingBudget = source.remaining_budget ?? this.remainingBudget;
        this.labeledSize = source.labeled_size ?? this.labeledSize;
        this.trajectory = source.trajectory ?? this.trajectory;
        const taxonomy = source.taxonomy ?? [];
        const counts = source.class_counts ?? {};
        const total = Object.values(counts).reduce((a, b) => a + b, 0);
        this.bars = taxonomy.map((label) => ({
            label,
            count: counts[label] ?? 0,
            fraction: total > 0 ? (counts[label] ?? 0) / total : 0,
        }));
        this.stddev = source.class_count_stddev ?? null;
    }

    setEvents(events: Array<Record<string, unknown>>): void {
        this.events = events;
    }
}
