/** Browser entry point: wires the API client, queue view, dashboard, and
 * launcher form to the DOM. Keyboard shortcuts 1..n label the focused item. */

import { AnnotationItem, ApiClient } from "./api.js";
import { DashboardModel } from "./dashboard.js";
import { defaultForm, launchRun, LaunchForm, STRATEGIES, validateForm } from "./launcher.js";
import { poll, PollHandle } from "./poller.js";
import { QueueView } from "./queue.js";

const $ = <T extends HTMLElement>(id: string): T => {
    const node = document.getElementById(id);
    if (!node) {
        throw new Error(`missing element #${id}`);
    }
    return node as T;
};

let api: ApiClient | null = null;
let runId: string | null = null;
let queue: QueueView | null = null;
let handle: PollHandle | null = null;
const dashboard = new DashboardModel();

function renderQueue(): void {
    const panel = $("queue-panel");
    if (!queue) {
        panel.innerHTML = "<p>No run attached.</p>";
        return;
    }
    const item = queue.focused;
    if (!item) {
        const phase = dashboard.phase;
        panel.innerHTML =
            phase === "finished"
                ? "<p>Run finished.</p>"
                : `<p>Queue empty; run is <strong>${phase}</strong>&hellip;</p>`;
        return;
    }
    const buttons = item.candidate_classes
        .map(
            (name, index) =>
                `<button class="label-btn" data-label="${name}"><kbd>${index + 1}</kbd> ${name}</button>`,
        )
        .join(" ");
    const notice = queue.notice ? `<p class="notice ${queue.notice.kind}">${queue.notice.text}</p>` : "";
    panel.innerHTML = `
        <p class="progress">${queue.pendingCount} pending (iteration ${item.selected_at})</p>
        <blockquote id="focused-text">${escapeHtml(item.text)}</blockquote>
        <div class="labels">${buttons}</div>
        ${notice}`;
    panel.querySelectorAll<HTMLButtonElement>(".label-btn").forEach((button) => {
        button.addEventListener("click", () => {
            void submitLabel(button.dataset.label!);
        });
    });
}

function renderDashboard(): void {
    const panel = $("dashboard-panel");
    const bars = dashboard.bars
        .map(
            (bar) => `
            <div class="bar-row">
                <span class="bar-label">${bar.label}</span>
                <div class="bar" style="width:${Math.round(bar.fraction * 100)}%"></div>
                <span class="bar-count">${bar.count}</span>
            </div>`,
        )
        .join("");
    const stddev = dashboard.stddevText ? `<p>class-count std-dev: <strong id="stddev">${dashboard.stddevText}</strong></p>` : "";
    const trajectory = dashboard.trajectory
        .filter((point) => point.dev_macro_f1 !== null)
        .map((point) => `<li>iteration ${point.iteration}: dev macro-F1 ${point.dev_macro_f1}</li>`)
        .join("");
    panel.innerHTML = `
        <p>phase <strong>${dashboard.phase}</strong>,
           iteration ${dashboard.iteration ?? "-"},
           remaining budget ${dashboard.remainingBudget ?? "-"},
           labeled ${dashboard.labeledSize ?? "-"}</p>
        ${dashboard.error ? `<p class="notice error">${dashboard.error}</p>` : ""}
        <div class="bars">${bars}</div>
        ${stddev}
        ${trajectory ? `<ul class="trajectory">${trajectory}</ul>` : ""}`;
}

async function submitLabel(label: string): Promise<void> {
    if (!queue) {
        return;
    }
    await queue.labelFocused(label);
    renderQueue();
}

async function refresh(): Promise<void> {
    if (!api || !runId || !queue) {
        return;
    }
    const status = await api.getStatus(runId);
    let metrics = null;
    try {
        metrics = await api.getMetrics(runId);
    } catch {
        // No boundary committed yet.
    }
    dashboard.update(status, metrics);
    const items: AnnotationItem[] = status.phase === "awaiting_labels" ? await api.getQueue(runId) : [];
    queue.sync(items);
    renderQueue();
    renderDashboard();
}

function attach(baseUrl: string, id: string, token: string): void {
    handle?.stop();
    api = new ApiClient(baseUrl, token ? { token } : {});
    runId = id;
    queue = new QueueView((instanceId, label) => api!.submitLabel(runId!, instanceId, label));
    handle = poll(refresh, 2000);
}

function renderLauncher(): void {
    const panel = $("launcher-panel");
    const form = defaultForm();
    const fields: Array<[keyof LaunchForm, string]> = [
        ["budget", "number"],
        ["batch", "number"],
        ["clusters", "number"],
        ["variations", "number"],
        ["seed", "number"],
        ["unlabeled", "text"],
        ["bootstrap", "text"],
        ["dev", "text"],
    ];
    panel.innerHTML = `
        <label>strategy
            <select id="form-strategy">${STRATEGIES.map((s) => `<option ${s === form.strategy ? "selected" : ""}>${s}</option>`).join("")}</select>
        </label>
        ${fields
            .map(
                ([name, kind]) => `
            <label>${name}
                <input id="form-${name}" type="${kind}" value="${form[name]}">
                <span class="field-error" id="error-${name}"></span>
            </label>`,
            )
            .join("")}
        <label><input id="form-mock" type="checkbox" checked> mock LLM</label>
        <button id="form-submit">start run</button>
        <p class="notice error" id="launcher-error"></p>`;
    $("form-submit").addEventListener("click", () => {
        void (async () => {
            const read = (name: string) => ($(`form-${name}`) as HTMLInputElement).value;
            const current: LaunchForm = {
                strategy: ($("form-strategy") as unknown as HTMLSelectElement).value,
                budget: Number(read("budget")),
                batch: Number(read("batch")),
                clusters: Number(read("clusters")),
                variations: Number(read("variations")),
                seed: Number(read("seed")),
                unlabeled: read("unlabeled"),
                bootstrap: read("bootstrap"),
                dev: read("dev"),
                mockLlm: ($("form-mock") as unknown as HTMLInputElement).checked,
            };
            const errors = validateForm(current);
            fields.forEach(([name]) => {
                $(`error-${name}`).textContent = errors[name as string] ?? "";
            });
            if (Object.keys(errors).length > 0) {
                return;
            }
            const baseUrl = ($("service-url") as unknown as HTMLInputElement).value;
            const result = await launchRun(new ApiClient(baseUrl), current);
            $("launcher-error").textContent = result.serverError ?? "";
            if (result.runId) {
                ($("run-id") as unknown as HTMLInputElement).value = result.runId;
                attach(baseUrl, result.runId, "");
            }
        })();
    });
}

function escapeHtml(text: string): string {
    return text.replace(/[&<>"']/g, (c) => `&#${c.charCodeAt(0)};`);
}

export function start(): void {
    renderLauncher();
    renderQueue();
    renderDashboard();
    $("attach-btn").addEventListener("click", () => {
        attach(
            ($("service-url") as unknown as HTMLInputElement).value,
            ($("run-id") as unknown as HTMLInputElement).value,
            ($("auth-token") as unknown as HTMLInputElement).value,
        );
    });
    document.addEventListener("keydown", (event) => {
        const digit = Number(event.key);
        if (queue && Number.isInteger(digit) && digit >= 1) {
            void queue.pressKey(digit).then(() => renderQueue());
        }
    });
}

if (typeof document !== "undefined" && document.getElementById("queue-panel")) {
    start();
}
