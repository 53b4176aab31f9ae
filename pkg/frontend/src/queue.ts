/** Queue state for the labeling flow: one focused item, keyboard-first labeling,
 * optimistic removal with rollback on server rejection. */

import { AnnotationItem, ApiError, SubmitResult } from "./api.js";

export type SubmitFn = (instanceId: string, label: string) => Promise<SubmitResult>;

export interface QueueNotice {
    kind: "conflict" | "error" | "info";
    text: string;
}

export class QueueView {
    items: AnnotationItem[] = [];
    focusIndex = 0;
    notice: QueueNotice | null = null;

    private readonly inFlight = new Set<string>();
    private readonly settled = new Set<string>();

    constructor(private readonly submit: SubmitFn) {}

    /** Replace items with a fresh server snapshot, keeping local progress:
     * items already labeled (or mid-submission) stay hidden. Instance ids are
     * unique within a run, so settled ids never collide across iterations. */
    sync(serverItems: AnnotationItem[]): void {
        this.items = serverItems.filter(
            (item) => !this.settled.has(item.instance_id) && !this.inFlight.has(item.instance_id),
        );
        if (this.focusIndex >= this.items.length) {
            this.focusIndex = Math.max(0, this.items.length - 1);
        }
    }

    get focused(): AnnotationItem | null {
        return this.items[this.focusIndex] ?? null;
    }

    get pendingCount(): number {
        return this.items.length;
    }

    /** Taxonomy class bound to a digit key (1..n), from the focused item. */
    classForKey(digit: number): string | null {
        const item = this.focused;
        if (!item || digit < 1 || digit > item.candidate_classes.length) {
            return null;
        }
        return item.candidate_classes[digit - 1];
    }

    async pressKey(digit: number): Promise<boolean> {
        const label = this.classForKey(digit);
        if (label === null) {
            return false;
        }
        return this.labelFocused(label);
    }

    /** Optimistically remove the focused item and submit its label.
     * A 409/422 restores the item at its position with the server's message. */
    async labelFocused(label: string): Promise<boolean> {
        const item = this.focused;
        if (!item || this.inFlight.has(item.instance_id)) {
            return false;
        }
        const position = this.focusIndex;
        this.inFlight.add(item.instance_id);
        this.items = this.items.filter((candidate) => candidate.instance_id !== item.instance_id);
        if (this.focusIndex >= this.items.length) {
            this.focusIndex = Math.max(0, this.items.length - 1);
        }
        this.notice = null;
        try {
            await this.submit(item.instance_id, label);
            this.settled.add(item.instance_id);
            return true;
        } catch (error) {
            this.items.splice(Math.min(position, this.items.length), 0, item);
            this.focusIndex = this.items.indexOf(item);
            if (error instanceof ApiError && error.status === 409) {
                this.notice = { kind: "conflict", text: error.detail };
            } else if (error instanceof ApiError) {
                this.notice = { kind: "error", text: error.detail };
            } else {
                this.notice = { kind: "error", text: String(error) };
            }
            return false;
        } finally {
            this.inFlight.delete(item.instance_id);
        }
    }

    focusNext(): void {
        if (this.items.length > 0) {
            this.focusIndex = (this.focusIndex + 1) % this.items.length;
        }
    }

    focusPrevious(): void {
        if (this.items.length > 0) {
            this.focusIndex = (this.focusIndex - 1 + this.items.length) % this.items.length;
        }
    }
}
