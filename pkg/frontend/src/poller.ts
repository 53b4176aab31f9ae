/** Sequential polling: the next tick is scheduled only after the previous one
 * settles, so slow responses never stack. */

export interface PollHandle {
    stop(): void;
}

export function poll(tick: () => Promise<void>, intervalMs = 2000): PollHandle {
    let active = true;
    let timer: ReturnType<typeof setTimeout> | null = null;

    const loop = async () => {
        if (!active) {
            return;
        }
        try {
            await tick();
        } catch {
            // Network hiccups surface through the UI layer; polling keeps going.
        }
        if (active) {
            timer = setTimeout(loop, intervalMs);
        }
    };
    void loop();

    return {
        stop() {
            active = false;
            if (timer !== null) {
                clearTimeout(timer);
            }
        },
    };
}
