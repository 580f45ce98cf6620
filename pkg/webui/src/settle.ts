/** Debounce helper: `poke()` restarts the timer; `fn` fires once per settle. */
export interface Settle {
  poke(): void;
  cancel(): void;
}

export function createSettle(delayMs: number, fn: () => void): Settle {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return {
    poke() {
      if (timer !== null) clearTimeout(timer);
      timer = setTimeout(() => {
        timer = null;
        fn();
      }, delayMs);
    },
    cancel() {
      if (timer !== null) clearTimeout(timer);
      timer = null;
    },
  };
}

/** At most one in-flight operation; a newer run aborts and supersedes the
 * older one, whose result resolves to undefined instead of landing. */
export class LatestWins {
  private ctrl: AbortController | null = null;
  private seq = 0;

  async run<T>(op: (signal: AbortSignal) => Promise<T>): Promise<T | undefined> {
    this.ctrl?.abort();
    const ctrl = new AbortController();
    this.ctrl = ctrl;
    const ticket = ++this.seq;
    try {
      const out = await op(ctrl.signal);
      return ticket === this.seq ? out : undefined;
    } catch (err) {
      if (ctrl.signal.aborted) return undefined;
      throw err;
    }
  }
}
