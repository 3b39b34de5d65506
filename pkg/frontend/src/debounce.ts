/**
 * Trailing-edge debouncer that also cancels superseded async work, so each
 * panel has at most one request in flight and only the latest result lands.
 */
export class Debouncer<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private generation = 0;
  private pendingResolve: ((value: T | null) => void) | null = null;

  constructor(private readonly delayMs: number) {}

  /**
   * Schedule ``work``; earlier pending schedules are dropped. Superseded
   * calls resolve with null, whether they were still waiting to fire or
   * already awaiting their work.
   */
  schedule(work: () => Promise<T>): Promise<T | null> {
    this.drop();
    const mine = ++this.generation;
    return new Promise((resolve, reject) => {
      this.pendingResolve = resolve;
      this.timer = setTimeout(async () => {
        this.timer = null;
        this.pendingResolve = null;
        try {
          const result = await work();
          resolve(mine === this.generation ? result : null);
        } catch (err) {
          if (mine === this.generation) reject(err);
          else resolve(null);
        }
      }, this.delayMs);
    });
  }

  cancel(): void {
    this.drop();
    this.generation++;
  }

  private drop(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    if (this.pendingResolve !== null) {
      this.pendingResolve(null);
      this.pendingResolve = null;
    }
  }
}
