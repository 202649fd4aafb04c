/** Trailing-edge debounce with latest-wins semantics.
 *
 * Rapid calls coalesce: at most one downstream call per `intervalMs`,
 * always carrying the most recent value. The service renders on a CPU,
 * so the UI must never queue more than one request.
 */

export type Scheduler = (fn: () => void, ms: number) => unknown;

export class LatestWins<T> {
  private pending: T | undefined;
  private timerArmed = false;
  private lastFire = -Infinity;

  constructor(
    private readonly sink: (value: T) => void,
    private readonly intervalMs = 100,
    private readonly now: () => number = () => Date.now(),
    private readonly schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {}

  push(value: T): void {
    this.pending = value;
    if (this.timerArmed) return;
    const wait = Math.max(0, this.lastFire + this.intervalMs - this.now());
    this.timerArmed = true;
    this.schedule(() => this.fire(), wait);
  }

  private fire(): void {
    this.timerArmed = false;
    if (this.pending === undefined) return;
    const value = this.pending;
    this.pending = undefined;
    this.lastFire = this.now();
    this.sink(value);
  }
}
