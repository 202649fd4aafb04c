/** Drops frames that arrive out of order: displayed ids only increase. */

export class FrameGate {
  private lastShown = -Infinity;

  /** Returns true when the frame should be displayed. */
  accept(frameId: number): boolean {
    if (frameId <= this.lastShown) return false;
    this.lastShown = frameId;
    return true;
  }

  get last(): number {
    return this.lastShown;
  }
}
