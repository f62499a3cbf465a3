/** Countdown math for pending activations.

The display is cosmetic: reaching zero never flips a chip. Only the
pending-to-active transition event from the service resolves it. */

export function remainingSeconds(readyAtS: number, nowMs: number): number {
  return Math.max(0, readyAtS - nowMs / 1000);
}

export function formatCountdown(seconds: number): string {
  const total = Math.ceil(seconds);
  const h = Math.floor(total / 3600);
  const m = Math.floor((total % 3600) / 60);
  const s = total % 60;
  const mm = String(m).padStart(2, "0");
  const ss = String(s).padStart(2, "0");
  return h > 0 ? `${h}:${mm}:${ss}` : `${mm}:${ss}`;
}
