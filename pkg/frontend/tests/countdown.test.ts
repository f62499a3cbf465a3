import { describe, expect, it } from "vitest";

import { formatCountdown, remainingSeconds } from "../src/countdown.js";

describe("remainingSeconds", () => {
  it("counts down toward the ready-at timestamp", () => {
    expect(remainingSeconds(1200, 0)).toBe(1200);
    expect(remainingSeconds(1200, 600_000)).toBe(600);
  });

  it("clamps at zero once the deadline passes", () => {
    expect(remainingSeconds(10, 11_000)).toBe(0);
  });
});

describe("formatCountdown", () => {
  it("renders the case-study activation delay as 20:00", () => {
    expect(formatCountdown(1200)).toBe("20:00");
  });

  it("rounds part seconds up so the display never under-promises", () => {
    expect(formatCountdown(59.2)).toBe("01:00");
    expect(formatCountdown(0.4)).toBe("00:01");
  });

  it("switches to an hour field for long delays", () => {
    expect(formatCountdown(3661)).toBe("1:01:01");
  });

  it("shows zero flat", () => {
    expect(formatCountdown(0)).toBe("00:00");
  });
});
