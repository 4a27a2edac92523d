/**
 * Touch-episode classification for the phone trackpad.
 *
 * One finger: quick short contact is a tap (or double tap inside the
 * window); a long still hold is a long tap; a decisive axis-dominant
 * stroke is a directional swipe; a long freeform drag is cursor movement.
 * Two fingers: the spread ratio maps to pinch or zoom outside a small
 * deadband. Anything between the thresholds is ambiguous and dropped --
 * wrongly firing a gesture at a wall-sized screen is worse than asking
 * the user to repeat it.
 */

import type { GestureMsg } from "./wire.js";

export interface RecognizerConfig {
  tapMaxMs: number;
  longTapMinMs: number;
  swipeMinPx: number;
  swipeAxisRatio: number;
  doubleTapWindowMs: number;
  pinchZoomScaleDeadband: number;
  tapTravelMaxPx: number;
}

export const DEFAULT_CONFIG: RecognizerConfig = {
  tapMaxMs: 180,
  longTapMinMs: 500,
  swipeMinPx: 60,
  swipeAxisRatio: 2.0,
  doubleTapWindowMs: 300,
  pinchZoomScaleDeadband: 0.05,
  tapTravelMaxPx: 10,
};

export interface Sample {
  id: number;
  x: number;
  y: number;
  t: number;
}

export interface TouchEpisode {
  samples: Sample[];
  pointerCount: number;
  padW: number;
  padH: number;
}

export type Classification =
  | { kind: "gesture"; gesture: GestureMsg }
  | { kind: "ambiguous"; reason: string };

function span(samples: Sample[]): { dx: number; dy: number; travel: number } {
  const first = samples[0];
  const last = samples[samples.length - 1];
  const dx = last.x - first.x;
  const dy = last.y - first.y;
  return { dx, dy, travel: Math.hypot(dx, dy) };
}

function spread(samples: Sample[], at: "first" | "last"): number | null {
  const ids = [...new Set(samples.map((s) => s.id))];
  if (ids.length < 2) return null;
  const pick = (id: number) => {
    const mine = samples.filter((s) => s.id === id);
    return at === "first" ? mine[0] : mine[mine.length - 1];
  };
  const a = pick(ids[0]);
  const b = pick(ids[1]);
  return Math.hypot(a.x - b.x, a.y - b.y);
}

/**
 * Classify one finished touch episode. ``prevTapEndedAt`` is the end time
 * of the last single tap, used for the double-tap window.
 */
export function classify(
  episode: TouchEpisode,
  config: RecognizerConfig = DEFAULT_CONFIG,
  prevTapEndedAt: number | null = null
): Classification {
  const samples = episode.samples;
  if (samples.length === 0) {
    return { kind: "ambiguous", reason: "empty episode" };
  }
  const duration = samples[samples.length - 1].t - samples[0].t;

  if (episode.pointerCount >= 2) {
    const s0 = spread(samples, "first");
    const s1 = spread(samples, "last");
    if (s0 === null || s1 === null || s0 === 0) {
      return { kind: "ambiguous", reason: "two-finger episode without two tracks" };
    }
    const ratio = s1 / s0;
    if (ratio <= 1 - config.pinchZoomScaleDeadband) {
      return { kind: "gesture", gesture: { gesture: "pinch", scale: ratio } };
    }
    if (ratio >= 1 + config.pinchZoomScaleDeadband) {
      return { kind: "gesture", gesture: { gesture: "zoom", scale: ratio } };
    }
    return { kind: "ambiguous", reason: "scale inside deadband" };
  }

  const { dx, dy, travel } = span(samples);

  if (travel <= config.tapTravelMaxPx) {
    if (duration <= config.tapMaxMs) {
      const isDouble =
        prevTapEndedAt !== null &&
        samples[0].t - prevTapEndedAt <= config.doubleTapWindowMs;
      return {
        kind: "gesture",
        gesture: { gesture: isDouble ? "double_tap" : "tap" },
      };
    }
    if (duration >= config.longTapMinMs) {
      return { kind: "gesture", gesture: { gesture: "long_tap" } };
    }
    return { kind: "ambiguous", reason: "held between tap and long-tap windows" };
  }

  if (travel < config.swipeMinPx) {
    return { kind: "ambiguous", reason: "travel between tap and swipe thresholds" };
  }

  const ax = Math.abs(dx);
  const ay = Math.abs(dy);
  if (ax >= ay * config.swipeAxisRatio) {
    return {
      kind: "gesture",
      gesture: { gesture: dx > 0 ? "swipe_right" : "swipe_left" },
    };
  }
  if (ay >= ax * config.swipeAxisRatio) {
    return {
      kind: "gesture",
      gesture: { gesture: dy > 0 ? "swipe_down" : "swipe_up" },
    };
  }
  // long freeform drag: cursor movement, deltas normalized to the pad size
  const clamp = (v: number) => Math.max(-1, Math.min(1, v));
  return {
    kind: "gesture",
    gesture: {
      gesture: "move",
      dx: clamp(dx / episode.padW),
      dy: clamp(dy / episode.padH),
    },
  };
}

/**
 * Stateful wrapper owning the double-tap window and the dropped counter
 * surfaced in the pad's debug overlay.
 */
export class GestureRecognizer {
  private lastTapEndedAt: number | null = null;
  dropped = 0;

  constructor(private config: RecognizerConfig = DEFAULT_CONFIG) {}

  push(episode: TouchEpisode): GestureMsg | null {
    const result = classify(episode, this.config, this.lastTapEndedAt);
    if (result.kind === "ambiguous") {
      this.dropped += 1;
      return null;
    }
    const gesture = result.gesture;
    if (gesture.gesture === "tap") {
      this.lastTapEndedAt = episode.samples[episode.samples.length - 1].t;
    } else {
      this.lastTapEndedAt = null;
    }
    return gesture;
  }
}

/** Live move deltas while a drag is in progress (cursor streaming). */
export function moveDelta(
  prev: Sample,
  next: Sample,
  padW: number,
  padH: number
): { dx: number; dy: number } {
  const clamp = (v: number) => Math.max(-1, Math.min(1, v));
  return { dx: clamp((next.x - prev.x) / padW), dy: clamp((next.y - prev.y) / padH) };
}
