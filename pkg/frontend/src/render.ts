/**
 * Canvas renderer for the unrolled 14,500 px screen strip.
 *
 * Pure function of the latest model: columns of cards, the bright-red
 * highlight, animated position rings, red cursor dots, the shared layout
 * and the prompt band. Prompts render in a fixed band and cards below
 * reflow down rather than being covered.
 */

import type { Card, Snapshot } from "./model.js";

export interface ViewportConfig {
  window: [number, number]; // pixel range of the strip to render
  promptBandV: number;      // center row of the prompt band
  stripWidthPx: number;
  stripHeightPx: number;
  columnsPerSide: number;
}

export const DEFAULT_VIEWPORT: ViewportConfig = {
  window: [0, 14500],
  promptBandV: 480, // 40% of 1200
  stripWidthPx: 14500,
  stripHeightPx: 1200,
  columnsPerSide: 9,
};

const WALL_SPANS: { name: string; lo: number; hi: number }[] = [
  { name: "front", lo: 0, hi: 3954 },
  { name: "right", lo: 3954, hi: 7250 },
  { name: "back", lo: 7250, hi: 11204 },
  { name: "left", lo: 11204, hi: 14500 },
];

function tagColor(tags: string[]): string {
  const text = tags.join(",") || "untagged";
  let h = 0;
  for (let i = 0; i < text.length; i++) {
    h = (h * 31 + text.charCodeAt(i)) % 360;
  }
  return `hsl(${h}, 55%, 55%)`;
}

export class WallRenderer {
  private images = new Map<string, HTMLImageElement>();

  constructor(
    private ctx: CanvasRenderingContext2D,
    private viewport: ViewportConfig = DEFAULT_VIEWPORT,
    private imageBase: string = "/img"
  ) {}

  private sx(u: number): number {
    const [lo, hi] = this.viewport.window;
    return ((u - lo) / (hi - lo)) * this.ctx.canvas.width;
  }

  private sy(v: number): number {
    return (v / this.viewport.stripHeightPx) * this.ctx.canvas.height;
  }

  private image(src: string): HTMLImageElement | null {
    if (typeof Image === "undefined") return null;
    let img = this.images.get(src);
    if (!img) {
      img = new Image();
      img.src = `${this.imageBase}/${src}`;
      this.images.set(src, img);
    }
    return img.complete && img.naturalWidth > 0 ? img : null;
  }

  private drawCard(card: Card, x: number, y: number, w: number, h: number): void {
    const ctx = this.ctx;
    const img = this.image(card.src);
    if (img) {
      ctx.drawImage(img, x, y, w, h);
    } else {
      ctx.fillStyle = tagColor(card.tags);
      ctx.fillRect(x, y, w, h);
      ctx.fillStyle = "#fff";
      ctx.font = `${Math.max(10, h / 6)}px sans-serif`;
      ctx.fillText(card.tags[0] ?? "?", x + 4, y + h / 2, w - 8);
    }
    if (card.sel) {
      ctx.strokeStyle = "#ffd400";
      ctx.lineWidth = 3;
      ctx.strokeRect(x + 1, y + 1, w - 2, h - 2);
    }
  }

  render(model: Snapshot, nowMs: number = Date.now()): void {
    const ctx = this.ctx;
    const W = ctx.canvas.width;
    const H = ctx.canvas.height;
    ctx.fillStyle = "#101018";
    ctx.fillRect(0, 0, W, H);

    this.drawWallSeams();
    this.drawColumns(model);
    this.drawFront(model);
    this.drawRings(model, nowMs);
    this.drawCursors(model);
    this.drawPrompts(model);
  }

  private drawWallSeams(): void {
    const ctx = this.ctx;
    ctx.strokeStyle = "#2a2a3a";
    ctx.fillStyle = "#555";
    ctx.font = "12px sans-serif";
    for (const wall of WALL_SPANS) {
      const x = this.sx(wall.lo);
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, ctx.canvas.height);
      ctx.stroke();
      ctx.fillText(wall.name, x + 6, 14);
    }
  }

  private columnSpan(side: "left" | "right", index: number): [number, number] {
    const wall = WALL_SPANS.find((w) => w.name === side)!;
    const w = (wall.hi - wall.lo) / this.viewport.columnsPerSide;
    return [wall.lo + index * w, wall.lo + (index + 1) * w];
  }

  private highlightedBy(model: Snapshot, side: string, index: number): boolean {
    for (const h of Object.values(model.highlights)) {
      if (h && h[0] === side && h[1] === index) return true;
    }
    return false;
  }

  private promptReflow(model: Snapshot): number {
    return Object.keys(model.prompts).length > 0 ? 90 : 0;
  }

  private drawColumns(model: Snapshot): void {
    const ctx = this.ctx;
    const visible = 4;
    const reflow = this.promptReflow(model);
    for (const side of ["left", "right"] as const) {
      model.columns[side].forEach((col, index) => {
        const [lo, hi] = this.columnSpan(side, index);
        const x = this.sx(lo);
        const w = this.sx(hi) - x;
        const slotH = (this.ctx.canvas.height - this.sy(reflow)) / visible;
        const cards = col.cards.slice(col.scroll, col.scroll + visible);
        cards.forEach((card, slot) => {
          const pad = 6;
          const ch = (slotH - 2 * pad) * Math.min(card.scale, 1.6);
          const y = this.sy(reflow) + slot * slotH + pad;
          this.drawCard(card, x + pad, y, w - 2 * pad, ch);
        });
        if (this.highlightedBy(model, side, index)) {
          ctx.strokeStyle = "#ff2020";
          ctx.lineWidth = 4;
          ctx.strokeRect(x + 2, 2, w - 4, ctx.canvas.height - 4);
        }
      });
    }
  }

  private drawFront(model: Snapshot): void {
    const ctx = this.ctx;
    const part = model.front.partition;
    for (const sid of model.front.order) {
      const span = part.personal[sid];
      if (!span) continue;
      const x = this.sx(span[0]);
      const w = this.sx(span[1]) - x;
      ctx.strokeStyle = "#3a6ea5";
      ctx.strokeRect(x, 0, w, ctx.canvas.height);
      const cards = model.front.personal[sid] ?? [];
      const slotH = ctx.canvas.height / 4;
      cards.slice(0, 4).forEach((card, slot) => {
        this.drawCard(card, x + 4, slot * slotH + 4, w - 8, slotH - 8);
      });
    }
    const shared = model.front.shared;
    for (const text of shared.texts) {
      const [u0, v0, u1, v1] = text.rect;
      const x = this.sx(u0);
      const y = this.sy(v0);
      ctx.fillStyle = "#e8e8f0";
      ctx.fillRect(x, y, this.sx(u1) - x, this.sy(v1) - y);
      ctx.fillStyle = "#202030";
      ctx.font = "bold 14px sans-serif";
      ctx.fillText(text.title, x + 8, y + 20);
      ctx.font = "11px sans-serif";
      ctx.fillText(text.body, x + 8, y + 38, this.sx(u1) - x - 16);
    }
    for (const target of shared.targets) {
      const [u0, v0, u1, v1] = target.rect;
      ctx.setLineDash([8, 6]);
      ctx.strokeStyle = "#8f8";
      ctx.strokeRect(this.sx(u0), this.sy(v0), this.sx(u1) - this.sx(u0), this.sy(v1) - this.sy(v0));
      ctx.setLineDash([]);
    }
    for (const imageId of shared.placed_order) {
      const item = shared.placed[imageId];
      if (!item) continue;
      const w = 90 * item.card.scale;
      const h = 90 * item.card.scale;
      this.drawCard(item.card, this.sx(item.u) - w / 2, this.sy(item.v) - h / 2, w, h);
    }
  }

  private drawRings(model: Snapshot, nowMs: number): void {
    const ctx = this.ctx;
    const baseY = ctx.canvas.height - 16;
    const pulse = 1 + 0.25 * Math.sin(nowMs / 180);
    for (const ring of Object.values(model.rings)) {
      const x = this.sx(ring.u);
      ctx.strokeStyle = ring.active ? "#ff4040" : "#707090";
      for (let i = 0; i < 3; i++) {
        ctx.beginPath();
        ctx.arc(x, baseY, (6 + i * 6) * pulse, 0, Math.PI * 2);
        ctx.stroke();
      }
    }
  }

  private drawCursors(model: Snapshot): void {
    const ctx = this.ctx;
    for (const cursor of Object.values(model.cursors)) {
      ctx.fillStyle = "#ff2020";
      ctx.beginPath();
      ctx.arc(this.sx(cursor.u), this.sy(cursor.v), 6, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  private drawPrompts(model: Snapshot): void {
    const ctx = this.ctx;
    const prompts = Object.values(model.prompts);
    if (prompts.length === 0) return;
    const y = this.sy(this.viewport.promptBandV);
    prompts.forEach((prompt, i) => {
      const text = prompt.text;
      ctx.font = "bold 18px sans-serif";
      const w = ctx.measureText(text).width + 24;
      const x = 40 + i * 60;
      ctx.fillStyle = prompt.style === "error" ? "#803030" : "#204a80";
      ctx.fillRect(x, y + i * 34, w, 28);
      ctx.fillStyle = "#fff";
      ctx.fillText(text, x + 12, y + i * 34 + 20);
    });
  }
}
