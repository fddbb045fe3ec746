/**
 * Looping frame players for the comparison view. One shared clock drives
 * every tile so both groups stay in lockstep; rendering is plain canvas.
 */
import type { FramesDoc } from "./schemas.js";

export class PlaybackClock {
  private frame = 0;
  private maxLength = 1;
  private listeners: Array<(frame: number) => void> = [];
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly fps = 10) {}

  setMaxLength(length: number): void {
    this.maxLength = Math.max(1, length);
  }

  get current(): number {
    return this.frame;
  }

  subscribe(listener: (frame: number) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  tick(): void {
    this.frame = (this.frame + 1) % this.maxLength;
    for (const listener of this.listeners) listener(this.frame);
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.tick(), 1000 / this.fps);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  doc: FramesDoc,
  frameIndex: number,
  size: number,
): void {
  ctx.clearRect(0, 0, size, size);
  const frame = doc.frames[frameIndex % doc.frames.length];
  if (doc.env === "gridworld") {
    const cell = size / 8;
    ctx.strokeStyle = "#ccc";
    for (let i = 0; i <= 8; i++) {
      ctx.beginPath();
      ctx.moveTo(i * cell, 0);
      ctx.lineTo(i * cell, size);
      ctx.stroke();
      ctx.beginPath();
      ctx.moveTo(0, i * cell);
      ctx.lineTo(size, i * cell);
      ctx.stroke();
    }
    const grid = frame as { agent: [number, number]; goal: [number, number] };
    ctx.fillStyle = "#f9a825";
    ctx.fillRect(grid.goal[0] * cell, (7 - grid.goal[1]) * cell, cell, cell);
    ctx.fillStyle = "#1565c0";
    ctx.beginPath();
    ctx.arc(
      (grid.agent[0] + 0.5) * cell,
      (7 - grid.agent[1] + 0.5) * cell,
      cell * 0.35,
      0,
      2 * Math.PI,
    );
    ctx.fill();
    return;
  }
  // mountaincar: hill profile plus the car position
  const car = frame as { x: number; height: number };
  const toScreenX = (x: number) => ((x + 1.2) / 1.8) * size;
  const toScreenY = (h: number) => size - h * size * 0.8 - size * 0.1;
  ctx.strokeStyle = "#666";
  ctx.beginPath();
  for (let i = 0; i <= 60; i++) {
    const x = -1.2 + (1.8 * i) / 60;
    const h = Math.sin(3 * x) * 0.45 + 0.55;
    const sx = toScreenX(x);
    const sy = toScreenY(h);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  }
  ctx.stroke();
  ctx.fillStyle = "#c62828";
  ctx.beginPath();
  ctx.arc(toScreenX(car.x), toScreenY(car.height) - 5, 5, 0, 2 * Math.PI);
  ctx.fill();
}
