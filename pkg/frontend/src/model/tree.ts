/**
 * Live model of the unified namespace: a tree of topic segments whose leaves
 * remember the latest sample plus a bounded history for sparklines.
 */

export const SPARKLINE_CAPACITY = 300;

export interface Sample {
  t: number; // simulation seconds
  v: number | boolean | string;
  wallMs: number; // arrival time, for staleness
}

export class RingBuffer {
  private items: Sample[] = [];

  constructor(readonly capacity: number = SPARKLINE_CAPACITY) {}

  push(sample: Sample): void {
    this.items.push(sample);
    if (this.items.length > this.capacity) {
      this.items.splice(0, this.items.length - this.capacity);
    }
  }

  toArray(): Sample[] {
    return this.items.slice();
  }

  get length(): number {
    return this.items.length;
  }

  last(): Sample | undefined {
    return this.items[this.items.length - 1];
  }
}

export interface LeafState {
  lastValue: number | boolean | string;
  lastSimTime: number;
  lastArrivalMs: number;
  intervalMs: number | null; // observed publish period
  history: RingBuffer;
  pendingWrite: { value: number | boolean | string; sentMs: number } | null;
}

export class TreeNode {
  children = new Map<string, TreeNode>();
  leaf: LeafState | null = null;

  constructor(readonly segment: string, readonly topic: string) {}
}

export class NamespaceTree {
  root = new TreeNode("", "");
  version = 0; // bumped on every change so rendering can cheaply detect staleness

  /** Apply one UNS message. Empty payloads delete (retained-clear). */
  apply(topic: string, payload: Uint8Array, nowMs: number): void {
    if (payload.length === 0) {
      this.remove(topic);
      return;
    }
    let doc: unknown;
    try {
      doc = JSON.parse(new TextDecoder().decode(payload));
    } catch {
      return; // foreign payloads are not ours to render
    }
    const body = doc as { t?: unknown; v?: unknown };
    const simTime = typeof body.t === "number" ? body.t : 0;
    const value = body.v as number | boolean | string;
    if (value === undefined || value === null || typeof value === "object") return;

    const node = this.ensure(topic);
    if (node.leaf === null) {
      node.leaf = {
        lastValue: value,
        lastSimTime: simTime,
        lastArrivalMs: nowMs,
        intervalMs: null,
        history: new RingBuffer(),
        pendingWrite: null,
      };
    } else {
      const gap = nowMs - node.leaf.lastArrivalMs;
      node.leaf.intervalMs = node.leaf.intervalMs === null
        ? gap
        : 0.7 * node.leaf.intervalMs + 0.3 * gap;
      node.leaf.lastValue = value;
      node.leaf.lastSimTime = simTime;
      node.leaf.lastArrivalMs = nowMs;
      if (node.leaf.pendingWrite !== null && value === node.leaf.pendingWrite.value) {
        node.leaf.pendingWrite = null;
      }
    }
    node.leaf.history.push({ t: simTime, v: value, wallMs: nowMs });
    this.version += 1;
  }

  markPending(topic: string, value: number | boolean | string, nowMs: number): void {
    const node = this.find(topic);
    if (node?.leaf) {
      node.leaf.pendingWrite = { value, sentMs: nowMs };
      this.version += 1;
    }
  }

  /** Pending flags expire after two seconds without confirmation. */
  expirePending(nowMs: number): void {
    for (const node of this.leaves()) {
      const pending = node.leaf!.pendingWrite;
      if (pending !== null && nowMs - pending.sentMs > 2000) {
        node.leaf!.pendingWrite = null;
        this.version += 1;
      }
    }
  }

  /** A leaf is stale when no sample arrived for 5x its publish period. */
  isStale(node: TreeNode, nowMs: number): boolean {
    if (!node.leaf) return false;
    const interval = node.leaf.intervalMs ?? 400;
    const limit = Math.max(2000, 5 * interval);
    return nowMs - node.leaf.lastArrivalMs > limit;
  }

  ensure(topic: string): TreeNode {
    let node = this.root;
    let path = "";
    for (const segment of topic.split("/")) {
      path = path === "" ? segment : `${path}/${segment}`;
      let child = node.children.get(segment);
      if (!child) {
        child = new TreeNode(segment, path);
        node.children.set(segment, child);
        this.version += 1;
      }
      node = child;
    }
    return node;
  }

  find(topic: string): TreeNode | null {
    let node = this.root;
    for (const segment of topic.split("/")) {
      const child = node.children.get(segment);
      if (!child) return null;
      node = child;
    }
    return node;
  }

  remove(topic: string): void {
    const segments = topic.split("/");
    const chain: TreeNode[] = [this.root];
    for (const segment of segments) {
      const next = chain[chain.length - 1].children.get(segment);
      if (!next) return;
      chain.push(next);
    }
    chain[chain.length - 1].leaf = null;
    for (let i = chain.length - 1; i > 0; i--) {
      const node = chain[i];
      if (node.leaf === null && node.children.size === 0) {
        chain[i - 1].children.delete(node.segment);
      }
    }
    this.version += 1;
  }

  *leaves(): Generator<TreeNode> {
    function* walk(node: TreeNode): Generator<TreeNode> {
      if (node.leaf) yield node;
      for (const child of node.children.values()) yield* walk(child);
    }
    yield* walk(this.root);
  }

  clear(): void {
    this.root = new TreeNode("", "");
    this.version += 1;
  }
}

/** Points of a sparkline polyline for numeric history, scaled to w x h. */
export function sparklinePoints(
  samples: Sample[],
  width: number,
  height: number,
): Array<[number, number]> {
  const numeric = samples.filter((s) => typeof s.v === "number") as Array<Sample & { v: number }>;
  if (numeric.length === 0) return [];
  if (numeric.length === 1) return [[width - 1, height / 2]];
  let min = Infinity;
  let max = -Infinity;
  for (const s of numeric) {
    min = Math.min(min, s.v);
    max = Math.max(max, s.v);
  }
  const span = max - min || 1;
  const step = (width - 2) / (numeric.length - 1);
  return numeric.map((s, i) => {
    const x = 1 + i * step;
    const y = height - 2 - ((s.v - min) / span) * (height - 4);
    return [x, y] as [number, number];
  });
}
