/**
 * Minimal MQTT 3.1.1 session over a pluggable byte transport.
 *
 * In the browser the transport is a binary WebSocket (subprotocol "mqtt");
 * tests drive the same state machine with a scripted fake transport.
 */
import { Packet, ProtocolError, decode, encode } from "./codec.js";

export interface Transport {
  send(data: Uint8Array): void;
  close(): void;
  onMessage: ((data: Uint8Array) => void) | null;
  onClose: (() => void) | null;
}

export interface PublishEvent {
  topic: string;
  payload: Uint8Array;
  retain: boolean;
}

export interface SessionOptions {
  clientId?: string;
  keepAliveSeconds?: number;
  /** injected clock/timers so tests stay deterministic */
  setInterval?: typeof setInterval;
  clearInterval?: typeof clearInterval;
}

type Pending = { resolve: () => void; reject: (err: Error) => void };

export class MqttSession {
  private buffer = new Uint8Array(0);
  private nextPacketId = 0;
  private pending = new Map<string, Pending>();
  private pingTimer: ReturnType<typeof setInterval> | null = null;
  private connackResolve: Pending | null = null;
  private closed = false;

  onPublish: ((event: PublishEvent) => void) | null = null;
  onClose: (() => void) | null = null;

  constructor(private transport: Transport, private options: SessionOptions = {}) {
    transport.onMessage = (data) => this.feed(data);
    transport.onClose = () => this.handleClose();
  }

  connect(): Promise<void> {
    const clientId =
      this.options.clientId ?? `dash-${Math.random().toString(36).slice(2, 10)}`;
    const keepAlive = this.options.keepAliveSeconds ?? 30;
    // the waiter registers first: a fake transport may answer synchronously
    const acknowledged = new Promise<void>((resolve, reject) => {
      this.connackResolve = { resolve, reject };
    });
    this.transport.send(encode({ type: "connect", clientId, keepAlive }));
    if (keepAlive > 0) {
      const schedule = this.options.setInterval ?? setInterval;
      this.pingTimer = schedule(() => {
        if (!this.closed) this.transport.send(encode({ type: "pingreq" }));
      }, (keepAlive * 1000) / 2);
    }
    return acknowledged;
  }

  subscribe(filter: string, qos: 0 | 1 = 0): Promise<void> {
    const packetId = this.claimId();
    const acknowledged = this.await("suback", packetId);
    this.transport.send(
      encode({ type: "subscribe", packetId, topics: [[filter, qos]] }),
    );
    return acknowledged;
  }

  publish(topic: string, payload: Uint8Array | string, qos: 0 | 1 = 0): Promise<void> {
    const raw = typeof payload === "string" ? new TextEncoder().encode(payload) : payload;
    if (qos === 0) {
      this.transport.send(
        encode({ type: "publish", topic, payload: raw, qos, retain: false, dup: false }),
      );
      return Promise.resolve();
    }
    const packetId = this.claimId();
    const acknowledged = this.await("puback", packetId);
    this.transport.send(
      encode({ type: "publish", topic, payload: raw, qos, retain: false, dup: false, packetId }),
    );
    return acknowledged;
  }

  disconnect(): void {
    if (!this.closed) {
      try {
        this.transport.send(encode({ type: "disconnect" }));
      } catch {
        // transport already dead: closing is all that matters
      }
    }
    this.transport.close();
    this.handleClose();
  }

  private claimId(): number {
    this.nextPacketId = (this.nextPacketId % 0xffff) + 1;
    return this.nextPacketId;
  }

  private await(kind: string, packetId: number): Promise<void> {
    return new Promise((resolve, reject) => {
      this.pending.set(`${kind}:${packetId}`, { resolve, reject });
    });
  }

  private settle(kind: string, packetId: number): void {
    const entry = this.pending.get(`${kind}:${packetId}`);
    if (entry) {
      this.pending.delete(`${kind}:${packetId}`);
      entry.resolve();
    }
  }

  private feed(data: Uint8Array): void {
    const merged = new Uint8Array(this.buffer.length + data.length);
    merged.set(this.buffer);
    merged.set(data, this.buffer.length);
    this.buffer = merged;
    for (;;) {
      let result: { packet: Packet; consumed: number } | null;
      try {
        result = decode(this.buffer);
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.disconnect();
          return;
        }
        throw err;
      }
      if (result === null) return;
      this.buffer = this.buffer.subarray(result.consumed);
      this.dispatch(result.packet);
    }
  }

  private dispatch(packet: Packet): void {
    switch (packet.type) {
      case "connack":
        if (this.connackResolve) {
          const waiter = this.connackResolve;
          this.connackResolve = null;
          if (packet.returnCode === 0) waiter.resolve();
          else waiter.reject(new Error(`connection refused (code ${packet.returnCode})`));
        }
        return;
      case "publish":
        if (packet.qos === 1 && packet.packetId !== undefined) {
          this.transport.send(encode({ type: "puback", packetId: packet.packetId }));
        }
        this.onPublish?.({ topic: packet.topic, payload: packet.payload, retain: packet.retain });
        return;
      case "suback":
        this.settle("suback", packet.packetId);
        return;
      case "unsuback":
        this.settle("unsuback", packet.packetId);
        return;
      case "puback":
        this.settle("puback", packet.packetId);
        return;
      case "pingresp":
      case "pingreq":
        return;
      default:
        return;
    }
  }

  private handleClose(): void {
    if (this.closed) return;
    this.closed = true;
    if (this.pingTimer !== null) {
      (this.options.clearInterval ?? clearInterval)(this.pingTimer);
      this.pingTimer = null;
    }
    const error = new Error("connection closed");
    this.connackResolve?.reject(error);
    this.connackResolve = null;
    for (const entry of this.pending.values()) entry.reject(error);
    this.pending.clear();
    this.onClose?.();
  }
}

/** Browser transport: MQTT frames in binary WebSocket messages. */
export function webSocketTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url, ["mqtt"]);
    ws.binaryType = "arraybuffer";
    const transport: Transport = {
      send: (data) => ws.send(data),
      close: () => ws.close(),
      onMessage: null,
      onClose: null,
    };
    ws.onopen = () => resolve(transport);
    ws.onerror = () => reject(new Error(`cannot open ${url}`));
    ws.onmessage = (event) => {
      if (event.data instanceof ArrayBuffer) {
        transport.onMessage?.(new Uint8Array(event.data));
      }
    };
    ws.onclose = () => transport.onClose?.();
  });
}
