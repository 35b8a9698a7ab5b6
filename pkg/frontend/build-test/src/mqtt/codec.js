/**
 * MQTT 3.1.1 packet codec — the subset the unified namespace speaks:
 * CONNECT/CONNACK, PUBLISH/PUBACK (QoS 0/1), SUBSCRIBE/SUBACK,
 * UNSUBSCRIBE/UNSUBACK, PINGREQ/PINGRESP, DISCONNECT.
 */
export const CONNECT = 1;
export const CONNACK = 2;
export const PUBLISH = 3;
export const PUBACK = 4;
export const SUBSCRIBE = 8;
export const SUBACK = 9;
export const UNSUBSCRIBE = 10;
export const UNSUBACK = 11;
export const PINGREQ = 12;
export const PINGRESP = 13;
export const DISCONNECT = 14;
export class ProtocolError extends Error {
}
const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder("utf-8", { fatal: false });
class Writer {
    constructor() {
        this.chunks = [];
    }
    byte(value) {
        this.chunks.push(value & 0xff);
        return this;
    }
    u16(value) {
        this.chunks.push((value >> 8) & 0xff, value & 0xff);
        return this;
    }
    str(text) {
        const raw = textEncoder.encode(text);
        this.u16(raw.length);
        for (const b of raw)
            this.chunks.push(b);
        return this;
    }
    bytes(data) {
        for (const b of data)
            this.chunks.push(b);
        return this;
    }
    packet(typeAndFlags) {
        const body = this.chunks;
        const header = [typeAndFlags];
        let remaining = body.length;
        do {
            let digit = remaining % 128;
            remaining = Math.floor(remaining / 128);
            if (remaining > 0)
                digit |= 0x80;
            header.push(digit);
        } while (remaining > 0);
        return Uint8Array.from([...header, ...body]);
    }
}
export function encode(packet) {
    switch (packet.type) {
        case "connect": {
            const w = new Writer();
            w.str("MQTT").byte(4).byte(0x02).u16(packet.keepAlive).str(packet.clientId);
            return w.packet(CONNECT << 4);
        }
        case "publish": {
            const w = new Writer();
            w.str(packet.topic);
            if (packet.qos > 0) {
                if (packet.packetId === undefined)
                    throw new ProtocolError("QoS 1 needs a packet id");
                w.u16(packet.packetId);
            }
            w.bytes(packet.payload);
            const flags = (packet.dup ? 8 : 0) | (packet.qos << 1) | (packet.retain ? 1 : 0);
            return w.packet((PUBLISH << 4) | flags);
        }
        case "puback":
            return new Writer().u16(packet.packetId).packet(PUBACK << 4);
        case "subscribe": {
            const w = new Writer().u16(packet.packetId);
            for (const [topic, qos] of packet.topics)
                w.str(topic).byte(qos);
            return w.packet((SUBSCRIBE << 4) | 0x02);
        }
        case "unsubscribe": {
            const w = new Writer().u16(packet.packetId);
            for (const topic of packet.topics)
                w.str(topic);
            return w.packet((UNSUBSCRIBE << 4) | 0x02);
        }
        case "pingreq":
            return new Writer().packet(PINGREQ << 4);
        case "pingresp":
            return new Writer().packet(PINGRESP << 4);
        case "disconnect":
            return new Writer().packet(DISCONNECT << 4);
        case "connack":
            return new Writer().byte(packet.sessionPresent ? 1 : 0).byte(packet.returnCode)
                .packet(CONNACK << 4);
        case "suback": {
            const w = new Writer().u16(packet.packetId);
            for (const code of packet.returnCodes)
                w.byte(code);
            return w.packet(SUBACK << 4);
        }
        case "unsuback":
            return new Writer().u16(packet.packetId).packet(UNSUBACK << 4);
    }
}
class Reader {
    constructor(data, offset = 0) {
        this.data = data;
        this.offset = offset;
    }
    get remaining() {
        return this.data.length - this.offset;
    }
    u16() {
        if (this.remaining < 2)
            throw new ProtocolError("truncated integer");
        const value = (this.data[this.offset] << 8) | this.data[this.offset + 1];
        this.offset += 2;
        return value;
    }
    byte() {
        if (this.remaining < 1)
            throw new ProtocolError("truncated byte");
        return this.data[this.offset++];
    }
    str() {
        const length = this.u16();
        if (this.remaining < length)
            throw new ProtocolError("truncated string");
        const raw = this.data.subarray(this.offset, this.offset + length);
        this.offset += length;
        return textDecoder.decode(raw);
    }
    rest() {
        const raw = this.data.subarray(this.offset);
        this.offset = this.data.length;
        return raw;
    }
}
/** Decode one packet from the head of `buffer`; null when incomplete. */
export function decode(buffer) {
    if (buffer.length < 2)
        return null;
    const first = buffer[0];
    const type = first >> 4;
    const flags = first & 0x0f;
    let remaining = 0;
    let multiplier = 1;
    let headerLen = 1;
    for (;;) {
        if (headerLen >= buffer.length)
            return null;
        const digit = buffer[headerLen];
        headerLen += 1;
        remaining += (digit & 0x7f) * multiplier;
        if ((digit & 0x80) === 0)
            break;
        multiplier *= 128;
        if (headerLen > 4)
            throw new ProtocolError("malformed remaining length");
    }
    const total = headerLen + remaining;
    if (buffer.length < total)
        return null;
    const body = buffer.subarray(headerLen, total);
    return { packet: decodeBody(type, flags, body), consumed: total };
}
function decodeBody(type, flags, body) {
    const r = new Reader(body);
    switch (type) {
        case CONNACK: {
            const ack = r.byte();
            return { type: "connack", sessionPresent: (ack & 1) === 1, returnCode: r.byte() };
        }
        case PUBLISH: {
            const qos = (flags >> 1) & 0x03;
            if (qos > 1)
                throw new ProtocolError(`unsupported publish QoS ${qos}`);
            const topic = r.str();
            const packetId = qos > 0 ? r.u16() : undefined;
            return {
                type: "publish",
                topic,
                payload: r.rest(),
                qos: qos,
                retain: (flags & 1) === 1,
                dup: (flags & 8) === 8,
                packetId,
            };
        }
        case PUBACK:
            return { type: "puback", packetId: r.u16() };
        case SUBACK: {
            const packetId = r.u16();
            const codes = [];
            while (r.remaining > 0)
                codes.push(r.byte());
            return { type: "suback", packetId, returnCodes: codes };
        }
        case UNSUBACK:
            return { type: "unsuback", packetId: r.u16() };
        case PINGREQ:
            return { type: "pingreq" };
        case PINGRESP:
            return { type: "pingresp" };
        case DISCONNECT:
            return { type: "disconnect" };
        case CONNECT: {
            const name = r.str();
            const level = r.byte();
            if (name !== "MQTT" || level !== 4)
                throw new ProtocolError("unsupported protocol");
            r.byte(); // connect flags
            const keepAlive = r.u16();
            return { type: "connect", clientId: r.str(), keepAlive };
        }
        case SUBSCRIBE: {
            const packetId = r.u16();
            const topics = [];
            while (r.remaining > 0)
                topics.push([r.str(), r.byte()]);
            return { type: "subscribe", packetId, topics };
        }
        case UNSUBSCRIBE: {
            const packetId = r.u16();
            const topics = [];
            while (r.remaining > 0)
                topics.push(r.str());
            return { type: "unsubscribe", packetId, topics };
        }
        default:
            throw new ProtocolError(`unsupported packet type ${type}`);
    }
}
