/**
 * Dashboard wiring: live namespace tree on the left, leaf detail with
 * sparkline and setpoint entry in the middle, twin lifecycle on the right.
 *
 * The UI is a pure client of the MQTT and HTTP contracts: every value it
 * renders arrived on the wire, every action is a publish or an API call.
 */
import { MqttSession, webSocketTransport } from "./mqtt/client.js";
import { ApiError, TwinApi } from "./model/api.js";
import { NamespaceTree, sparklinePoints } from "./model/tree.js";
const params = new URLSearchParams(location.search);
const WS_URL = params.get("ws")
    ?? `ws://${location.hostname || "127.0.0.1"}:${params.get("wsPort") ?? "9001"}/`;
const tree = new NamespaceTree();
const api = new TwinApi("");
let session = null;
let selectedTopic = null;
let renderedVersion = -1;
let lastRenderedSecond = 0;
const el = {
    banner: must("banner"),
    tree: must("tree"),
    detail: must("detail"),
    twins: must("twins"),
    deployForm: must("deploy-form"),
    deployError: must("deploy-error"),
};
function must(id) {
    const found = document.getElementById(id);
    if (!found)
        throw new Error(`missing #${id}`);
    return found;
}
// ---------------------------------------------------------------------------
// connection
async function connectLoop() {
    let backoffMs = 500;
    for (;;) {
        setBanner("connecting…", "warn");
        try {
            const transport = await webSocketTransport(WS_URL);
            session = new MqttSession(transport);
            const closed = new Promise((resolve) => {
                session.onClose = () => resolve();
            });
            session.onPublish = (event) => {
                tree.apply(event.topic, event.payload, Date.now());
            };
            await session.connect();
            await session.subscribe("uns/#", 1);
            setBanner(`live · ${WS_URL}`, "ok");
            backoffMs = 500;
            await closed;
            setBanner("connection lost", "error");
            tree.clear();
        }
        catch {
            setBanner(`cannot reach ${WS_URL}`, "error");
        }
        await sleep(backoffMs);
        backoffMs = Math.min(backoffMs * 2, 10000);
    }
}
function setBanner(text, kind) {
    el.banner.textContent = text;
    el.banner.className = `banner ${kind}`;
}
const sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));
// ---------------------------------------------------------------------------
// namespace tree rendering (throttled to animation frames)
function renderFrame() {
    const second = Math.floor(Date.now() / 1000);
    tree.expirePending(Date.now());
    if (tree.version !== renderedVersion || second !== lastRenderedSecond) {
        renderedVersion = tree.version;
        lastRenderedSecond = second;
        renderTree();
        renderDetail();
    }
    requestAnimationFrame(renderFrame);
}
function renderTree() {
    el.tree.replaceChildren(buildList(tree.root));
}
function buildList(node) {
    const ul = document.createElement("ul");
    const children = [...node.children.values()].sort((a, b) => a.segment.localeCompare(b.segment));
    for (const child of children) {
        const li = document.createElement("li");
        const label = document.createElement("span");
        label.className = "segment";
        label.textContent = child.segment;
        li.appendChild(label);
        if (child.leaf) {
            label.classList.add("leaf");
            if (child.topic === selectedTopic)
                label.classList.add("selected");
            const value = document.createElement("span");
            value.className = "value";
            value.textContent = formatValue(child.leaf.lastValue);
            if (child.leaf.pendingWrite !== null)
                value.classList.add("pending");
            if (tree.isStale(child, Date.now())) {
                value.classList.add("stale");
                value.title = "no data recently";
            }
            li.appendChild(value);
            label.onclick = () => {
                selectedTopic = child.topic;
                renderedVersion = -1; // force redraw
            };
        }
        if (child.children.size > 0)
            li.appendChild(buildList(child));
        ul.appendChild(li);
    }
    return ul;
}
function formatValue(v) {
    if (typeof v === "number") {
        return Math.abs(v) >= 1e6 || (v !== 0 && Math.abs(v) < 1e-4)
            ? v.toExponential(4)
            : String(Math.round(v * 1e6) / 1e6);
    }
    return String(v);
}
// ---------------------------------------------------------------------------
// detail pane
function renderDetail() {
    if (selectedTopic === null) {
        el.detail.replaceChildren(paragraph("Select a variable to inspect it."));
        return;
    }
    const node = tree.find(selectedTopic);
    if (!node?.leaf) {
        el.detail.replaceChildren(paragraph(`${selectedTopic} is gone.`));
        return;
    }
    const leaf = node.leaf;
    const heading = document.createElement("h3");
    heading.textContent = node.topic;
    const current = document.createElement("p");
    current.innerHTML = `value <strong>${formatValue(leaf.lastValue)}</strong>`
        + ` at t=${leaf.lastSimTime.toFixed(3)} s`
        + (leaf.pendingWrite !== null ? ' <em class="pending">(write pending)</em>' : "");
    const canvas = document.createElement("canvas");
    canvas.width = 360;
    canvas.height = 90;
    canvas.className = "sparkline";
    drawSparkline(canvas, node);
    const form = document.createElement("form");
    form.className = "setpoint";
    const input = document.createElement("input");
    input.placeholder = "new value (number, true/false, or text)";
    const button = document.createElement("button");
    button.textContent = "write";
    const note = document.createElement("span");
    note.className = "note";
    form.append(input, button, note);
    form.onsubmit = (event) => {
        event.preventDefault();
        const value = parseSetpoint(input.value);
        if (value === undefined) {
            note.textContent = "cannot parse that";
            return;
        }
        writeSetpoint(node.topic, value, note);
    };
    el.detail.replaceChildren(heading, current, canvas, form);
}
function parseSetpoint(text) {
    const trimmed = text.trim();
    if (trimmed === "")
        return undefined;
    if (trimmed === "true")
        return true;
    if (trimmed === "false")
        return false;
    const asNumber = Number(trimmed);
    if (!Number.isNaN(asNumber))
        return asNumber;
    return trimmed;
}
function writeSetpoint(topic, value, note) {
    if (!session) {
        note.textContent = "not connected";
        return;
    }
    tree.markPending(topic, value, Date.now());
    session
        .publish(`${topic}/set`, JSON.stringify({ v: value }), 1)
        .then(() => {
        note.textContent = "sent";
    })
        .catch((err) => {
        note.textContent = `publish failed: ${err.message}`;
    });
}
function drawSparkline(canvas, node) {
    const ctx = canvas.getContext("2d");
    if (!ctx || !node.leaf)
        return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const points = sparklinePoints(node.leaf.history.toArray(), canvas.width, canvas.height);
    if (points.length === 0)
        return;
    ctx.strokeStyle = "#2f81f7";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(points[0][0], points[0][1]);
    for (const [x, y] of points.slice(1))
        ctx.lineTo(x, y);
    ctx.stroke();
}
function paragraph(text) {
    const p = document.createElement("p");
    p.textContent = text;
    return p;
}
// ---------------------------------------------------------------------------
// lifecycle panel (1 Hz poll)
async function pollTwins() {
    for (;;) {
        try {
            renderTwins(await api.listTwins());
        }
        catch {
            el.twins.replaceChildren(paragraph("management API unreachable"));
        }
        await sleep(1000);
    }
}
function renderTwins(twins) {
    const table = document.createElement("table");
    const head = table.insertRow();
    for (const title of ["id", "class", "state", "t [s]", "overruns", ""]) {
        const th = document.createElement("th");
        th.textContent = title;
        head.appendChild(th);
    }
    for (const twin of twins) {
        const row = table.insertRow();
        row.insertCell().textContent = twin.id;
        row.insertCell().textContent = twin.rootClass;
        const state = row.insertCell();
        state.textContent = twin.state;
        state.className = `state-${twin.state}`;
        row.insertCell().textContent = twin.simTime.toFixed(2);
        row.insertCell().textContent = String(twin.overruns);
        const actions = row.insertCell();
        if (twin.state === "running") {
            actions.appendChild(actionButton("stop", () => api.stop(twin.id)));
        }
        else {
            actions.appendChild(actionButton("start", () => api.start(twin.id)));
            actions.appendChild(actionButton("undeploy", () => api.undeploy(twin.id)));
        }
    }
    if (twins.length === 0) {
        el.twins.replaceChildren(paragraph("no twins deployed"));
    }
    else {
        el.twins.replaceChildren(table);
    }
}
function actionButton(label, action) {
    const button = document.createElement("button");
    button.textContent = label;
    button.onclick = () => {
        button.disabled = true;
        action()
            .catch((err) => setBanner(err.message, "error"))
            .finally(() => (button.disabled = false));
    };
    return button;
}
function wireDeployForm() {
    el.deployForm.onsubmit = (event) => {
        event.preventDefault();
        const data = new FormData(el.deployForm);
        el.deployError.textContent = "";
        api
            .deploy({
            id: String(data.get("id") ?? ""),
            rootClass: String(data.get("rootClass") ?? ""),
            stepSize: Number(data.get("stepSize") ?? 0.01),
            rtFactor: Number(data.get("rtFactor") ?? 1),
            publishEvery: Number(data.get("publishEvery") ?? 1),
        })
            .then(() => el.deployForm.reset())
            .catch((err) => {
            if (err instanceof ApiError) {
                const lines = [err.failure.message];
                for (const d of err.failure.diagnostics ?? []) {
                    lines.push(`${d.code}: ${d.message}`);
                }
                if (err.failure.cycle?.length) {
                    lines.push(`algebraic loop: ${err.failure.cycle.join(", ")}`);
                }
                el.deployError.textContent = lines.join("\n");
            }
            else {
                el.deployError.textContent = String(err);
            }
        });
    };
}
wireDeployForm();
requestAnimationFrame(renderFrame);
void connectLoop();
void pollTwins();
