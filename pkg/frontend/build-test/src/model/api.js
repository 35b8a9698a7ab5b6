/** Thin client for the twin management HTTP API. */
export class ApiError extends Error {
    constructor(failure) {
        super(failure.message);
        this.failure = failure;
    }
}
export class TwinApi {
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async listTwins() {
        return this.request("GET", "/api/twins");
    }
    async deploy(request) {
        return this.request("POST", "/api/twins", request);
    }
    async start(id) {
        return this.request("POST", `/api/twins/${id}/start`);
    }
    async stop(id) {
        return this.request("POST", `/api/twins/${id}/stop`);
    }
    async undeploy(id) {
        await this.request("DELETE", `/api/twins/${id}`);
    }
    async request(method, path, body) {
        const response = await fetch(this.baseUrl + path, {
            method,
            headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
            body: body !== undefined ? JSON.stringify(body) : undefined,
        });
        if (response.status === 204)
            return undefined;
        const text = await response.text();
        const doc = text ? JSON.parse(text) : null;
        if (!response.ok) {
            throw new ApiError({
                status: response.status,
                code: doc?.code ?? "error",
                message: doc?.message ?? response.statusText,
                diagnostics: doc?.diagnostics,
                cycle: doc?.cycle,
            });
        }
        return doc;
    }
}
