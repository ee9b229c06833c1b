// Minimal SVG scene builder: enough for line charts with shaded bands,
// axes with ticks, markers and a legend. No DOM, no dependencies.

export interface Extent {
    lo: number;
    hi: number;
}

export function extend(ext: Extent, values: number[]): Extent {
    for (const v of values) {
        if (Number.isFinite(v)) {
            if (v < ext.lo) ext.lo = v;
            if (v > ext.hi) ext.hi = v;
        }
    }
    return ext;
}

export function freshExtent(): Extent {
    return { lo: Infinity, hi: -Infinity };
}

function pad(ext: Extent): Extent {
    if (!Number.isFinite(ext.lo) || !Number.isFinite(ext.hi)) return { lo: 0, hi: 1 };
    if (ext.lo === ext.hi) return { lo: ext.lo - 1, hi: ext.hi + 1 };
    const margin = 0.05 * (ext.hi - ext.lo);
    return { lo: ext.lo - margin, hi: ext.hi + margin };
}

function ticks(ext: Extent, count: number): number[] {
    const span = ext.hi - ext.lo;
    const step = Math.pow(10, Math.floor(Math.log10(span / count)));
    const candidates = [step, 2 * step, 5 * step, 10 * step];
    const chosen = candidates.find((s) => span / s <= count) ?? 10 * step;
    const first = Math.ceil(ext.lo / chosen) * chosen;
    const out: number[] = [];
    for (let v = first; v <= ext.hi + 1e-12 * span; v += chosen) {
        out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
    }
    return out;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export function color(i: number): string {
    return PALETTE[i % PALETTE.length];
}

export class Chart {
    readonly width = 720;
    readonly height = 440;
    private readonly left = 64;
    private readonly right = 24;
    private readonly top = 40;
    private readonly bottom = 48;
    private readonly xExt: Extent;
    private readonly yExt: Extent;
    private body: string[] = [];
    private legendEntries: Array<{ label: string; stroke: string }> = [];

    constructor(
        xExt: Extent,
        yExt: Extent,
        private readonly title: string,
        private readonly xLabel: string,
        private readonly yLabel: string,
    ) {
        this.xExt = pad(xExt);
        this.yExt = pad(yExt);
    }

    x(v: number): number {
        const f = (v - this.xExt.lo) / (this.xExt.hi - this.xExt.lo);
        return this.left + f * (this.width - this.left - this.right);
    }

    y(v: number): number {
        const f = (v - this.yExt.lo) / (this.yExt.hi - this.yExt.lo);
        return this.height - this.bottom - f * (this.height - this.top - this.bottom);
    }

    private pts(xs: number[], ys: number[]): string {
        return xs.map((x, i) => `${this.x(x).toFixed(2)},${this.y(ys[i]).toFixed(2)}`).join(" ");
    }

    line(xs: number[], ys: number[], stroke: string, width = 1.8, dash = ""): void {
        const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
        this.body.push(
            `<polyline fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr} points="${this.pts(xs, ys)}"/>`,
        );
    }

    band(xs: number[], lower: number[], upper: number[], fill: string, opacity: number): void {
        const forward = this.pts(xs, upper);
        const backward = this.pts([...xs].reverse(), [...lower].reverse());
        this.body.push(
            `<polygon fill="${fill}" fill-opacity="${opacity}" stroke="none" points="${forward} ${backward}"/>`,
        );
    }

    cross(xv: number, yv: number, stroke: string, size = 6): void {
        const cx = this.x(xv);
        const cy = this.y(yv);
        this.body.push(
            `<g class="mode-marker" stroke="${stroke}" stroke-width="2">` +
                `<line x1="${cx - size}" y1="${cy}" x2="${cx + size}" y2="${cy}"/>` +
                `<line x1="${cx}" y1="${cy - size}" x2="${cx}" y2="${cy + size}"/></g>`,
        );
    }

    legend(label: string, stroke: string): void {
        this.legendEntries.push({ label, stroke });
    }

    render(): string {
        const parts: string[] = [];
        parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
                `viewBox="0 0 ${this.width} ${this.height}" font-family="sans-serif" font-size="12">`,
        );
        parts.push(`<rect width="${this.width}" height="${this.height}" fill="white"/>`);
        const x0 = this.left;
        const x1 = this.width - this.right;
        const y0 = this.height - this.bottom;
        const y1 = this.top;
        for (const t of ticks(this.xExt, 6)) {
            const px = this.x(t);
            parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y1}" stroke="#eee"/>`);
            parts.push(
                `<text x="${px}" y="${y0 + 18}" text-anchor="middle">${formatTick(t)}</text>`,
            );
        }
        for (const t of ticks(this.yExt, 6)) {
            const py = this.y(t);
            parts.push(`<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#eee"/>`);
            parts.push(
                `<text x="${x0 - 6}" y="${py + 4}" text-anchor="end">${formatTick(t)}</text>`,
            );
        }
        parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#333"/>`);
        parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333"/>`);
        parts.push(...this.body);
        parts.push(
            `<text x="${(x0 + x1) / 2}" y="${this.top - 16}" text-anchor="middle" font-size="15">${escapeXml(this.title)}</text>`,
        );
        parts.push(
            `<text x="${(x0 + x1) / 2}" y="${this.height - 12}" text-anchor="middle">${escapeXml(this.xLabel)}</text>`,
        );
        parts.push(
            `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" transform="rotate(-90 16 ${(y0 + y1) / 2})">${escapeXml(this.yLabel)}</text>`,
        );
        this.legendEntries.forEach((entry, i) => {
            const ly = y1 + 14 + 16 * i;
            parts.push(`<line x1="${x1 - 150}" y1="${ly}" x2="${x1 - 122}" y2="${ly}" stroke="${entry.stroke}" stroke-width="2"/>`);
            parts.push(`<text x="${x1 - 116}" y="${ly + 4}">${escapeXml(entry.label)}</text>`);
        });
        parts.push("</svg>");
        return parts.join("\n");
    }
}

function formatTick(v: number): string {
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
    return Number(v.toPrecision(4)).toString();
}

function escapeXml(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
