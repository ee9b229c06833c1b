// The three figure kinds. Each builder returns the SVG scene plus the exact
// rows it drew, as raw CSV tokens, so --dump-data can prove the figures are
// pure pass-throughs of what the estimation run emitted.

import { Bundle, Table, column, hasColumn } from "./bundle.js";
import { BundleError, GridMismatch, MissingColumn } from "./errors.js";
import { Chart, color, extend, freshExtent } from "./svg.js";

export interface Figure {
    svg: string;
    dump: string[];
}

export type Phase = "both" | "forecast" | "analysis";

function quantileColumns(table: Table): string[] {
    const qs = table.columns.filter((c) => c.startsWith("q_"));
    if (qs.length === 0) {
        throw new MissingColumn("q_*", table.file);
    }
    return qs;
}

export function quantileFan(
    bundle: Bundle,
    component: number,
    phase: Phase,
    title?: string,
): Figure {
    const table = bundle.trajectory();
    const qs = quantileColumns(table);
    const timeIdx = table.columns.indexOf("time");
    const phaseIdx = table.columns.indexOf("phase");
    const compIdx = table.columns.indexOf("component");
    if (timeIdx < 0) throw new MissingColumn("time", table.file);
    if (phaseIdx < 0) throw new MissingColumn("phase", table.file);
    if (compIdx < 0) throw new MissingColumn("component", table.file);
    const rows = table.rows.filter(
        (r) =>
            r[compIdx] === String(component) &&
            (phase === "both" || r[phaseIdx] === phase),
    );
    if (rows.length === 0) {
        throw new BundleError(
            `no trajectory rows for component ${component} (phase ${phase}) in ${table.file}`,
        );
    }
    const qIdx = qs.map((q) => table.columns.indexOf(q));
    const dump = [`time,phase,${qs.join(",")}`];
    for (const r of rows) {
        dump.push([r[timeIdx], r[phaseIdx], ...qIdx.map((i) => r[i])].join(","));
    }

    const times = rows.map((r) => Number(r[timeIdx]));
    const series = qIdx.map((i) => rows.map((r) => Number(r[i])));
    const yExt = freshExtent();
    series.forEach((s) => extend(yExt, s));
    const chart = new Chart(
        extend(freshExtent(), times),
        yExt,
        title ?? `${bundle.name}: component ${component} quantile fan`,
        "time",
        `x${component}`,
    );
    // symmetric bands: outermost pair first, then inward; middle level is the median
    const order = qs.map((q, i) => ({ level: Number(q.slice(2)), i }));
    order.sort((a, b) => a.level - b.level);
    let lo = 0;
    let hi = order.length - 1;
    let shade = 0;
    while (lo < hi) {
        chart.band(
            times,
            series[order[lo].i],
            series[order[hi].i],
            color(0),
            0.18 + 0.12 * shade,
        );
        lo += 1;
        hi -= 1;
        shade += 1;
    }
    const medianIdx =
        order.find((o) => Math.abs(o.level - 0.5) < 1e-12)?.i ?? order[lo].i;
    chart.line(times, series[medianIdx], color(0), 2.2);
    chart.legend(`median (${qs[medianIdx]})`, color(0));
    return { svg: chart.render(), dump };
}

export function pdfOverlay(
    bundles: Bundle[],
    step: number | null,
    component: number | null,
    labels: string[],
    title?: string,
): Figure {
    if (bundles.length < 2) {
        throw new BundleError("pdf-overlay needs at least two bundles");
    }
    const tables = bundles.map((b) => b.pdf(step, component));
    for (const t of tables) {
        if (!hasColumn(t, "abscissa")) throw new MissingColumn("abscissa", t.file);
        if (!hasColumn(t, "density")) throw new MissingColumn("density", t.file);
    }
    const grids = tables.map((t) => column(t, "abscissa"));
    for (let i = 1; i < grids.length; i++) {
        if (grids[i].length !== grids[0].length) {
            throw new GridMismatch(
                `${tables[i].file} has ${grids[i].length} points, ${tables[0].file} has ${grids[0].length}`,
            );
        }
        for (let j = 0; j < grids[0].length; j++) {
            if (grids[i][j] !== grids[0][j]) {
                throw new GridMismatch(
                    `abscissa ${j} differs: ${grids[i][j]} vs ${grids[0][j]}`,
                );
            }
        }
    }
    const dump: string[] = [];
    tables.forEach((t, i) => {
        dump.push(`# ${labels[i]} ${t.file}`);
        dump.push("abscissa,density");
        for (const r of t.rows) dump.push(r.join(","));
    });

    const xs = grids[0].map(Number);
    const densities = tables.map((t) => column(t, "density").map(Number));
    const yExt = freshExtent();
    densities.forEach((d) => extend(yExt, d));
    extend(yExt, [0]);
    const chart = new Chart(
        extend(freshExtent(), xs),
        yExt,
        title ?? "posterior density overlay",
        "value",
        "density",
    );
    densities.forEach((d, i) => {
        chart.line(xs, d, color(i), 2.0, i === 0 ? "" : "6,4");
        let mode = 0;
        for (let j = 1; j < d.length; j++) if (d[j] > d[mode]) mode = j;
        chart.cross(xs[mode], d[mode], color(i));
        chart.legend(labels[i], color(i));
    });
    return { svg: chart.render(), dump };
}

export function rmseFigure(bundles: Bundle[], labels: string[], title?: string): Figure {
    const dump: string[] = [];
    const chart_data: Array<{ times: number[]; rmse: number[]; free: number[] }> = [];
    for (let i = 0; i < bundles.length; i++) {
        const table = bundles[i].rmse();
        const times = column(table, "time");
        const rmse = column(table, "rmse_vs_truth");
        const free = column(table, "free_run_rmse");
        dump.push(`# ${labels[i]} ${table.file}`);
        dump.push("time,rmse_vs_truth,free_run_rmse");
        for (let j = 0; j < times.length; j++) {
            dump.push(`${times[j]},${rmse[j]},${free[j]}`);
        }
        chart_data.push({
            times: times.map(Number),
            rmse: rmse.map(Number),
            free: free.map(Number),
        });
    }
    const xExt = freshExtent();
    const yExt = freshExtent();
    for (const d of chart_data) {
        extend(xExt, d.times);
        extend(yExt, d.rmse);
        extend(yExt, d.free);
    }
    extend(yExt, [0]);
    const chart = new Chart(xExt, yExt, title ?? "tracking error", "time", "rmse");
    chart_data.forEach((d, i) => {
        chart.line(d.times, d.rmse, color(i), 2.0);
        chart.legend(`${labels[i]} rmse`, color(i));
        chart.line(d.times, d.free, color(i), 1.2, "4,4");
        chart.legend(`${labels[i]} free run`, color(i));
    });
    return { svg: chart.render(), dump };
}
