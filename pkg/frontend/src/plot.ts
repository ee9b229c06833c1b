#!/usr/bin/env node
// CLI: plot <kind> <bundle>... [--component i] [--step s] [--phase p]
//            [--out file.svg] [--dump-data] [--labels a,b] [--title t]
//
// Kinds: quantile-fan | pdf-overlay | rmse. Figures are rendered as SVG;
// --dump-data prints the exact plotted arrays (verbatim bundle CSV values)
// so the output can be checked without image comparison.

import fs from "fs";
import path from "path";

import { Bundle } from "./bundle.js";
import { Figure, Phase, pdfOverlay, quantileFan, rmseFigure } from "./figures.js";

const KINDS = ["quantile-fan", "pdf-overlay", "rmse"] as const;

interface Args {
    kind: string;
    bundles: string[];
    component: number | null;
    step: number | null;
    phase: Phase;
    out: string | null;
    dumpData: boolean;
    labels: string[] | null;
    title: string | null;
}

function usage(): string {
    return (
        "usage: plot <quantile-fan|pdf-overlay|rmse> <bundle>... " +
        "[--component i] [--step s] [--phase both|forecast|analysis] " +
        "[--out file.svg] [--dump-data] [--labels a,b] [--title t]"
    );
}

export function parseArgs(argv: string[]): Args {
    const args: Args = {
        kind: "",
        bundles: [],
        component: null,
        step: null,
        phase: "both",
        out: null,
        dumpData: false,
        labels: null,
        title: null,
    };
    const positional: string[] = [];
    let i = 0;
    const next = (flag: string): string => {
        i += 1;
        if (i >= argv.length) throw new Error(`${flag} needs a value`);
        return argv[i];
    };
    for (; i < argv.length; i++) {
        const a = argv[i];
        if (a === "--component") args.component = Number(next(a));
        else if (a === "--step") args.step = Number(next(a));
        else if (a === "--phase") args.phase = next(a) as Phase;
        else if (a === "--out") args.out = next(a);
        else if (a === "--dump-data") args.dumpData = true;
        else if (a === "--labels") args.labels = next(a).split(",");
        else if (a === "--title") args.title = next(a);
        else if (a.startsWith("--")) throw new Error(`unknown flag ${a}\n${usage()}`);
        else positional.push(a);
    }
    if (positional.length < 2) throw new Error(usage());
    args.kind = positional[0];
    args.bundles = positional.slice(1);
    if (!KINDS.includes(args.kind as (typeof KINDS)[number])) {
        throw new Error(`unknown figure kind ${args.kind}\n${usage()}`);
    }
    if (!["both", "forecast", "analysis"].includes(args.phase)) {
        throw new Error(`unknown phase ${args.phase}`);
    }
    if (!args.out && !args.dumpData) {
        throw new Error("nothing to do: pass --out and/or --dump-data");
    }
    return args;
}

export function makeFigure(args: Args): Figure {
    const bundles = args.bundles.map((d) => new Bundle(d));
    const labels =
        args.labels && args.labels.length === bundles.length
            ? args.labels
            : bundles.map((b) => b.name);
    if (args.kind === "quantile-fan") {
        if (bundles.length !== 1) throw new Error("quantile-fan takes exactly one bundle");
        return quantileFan(bundles[0], args.component ?? 0, args.phase, args.title ?? undefined);
    }
    if (args.kind === "pdf-overlay") {
        return pdfOverlay(bundles, args.step, args.component, labels, args.title ?? undefined);
    }
    return rmseFigure(bundles, labels, args.title ?? undefined);
}

export function main(argv: string[]): number {
    let args: Args;
    try {
        args = parseArgs(argv);
    } catch (err) {
        process.stderr.write(`${(err as Error).message}\n`);
        return 2;
    }
    try {
        const figure = makeFigure(args);
        if (args.dumpData) {
            process.stdout.write(figure.dump.join("\n") + "\n");
        }
        if (args.out) {
            fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
            fs.writeFileSync(args.out, figure.svg);
            if (!args.dumpData) {
                process.stderr.write(`wrote ${args.out}\n`);
            }
        }
        return 0;
    } catch (err) {
        const e = err as Error;
        process.stderr.write(`${e.name}: ${e.message}\n`);
        return 1;
    }
}

const invokedDirectly =
    process.argv[1] && path.resolve(process.argv[1]) === new URL(import.meta.url).pathname;
if (invokedDirectly) {
    process.exit(main(process.argv.slice(2)));
}
