// Reading cebayes result bundles. Cell values are kept as the exact strings
// the harness wrote (17 significant digits); numbers are parsed only for
// scaling, never re-emitted, so --dump-data is a strict pass-through.

import fs from "fs";
import path from "path";

import { BundleError, MissingColumn } from "./errors.js";

export interface Table {
    file: string;
    columns: string[];
    rows: string[][];
}

export function readCsv(file: string): Table {
    if (!fs.existsSync(file)) {
        throw new BundleError(`no such file: ${file}`);
    }
    const lines = fs.readFileSync(file, "utf-8").split("\n").filter((l) => l.length > 0);
    if (lines.length === 0) {
        throw new BundleError(`empty file: ${file}`);
    }
    const columns = lines[0].split(",");
    const rows = lines.slice(1).map((l) => l.split(","));
    return { file, columns, rows };
}

export function column(table: Table, name: string): string[] {
    const i = table.columns.indexOf(name);
    if (i < 0) {
        throw new MissingColumn(name, table.file);
    }
    return table.rows.map((r) => r[i]);
}

export function hasColumn(table: Table, name: string): boolean {
    return table.columns.indexOf(name) >= 0;
}

export class Bundle {
    constructor(readonly dir: string) {
        if (!fs.existsSync(path.join(dir, "manifest.json"))) {
            throw new BundleError(`${dir} is not a result bundle (no manifest.json)`);
        }
    }

    get name(): string {
        return path.basename(this.dir);
    }

    manifest(): Record<string, unknown> {
        return JSON.parse(fs.readFileSync(path.join(this.dir, "manifest.json"), "utf-8"));
    }

    trajectory(): Table {
        return readCsv(path.join(this.dir, "trajectory.csv"));
    }

    rmse(): Table {
        return readCsv(path.join(this.dir, "rmse.csv"));
    }

    pdfFiles(): string[] {
        return fs
            .readdirSync(this.dir)
            .filter((f) => /^pdf_\d+_\d+\.csv$/.test(f))
            .sort();
    }

    pdf(step: number | null, component: number | null): Table {
        let name: string;
        if (step === null || component === null) {
            const files = this.pdfFiles();
            if (files.length === 0) {
                throw new BundleError(`${this.dir} has no pdf grids`);
            }
            if (files.length > 1 && (step === null || component === null)) {
                throw new BundleError(
                    `${this.dir} has several pdf grids (${files.join(", ")}); pass --step and --component`,
                );
            }
            name = files[0];
        } else {
            name = `pdf_${step}_${component}.csv`;
        }
        return readCsv(path.join(this.dir, name));
    }
}
