export class MissingColumn extends Error {
    constructor(column: string, file: string) {
        super(`missing column ${column} in ${file}`);
        this.name = "MissingColumn";
    }
}

export class GridMismatch extends Error {
    constructor(detail: string) {
        super(`pdf grids differ: ${detail}`);
        this.name = "GridMismatch";
    }
}

export class BundleError extends Error {
    constructor(detail: string) {
        super(detail);
        this.name = "BundleError";
    }
}
