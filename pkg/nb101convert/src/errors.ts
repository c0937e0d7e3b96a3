/** The archive file cannot be opened or its framing is corrupt. */
export class UnreadableArchive extends Error {
    constructor(message: string) {
        super(message);
        this.name = 'UnreadableArchive';
    }
}

/** An operation label that maps to none of the five known op tokens. */
export class UnknownOpToken extends Error {
    constructor(message: string) {
        super(message);
        this.name = 'UnknownOpToken';
    }
}

/** A structurally invalid record: bad payload, matrix, or cell. */
export class SchemaError extends Error {
    constructor(message: string) {
        super(message);
        this.name = 'SchemaError';
    }
}
