/**
 * Streaming conversion from the benchmark archive to the renas JSONL
 * store schema.
 *
 * Each archive record is a JSON array
 *   [module_hash, epoch_budget, raw_adjacency, raw_operations, metrics_b64]
 * holding one training repeat of one architecture at one epoch budget.
 * Repeats are averaged, the requested budget selected, cells mapped to
 * canonical form and deduplicated, and one JSONL line emitted per
 * unique architecture.
 */

import * as fs from 'fs';

import { CONV1X1, CONV3X3, INPUT, MAXPOOL3X3, OP_TOKENS, OUTPUT, cellId, validate } from './cell';
import { SchemaError, UnknownOpToken } from './errors';
import { decodeModelMetrics } from './metricsProto';
import { readRecords } from './tfrecord';

/** Raw operation labels used by the archive, mapped to op ids. */
export const ARCHIVE_OPS: ReadonlyMap<string, number> = new Map([
    ['input', INPUT],
    ['conv3x3-bn-relu', CONV3X3],
    ['conv1x1-bn-relu', CONV1X1],
    ['maxpool3x3', MAXPOOL3X3],
    ['output', OUTPUT],
]);

export interface ConvertOptions {
    input: string;
    output: string;
    /** Epoch budget to select; omitted = each architecture's longest. */
    epochs?: number;
}

export interface ConvertManifest {
    input: string;
    output: string;
    epochs: number | 'max';
    scanned: number;
    converted: number;
    skipped: number;
    skipReasons: Record<string, number>;
}

interface Accumulator {
    adjacency: string;
    operations: string;
    budgets: Map<number, { sumVal: number; sumTest: number; count: number }>;
}

function parseRow(payload: Buffer): {
    hash: string;
    epochs: number;
    adjacency: string;
    operations: string;
    metrics: Buffer;
} {
    let row: unknown;
    try {
        row = JSON.parse(payload.toString('utf8'));
    } catch (err) {
        throw new SchemaError(`record payload is not JSON: ${(err as Error).message}`);
    }
    if (!Array.isArray(row) || row.length !== 5) {
        throw new SchemaError('record payload is not a 5-element array');
    }
    const [hash, epochs, adjacency, operations, metricsB64] = row;
    if (
        typeof hash !== 'string' ||
        typeof epochs !== 'number' ||
        typeof adjacency !== 'string' ||
        typeof operations !== 'string' ||
        typeof metricsB64 !== 'string'
    ) {
        throw new SchemaError('record payload fields have wrong types');
    }
    return { hash, epochs, adjacency, operations, metrics: Buffer.from(metricsB64, 'base64') };
}

function buildCell(adjacency: string, operations: string): { adj: number[][]; ops: number[] } {
    const ops: number[] = [];
    for (const label of operations.split(',')) {
        const op = ARCHIVE_OPS.get(label.trim());
        if (op === undefined) {
            throw new UnknownOpToken(`unrecognized operation label '${label.trim()}'`);
        }
        ops.push(op);
    }
    const n = ops.length;
    if (adjacency.length !== n * n) {
        throw new SchemaError(`adjacency has ${adjacency.length} entries for ${n} nodes`);
    }
    const adj: number[][] = [];
    for (let i = 0; i < n; i++) {
        const row: number[] = [];
        for (let j = 0; j < n; j++) {
            const ch = adjacency[i * n + j];
            if (ch !== '0' && ch !== '1') {
                throw new SchemaError(`adjacency character '${ch}' is not 0/1`);
            }
            row.push(ch === '1' ? 1 : 0);
        }
        adj.push(row);
    }
    return { adj, ops };
}

/** One emitted store line, with keys in sorted order. */
function storeLine(
    id: string,
    n: number,
    adj: number[][],
    ops: number[],
    valAcc: number,
    testAcc: number,
): string {
    return JSON.stringify({
        adj: adj.map((row) => row.join('')),
        id,
        n,
        ops: ops.map((op) => OP_TOKENS.get(op)),
        source: 'real',
        test_acc: testAcc,
        val_acc: valAcc,
    });
}

/**
 * Convert an archive to a JSONL store, writing a manifest alongside.
 *
 * The manifest counts architectures (groups of repeat rows), plus any
 * rows too malformed to attribute to one; converted + skipped always
 * equals scanned.
 */
export function convert(options: ConvertOptions): ConvertManifest {
    const modules = new Map<string, Accumulator>();
    const skipReasons: Record<string, number> = {};
    const skip = (reason: string) => {
        skipReasons[reason] = (skipReasons[reason] ?? 0) + 1;
    };
    let malformedRows = 0;

    for (const payload of readRecords(options.input)) {
        let hash: string;
        let epochs: number;
        let adjacency: string;
        let operations: string;
        let finalVal: number;
        let finalTest: number;
        try {
            const row = parseRow(payload);
            const metrics = decodeModelMetrics(row.metrics);
            if (metrics.evaluationData.length === 0) {
                throw new SchemaError('metrics hold no evaluation data');
            }
            const final = metrics.evaluationData[metrics.evaluationData.length - 1];
            hash = row.hash;
            epochs = row.epochs;
            adjacency = row.adjacency;
            operations = row.operations;
            finalVal = final.validationAccuracy;
            finalTest = final.testAccuracy;
        } catch (err) {
            if (err instanceof SchemaError) {
                malformedRows += 1;
                skip('malformed-row');
                continue;
            }
            throw err;
        }
        let acc = modules.get(hash);
        if (acc === undefined) {
            acc = { adjacency, operations, budgets: new Map() };
            modules.set(hash, acc);
        }
        let bucket = acc.budgets.get(epochs);
        if (bucket === undefined) {
            bucket = { sumVal: 0, sumTest: 0, count: 0 };
            acc.budgets.set(epochs, bucket);
        }
        bucket.sumVal += finalVal;
        bucket.sumTest += finalTest;
        bucket.count += 1;
    }

    const lines: { id: string; line: string }[] = [];
    const seen = new Set<string>();
    for (const acc of modules.values()) {
        let budget: number;
        if (options.epochs !== undefined) {
            if (!acc.budgets.has(options.epochs)) {
                skip('missing-epochs');
                continue;
            }
            budget = options.epochs;
        } else {
            budget = Math.max(...acc.budgets.keys());
        }
        const bucket = acc.budgets.get(budget)!;
        const valAcc = bucket.sumVal / bucket.count;
        const testAcc = bucket.sumTest / bucket.count;
        if (!(valAcc >= 0 && valAcc <= 1 && testAcc >= 0 && testAcc <= 1)) {
            skip('invalid-accuracy');
            continue;
        }
        let cell;
        try {
            const raw = buildCell(acc.adjacency, acc.operations);
            cell = validate(raw.adj, raw.ops);
        } catch (err) {
            if (err instanceof UnknownOpToken) {
                skip('unknown-op-token');
                continue;
            }
            if (err instanceof SchemaError) {
                skip('invalid-cell');
                continue;
            }
            throw err;
        }
        const id = cellId(cell);
        if (seen.has(id)) {
            skip('duplicate-canonical-form');
            continue;
        }
        seen.add(id);
        lines.push({ id, line: storeLine(id, cell.n, cell.adj, cell.ops, valAcc, testAcc) });
    }

    lines.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
    fs.writeFileSync(options.output, lines.map((entry) => entry.line + '\n').join(''));

    const skipped = Object.values(skipReasons).reduce((a, b) => a + b, 0);
    const manifest: ConvertManifest = {
        input: options.input,
        output: options.output,
        epochs: options.epochs ?? 'max',
        scanned: modules.size + malformedRows,
        converted: lines.length,
        skipped,
        skipReasons,
    };
    fs.writeFileSync(options.output + '.manifest.json', JSON.stringify(manifest, null, 2) + '\n');
    return manifest;
}
