/**
 * Cell DAG validation and canonical form, matching the renas package
 * exactly: the canonical text and sha256-derived id produced here must
 * be byte-identical to what the Python library computes for the same
 * cell, or the converted store would fail its id check on load.
 */

import { createHash } from 'crypto';

import { SchemaError } from './errors';

export const INPUT = 1;
export const CONV3X3 = 2;
export const CONV1X1 = 3;
export const MAXPOOL3X3 = 4;
export const OUTPUT = 5;

export const OP_TOKENS: ReadonlyMap<number, string> = new Map([
    [INPUT, 'INPUT'],
    [CONV3X3, 'CONV3X3'],
    [CONV1X1, 'CONV1X1'],
    [MAXPOOL3X3, 'MAXPOOL3X3'],
    [OUTPUT, 'OUTPUT'],
]);

export const MAX_NODES = 7;
export const MAX_EDGES = 9;

export interface Cell {
    n: number;
    adj: number[][];
    ops: number[];
}

/** Serialize a cell: node count, 0/1 adjacency rows, op token CSV. */
export function toText(cell: Cell): string {
    const lines = [String(cell.n)];
    for (const row of cell.adj) {
        lines.push(row.join(''));
    }
    lines.push(cell.ops.map((op) => OP_TOKENS.get(op)).join(','));
    return lines.join('\n') + '\n';
}

/** First 16 hex chars of the sha256 of the canonical text. */
export function cellId(cell: Cell): string {
    return createHash('sha256').update(toText(cell), 'ascii').digest('hex').slice(0, 16);
}

function longestDepths(adj: number[][]): number[] {
    const n = adj.length;
    const indeg = new Array<number>(n).fill(0);
    for (let i = 0; i < n; i++) {
        for (let j = 0; j < n; j++) {
            indeg[j] += adj[i][j];
        }
    }
    const depth = new Array<number>(n).fill(0);
    const queue: number[] = [];
    for (let v = 0; v < n; v++) {
        if (indeg[v] === 0) {
            queue.push(v);
        }
    }
    while (queue.length > 0) {
        const u = queue.shift()!;
        for (let v = 0; v < n; v++) {
            if (adj[u][v]) {
                depth[v] = Math.max(depth[v], depth[u] + 1);
                if (--indeg[v] === 0) {
                    queue.push(v);
                }
            }
        }
    }
    return depth;
}

function hasCycle(adj: number[][]): boolean {
    const n = adj.length;
    const indeg = new Array<number>(n).fill(0);
    for (let i = 0; i < n; i++) {
        for (let j = 0; j < n; j++) {
            indeg[j] += adj[i][j];
        }
    }
    const queue: number[] = [];
    for (let v = 0; v < n; v++) {
        if (indeg[v] === 0) {
            queue.push(v);
        }
    }
    let seen = 0;
    while (queue.length > 0) {
        const u = queue.shift()!;
        seen += 1;
        for (let v = 0; v < n; v++) {
            if (adj[u][v] && --indeg[v] === 0) {
                queue.push(v);
            }
        }
    }
    return seen !== n;
}

function reach(adj: number[][], start: number, forward: boolean): Set<number> {
    const n = adj.length;
    const seen = new Set<number>([start]);
    const queue = [start];
    while (queue.length > 0) {
        const u = queue.shift()!;
        for (let v = 0; v < n; v++) {
            const hit = forward ? adj[u][v] : adj[v][u];
            if (hit && !seen.has(v)) {
                seen.add(v);
                queue.push(v);
            }
        }
    }
    return seen;
}

function permute(adj: number[][], ops: number[], order: number[]): Cell {
    const n = order.length;
    const newAdj: number[][] = [];
    for (let i = 0; i < n; i++) {
        const row: number[] = [];
        for (let j = 0; j < n; j++) {
            row.push(adj[order[i]][order[j]]);
        }
        newAdj.push(row);
    }
    return { n, adj: newAdj, ops: order.map((i) => ops[i]) };
}

function* permutations(items: number[]): Generator<number[]> {
    if (items.length <= 1) {
        yield items.slice();
        return;
    }
    for (let i = 0; i < items.length; i++) {
        const rest = items.slice(0, i).concat(items.slice(i + 1));
        for (const tail of permutations(rest)) {
            yield [items[i], ...tail];
        }
    }
}

function* product(groups: number[][][]): Generator<number[][]> {
    if (groups.length === 0) {
        yield [];
        return;
    }
    for (const head of groups[0]) {
        for (const tail of product(groups.slice(1))) {
            yield [head, ...tail];
        }
    }
}

function lessThan(a: number[], b: number[]): boolean {
    for (let i = 0; i < a.length; i++) {
        if (a[i] !== b[i]) {
            return a[i] < b[i];
        }
    }
    return false;
}

function canonicalForm(adj: number[][], ops: number[]): Cell {
    // Sort nodes by (longest-path depth, op id); break remaining ties by
    // the within-group permutation giving the lexicographically smallest
    // flattened adjacency, so the result ignores the input node order.
    const n = adj.length;
    const depth = longestDepths(adj);
    const base = Array.from({ length: n }, (_, v) => v).sort(
        (a, b) => depth[a] - depth[b] || ops[a] - ops[b] || a - b,
    );
    const groups: number[][] = [];
    let pos = 0;
    while (pos < n) {
        let end = pos;
        const d = depth[base[pos]];
        const op = ops[base[pos]];
        while (end < n && depth[base[end]] === d && ops[base[end]] === op) {
            end += 1;
        }
        const group: number[] = [];
        for (let k = pos; k < end; k++) {
            group.push(k);
        }
        groups.push(group);
        pos = end;
    }
    const ambiguous = groups.filter((grp) => grp.length > 1);
    if (ambiguous.length === 0) {
        return permute(adj, ops, base);
    }

    let best: number[] | null = null;
    let bestCell: Cell | null = null;
    const perGroup = ambiguous.map((grp) => Array.from(permutations(grp)));
    for (const combo of product(perGroup)) {
        const order = base.slice();
        for (let g = 0; g < ambiguous.length; g++) {
            const grp = ambiguous[g];
            const perm = combo[g];
            for (let k = 0; k < grp.length; k++) {
                order[grp[k]] = base[perm[k]];
            }
        }
        const cand = permute(adj, ops, order);
        const flat = cand.adj.flat();
        if (best === null || lessThan(flat, best)) {
            best = flat;
            bestCell = cand;
        }
    }
    return bestCell!;
}

/**
 * Check a raw cell description and return its canonical form.
 *
 * Nodes on no input-to-output path are pruned first.  Violations of the
 * node/edge limits, terminal placement, acyclicity, or connectivity all
 * raise SchemaError with a reasonable message.
 */
export function validate(rawAdj: number[][], rawOps: number[]): Cell {
    const n = rawAdj.length;
    for (const row of rawAdj) {
        if (row.length !== n) {
            throw new SchemaError('adjacency matrix must be square');
        }
        for (const v of row) {
            if (v !== 0 && v !== 1) {
                throw new SchemaError('adjacency entries must be 0 or 1');
            }
        }
    }
    if (n > MAX_NODES) {
        throw new SchemaError(`${n} nodes exceeds limit of ${MAX_NODES}`);
    }
    if (n < 2) {
        throw new SchemaError('a cell needs at least INPUT and OUTPUT nodes');
    }
    if (rawOps.length !== n) {
        throw new SchemaError('ops vector length must match adjacency size');
    }
    for (const op of rawOps) {
        if (!OP_TOKENS.has(op)) {
            throw new SchemaError(`op ids must be 1..5, got ${op}`);
        }
    }
    const inputCount = rawOps.filter((op) => op === INPUT).length;
    if (rawOps[0] !== INPUT || inputCount !== 1) {
        throw new SchemaError('INPUT must appear exactly once, as node 0');
    }
    const outputCount = rawOps.filter((op) => op === OUTPUT).length;
    if (rawOps[n - 1] !== OUTPUT || outputCount !== 1) {
        throw new SchemaError('OUTPUT must appear exactly once, as the last node');
    }
    let edges = 0;
    for (const row of rawAdj) {
        for (const v of row) {
            edges += v;
        }
    }
    if (edges > MAX_EDGES) {
        throw new SchemaError(`${edges} edges exceeds limit of ${MAX_EDGES}`);
    }
    for (let i = 0; i < n; i++) {
        if (rawAdj[i][i]) {
            throw new SchemaError('self loop');
        }
    }
    if (hasCycle(rawAdj)) {
        throw new SchemaError('adjacency matrix contains a cycle');
    }

    const fwd = reach(rawAdj, 0, true);
    const back = reach(rawAdj, n - 1, false);
    const keep: number[] = [];
    for (let v = 0; v < n; v++) {
        if (fwd.has(v) && back.has(v)) {
            keep.push(v);
        }
    }
    if (!keep.includes(0) || !keep.includes(n - 1)) {
        throw new SchemaError('no path from INPUT to OUTPUT');
    }
    let adj = rawAdj;
    let ops = rawOps;
    if (keep.length !== n) {
        adj = keep.map((i) => keep.map((j) => rawAdj[i][j]));
        ops = keep.map((i) => rawOps[i]);
    }
    return canonicalForm(adj, ops);
}
