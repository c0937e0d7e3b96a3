#!/usr/bin/env node

/**
 * Command-line wrapper: nb101convert --input archive --output store.jsonl
 * [--epochs N].  Exit codes: 0 ok, 2 usage, 3 unreadable archive,
 * 1 anything else.
 */

import { convert } from './convert';
import { UnreadableArchive } from './errors';

const USAGE = `usage: nb101convert --input <archive> --output <store.jsonl> [--epochs <N>]

Converts a benchmark archive to a JSONL store, averaging training
repeats at the selected epoch budget (default: each architecture's
longest).  A conversion manifest is written next to the output.`;

/** Parse argv and run the conversion; returns the process exit code. */
export function main(argv: string[]): number {
    let input: string | undefined;
    let output: string | undefined;
    let epochs: number | undefined;

    for (let i = 0; i < argv.length; i++) {
        const arg = argv[i];
        if (arg === '--help' || arg === '-h') {
            console.log(USAGE);
            return 0;
        }
        if (arg === '--input' || arg === '-i') {
            input = argv[++i];
        } else if (arg === '--output' || arg === '-o') {
            output = argv[++i];
        } else if (arg === '--epochs' || arg === '-e') {
            const raw = argv[++i];
            epochs = Number(raw);
            if (raw === undefined || !Number.isInteger(epochs) || epochs <= 0) {
                console.error(`error: --epochs needs a positive integer, got '${raw}'`);
                return 2;
            }
        } else {
            console.error(`error: unknown argument '${arg}'`);
            console.error(USAGE);
            return 2;
        }
    }
    if (input === undefined || output === undefined) {
        console.error('error: --input and --output are required');
        console.error(USAGE);
        return 2;
    }

    try {
        const manifest = convert({ input, output, epochs });
        console.log(
            `scanned ${manifest.scanned} architectures: ` +
                `${manifest.converted} converted, ${manifest.skipped} skipped`,
        );
        for (const [reason, count] of Object.entries(manifest.skipReasons)) {
            console.log(`  skipped ${count} (${reason})`);
        }
        console.log(`wrote ${manifest.output} and ${manifest.output}.manifest.json`);
        return 0;
    } catch (err) {
        if (err instanceof UnreadableArchive) {
            console.error(`error: ${err.message}`);
            return 3;
        }
        console.error(`error: ${(err as Error).message}`);
        return 1;
    }
}

if (typeof require !== 'undefined' && require.main === module) {
    process.exit(main(process.argv.slice(2)));
}
