/**
 * Fixture builders: a protobuf encoder for the metrics message and an
 * archive writer, so tests can synthesize wire-exact inputs.
 */

import * as fs from 'fs';

import { frameRecord } from '../src/tfrecord';

function varint(value: number): Buffer {
    const bytes: number[] = [];
    let rest = value;
    do {
        let byte = rest % 128;
        rest = Math.floor(rest / 128);
        if (rest > 0) {
            byte |= 0x80;
        }
        bytes.push(byte);
    } while (rest > 0);
    return Buffer.from(bytes);
}

function doubleField(field: number, value: number): Buffer {
    const buf = Buffer.alloc(8);
    buf.writeDoubleLE(value, 0);
    return Buffer.concat([varint((field << 3) | 1), buf]);
}

function lenField(field: number, value: Buffer): Buffer {
    return Buffer.concat([varint((field << 3) | 2), varint(value.length), value]);
}

export interface EvalFixture {
    currentEpoch: number;
    trainingTime: number;
    trainAccuracy: number;
    validationAccuracy: number;
    testAccuracy: number;
    checkpointPath?: string;
}

/** Encode one EvaluationData message. */
export function encodeEvaluation(data: EvalFixture): Buffer {
    const parts = [
        doubleField(1, data.currentEpoch),
        doubleField(2, data.trainingTime),
        doubleField(3, data.trainAccuracy),
        doubleField(4, data.validationAccuracy),
        doubleField(5, data.testAccuracy),
    ];
    if (data.checkpointPath !== undefined) {
        parts.push(lenField(6, Buffer.from(data.checkpointPath, 'utf8')));
    }
    return Buffer.concat(parts);
}

/** Encode one ModelMetrics message. */
export function encodeMetrics(
    evaluations: EvalFixture[],
    trainableParameters = 0,
    totalTime = 0,
): Buffer {
    const parts = evaluations.map((entry) => lenField(1, encodeEvaluation(entry)));
    parts.push(Buffer.concat([varint(2 << 3), varint(trainableParameters)]));
    parts.push(doubleField(3, totalTime));
    return Buffer.concat(parts);
}

export interface RowFixture {
    hash: string;
    epochs: number;
    adjacency: string;
    operations: string;
    metrics: Buffer;
}

/** Serialize one archive row: the JSON array payload, framed. */
export function encodeRow(row: RowFixture): Buffer {
    const payload = JSON.stringify([
        row.hash,
        row.epochs,
        row.adjacency,
        row.operations,
        row.metrics.toString('base64'),
    ]);
    return frameRecord(Buffer.from(payload, 'utf8'));
}

/** Write a complete archive file from row fixtures. */
export function writeArchive(path: string, rows: RowFixture[]): void {
    fs.writeFileSync(path, Buffer.concat(rows.map(encodeRow)));
}

/**
 * Three training repeats of one architecture at one epoch budget, with
 * evaluation entries for start, halfway and final epochs.
 */
export function repeatRows(
    hash: string,
    epochs: number,
    adjacency: string,
    operations: string,
    finalVals: number[],
    finalTests: number[],
): RowFixture[] {
    return finalVals.map((val, i) => ({
        hash,
        epochs,
        adjacency,
        operations,
        metrics: encodeMetrics(
            [
                { currentEpoch: 0, trainingTime: 0, trainAccuracy: 0.1, validationAccuracy: 0.1, testAccuracy: 0.1 },
                {
                    currentEpoch: epochs / 2,
                    trainingTime: 100,
                    trainAccuracy: 0.7,
                    validationAccuracy: 0.6,
                    testAccuracy: 0.6,
                },
                {
                    currentEpoch: epochs,
                    trainingTime: 200,
                    trainAccuracy: 0.99,
                    validationAccuracy: val,
                    testAccuracy: finalTests[i],
                    checkpointPath: `/ckpt/${hash}_${i}`,
                },
            ],
            1234567,
            321.5,
        ),
    }));
}
