/**
 * Minimal decoder for the archive's per-run metrics protobuf.
 *
 * message ModelMetrics {
 *     repeated EvaluationData evaluation_data = 1;
 *     int32 trainable_parameters = 2;
 *     double total_time = 3;
 * }
 * message EvaluationData {
 *     double current_epoch = 1;
 *     double training_time = 2;
 *     double train_accuracy = 3;
 *     double validation_accuracy = 4;
 *     double test_accuracy = 5;
 *     string checkpoint_path = 6;
 * }
 */

import { SchemaError } from './errors';

export interface EvaluationData {
    currentEpoch: number;
    trainingTime: number;
    trainAccuracy: number;
    validationAccuracy: number;
    testAccuracy: number;
    checkpointPath: string;
}

export interface ModelMetrics {
    evaluationData: EvaluationData[];
    trainableParameters: number;
    totalTime: number;
}

class Cursor {
    pos = 0;

    constructor(private readonly buf: Buffer) {}

    get done(): boolean {
        return this.pos >= this.buf.length;
    }

    varint(): number {
        let shift = 0;
        let value = 0;
        for (;;) {
            if (this.pos >= this.buf.length) {
                throw new SchemaError('truncated varint');
            }
            const byte = this.buf[this.pos++];
            if (shift >= 53 && byte > 1) {
                throw new SchemaError('varint exceeds safe integer range');
            }
            value += (byte & 0x7f) * 2 ** shift;
            if ((byte & 0x80) === 0) {
                return value;
            }
            shift += 7;
        }
    }

    double(): number {
        if (this.pos + 8 > this.buf.length) {
            throw new SchemaError('truncated double field');
        }
        const value = this.buf.readDoubleLE(this.pos);
        this.pos += 8;
        return value;
    }

    bytes(length: number): Buffer {
        if (this.pos + length > this.buf.length) {
            throw new SchemaError('truncated length-delimited field');
        }
        const out = this.buf.subarray(this.pos, this.pos + length);
        this.pos += length;
        return out;
    }

    skip(wireType: number): void {
        if (wireType === 0) {
            this.varint();
        } else if (wireType === 1) {
            this.bytes(8);
        } else if (wireType === 2) {
            this.bytes(this.varint());
        } else if (wireType === 5) {
            this.bytes(4);
        } else {
            throw new SchemaError(`unsupported wire type ${wireType}`);
        }
    }
}

function decodeEvaluation(buf: Buffer): EvaluationData {
    const cur = new Cursor(buf);
    const out: EvaluationData = {
        currentEpoch: 0,
        trainingTime: 0,
        trainAccuracy: 0,
        validationAccuracy: 0,
        testAccuracy: 0,
        checkpointPath: '',
    };
    while (!cur.done) {
        const tag = cur.varint();
        const field = tag >>> 3;
        const wire = tag & 7;
        if (field === 1 && wire === 1) {
            out.currentEpoch = cur.double();
        } else if (field === 2 && wire === 1) {
            out.trainingTime = cur.double();
        } else if (field === 3 && wire === 1) {
            out.trainAccuracy = cur.double();
        } else if (field === 4 && wire === 1) {
            out.validationAccuracy = cur.double();
        } else if (field === 5 && wire === 1) {
            out.testAccuracy = cur.double();
        } else if (field === 6 && wire === 2) {
            out.checkpointPath = cur.bytes(cur.varint()).toString('utf8');
        } else {
            cur.skip(wire);
        }
    }
    return out;
}

/** Decode a serialized ModelMetrics message. */
export function decodeModelMetrics(buf: Buffer): ModelMetrics {
    const cur = new Cursor(buf);
    const out: ModelMetrics = {
        evaluationData: [],
        trainableParameters: 0,
        totalTime: 0,
    };
    while (!cur.done) {
        const tag = cur.varint();
        const field = tag >>> 3;
        const wire = tag & 7;
        if (field === 1 && wire === 2) {
            out.evaluationData.push(decodeEvaluation(cur.bytes(cur.varint())));
        } else if (field === 2 && wire === 0) {
            out.trainableParameters = cur.varint();
        } else if (field === 3 && wire === 1) {
            out.totalTime = cur.double();
        } else {
            cur.skip(wire);
        }
    }
    return out;
}
