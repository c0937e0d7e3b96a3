/**
 * Sequential reader for TFRecord files.
 *
 * Each record is framed as:
 *   uint64 LE   payload length
 *   uint32 LE   masked crc32c of the length bytes
 *   bytes       payload
 *   uint32 LE   masked crc32c of the payload
 */

import * as fs from 'fs';

import { maskedCrc32c } from './crc32c';
import { UnreadableArchive } from './errors';

const MAX_RECORD_BYTES = 256 * 1024 * 1024;

/** Open a TFRecord file and yield each record's payload in order. */
export function* readRecords(path: string): Generator<Buffer> {
    let fd: number;
    try {
        fd = fs.openSync(path, 'r');
    } catch (err) {
        throw new UnreadableArchive(`cannot open ${path}: ${(err as Error).message}`);
    }
    try {
        let offset = 0;
        const header = Buffer.alloc(12);
        for (;;) {
            const got = fs.readSync(fd, header, 0, 12, offset);
            if (got === 0) {
                return; // clean end of file
            }
            if (got !== 12) {
                throw new UnreadableArchive(`truncated frame header at byte ${offset}`);
            }
            const length = header.readBigUInt64LE(0);
            if (length > BigInt(MAX_RECORD_BYTES)) {
                throw new UnreadableArchive(`implausible record length ${length} at byte ${offset}`);
            }
            const lengthCrc = header.readUInt32LE(8);
            if (maskedCrc32c(header.subarray(0, 8)) !== lengthCrc) {
                throw new UnreadableArchive(`length checksum mismatch at byte ${offset}`);
            }
            const dataLen = Number(length);
            const body = Buffer.alloc(dataLen + 4);
            if (fs.readSync(fd, body, 0, dataLen + 4, offset + 12) !== dataLen + 4) {
                throw new UnreadableArchive(`truncated record at byte ${offset}`);
            }
            const data = body.subarray(0, dataLen);
            const dataCrc = body.readUInt32LE(dataLen);
            if (maskedCrc32c(data) !== dataCrc) {
                throw new UnreadableArchive(`record checksum mismatch at byte ${offset}`);
            }
            yield Buffer.from(data);
            offset += 12 + dataLen + 4;
        }
    } finally {
        fs.closeSync(fd);
    }
}

/** Frame one payload the way TFRecord files store it. */
export function frameRecord(data: Buffer): Buffer {
    const header = Buffer.alloc(12);
    header.writeBigUInt64LE(BigInt(data.length), 0);
    header.writeUInt32LE(maskedCrc32c(header.subarray(0, 8)), 8);
    const footer = Buffer.alloc(4);
    footer.writeUInt32LE(maskedCrc32c(data), 0);
    return Buffer.concat([header, data, footer]);
}
