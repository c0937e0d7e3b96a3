/**
 * CRC32C (Castagnoli) plus the masking scheme used by TFRecord framing.
 */

const TABLE = buildTable();

function buildTable(): Uint32Array {
    const table = new Uint32Array(256);
    for (let i = 0; i < 256; i++) {
        let crc = i;
        for (let k = 0; k < 8; k++) {
            crc = crc & 1 ? (crc >>> 1) ^ 0x82f63b78 : crc >>> 1;
        }
        table[i] = crc >>> 0;
    }
    return table;
}

/** CRC32C checksum of a buffer. */
export function crc32c(data: Buffer): number {
    let crc = 0xffffffff;
    for (let i = 0; i < data.length; i++) {
        crc = TABLE[(crc ^ data[i]) & 0xff] ^ (crc >>> 8);
    }
    return (crc ^ 0xffffffff) >>> 0;
}

/** Rotate-and-offset mask applied to framing checksums. */
export function maskCrc(crc: number): number {
    const rotated = ((crc >>> 15) | (crc << 17)) >>> 0;
    return (rotated + 0xa282ead8) >>> 0;
}

/** Masked CRC32C of a buffer, as stored in TFRecord frames. */
export function maskedCrc32c(data: Buffer): number {
    return maskCrc(crc32c(data));
}
