import { describe, expect, it } from 'vitest';

import { crc32c, maskCrc, maskedCrc32c } from '../src/crc32c';

describe('crc32c', () => {
    it('matches the published check value', () => {
        // The standard CRC32C known-answer test vector.
        expect(crc32c(Buffer.from('123456789', 'ascii'))).toBe(0xe3069283);
    });

    it('empty input hashes to zero', () => {
        expect(crc32c(Buffer.alloc(0))).toBe(0);
    });

    it('is sensitive to every byte', () => {
        const a = crc32c(Buffer.from([0, 1, 2, 3]));
        const b = crc32c(Buffer.from([0, 1, 2, 4]));
        expect(a).not.toBe(b);
    });

    it('mask is the documented rotate-add', () => {
        const crc = crc32c(Buffer.from('123456789', 'ascii'));
        const expected = ((((crc >>> 15) | (crc << 17)) >>> 0) + 0xa282ead8) % 2 ** 32;
        expect(maskCrc(crc)).toBe(expected >>> 0);
        expect(maskedCrc32c(Buffer.from('123456789', 'ascii'))).toBe(expected >>> 0);
    });

    it('masked values stay unsigned 32-bit', () => {
        for (const text of ['', 'a', 'hello world', '\x00\xff']) {
            const masked = maskedCrc32c(Buffer.from(text, 'latin1'));
            expect(masked).toBeGreaterThanOrEqual(0);
            expect(masked).toBeLessThan(2 ** 32);
        }
    });
});
