import { describe, expect, it } from "vitest";

import { decodeTensor, encodeTensor, TensorFormatError } from "../src/tensor.js";

describe("tensor encoding", () => {
  it("produces the documented 31-byte layout for a 2x2 identity", () => {
    const buf = encodeTensor([2, 2], [1, 0, 0, 1]);
    expect(buf.length).toBe(31);
    expect(buf.toString("ascii", 0, 4)).toBe("RTNS");
    expect(buf[4]).toBe(1); // version
    expect(buf[5]).toBe(0); // dtype f32
    expect(buf[6]).toBe(2); // ndim
    expect(buf.readUInt32LE(7)).toBe(2);
    expect(buf.readUInt32LE(11)).toBe(2);
  });

  it("encodes 0.5 as the IEEE-754 bytes 00 00 00 3F", () => {
    const buf = encodeTensor([1], [0.5]);
    expect([...buf.subarray(buf.length - 4)]).toEqual([0x00, 0x00, 0x00, 0x3f]);
  });

  it("round-trips random tensors bit-exactly", () => {
    for (let trial = 0; trial < 50; trial++) {
      const ndim = 1 + (trial % 4);
      const shape = Array.from({ length: ndim }, (_, i) => 1 + ((trial + i) % 4));
      const count = shape.reduce((a, b) => a * b, 1);
      const data = new Float32Array(count);
      for (let i = 0; i < count; i++) data[i] = Math.fround(Math.sin(trial * 31 + i));
      const back = decodeTensor(encodeTensor(shape, data));
      expect(back.shape).toEqual(shape);
      expect(Buffer.from(back.data.buffer)).toEqual(Buffer.from(data.buffer));
    }
  });

  it("rejects malformed streams with classified errors", () => {
    const good = encodeTensor([2, 2], [1, 2, 3, 4]);

    const badMagic = Buffer.from(good);
    badMagic.write("XXXX", 0, "ascii");
    expect(() => decodeTensor(badMagic)).toThrow(TensorFormatError);
    expect(() => decodeTensor(badMagic)).toThrow(/magic/);

    expect(() => decodeTensor(good.subarray(0, good.length - 4))).toThrow(/12 bytes/);

    const badDtype = Buffer.from(good);
    badDtype[5] = 9;
    expect(() => decodeTensor(badDtype)).toThrow(/dtype/);

    expect(() => decodeTensor(Buffer.from([1, 2, 3]))).toThrow(/too short/);
  });

  it("rejects bad shapes at write time", () => {
    expect(() => encodeTensor([], [])).toThrow(/nonempty/);
    expect(() => encodeTensor([2, 2], [1])).toThrow(/requires 4/);
    expect(() => encodeTensor([1, 1, 1, 1, 1], [1])).toThrow(/maximum/);
    expect(() => encodeTensor([0], [])).toThrow(/>= 1/);
  });
});
