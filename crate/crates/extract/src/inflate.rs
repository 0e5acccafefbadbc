//! DEFLATE (RFC 1951) decoder with optional zlib (RFC 1950) framing.
//!
//! Streams embedded in PDFs are often truncated or carry a bad checksum, so
//! the decoder reports failures together with whatever output it produced
//! before the failure. Callers decide whether partial output is acceptable.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InflateError {
    pub message: String,
    /// Bytes decoded before the failure.
    pub partial: Vec<u8>,
}

impl fmt::Display for InflateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} bytes)", self.message, self.partial.len())
    }
}

impl std::error::Error for InflateError {}

const LENGTH_BASE: [u16; 29] = [
    3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 15, 17, 19, 23, 27, 31, 35, 43, 51, 59, 67, 83, 99, 115, 131,
    163, 195, 227, 258,
];
const LENGTH_EXTRA: [u8; 29] = [
    0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0,
];
const DIST_BASE: [u16; 30] = [
    1, 2, 3, 4, 5, 7, 9, 13, 17, 25, 33, 49, 65, 97, 129, 193, 257, 385, 513, 769, 1025, 1537,
    2049, 3073, 4097, 6145, 8193, 12289, 16385, 24577,
];
const DIST_EXTRA: [u8; 30] = [
    0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13,
    13,
];
const CODE_LENGTH_ORDER: [usize; 19] = [
    16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15,
];

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    bit_buf: u64,
    bit_count: u32,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        BitReader {
            data,
            pos: 0,
            bit_buf: 0,
            bit_count: 0,
        }
    }

    fn refill(&mut self) {
        while self.bit_count <= 56 && self.pos < self.data.len() {
            self.bit_buf |= (self.data[self.pos] as u64) << self.bit_count;
            self.pos += 1;
            self.bit_count += 8;
        }
    }

    fn bits(&mut self, n: u32) -> Option<u32> {
        if n == 0 {
            return Some(0);
        }
        if self.bit_count < n {
            self.refill();
            if self.bit_count < n {
                return None;
            }
        }
        let v = (self.bit_buf & ((1u64 << n) - 1)) as u32;
        self.bit_buf >>= n;
        self.bit_count -= n;
        Some(v)
    }

    fn align_to_byte(&mut self) {
        let drop = self.bit_count % 8;
        self.bit_buf >>= drop;
        self.bit_count -= drop;
    }

    /// Byte offset of the first byte not yet consumed (after alignment).
    fn byte_pos(&self) -> usize {
        self.pos - (self.bit_count / 8) as usize
    }

    fn take_aligned_bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        self.align_to_byte();
        let start = self.byte_pos();
        if start + n > self.data.len() {
            return None;
        }
        self.pos = start + n;
        self.bit_buf = 0;
        self.bit_count = 0;
        Some(&self.data[start..start + n])
    }
}

/// Canonical Huffman decoding table (counts per length + sorted symbols).
struct Huffman {
    counts: [u16; 16],
    symbols: Vec<u16>,
}

impl Huffman {
    fn new(lengths: &[u8]) -> Result<Self, String> {
        let mut counts = [0u16; 16];
        for &l in lengths {
            counts[l as usize] += 1;
        }
        counts[0] = 0;
        let mut left: i32 = 1;
        for &n in &counts[1..] {
            left <<= 1;
            left -= n as i32;
            if left < 0 {
                return Err("over-subscribed huffman code".into());
            }
        }
        let mut offs = [0u16; 16];
        for len in 1..15 {
            offs[len + 1] = offs[len] + counts[len];
        }
        let mut symbols = vec![0u16; lengths.len()];
        for (sym, &l) in lengths.iter().enumerate() {
            if l != 0 {
                symbols[offs[l as usize] as usize] = sym as u16;
                offs[l as usize] += 1;
            }
        }
        Ok(Huffman { counts, symbols })
    }

    fn decode(&self, br: &mut BitReader<'_>) -> Option<u16> {
        let mut code: i32 = 0;
        let mut first: i32 = 0;
        let mut index: i32 = 0;
        for len in 1..16 {
            code |= br.bits(1)? as i32;
            let count = self.counts[len] as i32;
            if code - count < first {
                return self.symbols.get((index + (code - first)) as usize).copied();
            }
            index += count;
            first += count;
            first <<= 1;
            code <<= 1;
        }
        None
    }
}

fn fixed_tables() -> (Huffman, Huffman) {
    let mut lit = [0u8; 288];
    for (i, l) in lit.iter_mut().enumerate() {
        *l = match i {
            0..=143 => 8,
            144..=255 => 9,
            256..=279 => 7,
            _ => 8,
        };
    }
    let dist = [5u8; 30];
    (
        Huffman::new(&lit).expect("fixed literal table"),
        Huffman::new(&dist).expect("fixed distance table"),
    )
}

fn fail(message: impl Into<String>, out: Vec<u8>) -> InflateError {
    InflateError {
        message: message.into(),
        partial: out,
    }
}

/// Decodes a raw DEFLATE stream. Returns the output and the number of input
/// bytes consumed.
pub fn inflate_raw(data: &[u8]) -> Result<(Vec<u8>, usize), InflateError> {
    let mut out = Vec::with_capacity(data.len() * 3);
    let mut br = BitReader::new(data);
    loop {
        let Some(header) = br.bits(3) else {
            return Err(fail("unexpected end of data in block header", out));
        };
        let last = header & 1 == 1;
        match header >> 1 {
            0 => {
                let Some(hdr) = br.take_aligned_bytes(4) else {
                    return Err(fail("truncated stored block header", out));
                };
                let len = u16::from_le_bytes([hdr[0], hdr[1]]);
                let nlen = u16::from_le_bytes([hdr[2], hdr[3]]);
                if len != !nlen {
                    return Err(fail("stored block length check failed", out));
                }
                match br.take_aligned_bytes(len as usize) {
                    Some(bytes) => out.extend_from_slice(bytes),
                    None => {
                        let start = br.byte_pos();
                        out.extend_from_slice(&data[start.min(data.len())..]);
                        return Err(fail("truncated stored block", out));
                    }
                }
            }
            1 => {
                let (lit, dist) = fixed_tables();
                out = inflate_block(&mut br, &lit, &dist, out)?;
            }
            2 => {
                let (lit, dist) = match read_dynamic_tables(&mut br) {
                    Ok(t) => t,
                    Err(e) => return Err(fail(e, out)),
                };
                out = inflate_block(&mut br, &lit, &dist, out)?;
            }
            _ => return Err(fail("invalid block type 3", out)),
        }
        if last {
            break;
        }
    }
    br.align_to_byte();
    Ok((out, br.byte_pos()))
}

fn read_dynamic_tables(br: &mut BitReader<'_>) -> Result<(Huffman, Huffman), String> {
    let eod = || "unexpected end of data in dynamic header".to_string();
    let hlit = br.bits(5).ok_or_else(eod)? as usize + 257;
    let hdist = br.bits(5).ok_or_else(eod)? as usize + 1;
    let hclen = br.bits(4).ok_or_else(eod)? as usize + 4;
    if hlit > 286 || hdist > 30 {
        return Err("bad dynamic table counts".into());
    }
    let mut cl_lengths = [0u8; 19];
    for &idx in CODE_LENGTH_ORDER.iter().take(hclen) {
        cl_lengths[idx] = br.bits(3).ok_or_else(eod)? as u8;
    }
    let cl = Huffman::new(&cl_lengths)?;
    let mut lengths = vec![0u8; hlit + hdist];
    let mut i = 0;
    while i < hlit + hdist {
        let sym = cl.decode(br).ok_or_else(eod)?;
        match sym {
            0..=15 => {
                lengths[i] = sym as u8;
                i += 1;
            }
            16 => {
                if i == 0 {
                    return Err("repeat with no previous length".into());
                }
                let prev = lengths[i - 1];
                let n = 3 + br.bits(2).ok_or_else(eod)? as usize;
                if i + n > lengths.len() {
                    return Err("code length repeat overflows".into());
                }
                lengths[i..i + n].fill(prev);
                i += n;
            }
            17 | 18 => {
                let n = if sym == 17 {
                    3 + br.bits(3).ok_or_else(eod)? as usize
                } else {
                    11 + br.bits(7).ok_or_else(eod)? as usize
                };
                if i + n > lengths.len() {
                    return Err("zero run overflows".into());
                }
                i += n;
            }
            _ => return Err("bad code length symbol".into()),
        }
    }
    if lengths[256] == 0 {
        return Err("missing end-of-block code".into());
    }
    let lit = Huffman::new(&lengths[..hlit])?;
    let dist = Huffman::new(&lengths[hlit..])?;
    Ok((lit, dist))
}

fn inflate_block(
    br: &mut BitReader<'_>,
    lit: &Huffman,
    dist: &Huffman,
    mut out: Vec<u8>,
) -> Result<Vec<u8>, InflateError> {
    loop {
        let Some(sym) = lit.decode(br) else {
            return Err(fail("unexpected end of data in compressed block", out));
        };
        match sym {
            0..=255 => out.push(sym as u8),
            256 => return Ok(out),
            257..=285 => {
                let idx = (sym - 257) as usize;
                let Some(extra) = br.bits(LENGTH_EXTRA[idx] as u32) else {
                    return Err(fail("truncated length", out));
                };
                let len = LENGTH_BASE[idx] as usize + extra as usize;
                let Some(dsym) = dist.decode(br) else {
                    return Err(fail("truncated distance", out));
                };
                let dsym = dsym as usize;
                if dsym >= 30 {
                    return Err(fail("invalid distance symbol", out));
                }
                let Some(dextra) = br.bits(DIST_EXTRA[dsym] as u32) else {
                    return Err(fail("truncated distance extra bits", out));
                };
                let d = DIST_BASE[dsym] as usize + dextra as usize;
                if d > out.len() {
                    return Err(fail("distance too far back", out));
                }
                let start = out.len() - d;
                for k in 0..len {
                    let b = out[start + k];
                    out.push(b);
                }
            }
            _ => return Err(fail("invalid literal/length symbol", out)),
        }
    }
}

fn adler32(data: &[u8]) -> u32 {
    const MOD: u32 = 65521;
    let (mut a, mut b) = (1u32, 0u32);
    for chunk in data.chunks(5552) {
        for &byte in chunk {
            a += byte as u32;
            b += a;
        }
        a %= MOD;
        b %= MOD;
    }
    (b << 16) | a
}

/// Decodes a zlib-wrapped DEFLATE stream and verifies the Adler-32 trailer.
pub fn inflate_zlib(data: &[u8]) -> Result<Vec<u8>, InflateError> {
    if data.len() < 2 {
        return Err(fail("zlib header truncated", Vec::new()));
    }
    let cmf = data[0];
    let flg = data[1];
    if cmf & 0x0f != 8 || !((cmf as u16) << 8 | flg as u16).is_multiple_of(31) {
        return Err(fail("bad zlib header", Vec::new()));
    }
    if flg & 0x20 != 0 {
        return Err(fail("zlib preset dictionary not supported", Vec::new()));
    }
    let (out, used) = inflate_raw(&data[2..])?;
    let trailer = &data[2 + used..];
    if trailer.len() < 4 {
        return Err(fail("missing adler-32 trailer", out));
    }
    let expected = u32::from_be_bytes([trailer[0], trailer[1], trailer[2], trailer[3]]);
    if expected != adler32(&out) {
        return Err(fail("adler-32 mismatch", out));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_block() {
        // zlib header 78 01, stored final block of "abc", adler32("abc")
        let mut data = vec![0x78, 0x01, 0x01, 0x03, 0x00, 0xfc, 0xff, b'a', b'b', b'c'];
        data.extend_from_slice(&adler32(b"abc").to_be_bytes());
        assert_eq!(inflate_zlib(&data).unwrap(), b"abc");
    }

    #[test]
    fn adler_known_value() {
        assert_eq!(adler32(b"Wikipedia"), 0x11E6_0398);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(inflate_zlib(&[0x12, 0x34, 0, 0]).is_err());
    }

    #[test]
    fn truncated_keeps_partial() {
        let data = [0x78, 0x01, 0x01, 0x05, 0x00, 0xfa, 0xff, b'h', b'e'];
        let err = inflate_zlib(&data).unwrap_err();
        assert_eq!(err.partial, b"he");
    }
}
