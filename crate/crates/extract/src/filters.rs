//! Stream filters: FlateDecode (with TIFF/PNG predictors) and ASCIIHexDecode.

use crate::error::{ExtractError, Result};
use crate::inflate;

/// Predictor parameters from a `/DecodeParms` dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Predictor {
    pub predictor: i64,
    pub colors: usize,
    pub bits_per_component: usize,
    pub columns: usize,
}

impl Default for Predictor {
    fn default() -> Self {
        Predictor {
            predictor: 1,
            colors: 1,
            bits_per_component: 8,
            columns: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Filter {
    Flate(Predictor),
    AsciiHex,
}

impl Filter {
    /// Resolves a filter name (full or abbreviated) to a supported filter.
    pub fn from_name(name: &str, predictor: Predictor) -> Result<Filter> {
        match name {
            "FlateDecode" | "Fl" => Ok(Filter::Flate(predictor)),
            "ASCIIHexDecode" | "AHx" => Ok(Filter::AsciiHex),
            other => Err(ExtractError::UnsupportedFilter(other.to_string())),
        }
    }
}

/// Parses a chain of filter names with default parameters. `"none"` and
/// empty names are skipped.
pub fn parse_filter_chain<S: AsRef<str>>(names: &[S]) -> Result<Vec<Filter>> {
    names
        .iter()
        .map(|n| n.as_ref())
        .filter(|n| !n.is_empty() && *n != "none")
        .map(|n| Filter::from_name(n, Predictor::default()))
        .collect()
}

/// Applies filters in order. Strict: any decoding failure is an error.
pub fn decode_stream(raw: &[u8], chain: &[Filter]) -> Result<Vec<u8>> {
    let mut data = raw.to_vec();
    for filter in chain {
        data = match filter {
            Filter::Flate(p) => {
                let inflated = inflate::inflate_zlib(&data)
                    .map_err(|e| ExtractError::CorruptStream(e.to_string()))?;
                apply_predictor(inflated, p)?
            }
            Filter::AsciiHex => ascii_hex_decode(&data)?,
        };
    }
    Ok(data)
}

/// Like [`decode_stream`] but keeps partial Flate output when a stream is
/// truncated or has a bad checksum. Returns the data plus an optional note
/// describing what was recovered.
pub(crate) fn decode_stream_lenient(
    raw: &[u8],
    chain: &[Filter],
) -> Result<(Vec<u8>, Option<String>)> {
    let mut data = raw.to_vec();
    let mut note = None;
    for filter in chain {
        data = match filter {
            Filter::Flate(p) => {
                let inflated = match inflate::inflate_zlib(&data) {
                    Ok(v) => v,
                    Err(e) => {
                        // Some producers omit the zlib wrapper.
                        match inflate::inflate_raw(&data) {
                            Ok((v, _)) => v,
                            Err(_) if !e.partial.is_empty() => {
                                note = Some(format!("recovered partial flate stream: {}", e));
                                e.partial
                            }
                            Err(_) => return Err(ExtractError::CorruptStream(e.to_string())),
                        }
                    }
                };
                apply_predictor(inflated, p)?
            }
            Filter::AsciiHex => ascii_hex_decode(&data)?,
        };
    }
    Ok((data, note))
}

fn ascii_hex_decode(data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(data.len() / 2);
    let mut high: Option<u8> = None;
    for &b in data {
        if b == b'>' {
            break;
        }
        if b.is_ascii_whitespace() || b == 0 {
            continue;
        }
        let v = match b {
            b'0'..=b'9' => b - b'0',
            b'a'..=b'f' => b - b'a' + 10,
            b'A'..=b'F' => b - b'A' + 10,
            _ => {
                return Err(ExtractError::CorruptStream(format!(
                    "invalid hex digit 0x{b:02x} in ASCIIHexDecode data"
                )))
            }
        };
        match high.take() {
            Some(h) => out.push(h << 4 | v),
            None => high = Some(v),
        }
    }
    if let Some(h) = high {
        out.push(h << 4);
    }
    Ok(out)
}

fn apply_predictor(data: Vec<u8>, p: &Predictor) -> Result<Vec<u8>> {
    match p.predictor {
        1 => Ok(data),
        2 => Ok(tiff_predictor(data, p)),
        10..=15 => png_predictor(&data, p),
        other => Err(ExtractError::CorruptStream(format!(
            "unknown predictor {other}"
        ))),
    }
}

fn bytes_per_pixel(p: &Predictor) -> usize {
    (p.colors * p.bits_per_component).div_ceil(8).max(1)
}

fn row_len(p: &Predictor) -> usize {
    (p.colors * p.bits_per_component * p.columns).div_ceil(8)
}

fn tiff_predictor(mut data: Vec<u8>, p: &Predictor) -> Vec<u8> {
    if p.bits_per_component != 8 {
        return data;
    }
    let bpp = bytes_per_pixel(p);
    let row = row_len(p).max(1);
    for line in data.chunks_mut(row) {
        for i in bpp..line.len() {
            line[i] = line[i].wrapping_add(line[i - bpp]);
        }
    }
    data
}

fn png_predictor(data: &[u8], p: &Predictor) -> Result<Vec<u8>> {
    let bpp = bytes_per_pixel(p);
    let row = row_len(p);
    if row == 0 {
        return Err(ExtractError::CorruptStream("zero-width predictor row".into()));
    }
    let mut out = Vec::with_capacity(data.len());
    let mut prev = vec![0u8; row];
    for chunk in data.chunks(row + 1) {
        let tag = chunk[0];
        let mut cur: Vec<u8> = chunk[1..].to_vec();
        cur.resize(row, 0);
        for i in 0..row {
            let left = if i >= bpp { cur[i - bpp] } else { 0 };
            let up = prev[i];
            let up_left = if i >= bpp { prev[i - bpp] } else { 0 };
            cur[i] = match tag {
                0 => cur[i],
                1 => cur[i].wrapping_add(left),
                2 => cur[i].wrapping_add(up),
                3 => cur[i].wrapping_add(((left as u16 + up as u16) / 2) as u8),
                4 => cur[i].wrapping_add(paeth(left, up, up_left)),
                t => {
                    return Err(ExtractError::CorruptStream(format!(
                        "invalid PNG predictor tag {t}"
                    )))
                }
            };
        }
        let take = chunk.len() - 1;
        out.extend_from_slice(&cur[..take.min(row)]);
        prev = cur;
    }
    Ok(out)
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = a as i16 + b as i16 - c as i16;
    let pa = (p - a as i16).abs();
    let pb = (p - b as i16).abs();
    let pc = (p - c as i16).abs();
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}
