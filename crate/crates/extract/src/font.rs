//! Fonts as far as text extraction needs them: code splitting, code to
//! Unicode mapping, and glyph advance widths.

use std::collections::HashMap;

use crate::document::PdfDocument;
use crate::encoding::{glyph_to_text, BaseEncoding};
use crate::object::{Dict, Lexer, Object, Token};

#[derive(PartialEq)]
enum Section {
    None,
    Codespace,
    BfChar,
    BfRange,
}

/// A parsed ToUnicode (or predefined-identity) CMap.
#[derive(Debug, Clone, Default)]
pub struct CMap {
    /// Codespace ranges as (byte length, low, high).
    codespace: Vec<(usize, u32, u32)>,
    map: HashMap<(usize, u32), String>,
}

impl CMap {
    pub fn parse(data: &[u8]) -> CMap {
        let mut cmap = CMap::default();
        let mut lex = Lexer::new(data, 0);
        let mut operands: Vec<Token> = Vec::new();
        let mut in_array: Option<Vec<Vec<u8>>> = None;
        let mut section = Section::None;
        while let Some(tok) = lex.next_token() {
            match tok {
                Token::ArrayStart => in_array = Some(Vec::new()),
                Token::ArrayEnd => {
                    if let Some(items) = in_array.take() {
                        // Encode the array as a marker token sequence.
                        operands.push(Token::Name(format!("__array{}", items.len())));
                        for it in items {
                            operands.push(Token::String(it));
                        }
                    }
                }
                Token::String(s) if in_array.is_some() => {
                    if let Some(a) = in_array.as_mut() {
                        a.push(s);
                    }
                }
                Token::Keyword(k) => {
                    match k.as_slice() {
                        b"begincodespacerange" => section = Section::Codespace,
                        b"beginbfchar" => section = Section::BfChar,
                        b"beginbfrange" => section = Section::BfRange,
                        b"endcodespacerange" | b"endbfchar" | b"endbfrange" => {
                            cmap.apply(&section, &operands);
                            section = Section::None;
                        }
                        _ => {}
                    }
                    operands.clear();
                }
                other => {
                    if section != Section::None {
                        operands.push(other);
                    }
                }
            }
        }
        cmap
    }

    fn apply(&mut self, section: &Section, ops: &[Token]) {
        let mut it = ops.iter().peekable();
        match section {
            Section::Codespace => {
                while let (Some(Token::String(lo)), Some(Token::String(hi))) =
                    (it.next(), it.next())
                {
                    let len = lo.len().clamp(1, 4);
                    self.codespace.push((len, be(lo), be(hi)));
                }
            }
            Section::BfChar => {
                while let (Some(Token::String(src)), Some(dst)) = (it.next(), it.next()) {
                    let text = match dst {
                        Token::String(d) => utf16be(d),
                        Token::Name(n) => glyph_to_text(n).unwrap_or_default(),
                        _ => continue,
                    };
                    self.map.insert((src.len().clamp(1, 4), be(src)), text);
                }
            }
            Section::BfRange => {
                while let (Some(Token::String(lo)), Some(Token::String(hi)), Some(dst)) =
                    (it.next(), it.next(), it.next())
                {
                    let len = lo.len().clamp(1, 4);
                    let (lo, hi) = (be(lo), be(hi));
                    if hi < lo || hi - lo > 0xffff {
                        continue;
                    }
                    match dst {
                        Token::String(d) => {
                            let mut units: Vec<u16> = d
                                .chunks(2)
                                .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]))
                                .collect();
                            if units.is_empty() {
                                continue;
                            }
                            for code in lo..=hi {
                                let s: String = char::decode_utf16(units.iter().copied())
                                    .map(|r| r.unwrap_or('\u{FFFD}'))
                                    .collect();
                                self.map.insert((len, code), s);
                                let last = units.len() - 1;
                                units[last] = units[last].wrapping_add(1);
                            }
                        }
                        Token::Name(n) if n.starts_with("__array") => {
                            let count: usize = n["__array".len()..].parse().unwrap_or(0);
                            for (i, code) in (lo..=hi).enumerate() {
                                if i >= count {
                                    break;
                                }
                                if let Some(Token::String(d)) = it.next() {
                                    self.map.insert((len, code), utf16be(d));
                                }
                            }
                            // Skip any unconsumed elements.
                            let span = (hi - lo + 1) as usize;
                            for _ in span..count {
                                it.next();
                            }
                        }
                        _ => {}
                    }
                }
            }
            Section::None => {}
        }
    }

    fn code_len_at(&self, bytes: &[u8]) -> Option<usize> {
        for len in 1..=4usize {
            if bytes.len() < len {
                break;
            }
            let v = be(&bytes[..len]);
            if self
                .codespace
                .iter()
                .any(|(l, lo, hi)| *l == len && v >= *lo && v <= *hi)
            {
                return Some(len);
            }
        }
        None
    }

    fn lookup(&self, len: usize, code: u32) -> Option<&str> {
        self.map.get(&(len, code)).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn be(bytes: &[u8]) -> u32 {
    bytes
        .iter()
        .take(4)
        .fold(0u32, |acc, b| acc << 8 | *b as u32)
}

fn utf16be(bytes: &[u8]) -> String {
    let units = bytes
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]));
    char::decode_utf16(units)
        .map(|r| r.unwrap_or('\u{FFFD}'))
        .collect()
}

/// One decoded character code.
#[derive(Debug, Clone, PartialEq)]
pub struct Glyph {
    pub text: Option<String>,
    /// Advance width in thousandths of text space.
    pub width: f64,
    /// Single-byte code 32, the only code word spacing applies to.
    pub is_word_space: bool,
}

#[derive(Debug, Clone)]
enum Kind {
    Simple {
        encoding: Box<[Option<String>; 256]>,
    },
    Composite {
        /// CID widths.
        widths: HashMap<u32, f64>,
        default_width: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Font {
    pub name: String,
    kind: Kind,
    to_unicode: Option<CMap>,
    first_char: u32,
    widths: Vec<f64>,
    missing_width: f64,
    /// Scale from glyph-space widths to thousandths (Type 3 fonts).
    width_scale: f64,
    std_widths: Option<&'static [u16; 95]>,
}

impl Font {
    /// Fallback used when a content stream selects an unknown font.
    pub fn fallback() -> Font {
        Font {
            name: "(fallback)".into(),
            kind: Kind::Simple {
                encoding: Box::new(simple_table(BaseEncoding::WinAnsi)),
            },
            to_unicode: None,
            first_char: 0,
            widths: Vec::new(),
            missing_width: 500.0,
            width_scale: 1.0,
            std_widths: None,
        }
    }

    pub fn load(doc: &PdfDocument<'_>, dict: &Dict, warnings: &mut Vec<String>) -> Font {
        let subtype = dict
            .get("Subtype")
            .and_then(Object::as_name)
            .unwrap_or("Type1");
        let base_font = dict
            .get("BaseFont")
            .map(|b| doc.resolve(b))
            .and_then(|b| b.as_name().map(str::to_string))
            .unwrap_or_else(|| subtype.to_string());
        let to_unicode = match dict.get("ToUnicode").map(|t| doc.resolve(t)) {
            Some(Object::Stream(s)) => match doc.decode(&s) {
                Ok(bytes) => Some(CMap::parse(&bytes)),
                Err(e) => {
                    warnings.push(format!("font {base_font}: unreadable ToUnicode ({e})"));
                    None
                }
            },
            _ => None,
        };
        if subtype == "Type0" {
            return Font::load_composite(doc, dict, base_font, to_unicode, warnings);
        }
        let mut encoding = default_encoding(subtype, &base_font, dict, doc);
        let mut table = simple_table(encoding);
        if let Some(enc) = dict.get("Encoding").map(|e| doc.resolve(e)) {
            match enc {
                Object::Name(n) => {
                    if let Some(b) = BaseEncoding::from_name(&n) {
                        encoding = b;
                        table = simple_table(encoding);
                    }
                }
                Object::Dict(d) => {
                    if let Some(b) = d
                        .get("BaseEncoding")
                        .and_then(Object::as_name)
                        .and_then(BaseEncoding::from_name)
                    {
                        table = simple_table(b);
                    }
                    if let Some(diffs) = d.get("Differences").map(|x| doc.resolve(x)) {
                        apply_differences(&mut table, diffs.as_array().unwrap_or(&[]));
                    }
                }
                _ => {}
            }
        }
        let first_char = dict
            .get("FirstChar")
            .map(|f| doc.resolve(f))
            .and_then(|f| f.as_i64())
            .unwrap_or(0)
            .max(0) as u32;
        let widths: Vec<f64> = match dict.get("Widths").map(|w| doc.resolve(w)) {
            Some(Object::Array(a)) => a
                .iter()
                .map(|w| doc.resolve(w).as_f64().unwrap_or(0.0))
                .collect(),
            _ => Vec::new(),
        };
        let missing_width = doc
            .resolve_dict(dict.get("FontDescriptor"))
            .and_then(|fd| fd.get("MissingWidth").and_then(Object::as_f64))
            .unwrap_or(0.0);
        let width_scale = if subtype == "Type3" {
            dict.get("FontMatrix")
                .map(|m| doc.resolve(m))
                .and_then(|m| {
                    m.as_array()
                        .and_then(|a| a.first().and_then(Object::as_f64))
                })
                .map(|s| s * 1000.0)
                .unwrap_or(1.0)
        } else {
            1.0
        };
        Font {
            std_widths: standard_widths(&base_font),
            name: base_font,
            kind: Kind::Simple {
                encoding: Box::new(table),
            },
            to_unicode,
            first_char,
            widths,
            missing_width,
            width_scale,
        }
    }

    fn load_composite(
        doc: &PdfDocument<'_>,
        dict: &Dict,
        name: String,
        to_unicode: Option<CMap>,
        warnings: &mut Vec<String>,
    ) -> Font {
        let encoding = dict
            .get("Encoding")
            .map(|e| doc.resolve(e))
            .and_then(|e| e.as_name().map(str::to_string));
        match encoding.as_deref() {
            Some("Identity-H") | Some("Identity-V") => {}
            Some(other) => warnings.push(format!(
                "font {name}: predefined CMap {other} treated as 2-byte identity"
            )),
            None => warnings.push(format!(
                "font {name}: embedded CMap encoding treated as 2-byte identity"
            )),
        }
        if to_unicode.as_ref().is_none_or(CMap::is_empty) {
            warnings.push(format!(
                "font {name}: composite font without ToUnicode; text may be lost"
            ));
        }
        let descendant = match dict.get("DescendantFonts").map(|d| doc.resolve(d)) {
            Some(Object::Array(a)) => a.first().and_then(|d| doc.resolve_dict(Some(d))),
            _ => None,
        };
        let mut widths = HashMap::new();
        let mut default_width = 1000.0;
        if let Some(desc) = descendant {
            if let Some(dw) = desc
                .get("DW")
                .map(|d| doc.resolve(d))
                .and_then(|d| d.as_f64())
            {
                default_width = dw;
            }
            if let Some(Object::Array(w)) = desc.get("W").map(|w| doc.resolve(w)) {
                parse_cid_widths(doc, &w, &mut widths);
            }
        }
        Font {
            name,
            kind: Kind::Composite {
                widths,
                default_width,
            },
            to_unicode,
            first_char: 0,
            widths: Vec::new(),
            missing_width: 0.0,
            width_scale: 1.0,
            std_widths: None,
        }
    }

    /// Splits a shown string into codes and maps each to text and width.
    pub fn decode(&self, bytes: &[u8]) -> Vec<Glyph> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let len = match (&self.kind, &self.to_unicode) {
                (Kind::Composite { .. }, Some(cm)) => cm.code_len_at(&bytes[i..]).unwrap_or(2),
                (Kind::Composite { .. }, None) => 2,
                (Kind::Simple { .. }, _) => 1,
            };
            let len = len.min(bytes.len() - i);
            let code = be(&bytes[i..i + len]);
            i += len;
            let mapped = self.to_unicode.as_ref().and_then(|cm| cm.lookup(len, code));
            let text = match (mapped, &self.kind) {
                (Some(t), _) => Some(t.to_string()),
                (None, Kind::Simple { encoding }) => encoding[code as usize & 0xff].clone(),
                (None, Kind::Composite { .. }) => None,
            };
            let width = match &self.kind {
                Kind::Simple { .. } => self.simple_width(code),
                Kind::Composite {
                    widths,
                    default_width,
                } => widths.get(&code).copied().unwrap_or(*default_width),
            };
            out.push(Glyph {
                text,
                width,
                is_word_space: len == 1 && code == 32,
            });
        }
        out
    }

    fn simple_width(&self, code: u32) -> f64 {
        if code >= self.first_char {
            if let Some(w) = self.widths.get((code - self.first_char) as usize) {
                return w * self.width_scale;
            }
        }
        if let Some(table) = self.std_widths {
            if (32..127).contains(&code) {
                return table[(code - 32) as usize] as f64;
            }
        }
        if self.missing_width > 0.0 {
            self.missing_width
        } else {
            500.0
        }
    }
}

fn default_encoding(
    subtype: &str,
    base_font: &str,
    dict: &Dict,
    doc: &PdfDocument<'_>,
) -> BaseEncoding {
    let symbolic = doc
        .resolve_dict(dict.get("FontDescriptor"))
        .and_then(|fd| fd.get("Flags").and_then(Object::as_i64))
        .map(|f| f & 4 != 0 && f & 32 == 0)
        .unwrap_or(false);
    let base = base_font.split('+').next_back().unwrap_or(base_font);
    if base.starts_with("Symbol") || base.starts_with("ZapfDingbats") {
        return BaseEncoding::Identity;
    }
    match subtype {
        "TrueType" if symbolic => BaseEncoding::Identity,
        "TrueType" => BaseEncoding::WinAnsi,
        _ if symbolic => BaseEncoding::Standard,
        _ => BaseEncoding::Standard,
    }
}

fn simple_table(enc: BaseEncoding) -> [Option<String>; 256] {
    std::array::from_fn(|code| enc.decode(code as u8).map(|c| c.to_string()))
}

fn apply_differences(table: &mut [Option<String>; 256], diffs: &[Object]) {
    let mut code: i64 = 0;
    for item in diffs {
        match item {
            Object::Int(c) => code = *c,
            Object::Name(n) => {
                if (0..256).contains(&code) {
                    table[code as usize] = glyph_to_text(n);
                }
                code += 1;
            }
            _ => {}
        }
    }
}

fn parse_cid_widths(doc: &PdfDocument<'_>, w: &[Object], out: &mut HashMap<u32, f64>) {
    let items: Vec<Object> = w.iter().map(|o| doc.resolve(o)).collect();
    let mut i = 0;
    while i < items.len() {
        let Some(first) = items[i].as_i64() else {
            i += 1;
            continue;
        };
        match items.get(i + 1) {
            Some(Object::Array(ws)) => {
                for (k, wv) in ws.iter().enumerate() {
                    if let Some(v) = wv.as_f64() {
                        out.insert(first as u32 + k as u32, v);
                    }
                }
                i += 2;
            }
            Some(last) if last.as_i64().is_some() => {
                let last = last.as_i64().unwrap_or(first);
                let v = items.get(i + 2).and_then(Object::as_f64).unwrap_or(1000.0);
                if last >= first && last - first < 65536 {
                    for cid in first..=last {
                        out.insert(cid as u32, v);
                    }
                }
                i += 3;
            }
            _ => i += 1,
        }
    }
}

const HELVETICA: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 222, 333, 333, 389, 584, 278, 333, 278, 278, 556, 556, 556,
    556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556, 1015, 667, 667, 722, 722, 667,
    611, 778, 722, 278, 500, 667, 556, 833, 722, 778, 667, 778, 722, 667, 611, 722, 667, 944, 667,
    667, 611, 278, 278, 278, 469, 556, 222, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500,
    222, 833, 556, 556, 556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584,
];

const TIMES_ROMAN: [u16; 95] = [
    250, 333, 408, 500, 500, 833, 778, 333, 333, 333, 500, 564, 250, 333, 250, 278, 500, 500, 500,
    500, 500, 500, 500, 500, 500, 500, 278, 278, 564, 564, 564, 444, 921, 722, 667, 667, 722, 611,
    556, 722, 722, 333, 389, 722, 611, 889, 722, 722, 556, 722, 667, 556, 611, 722, 722, 944, 722,
    722, 611, 333, 278, 333, 469, 500, 333, 444, 500, 444, 500, 444, 333, 500, 500, 278, 278, 500,
    278, 778, 500, 500, 500, 500, 333, 389, 278, 500, 500, 722, 500, 500, 444, 480, 200, 480, 541,
];

const COURIER: [u16; 95] = [600; 95];

/// Advance widths for the standard 14 fonts (regular weights stand in for
/// bold/italic variants) over printable ASCII.
pub fn standard_widths(base_font: &str) -> Option<&'static [u16; 95]> {
    let base = base_font.split('+').next_back().unwrap_or(base_font);
    if base.starts_with("Helvetica") || base.starts_with("Arial") {
        Some(&HELVETICA)
    } else if base.starts_with("Times") {
        Some(&TIMES_ROMAN)
    } else if base.starts_with("Courier") {
        Some(&COURIER)
    } else {
        None
    }
}
