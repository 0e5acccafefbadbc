//! Small PDF writer for generating fixtures: positioned text in the base-14
//! Helvetica font, optionally compressed, with a classic or stream xref.

use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;

#[derive(Debug, Clone, PartialEq)]
pub struct TextItem {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageSpec {
    pub width: f64,
    pub height: f64,
    pub items: Vec<TextItem>,
}

impl PageSpec {
    pub fn letter(items: Vec<TextItem>) -> Self {
        PageSpec {
            width: 612.0,
            height: 792.0,
            items,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TextEncoding {
    /// Single-byte WinAnsi literal strings shown with `Tj`.
    #[default]
    WinAnsi,
    /// Same, but each word is shown from a `TJ` array with kerning gaps.
    WinAnsiTjArray,
    /// Type0 font with Identity-H codes and a ToUnicode CMap; supports any
    /// Unicode text.
    IdentityToUnicode,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WriterOptions {
    pub compress: bool,
    pub xref_stream: bool,
    pub encoding: TextEncoding,
    /// Adds a standard-security `/Encrypt` dictionary (content is left in
    /// the clear; only useful to exercise rejection).
    pub encrypt: bool,
}

fn escape_literal(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len() + 2);
    out.push(b'(');
    for &b in bytes {
        if matches!(b, b'(' | b')' | b'\\') {
            out.push(b'\\');
        }
        out.push(b);
    }
    out.push(b')');
    out
}

fn win_ansi_bytes(text: &str) -> Vec<u8> {
    text.chars()
        .map(|c| match c {
            '\u{20}'..='\u{7e}' => c as u8,
            '\u{a0}'..='\u{ff}' => c as u32 as u8,
            '‘' => 0x91,
            '’' => 0x92,
            '“' => 0x93,
            '”' => 0x94,
            '–' => 0x96,
            '—' => 0x97,
            _ => b'?',
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

struct Glyphs {
    chars: Vec<char>,
}

impl Glyphs {
    fn code(&mut self, c: char) -> u16 {
        match self.chars.iter().position(|x| *x == c) {
            Some(i) => i as u16 + 1,
            None => {
                self.chars.push(c);
                self.chars.len() as u16
            }
        }
    }
}

fn content_stream(page: &PageSpec, enc: TextEncoding, glyphs: &mut Glyphs) -> Vec<u8> {
    let mut out = Vec::new();
    for item in &page.items {
        let _ = write!(
            out,
            "BT\n/F1 {} Tf\n1 0 0 1 {} {} Tm\n",
            fmt_num(item.size),
            fmt_num(item.x),
            fmt_num(item.y)
        );
        match enc {
            TextEncoding::WinAnsi => {
                out.extend_from_slice(&escape_literal(&win_ansi_bytes(&item.text)));
                out.extend_from_slice(b" Tj\n");
            }
            TextEncoding::WinAnsiTjArray => {
                out.push(b'[');
                for (i, word) in item.text.split(' ').enumerate() {
                    if i > 0 {
                        out.extend_from_slice(b" -278 ");
                    }
                    out.extend_from_slice(&escape_literal(&win_ansi_bytes(word)));
                }
                out.extend_from_slice(b"] TJ\n");
            }
            TextEncoding::IdentityToUnicode => {
                out.push(b'<');
                for c in item.text.chars() {
                    let _ = write!(out, "{:04X}", glyphs.code(c));
                }
                out.extend_from_slice(b"> Tj\n");
            }
        }
        out.extend_from_slice(b"ET\n");
    }
    out
}

fn to_unicode_cmap(glyphs: &Glyphs) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(
        b"/CIDInit /ProcSet findresource begin\n12 dict begin\nbegincmap\n\
/CMapName /Fixture-UCS def\n/CMapType 2 def\n\
1 begincodespacerange\n<0000> <FFFF>\nendcodespacerange\n",
    );
    for chunk in glyphs.chars.chunks(100).enumerate() {
        let (block, chars) = chunk;
        let _ = writeln!(out, "{} beginbfchar", chars.len());
        for (i, c) in chars.iter().enumerate() {
            let code = block * 100 + i + 1;
            let mut units = [0u16; 2];
            let hex: String = c
                .encode_utf16(&mut units)
                .iter()
                .map(|u| format!("{u:04X}"))
                .collect();
            let _ = writeln!(out, "<{code:04X}> <{hex}>");
        }
        out.extend_from_slice(b"endbfchar\n");
    }
    out.extend_from_slice(b"endcmap\nCMapName currentdict /CMap defineresource pop\nend\nend\n");
    out
}

fn deflate(data: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(data).expect("in-memory write");
    enc.finish().expect("in-memory write")
}

struct Builder {
    buf: Vec<u8>,
    offsets: Vec<usize>,
}

impl Builder {
    fn object(&mut self, num: usize, body: &[u8]) {
        if self.offsets.len() <= num {
            self.offsets.resize(num + 1, 0);
        }
        self.offsets[num] = self.buf.len();
        let _ = writeln!(self.buf, "{num} 0 obj");
        self.buf.extend_from_slice(body);
        self.buf.extend_from_slice(b"\nendobj\n");
    }

    fn stream(&mut self, num: usize, extra_dict: &str, data: &[u8], compress: bool) {
        let (data, filter) = if compress {
            (deflate(data), " /Filter /FlateDecode")
        } else {
            (data.to_vec(), "")
        };
        let mut body = format!("<< /Length {}{}{} >>\nstream\n", data.len(), filter, extra_dict)
            .into_bytes();
        body.extend_from_slice(&data);
        body.extend_from_slice(b"\nendstream");
        self.object(num, &body);
    }
}

/// Serialises pages into a complete PDF file.
pub fn write_pdf(pages: &[PageSpec], opts: &WriterOptions) -> Vec<u8> {
    let mut b = Builder {
        buf: b"%PDF-1.5\n%\xe2\xe3\xcf\xd3\n".to_vec(),
        offsets: vec![0],
    };
    let mut glyphs = Glyphs { chars: Vec::new() };
    let first_page_obj = 4;
    let kids: Vec<String> = (0..pages.len())
        .map(|i| format!("{} 0 R", first_page_obj + 2 * i))
        .collect();
    b.object(1, b"<< /Type /Catalog /Pages 2 0 R >>");
    b.object(
        2,
        format!(
            "<< /Type /Pages /Kids [{}] /Count {} >>",
            kids.join(" "),
            pages.len()
        )
        .as_bytes(),
    );
    for (i, page) in pages.iter().enumerate() {
        let page_obj = first_page_obj + 2 * i;
        let content_obj = page_obj + 1;
        b.object(
            page_obj,
            format!(
                "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {} {}] \
/Resources << /Font << /F1 3 0 R >> >> /Contents {} 0 R >>",
                fmt_num(page.width),
                fmt_num(page.height),
                content_obj
            )
            .as_bytes(),
        );
        let content = content_stream(page, opts.encoding, &mut glyphs);
        b.stream(content_obj, "", &content, opts.compress);
    }
    let mut next = first_page_obj + 2 * pages.len();
    match opts.encoding {
        TextEncoding::WinAnsi | TextEncoding::WinAnsiTjArray => {
            let widths: Vec<String> = crate::font::standard_widths("Helvetica")
                .expect("helvetica widths")
                .iter()
                .map(|w| w.to_string())
                .collect();
            b.object(
                3,
                format!(
                    "<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica \
/Encoding /WinAnsiEncoding /FirstChar 32 /LastChar 126 /Widths [{}] >>",
                    widths.join(" ")
                )
                .as_bytes(),
            );
        }
        TextEncoding::IdentityToUnicode => {
            let descendant = next;
            let cmap = next + 1;
            next += 2;
            b.object(
                3,
                format!(
                    "<< /Type /Font /Subtype /Type0 /BaseFont /FixtureSans \
/Encoding /Identity-H /DescendantFonts [{descendant} 0 R] /ToUnicode {cmap} 0 R >>"
                )
                .as_bytes(),
            );
            b.object(
                descendant,
                b"<< /Type /Font /Subtype /CIDFontType2 /BaseFont /FixtureSans \
/CIDSystemInfo << /Registry (Adobe) /Ordering (Identity) /Supplement 0 >> /DW 500 >>",
            );
            b.stream(cmap, "", &to_unicode_cmap(&glyphs), opts.compress);
        }
    }
    let mut trailer_extra = String::new();
    if opts.encrypt {
        let enc_obj = next;
        next += 1;
        b.object(
            enc_obj,
            b"<< /Filter /Standard /V 1 /R 2 /O <00> /U <00> /P -4 >>",
        );
        trailer_extra = format!(
            " /Encrypt {enc_obj} 0 R /ID [<0123456789ABCDEF> <0123456789ABCDEF>]"
        );
    }
    if opts.xref_stream {
        let xref_obj = next;
        let size = xref_obj + 1;
        b.offsets.resize(size, 0);
        let xref_offset = b.buf.len();
        b.offsets[xref_obj] = xref_offset;
        let mut rows = Vec::with_capacity(size * 7);
        for (num, off) in b.offsets.iter().enumerate() {
            if num == 0 {
                rows.extend_from_slice(&[0, 0, 0, 0, 0, 0xff, 0xff]);
            } else {
                rows.push(1);
                rows.extend_from_slice(&(*off as u32).to_be_bytes());
                rows.extend_from_slice(&[0, 0]);
            }
        }
        let dict = format!(" /Type /XRef /Size {size} /W [1 4 2] /Root 1 0 R{trailer_extra}");
        b.stream(xref_obj, &dict, &rows, opts.compress);
        let _ = write!(b.buf, "startxref\n{xref_offset}\n%%EOF\n");
    } else {
        let xref_offset = b.buf.len();
        let size = next;
        b.offsets.resize(size, 0);
        let _ = write!(b.buf, "xref\n0 {size}\n0000000000 65535 f \n");
        for off in &b.offsets[1..] {
            let _ = writeln!(b.buf, "{off:010} 00000 n ");
        }
        let _ = write!(
            b.buf,
            "trailer\n<< /Size {size} /Root 1 0 R{trailer_extra} >>\nstartxref\n{xref_offset}\n%%EOF\n"
        );
    }
    b.buf
}

/// Lays out paragraphs top-to-bottom in 11pt text, wrapping at `wrap`
/// characters on spaces, with a blank line between paragraphs. A paragraph
/// that does not fit on the current page starts a new one.
pub fn layout_paragraphs(paragraphs: &[String], wrap: usize) -> Vec<PageSpec> {
    const SIZE: f64 = 11.0;
    const LEADING: f64 = 13.2;
    const TOP: f64 = 740.0;
    const BOTTOM: f64 = 60.0;
    let mut pages = Vec::new();
    let mut items = Vec::new();
    let mut y = TOP;
    for (pi, para) in paragraphs.iter().enumerate() {
        let lines = wrap_text(para, wrap);
        if pi > 0 && !items.is_empty() {
            y -= LEADING;
        }
        // Keep a paragraph on one page when it fits on a fresh one.
        let needed = LEADING * (lines.len() as f64 - 1.0);
        if !items.is_empty() && y - needed < BOTTOM && TOP - needed >= BOTTOM {
            pages.push(PageSpec::letter(std::mem::take(&mut items)));
            y = TOP;
        }
        for line in lines {
            if y < BOTTOM {
                pages.push(PageSpec::letter(std::mem::take(&mut items)));
                y = TOP;
            }
            items.push(TextItem {
                x: 72.0,
                y,
                size: SIZE,
                text: line,
            });
            y -= LEADING;
        }
    }
    if !items.is_empty() || pages.is_empty() {
        pages.push(PageSpec::letter(items));
    }
    pages
}

fn wrap_text(text: &str, wrap: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        if !cur.is_empty() && cur.chars().count() + 1 + word.chars().count() > wrap {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}
