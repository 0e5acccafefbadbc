//! Content stream interpretation: text-showing and positioning operators
//! produce positioned text spans in user space.

use std::collections::HashMap;
use std::rc::Rc;

use crate::document::PdfDocument;
use crate::font::Font;
use crate::object::{Dict, Object, Parser, Token};

type Matrix = [f64; 6];

const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
        a[4] * b[0] + a[5] * b[2] + b[4],
        a[4] * b[1] + a[5] * b[3] + b[5],
    ]
}

fn translate(tx: f64, ty: f64) -> Matrix {
    [1.0, 0.0, 0.0, 1.0, tx, ty]
}

/// A run of text shown by one operator, positioned on its baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSpan {
    pub x0: f64,
    pub x1: f64,
    pub y: f64,
    /// Effective (rendered) font size.
    pub size: f64,
    pub text: String,
}

#[derive(Clone)]
struct GraphicsState {
    ctm: Matrix,
    font: Option<Rc<Font>>,
    font_size: f64,
    char_spacing: f64,
    word_spacing: f64,
    h_scale: f64,
    leading: f64,
    rise: f64,
}

impl Default for GraphicsState {
    fn default() -> Self {
        GraphicsState {
            ctm: IDENTITY,
            font: None,
            font_size: 0.0,
            char_spacing: 0.0,
            word_spacing: 0.0,
            h_scale: 1.0,
            leading: 0.0,
            rise: 0.0,
        }
    }
}

/// Space inserted for a TJ displacement larger than this fraction of an em.
const TJ_SPACE_THRESHOLD: f64 = 0.15;
const MAX_FORM_DEPTH: usize = 8;

pub struct Interpreter<'d, 'a> {
    doc: &'d PdfDocument<'a>,
    gs: GraphicsState,
    stack: Vec<GraphicsState>,
    tm: Matrix,
    tlm: Matrix,
    fonts: HashMap<String, Rc<Font>>,
    pub spans: Vec<TextSpan>,
    pub warnings: Vec<String>,
    pub text_ops: usize,
    unmapped: usize,
}

impl<'d, 'a> Interpreter<'d, 'a> {
    pub fn new(doc: &'d PdfDocument<'a>) -> Self {
        Interpreter {
            doc,
            gs: GraphicsState::default(),
            stack: Vec::new(),
            tm: IDENTITY,
            tlm: IDENTITY,
            fonts: HashMap::new(),
            spans: Vec::new(),
            warnings: Vec::new(),
            text_ops: 0,
            unmapped: 0,
        }
    }

    pub fn run_page(&mut self, content: &[u8], resources: &Dict) {
        self.run(content, resources, 0);
        if self.unmapped > 0 {
            self.warnings.push(format!(
                "{} glyph codes had no Unicode mapping (emitted as U+FFFD)",
                self.unmapped
            ));
            self.unmapped = 0;
        }
    }

    fn run(&mut self, content: &[u8], resources: &Dict, depth: usize) {
        let mut p = Parser::new(content, 0);
        let mut operands: Vec<Object> = Vec::new();
        loop {
            match p.parse_object() {
                Ok(obj) => operands.push(obj),
                Err(None) => break,
                Err(Some(Token::Keyword(op))) => {
                    if op == b"BI" {
                        skip_inline_image(&mut p);
                    } else {
                        self.op(&op, &operands, resources, depth);
                    }
                    operands.clear();
                }
                Err(Some(_)) => operands.clear(),
            }
        }
    }

    fn font_for(&mut self, name: &str, resources: &Dict) -> Rc<Font> {
        let key = name.to_string();
        if let Some(f) = self.fonts.get(&key) {
            return f.clone();
        }
        let font_dict = self
            .doc
            .resolve_dict(resources.get("Font"))
            .and_then(|fonts| self.doc.resolve_dict(fonts.get(name)));
        let font = match font_dict {
            Some(d) => Font::load(self.doc, &d, &mut self.warnings),
            None => {
                self.warnings
                    .push(format!("font /{name} not found in resources; using fallback"));
                Font::fallback()
            }
        };
        let font = Rc::new(font);
        self.fonts.insert(key, font.clone());
        font
    }

    fn op(&mut self, op: &[u8], args: &[Object], resources: &Dict, depth: usize) {
        let num = |i: usize| args.get(i).and_then(Object::as_f64).unwrap_or(0.0);
        match op {
            b"q" => self.stack.push(self.gs.clone()),
            b"Q" => {
                if let Some(g) = self.stack.pop() {
                    self.gs = g;
                }
            }
            b"cm" if args.len() >= 6 => {
                let m = [num(0), num(1), num(2), num(3), num(4), num(5)];
                self.gs.ctm = mul(&m, &self.gs.ctm);
            }
            b"BT" => {
                self.tm = IDENTITY;
                self.tlm = IDENTITY;
            }
            b"ET" => {}
            b"Tf" => {
                if let Some(name) = args.first().and_then(Object::as_name) {
                    let f = self.font_for(name, resources);
                    self.gs.font = Some(f);
                }
                self.gs.font_size = num(1);
            }
            b"Tc" => self.gs.char_spacing = num(0),
            b"Tw" => self.gs.word_spacing = num(0),
            b"Tz" => self.gs.h_scale = num(0) / 100.0,
            b"TL" => self.gs.leading = num(0),
            b"Ts" => self.gs.rise = num(0),
            b"Td" => self.next_line(num(0), num(1)),
            b"TD" => {
                self.gs.leading = -num(1);
                self.next_line(num(0), num(1));
            }
            b"Tm" if args.len() >= 6 => {
                self.tm = [num(0), num(1), num(2), num(3), num(4), num(5)];
                self.tlm = self.tm;
            }
            b"T*" => self.next_line(0.0, -self.gs.leading),
            b"Tj" => {
                if let Some(Object::String(s)) = args.first() {
                    self.show(&[Object::String(s.clone())]);
                }
            }
            b"TJ" => {
                if let Some(Object::Array(items)) = args.first() {
                    self.show(items);
                }
            }
            b"'" => {
                self.next_line(0.0, -self.gs.leading);
                if let Some(Object::String(s)) = args.first() {
                    self.show(&[Object::String(s.clone())]);
                }
            }
            b"\"" => {
                self.gs.word_spacing = num(0);
                self.gs.char_spacing = num(1);
                self.next_line(0.0, -self.gs.leading);
                if let Some(Object::String(s)) = args.get(2) {
                    self.show(&[Object::String(s.clone())]);
                }
            }
            b"Do" => {
                if let Some(name) = args.first().and_then(Object::as_name) {
                    self.do_xobject(name, resources, depth);
                }
            }
            _ => {}
        }
    }

    fn next_line(&mut self, tx: f64, ty: f64) {
        self.tlm = mul(&translate(tx, ty), &self.tlm);
        self.tm = self.tlm;
    }

    fn show(&mut self, items: &[Object]) {
        self.text_ops += 1;
        let font = match &self.gs.font {
            Some(f) => f.clone(),
            None => {
                self.warnings
                    .push("text shown before any font was selected; using fallback".into());
                let f = Rc::new(Font::fallback());
                self.gs.font = Some(f.clone());
                f
            }
        };
        let fs = self.gs.font_size;
        let th = self.gs.h_scale;
        let start = self.render_matrix();
        let mut text = String::new();
        for item in items {
            match item {
                Object::String(bytes) => {
                    for g in font.decode(bytes) {
                        match g.text {
                            Some(t) => text.push_str(&t),
                            None => {
                                self.unmapped += 1;
                                text.push('\u{FFFD}');
                            }
                        }
                        let mut tx = g.width / 1000.0 * fs + self.gs.char_spacing;
                        if g.is_word_space {
                            tx += self.gs.word_spacing;
                        }
                        self.tm = mul(&translate(tx * th, 0.0), &self.tm);
                    }
                }
                other => {
                    let Some(adj) = other.as_f64() else { continue };
                    let tx = -adj / 1000.0 * fs * th;
                    self.tm = mul(&translate(tx, 0.0), &self.tm);
                    if -adj / 1000.0 > TJ_SPACE_THRESHOLD && !text.is_empty() && !text.ends_with(' ')
                    {
                        text.push(' ');
                    }
                }
            }
        }
        let end = self.render_matrix();
        if text.is_empty() {
            return;
        }
        let size = (start[2] * start[2] + start[3] * start[3]).sqrt();
        self.spans.push(TextSpan {
            x0: start[4].min(end[4]),
            x1: start[4].max(end[4]),
            y: start[5],
            size: if size > 0.0 { size } else { fs.abs().max(1.0) },
            text,
        });
    }

    fn render_matrix(&self) -> Matrix {
        let fs = self.gs.font_size;
        let params = [fs * self.gs.h_scale, 0.0, 0.0, fs, 0.0, self.gs.rise];
        mul(&mul(&params, &self.tm), &self.gs.ctm)
    }

    fn do_xobject(&mut self, name: &str, resources: &Dict, depth: usize) {
        let Some(xobjects) = self.doc.resolve_dict(resources.get("XObject")) else {
            return;
        };
        let Some(Object::Stream(s)) = xobjects.get(name).map(|x| self.doc.resolve(x)) else {
            return;
        };
        if s.dict.get("Subtype").and_then(Object::as_name) != Some("Form") {
            return;
        }
        if depth >= MAX_FORM_DEPTH {
            self.warnings.push("form XObjects nested too deeply; skipped".into());
            return;
        }
        let content = match self.doc.decode(&s) {
            Ok(c) => c,
            Err(e) => {
                self.warnings.push(format!("form XObject /{name} unreadable: {e}"));
                return;
            }
        };
        let matrix = s
            .dict
            .get("Matrix")
            .and_then(Object::as_array)
            .filter(|a| a.len() == 6)
            .map(|a| {
                let v: Vec<f64> = a.iter().map(|o| o.as_f64().unwrap_or(0.0)).collect();
                [v[0], v[1], v[2], v[3], v[4], v[5]]
            })
            .unwrap_or(IDENTITY);
        let form_resources = self
            .doc
            .resolve_dict(s.dict.get("Resources"))
            .unwrap_or_else(|| resources.clone());
        let saved = (self.gs.clone(), self.tm, self.tlm, self.stack.len());
        self.gs.ctm = mul(&matrix, &self.gs.ctm);
        // Fonts are resolved per resource dictionary.
        let saved_fonts = std::mem::take(&mut self.fonts);
        self.run(&content, &form_resources, depth + 1);
        self.fonts = saved_fonts;
        self.gs = saved.0;
        self.tm = saved.1;
        self.tlm = saved.2;
        self.stack.truncate(saved.3);
    }
}

/// Skips `BI <dict> ID <data> EI`; the parser is positioned after `BI`.
fn skip_inline_image(p: &mut Parser<'_>) {
    loop {
        match p.lex.next_token() {
            None => return,
            Some(Token::Keyword(k)) if k == b"ID" => break,
            Some(_) => {}
        }
    }
    let data = p.lex.data;
    let mut i = p.lex.pos + 1;
    while i + 2 <= data.len() {
        if &data[i..i + 2] == b"EI"
            && data[i - 1].is_ascii_whitespace()
            && data.get(i + 2).is_none_or(|b| b.is_ascii_whitespace())
        {
            p.lex.pos = i + 2;
            return;
        }
        i += 1;
    }
    p.lex.pos = data.len();
}
