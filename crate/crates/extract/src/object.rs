//! PDF object model and the tokenizer/parser shared by file and content
//! stream parsing.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjRef {
    pub num: u32,
    pub gen: u16,
}

pub type Dict = BTreeMap<String, Object>;

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub dict: Dict,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    String(Vec<u8>),
    Name(String),
    Array(Vec<Object>),
    Dict(Dict),
    Stream(Stream),
    Ref(ObjRef),
}

impl Object {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Object::Int(i) => Some(*i as f64),
            Object::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Object::Int(i) => Some(*i),
            Object::Real(r) => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_name(&self) -> Option<&str> {
        match self {
            Object::Name(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&Dict> {
        match self {
            Object::Dict(d) => Some(d),
            Object::Stream(s) => Some(&s.dict),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Object]> {
        match self {
            Object::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_reference(&self) -> Option<ObjRef> {
        match self {
            Object::Ref(r) => Some(*r),
            _ => None,
        }
    }
}

pub(crate) fn is_whitespace(b: u8) -> bool {
    matches!(b, 0 | 9 | 10 | 12 | 13 | 32)
}

pub(crate) fn is_delimiter(b: u8) -> bool {
    matches!(
        b,
        b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%'
    )
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Int(i64),
    Real(f64),
    String(Vec<u8>),
    Name(String),
    ArrayStart,
    ArrayEnd,
    DictStart,
    DictEnd,
    BraceStart,
    BraceEnd,
    Keyword(Vec<u8>),
}

/// Byte-level tokenizer over a PDF buffer.
pub(crate) struct Lexer<'a> {
    pub data: &'a [u8],
    pub pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(data: &'a [u8], pos: usize) -> Self {
        Lexer { data, pos }
    }

    pub fn skip_ws(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while self.pos < self.data.len()
                    && self.data[self.pos] != b'\n'
                    && self.data[self.pos] != b'\r'
                {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    pub fn peek_token(&mut self) -> Option<Token> {
        let save = self.pos;
        let t = self.next_token();
        self.pos = save;
        t
    }

    pub fn next_token(&mut self) -> Option<Token> {
        self.skip_ws();
        let b = *self.data.get(self.pos)?;
        match b {
            b'[' => {
                self.pos += 1;
                Some(Token::ArrayStart)
            }
            b']' => {
                self.pos += 1;
                Some(Token::ArrayEnd)
            }
            b'{' => {
                self.pos += 1;
                Some(Token::BraceStart)
            }
            b'}' => {
                self.pos += 1;
                Some(Token::BraceEnd)
            }
            b'<' => {
                if self.data.get(self.pos + 1) == Some(&b'<') {
                    self.pos += 2;
                    Some(Token::DictStart)
                } else {
                    self.pos += 1;
                    Some(Token::String(self.hex_string()))
                }
            }
            b'>' => {
                if self.data.get(self.pos + 1) == Some(&b'>') {
                    self.pos += 2;
                    Some(Token::DictEnd)
                } else {
                    self.pos += 1;
                    Some(Token::Keyword(b">".to_vec()))
                }
            }
            b'(' => {
                self.pos += 1;
                Some(Token::String(self.literal_string()))
            }
            b'/' => {
                self.pos += 1;
                Some(Token::Name(self.name()))
            }
            b')' => {
                self.pos += 1;
                Some(Token::Keyword(b")".to_vec()))
            }
            _ => {
                let start = self.pos;
                while self.pos < self.data.len() && is_regular(self.data[self.pos]) {
                    self.pos += 1;
                }
                let word = &self.data[start..self.pos];
                Some(parse_number(word).unwrap_or_else(|| Token::Keyword(word.to_vec())))
            }
        }
    }

    fn hex_string(&mut self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut high: Option<u8> = None;
        while let Some(&b) = self.data.get(self.pos) {
            self.pos += 1;
            if b == b'>' {
                break;
            }
            let v = match b {
                b'0'..=b'9' => b - b'0',
                b'a'..=b'f' => b - b'a' + 10,
                b'A'..=b'F' => b - b'A' + 10,
                _ => continue,
            };
            match high.take() {
                Some(h) => out.push(h << 4 | v),
                None => high = Some(v),
            }
        }
        if let Some(h) = high {
            out.push(h << 4);
        }
        out
    }

    fn literal_string(&mut self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut depth = 1usize;
        while let Some(&b) = self.data.get(self.pos) {
            self.pos += 1;
            match b {
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                    out.push(b);
                }
                b'\\' => {
                    let Some(&e) = self.data.get(self.pos) else {
                        break;
                    };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(8),
                        b'f' => out.push(12),
                        b'\r' => {
                            if self.data.get(self.pos) == Some(&b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.data.get(self.pos) {
                                    Some(&d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((v & 0xff) as u8);
                        }
                        other => out.push(other),
                    }
                }
                b'\r' => {
                    // EOL inside a literal string normalises to \n.
                    if self.data.get(self.pos) == Some(&b'\n') {
                        self.pos += 1;
                    }
                    out.push(b'\n');
                }
                _ => out.push(b),
            }
        }
        out
    }

    fn name(&mut self) -> String {
        let mut out = Vec::new();
        while let Some(&b) = self.data.get(self.pos) {
            if !is_regular(b) {
                break;
            }
            self.pos += 1;
            if b == b'#' {
                let hex = self.data.get(self.pos..self.pos + 2);
                if let Some(Ok(v)) = hex
                    .and_then(|h| std::str::from_utf8(h).ok())
                    .map(|h| u8::from_str_radix(h, 16))
                {
                    out.push(v);
                    self.pos += 2;
                    continue;
                }
            }
            out.push(b);
        }
        String::from_utf8_lossy(&out).into_owned()
    }
}

fn parse_number(word: &[u8]) -> Option<Token> {
    if word.is_empty() {
        return None;
    }
    let s = std::str::from_utf8(word).ok()?;
    let first = s.as_bytes()[0];
    if !(first.is_ascii_digit() || matches!(first, b'+' | b'-' | b'.')) {
        return None;
    }
    if !s
        .bytes()
        .all(|c| c.is_ascii_digit() || matches!(c, b'+' | b'-' | b'.'))
    {
        return None;
    }
    if !s.contains('.') {
        if let Ok(i) = s.parse::<i64>() {
            return Some(Token::Int(i));
        }
    }
    // Tolerate producer quirks such as "--5" or "5." or "-.5".
    let cleaned: String = {
        let mut t = s.trim_start_matches('+').to_string();
        while t.starts_with("--") {
            t.remove(0);
        }
        t
    };
    if cleaned == "-" || cleaned == "." || cleaned == "-." || cleaned.is_empty() {
        return Some(Token::Real(0.0));
    }
    cleaned.parse::<f64>().ok().map(Token::Real)
}

/// Object parser layered on the lexer. Stream bodies are handled by the
/// document loader, which knows how to resolve `/Length`.
pub(crate) struct Parser<'a> {
    pub lex: Lexer<'a>,
    depth: usize,
}

const MAX_DEPTH: usize = 256;

impl<'a> Parser<'a> {
    pub fn new(data: &'a [u8], pos: usize) -> Self {
        Parser {
            lex: Lexer::new(data, pos),
            depth: 0,
        }
    }

    /// Parses one object. Returns `Err(token)` with the offending keyword
    /// when a bare keyword is found instead of an object.
    pub fn parse_object(&mut self) -> Result<Object, Option<Token>> {
        let tok = self.lex.next_token().ok_or(None)?;
        self.object_from_token(tok)
    }

    fn object_from_token(&mut self, tok: Token) -> Result<Object, Option<Token>> {
        match tok {
            Token::Int(i) => {
                // Possible indirect reference "num gen R".
                let save = self.lex.pos;
                if i >= 0 {
                    if let Some(Token::Int(g)) = self.lex.next_token() {
                        if let Some(Token::Keyword(k)) = self.lex.next_token() {
                            if k == b"R" && (0..=65535).contains(&g) {
                                return Ok(Object::Ref(ObjRef {
                                    num: i as u32,
                                    gen: g as u16,
                                }));
                            }
                        }
                    }
                }
                self.lex.pos = save;
                Ok(Object::Int(i))
            }
            Token::Real(r) => Ok(Object::Real(r)),
            Token::String(s) => Ok(Object::String(s)),
            Token::Name(n) => Ok(Object::Name(n)),
            Token::ArrayStart => {
                self.enter()?;
                let mut items = Vec::new();
                loop {
                    match self.lex.next_token() {
                        None => break,
                        Some(Token::ArrayEnd) => break,
                        Some(t) => match self.object_from_token(t) {
                            Ok(o) => items.push(o),
                            Err(_) => continue,
                        },
                    }
                }
                self.depth -= 1;
                Ok(Object::Array(items))
            }
            Token::DictStart => {
                self.enter()?;
                let d = self.dict_body();
                self.depth -= 1;
                Ok(Object::Dict(d))
            }
            Token::Keyword(k) => match k.as_slice() {
                b"null" => Ok(Object::Null),
                b"true" => Ok(Object::Bool(true)),
                b"false" => Ok(Object::Bool(false)),
                _ => Err(Some(Token::Keyword(k))),
            },
            other => Err(Some(other)),
        }
    }

    fn enter(&mut self) -> Result<(), Option<Token>> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(None);
        }
        Ok(())
    }

    fn dict_body(&mut self) -> Dict {
        let mut d = Dict::new();
        loop {
            match self.lex.next_token() {
                None | Some(Token::DictEnd) => break,
                Some(Token::Name(key)) => {
                    let Some(t) = self.lex.peek_token() else { break };
                    if t == Token::DictEnd {
                        d.insert(key, Object::Null);
                        continue;
                    }
                    let Some(t) = self.lex.next_token() else { break };
                    if let Ok(v) = self.object_from_token(t) {
                        d.insert(key, v);
                    }
                }
                // Skip junk between entries.
                Some(_) => continue,
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &[u8]) -> Object {
        Parser::new(src, 0).parse_object().unwrap()
    }

    #[test]
    fn literal_string_escapes() {
        assert_eq!(
            parse(br"(a\(b\)c\\ \101\n(nested))"),
            Object::String(b"a(b)c\\ A\n(nested)".to_vec())
        );
    }

    #[test]
    fn hex_string_odd_length() {
        assert_eq!(parse(b"<48 6>"), Object::String(vec![0x48, 0x60]));
    }

    #[test]
    fn names_with_hex_escapes() {
        assert_eq!(parse(b"/A#20B"), Object::Name("A B".into()));
    }

    #[test]
    fn dict_with_refs_and_arrays() {
        let o = parse(b"<< /Type /Page /Kids [1 0 R 2 0 R] /N -3.5 /B true /Z null >>");
        let d = o.as_dict().unwrap();
        assert_eq!(d["Type"], Object::Name("Page".into()));
        assert_eq!(
            d["Kids"],
            Object::Array(vec![
                Object::Ref(ObjRef { num: 1, gen: 0 }),
                Object::Ref(ObjRef { num: 2, gen: 0 })
            ])
        );
        assert_eq!(d["N"], Object::Real(-3.5));
        assert_eq!(d["B"], Object::Bool(true));
        assert_eq!(d["Z"], Object::Null);
    }

    #[test]
    fn ints_not_followed_by_r_stay_ints() {
        assert_eq!(
            parse(b"[1 2 3]"),
            Object::Array(vec![Object::Int(1), Object::Int(2), Object::Int(3)])
        );
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(parse(b"% hi\n 42"), Object::Int(42));
    }

    #[test]
    fn odd_reals() {
        assert_eq!(parse(b".5"), Object::Real(0.5));
        assert_eq!(parse(b"-.25"), Object::Real(-0.25));
        assert_eq!(parse(b"4."), Object::Real(4.0));
    }
}
