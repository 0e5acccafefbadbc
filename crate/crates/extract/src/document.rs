//! File structure: trailer, cross-reference tables and streams, object
//! streams, and the page tree.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{ExtractError, Result};
use crate::filters::{self, Filter, Predictor};
use crate::object::{is_whitespace, Dict, ObjRef, Object, Parser, Stream, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XrefEntry {
    Offset(usize),
    InStream { stream: u32, index: u32 },
}

/// A page with inherited attributes resolved.
#[derive(Debug, Clone)]
pub struct Page {
    pub dict: Dict,
    pub resources: Dict,
    /// `[llx lly urx ury]`; defaults to US Letter.
    pub media_box: [f64; 4],
}

pub struct PdfDocument<'a> {
    data: &'a [u8],
    xref: BTreeMap<u32, XrefEntry>,
    trailer: Dict,
    objstm_cache: RefCell<HashMap<u32, HashMap<u32, Object>>>,
    recovered: RefCell<Option<BTreeMap<u32, usize>>>,
    warnings: RefCell<Vec<String>>,
}

const MAX_RESOLVE_DEPTH: usize = 32;

impl<'a> PdfDocument<'a> {
    pub fn parse(data: &'a [u8]) -> Result<Self> {
        if !data.starts_with(b"%PDF-") {
            return Err(ExtractError::NotPdf);
        }
        let mut doc = PdfDocument {
            data,
            xref: BTreeMap::new(),
            trailer: Dict::new(),
            objstm_cache: RefCell::new(HashMap::new()),
            recovered: RefCell::new(None),
            warnings: RefCell::new(Vec::new()),
        };
        let loaded = doc.load_xref_chain();
        let usable = loaded.is_ok() && doc.trailer.contains_key("Root");
        if !usable {
            match &loaded {
                Err(e) => doc.warn(format!("xref unreadable ({e}); scanning for objects")),
                Ok(()) => doc.warn("trailer lacks /Root; scanning for objects".to_string()),
            }
            doc.rebuild_from_scan()?;
        }
        if doc.trailer.contains_key("Encrypt") {
            return Err(ExtractError::EncryptedUnsupported);
        }
        Ok(doc)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.borrow().clone()
    }

    pub(crate) fn warn(&self, msg: String) {
        let mut w = self.warnings.borrow_mut();
        if !w.contains(&msg) {
            w.push(msg);
        }
    }

    pub fn trailer(&self) -> &Dict {
        &self.trailer
    }

    fn load_xref_chain(&mut self) -> Result<()> {
        let start = find_startxref(self.data)
            .ok_or_else(|| ExtractError::MalformedPdf("startxref not found".into()))?;
        let mut next = Some(start);
        let mut seen = HashSet::new();
        let mut first = true;
        while let Some(off) = next.take() {
            if !seen.insert(off) || off >= self.data.len() {
                break;
            }
            let trailer = self.read_xref_section(off)?;
            if let Some(stm) = trailer.get("XRefStm").and_then(Object::as_i64) {
                if stm >= 0 && seen.insert(stm as usize) {
                    // Hybrid file: the stream supplements the classic table.
                    if let Err(e) = self.read_xref_section(stm as usize) {
                        self.warn(format!("ignored unreadable /XRefStm: {e}"));
                    }
                }
            }
            next = trailer
                .get("Prev")
                .and_then(Object::as_i64)
                .filter(|p| *p >= 0)
                .map(|p| p as usize);
            if first {
                self.trailer = trailer;
                first = false;
            } else {
                for (k, v) in trailer {
                    self.trailer.entry(k).or_insert(v);
                }
            }
        }
        if self.xref.is_empty() {
            return Err(ExtractError::MalformedPdf("empty cross-reference".into()));
        }
        Ok(())
    }

    /// Reads one xref section (classic table or stream) and returns its
    /// trailer dictionary. Entries already present are not overwritten, so
    /// newer sections (read first) win.
    fn read_xref_section(&mut self, off: usize) -> Result<Dict> {
        let mut p = Parser::new(self.data, off);
        match p.lex.peek_token() {
            Some(Token::Keyword(k)) if k == b"xref" => {
                p.lex.next_token();
                self.read_classic_table(p)
            }
            Some(Token::Int(_)) => {
                let obj = self.parse_indirect_at(off, None).map_err(|e| {
                    ExtractError::MalformedPdf(format!("bad xref stream at {off}: {e}"))
                })?;
                match obj {
                    Object::Stream(s) => self.read_xref_stream(s),
                    _ => Err(ExtractError::MalformedPdf(format!(
                        "object at {off} is not an xref stream"
                    ))),
                }
            }
            _ => Err(ExtractError::MalformedPdf(format!(
                "no xref at offset {off}"
            ))),
        }
    }

    fn read_classic_table(&mut self, mut p: Parser<'a>) -> Result<Dict> {
        loop {
            match p.lex.next_token() {
                Some(Token::Int(start)) => {
                    let Some(Token::Int(count)) = p.lex.next_token() else {
                        return Err(ExtractError::MalformedPdf("bad xref subsection".into()));
                    };
                    for i in 0..count.max(0) {
                        let (Some(Token::Int(offset)), Some(Token::Int(_gen)), Some(kind)) =
                            (p.lex.next_token(), p.lex.next_token(), p.lex.next_token())
                        else {
                            return Err(ExtractError::MalformedPdf("bad xref entry".into()));
                        };
                        let num = (start + i) as u32;
                        if kind == Token::Keyword(b"n".to_vec()) && offset > 0 {
                            self.xref
                                .entry(num)
                                .or_insert(XrefEntry::Offset(offset as usize));
                        }
                    }
                }
                Some(Token::Keyword(k)) if k == b"trailer" => {
                    return match p.parse_object() {
                        Ok(Object::Dict(d)) => Ok(d),
                        _ => Err(ExtractError::MalformedPdf("bad trailer dictionary".into())),
                    };
                }
                _ => return Err(ExtractError::MalformedPdf("xref table without trailer".into())),
            }
        }
    }

    fn read_xref_stream(&mut self, s: Stream) -> Result<Dict> {
        let data = self.decode(&s)?;
        let widths: Vec<usize> = s
            .dict
            .get("W")
            .and_then(Object::as_array)
            .ok_or_else(|| ExtractError::MalformedPdf("xref stream without /W".into()))?
            .iter()
            .map(|o| o.as_i64().unwrap_or(0).max(0) as usize)
            .collect();
        if widths.len() < 3 || widths.iter().any(|w| *w > 8) {
            return Err(ExtractError::MalformedPdf("bad xref /W".into()));
        }
        let size = s.dict.get("Size").and_then(Object::as_i64).unwrap_or(0);
        let index: Vec<i64> = match s.dict.get("Index").and_then(Object::as_array) {
            Some(a) => a.iter().filter_map(Object::as_i64).collect(),
            None => vec![0, size],
        };
        let row = widths[0] + widths[1] + widths[2];
        if row == 0 {
            return Err(ExtractError::MalformedPdf("zero-width xref rows".into()));
        }
        let mut rows = data.chunks_exact(row);
        for pair in index.chunks(2) {
            let [start, count] = pair else { break };
            for i in 0..*count {
                let Some(r) = rows.next() else { break };
                let field = |k: usize| -> u64 {
                    let begin: usize = widths[..k].iter().sum();
                    r[begin..begin + widths[k]]
                        .iter()
                        .fold(0u64, |acc, b| acc << 8 | *b as u64)
                };
                let kind = if widths[0] == 0 { 1 } else { field(0) };
                let num = (start + i) as u32;
                let entry = match kind {
                    1 => XrefEntry::Offset(field(1) as usize),
                    2 => XrefEntry::InStream {
                        stream: field(1) as u32,
                        index: field(2) as u32,
                    },
                    _ => continue,
                };
                self.xref.entry(num).or_insert(entry);
            }
        }
        Ok(s.dict)
    }

    /// Builds an object table by scanning for `N G obj` headers, used when the
    /// cross-reference data is missing or broken.
    fn rebuild_from_scan(&mut self) -> Result<()> {
        let table = scan_objects(self.data);
        if table.is_empty() {
            return Err(ExtractError::MalformedPdf(
                "no cross-reference or objects recoverable".into(),
            ));
        }
        for (num, off) in &table {
            self.xref.insert(*num, XrefEntry::Offset(*off));
        }
        // Prefer an explicit trailer, else locate the catalog.
        let mut trailer = Dict::new();
        let mut search_end = self.data.len();
        while let Some(pos) = rfind(&self.data[..search_end], b"trailer") {
            let mut p = Parser::new(self.data, pos + 7);
            if let Ok(Object::Dict(d)) = p.parse_object() {
                if d.contains_key("Root") {
                    trailer = d;
                    break;
                }
            }
            search_end = pos;
        }
        if !trailer.contains_key("Root") {
            let mut encrypt = None;
            for num in table.keys() {
                let r = ObjRef { num: *num, gen: 0 };
                if let Ok(obj) = self.get(r) {
                    if let Some(d) = obj.as_dict() {
                        match d.get("Type").and_then(Object::as_name) {
                            Some("Catalog") if !trailer.contains_key("Root") => {
                                trailer.insert("Root".into(), Object::Ref(r));
                            }
                            Some("XRef") => {
                                if let Some(e) = d.get("Encrypt") {
                                    encrypt = Some(e.clone());
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
            if let Some(e) = encrypt {
                trailer.insert("Encrypt".into(), e);
            }
        }
        if !trailer.contains_key("Root") {
            return Err(ExtractError::MalformedPdf("no document catalog found".into()));
        }
        self.trailer = trailer;
        *self.recovered.borrow_mut() = Some(table);
        Ok(())
    }

    /// Parses `N G obj ... endobj` at `off`. `expect` guards against stale
    /// offsets.
    fn parse_indirect_at(&self, off: usize, expect: Option<ObjRef>) -> Result<Object> {
        let mut p = Parser::new(self.data, off);
        let header = (p.lex.next_token(), p.lex.next_token(), p.lex.next_token());
        let (Some(Token::Int(num)), Some(Token::Int(_gen)), Some(Token::Keyword(k))) = header
        else {
            return Err(ExtractError::MalformedPdf(format!(
                "no object header at offset {off}"
            )));
        };
        if k != b"obj" {
            return Err(ExtractError::MalformedPdf(format!(
                "no object header at offset {off}"
            )));
        }
        if let Some(r) = expect {
            if num as u32 != r.num {
                return Err(ExtractError::MalformedPdf(format!(
                    "offset {off} holds object {num}, expected {}",
                    r.num
                )));
            }
        }
        let obj = p
            .parse_object()
            .map_err(|_| ExtractError::MalformedPdf(format!("bad object body at {off}")))?;
        let Object::Dict(dict) = obj else {
            return Ok(obj);
        };
        match p.lex.next_token() {
            Some(Token::Keyword(k)) if k == b"stream" => {
                let mut start = p.lex.pos;
                if self.data.get(start) == Some(&b'\r') {
                    start += 1;
                }
                if self.data.get(start) == Some(&b'\n') {
                    start += 1;
                }
                let data = self.stream_body(&dict, start);
                Ok(Object::Stream(Stream { dict, data }))
            }
            _ => Ok(Object::Dict(dict)),
        }
    }

    fn stream_body(&self, dict: &Dict, start: usize) -> Vec<u8> {
        let declared = match dict.get("Length") {
            Some(Object::Int(n)) => Some(*n),
            Some(Object::Ref(r)) => match self.xref.get(&r.num) {
                // Lengths in object streams would recurse; only direct offsets.
                Some(XrefEntry::Offset(off)) => self
                    .parse_indirect_at(*off, Some(*r))
                    .ok()
                    .and_then(|o| o.as_i64()),
                _ => None,
            },
            _ => None,
        };
        if let Some(len) = declared {
            if len >= 0 {
                let end = start + len as usize;
                if end <= self.data.len() && endstream_follows(&self.data[end..]) {
                    return self.data[start..end].to_vec();
                }
            }
        }
        // Fall back to scanning for the end marker.
        let rest = &self.data[start.min(self.data.len())..];
        let mut end = find(rest, b"endstream").unwrap_or(rest.len());
        if end >= 2 && &rest[end - 2..end] == b"\r\n" {
            end -= 2;
        } else if end >= 1 && matches!(rest[end - 1], b'\r' | b'\n') {
            end -= 1;
        }
        if declared.is_some() {
            self.warn("stream /Length inconsistent with data; used endstream marker".into());
        }
        rest[..end].to_vec()
    }

    /// Fetches an object by reference; missing objects resolve to `Null`.
    pub fn get(&self, r: ObjRef) -> Result<Object> {
        match self.xref.get(&r.num).copied() {
            Some(XrefEntry::Offset(off)) => match self.parse_indirect_at(off, Some(r)) {
                Ok(o) => Ok(o),
                Err(e) => match self.recovered_offset(r.num) {
                    Some(off2) if off2 != off => self.parse_indirect_at(off2, Some(r)),
                    _ => Err(e),
                },
            },
            Some(XrefEntry::InStream { stream, .. }) => self.get_from_objstm(r.num, stream),
            None => Ok(Object::Null),
        }
    }

    fn recovered_offset(&self, num: u32) -> Option<usize> {
        let mut rec = self.recovered.borrow_mut();
        if rec.is_none() {
            self.warn("some xref offsets were wrong; used object scan".into());
            *rec = Some(scan_objects(self.data));
        }
        rec.as_ref().and_then(|t| t.get(&num).copied())
    }

    fn get_from_objstm(&self, num: u32, stream: u32) -> Result<Object> {
        if let Some(objs) = self.objstm_cache.borrow().get(&stream) {
            return Ok(objs.get(&num).cloned().unwrap_or(Object::Null));
        }
        let container = self.get(ObjRef { num: stream, gen: 0 })?;
        let Object::Stream(s) = container else {
            return Err(ExtractError::MalformedPdf(format!(
                "object stream {stream} missing"
            )));
        };
        let data = self.decode(&s)?;
        let n = s.dict.get("N").and_then(Object::as_i64).unwrap_or(0).max(0) as usize;
        let first = s.dict.get("First").and_then(Object::as_i64).unwrap_or(0).max(0) as usize;
        let mut header = Parser::new(&data, 0);
        let mut offsets = Vec::with_capacity(n);
        for _ in 0..n {
            match (header.lex.next_token(), header.lex.next_token()) {
                (Some(Token::Int(o)), Some(Token::Int(off))) => offsets.push((o as u32, off as usize)),
                _ => break,
            }
        }
        let mut objs = HashMap::new();
        for (o, off) in offsets {
            let mut p = Parser::new(&data, first + off);
            if let Ok(obj) = p.parse_object() {
                objs.insert(o, obj);
            }
        }
        let result = objs.get(&num).cloned().unwrap_or(Object::Null);
        self.objstm_cache.borrow_mut().insert(stream, objs);
        Ok(result)
    }

    /// Follows references until a direct object is reached.
    pub fn resolve(&self, obj: &Object) -> Object {
        let mut cur = obj.clone();
        for _ in 0..MAX_RESOLVE_DEPTH {
            match cur {
                Object::Ref(r) => match self.get(r) {
                    Ok(o) => cur = o,
                    Err(e) => {
                        self.warn(format!("unresolvable object {} {}: {e}", r.num, r.gen));
                        return Object::Null;
                    }
                },
                other => return other,
            }
        }
        Object::Null
    }

    pub fn resolve_dict(&self, obj: Option<&Object>) -> Option<Dict> {
        match self.resolve(obj?) {
            Object::Dict(d) => Some(d),
            Object::Stream(s) => Some(s.dict),
            _ => None,
        }
    }

    pub(crate) fn filter_chain(&self, dict: &Dict) -> Result<Vec<Filter>> {
        let names: Vec<String> = match dict.get("Filter").map(|f| self.resolve(f)) {
            None | Some(Object::Null) => Vec::new(),
            Some(Object::Name(n)) => vec![n],
            Some(Object::Array(a)) => a
                .iter()
                .filter_map(|o| self.resolve(o).as_name().map(str::to_string))
                .collect(),
            Some(_) => return Err(ExtractError::MalformedPdf("bad /Filter".into())),
        };
        let parms: Vec<Option<Dict>> = match dict.get("DecodeParms").map(|p| self.resolve(p)) {
            Some(Object::Dict(d)) => vec![Some(d)],
            Some(Object::Array(a)) => a.iter().map(|o| self.resolve_dict(Some(o))).collect(),
            _ => Vec::new(),
        };
        names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let p = parms.get(i).cloned().flatten();
                Filter::from_name(name, predictor_from(p.as_ref()))
            })
            .collect()
    }

    /// Decodes a stream leniently (partial flate output is kept, with a warning).
    pub fn decode(&self, s: &Stream) -> Result<Vec<u8>> {
        let chain = self.filter_chain(&s.dict)?;
        let (data, note) = filters::decode_stream_lenient(&s.data, &chain)?;
        if let Some(n) = note {
            self.warn(n);
        }
        Ok(data)
    }

    pub fn catalog(&self) -> Result<Dict> {
        self.resolve_dict(self.trailer.get("Root"))
            .ok_or_else(|| ExtractError::MalformedPdf("catalog is not a dictionary".into()))
    }

    /// Pages in document order with inherited Resources/MediaBox.
    pub fn pages(&self) -> Result<Vec<Page>> {
        let catalog = self.catalog()?;
        let root = catalog
            .get("Pages")
            .ok_or_else(|| ExtractError::MalformedPdf("catalog has no /Pages".into()))?;
        let mut out = Vec::new();
        let mut visited = HashSet::new();
        self.walk_pages(root, None, None, &mut out, &mut visited, 0);
        Ok(out)
    }

    fn walk_pages(
        &self,
        node: &Object,
        resources: Option<&Dict>,
        media_box: Option<[f64; 4]>,
        out: &mut Vec<Page>,
        visited: &mut HashSet<ObjRef>,
        depth: usize,
    ) {
        if depth > 64 {
            self.warn("page tree too deep; truncated".into());
            return;
        }
        if let Object::Ref(r) = node {
            if !visited.insert(*r) {
                self.warn("cycle in page tree".into());
                return;
            }
        }
        let Some(dict) = self.resolve_dict(Some(node)) else {
            return;
        };
        let res = self.resolve_dict(dict.get("Resources"));
        let res = res.as_ref().or(resources);
        let mb = dict
            .get("MediaBox")
            .map(|m| self.resolve(m))
            .and_then(|m| rect_from(&m))
            .or(media_box);
        let is_tree = dict.get("Type").and_then(Object::as_name) == Some("Pages")
            || (dict.contains_key("Kids") && !dict.contains_key("Contents"));
        if is_tree {
            let kids = match dict.get("Kids").map(|k| self.resolve(k)) {
                Some(Object::Array(a)) => a,
                _ => Vec::new(),
            };
            for kid in &kids {
                self.walk_pages(kid, res, mb, out, visited, depth + 1);
            }
        } else {
            out.push(Page {
                resources: res.cloned().unwrap_or_default(),
                media_box: mb.unwrap_or([0.0, 0.0, 612.0, 792.0]),
                dict,
            });
        }
    }

    /// Concatenated, decoded content streams of a page.
    pub fn page_content(&self, page: &Page) -> Vec<u8> {
        let streams: Vec<Object> = match page.dict.get("Contents").map(|c| self.resolve(c)) {
            Some(Object::Array(a)) => a.iter().map(|o| self.resolve(o)).collect(),
            Some(o) => vec![o],
            None => Vec::new(),
        };
        let mut out = Vec::new();
        for s in streams {
            if let Object::Stream(s) = s {
                match self.decode(&s) {
                    Ok(d) => {
                        out.extend_from_slice(&d);
                        out.push(b'\n');
                    }
                    Err(e) => self.warn(format!("skipped content stream: {e}")),
                }
            }
        }
        out
    }
}

pub(crate) fn rect_from(o: &Object) -> Option<[f64; 4]> {
    let a = o.as_array()?;
    if a.len() != 4 {
        return None;
    }
    let v: Vec<f64> = a.iter().filter_map(Object::as_f64).collect();
    if v.len() != 4 {
        return None;
    }
    Some([v[0].min(v[2]), v[1].min(v[3]), v[0].max(v[2]), v[1].max(v[3])])
}

fn predictor_from(d: Option<&Dict>) -> Predictor {
    let mut p = Predictor::default();
    if let Some(d) = d {
        let get = |k: &str| d.get(k).and_then(Object::as_i64);
        if let Some(v) = get("Predictor") {
            p.predictor = v;
        }
        if let Some(v) = get("Colors") {
            p.colors = v.max(1) as usize;
        }
        if let Some(v) = get("BitsPerComponent") {
            p.bits_per_component = v.max(1) as usize;
        }
        if let Some(v) = get("Columns") {
            p.columns = v.max(1) as usize;
        }
    }
    p
}

fn endstream_follows(rest: &[u8]) -> bool {
    let trimmed = rest
        .iter()
        .position(|b| !is_whitespace(*b))
        .map(|i| &rest[i..])
        .unwrap_or(&[]);
    trimmed.starts_with(b"endstream")
}

fn find_startxref(data: &[u8]) -> Option<usize> {
    let pos = rfind(data, b"startxref")?;
    let mut p = Parser::new(data, pos + 9);
    match p.lex.next_token() {
        Some(Token::Int(off)) if off >= 0 => Some(off as usize),
        _ => None,
    }
}

pub(crate) fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn rfind(hay: &[u8], needle: &[u8]) -> Option<usize> {
    if hay.len() < needle.len() {
        return None;
    }
    hay.windows(needle.len()).rposition(|w| w == needle)
}

/// Finds `N G obj` headers at line starts. Later definitions win, matching
/// incremental-update semantics.
fn scan_objects(data: &[u8]) -> BTreeMap<u32, usize> {
    let mut table = BTreeMap::new();
    let mut i = 0;
    while let Some(rel) = find(&data[i..], b"obj") {
        let kw = i + rel;
        i = kw + 3;
        if data.get(kw + 3).is_some_and(|b| !is_whitespace(*b) && *b != b'<' && *b != b'[') {
            continue;
        }
        // Walk back over "G " and "N ".
        let mut j = kw;
        let mut nums = Vec::new();
        for _ in 0..2 {
            while j > 0 && data[j - 1] == b' ' {
                j -= 1;
            }
            let end = j;
            while j > 0 && data[j - 1].is_ascii_digit() {
                j -= 1;
            }
            if j == end {
                break;
            }
            nums.push(std::str::from_utf8(&data[j..end]).ok().and_then(|s| s.parse::<u64>().ok()));
        }
        if nums.len() == 2 && (j == 0 || is_whitespace(data[j - 1])) {
            if let (Some(_gen), Some(num)) = (nums[0], nums[1]) {
                if num <= u32::MAX as u64 {
                    table.insert(num as u32, j);
                }
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_finds_headers() {
        let data = b"%PDF-1.4\n1 0 obj\n<<>>\nendobj\n12 0 obj<< /A 1 >>endobj\n";
        let t = scan_objects(data);
        assert_eq!(t.get(&1), Some(&9));
        assert_eq!(t.get(&12).map(|o| &data[*o..*o + 8]), Some(&b"12 0 obj"[..]));
    }

    #[test]
    fn garbage_is_malformed() {
        let err = PdfDocument::parse(b"%PDF-1.4\nnothing here").err().unwrap();
        assert_eq!(err.code(), "MALFORMED_PDF");
    }

    #[test]
    fn not_pdf() {
        assert_eq!(PdfDocument::parse(b"<html>").err(), Some(ExtractError::NotPdf));
    }
}
