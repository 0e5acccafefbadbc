//! Plain-text paragraph extraction from PDF files.
//!
//! The supported subset covers machine-generated documents: classic and
//! stream cross-reference sections, object streams, FlateDecode and
//! ASCIIHexDecode filters, simple and Type0 fonts with ToUnicode maps, and
//! the text operators `Tj TJ ' "` with `Td TD Tm T*` positioning. Anything
//! outside that subset produces warnings rather than errors.

pub mod document;
pub mod encoding;
pub mod error;
pub mod filters;
pub mod font;
pub mod inflate;
pub mod interp;
pub mod layout;
pub mod object;
pub mod segment;
pub mod writer;

use serde::{Deserialize, Serialize};

pub use error::{ExtractError, Result};
pub use filters::{decode_stream, parse_filter_chain, Filter, Predictor};
pub use segment::{
    segment_paragraphs, Paragraph, PositionedLine, MAX_PARAGRAPH_CHARS, PARAGRAPH_GAP_FACTOR,
};

use document::PdfDocument;
use interp::Interpreter;

/// Bumped on any change to extraction or segmentation output.
pub const EXTRACTOR_VERSION: &str = "1.0.0";

/// Fixed thresholds that affect output; stored alongside the version.
pub const EXTRACTOR_NOTES: &str = "paragraph break at gap > 1.5x median line spacing \
(median line height when a page has < 3 gaps); paragraphs capped at 8000 chars; \
two-column pages read left column first";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedDocument {
    pub article_id: String,
    pub page_count: u32,
    pub paragraphs: Vec<Paragraph>,
    pub extractor_version: String,
    pub warnings: Vec<String>,
}

impl ExtractedDocument {
    /// An empty document carrying a warning, used for articles whose source
    /// could not be read.
    pub fn placeholder(article_id: &str, warning: String) -> Self {
        ExtractedDocument {
            article_id: article_id.to_string(),
            page_count: 0,
            paragraphs: Vec::new(),
            extractor_version: EXTRACTOR_VERSION.to_string(),
            warnings: vec![warning],
        }
    }

    /// Checks paragraph index contiguity, page monotonicity and the
    /// per-paragraph text invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut last_page = 0;
        for (i, p) in self.paragraphs.iter().enumerate() {
            if p.index != i {
                return Err(format!("paragraph {i} has index {}", p.index));
            }
            if p.page < last_page {
                return Err(format!("paragraph {i} goes back to page {}", p.page));
            }
            if p.page == 0 {
                return Err(format!("paragraph {i} has page 0"));
            }
            last_page = p.page;
            if p.text.trim().is_empty() {
                return Err(format!("paragraph {i} is blank"));
            }
            if p.char_len != p.text.chars().count() || p.char_len > MAX_PARAGRAPH_CHARS {
                return Err(format!("paragraph {i} has bad char_len {}", p.char_len));
            }
        }
        Ok(())
    }
}

/// Extracts ordered paragraphs from PDF bytes.
pub fn extract_document(article_id: &str, pdf: &[u8]) -> Result<ExtractedDocument> {
    let doc = PdfDocument::parse(pdf)?;
    let pages = doc.pages()?;
    let mut warnings: Vec<String> = Vec::new();
    let mut lines = Vec::new();
    let mut text_ops = 0;
    for (i, page) in pages.iter().enumerate() {
        let page_no = i as u32 + 1;
        let content = doc.page_content(page);
        let mut interp = Interpreter::new(&doc);
        interp.run_page(&content, &page.resources);
        text_ops += interp.text_ops;
        for w in interp.warnings.drain(..) {
            push_unique(&mut warnings, format!("page {page_no}: {w}"));
        }
        lines.extend(layout::build_lines(page_no, &interp.spans, page.media_box));
    }
    // Document-level warnings (xref recovery, stream issues) go first.
    let mut all = doc.warnings();
    for w in warnings {
        push_unique(&mut all, w);
    }
    if text_ops == 0 {
        push_unique(
            &mut all,
            "NO_TEXT: no text-showing operators found (scanned or image-only document?)".into(),
        );
    }
    Ok(ExtractedDocument {
        article_id: article_id.to_string(),
        page_count: pages.len() as u32,
        paragraphs: segment_paragraphs(&lines),
        extractor_version: EXTRACTOR_VERSION.to_string(),
        warnings: all,
    })
}

fn push_unique(v: &mut Vec<String>, w: String) {
    if !v.contains(&w) {
        v.push(w);
    }
}

/// Builds a document from already-extracted UTF-8 text; paragraphs are
/// separated by blank lines and all land on page 1.
pub fn load_plaintext(article_id: &str, text: &[u8]) -> Result<ExtractedDocument> {
    let text = std::str::from_utf8(text).map_err(|e| ExtractError::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    let mut paragraphs = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let flush = |block: &mut Vec<&str>, out: &mut Vec<Paragraph>| {
        let joined = block.join(" ");
        block.clear();
        let normalized = joined.split_whitespace().collect::<Vec<_>>().join(" ");
        for piece in segment::split_long(&normalized, MAX_PARAGRAPH_CHARS) {
            let idx = out.len();
            out.push(Paragraph::new(idx, 1, piece));
        }
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut block, &mut paragraphs);
        } else {
            block.push(line);
        }
    }
    flush(&mut block, &mut paragraphs);
    Ok(ExtractedDocument {
        article_id: article_id.to_string(),
        page_count: 1,
        paragraphs,
        extractor_version: EXTRACTOR_VERSION.to_string(),
        warnings: Vec::new(),
    })
}
