//! Single-byte font encodings and glyph-name lookup.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseEncoding {
    Standard,
    WinAnsi,
    MacRoman,
    /// Symbolic fonts without an explicit encoding: identity over Latin-1.
    Identity,
}

impl BaseEncoding {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "StandardEncoding" => Some(BaseEncoding::Standard),
            "WinAnsiEncoding" => Some(BaseEncoding::WinAnsi),
            "MacRomanEncoding" | "MacExpertEncoding" => Some(BaseEncoding::MacRoman),
            _ => None,
        }
    }

    pub fn decode(self, code: u8) -> Option<char> {
        match self {
            BaseEncoding::WinAnsi => win_ansi(code),
            BaseEncoding::Standard => standard(code),
            BaseEncoding::MacRoman => mac_roman(code),
            BaseEncoding::Identity => Some(code as char).filter(|c| !c.is_control() || *c == ' '),
        }
    }
}

const CP1252_HIGH: [Option<char>; 32] = [
    Some('€'), None, Some('‚'), Some('ƒ'), Some('„'), Some('…'), Some('†'), Some('‡'),
    Some('ˆ'), Some('‰'), Some('Š'), Some('‹'), Some('Œ'), None, Some('Ž'), None,
    None, Some('‘'), Some('’'), Some('“'), Some('”'), Some('•'), Some('–'), Some('—'),
    Some('˜'), Some('™'), Some('š'), Some('›'), Some('œ'), None, Some('ž'), Some('Ÿ'),
];

fn win_ansi(code: u8) -> Option<char> {
    match code {
        0x20..=0x7e => Some(code as char),
        0x80..=0x9f => CP1252_HIGH[(code - 0x80) as usize],
        // Non-breaking space renders as a space in text.
        0xa0 => Some(' '),
        0xad => Some('-'),
        0xa1..=0xff => char::from_u32(code as u32),
        _ => None,
    }
}

const MAC_ROMAN_HIGH: &str = "ÄÅÇÉÑÖÜáàâäãåçéèêëíìîïñóòôöõúùûü†°¢£§•¶ß®©™´¨≠ÆØ∞±≤≥¥µ∂∑∏π∫ªºΩæø¿¡¬√ƒ≈∆«»… ÀÃÕŒœ–—“”‘’÷◊ÿŸ⁄€‹›ﬁﬂ‡·‚„‰ÂÊÁËÈÍÎÏÌÓÔ\u{F8FF}ÒÚÛÙıˆ˜¯˘˙˚¸˝˛ˇ";

fn mac_roman(code: u8) -> Option<char> {
    match code {
        0x20..=0x7e => Some(code as char),
        0x80..=0xff => MAC_ROMAN_HIGH.chars().nth((code - 0x80) as usize),
        _ => None,
    }
}

fn standard(code: u8) -> Option<char> {
    let c = match code {
        0x27 => '’',
        0x60 => '‘',
        0x20..=0x7e => code as char,
        0xa1 => '¡',
        0xa2 => '¢',
        0xa3 => '£',
        0xa4 => '⁄',
        0xa5 => '¥',
        0xa6 => 'ƒ',
        0xa7 => '§',
        0xa8 => '¤',
        0xa9 => '\'',
        0xaa => '“',
        0xab => '«',
        0xac => '‹',
        0xad => '›',
        0xae => 'ﬁ',
        0xaf => 'ﬂ',
        0xb1 => '–',
        0xb2 => '†',
        0xb3 => '‡',
        0xb4 => '·',
        0xb6 => '¶',
        0xb7 => '•',
        0xb8 => '‚',
        0xb9 => '„',
        0xba => '”',
        0xbb => '»',
        0xbc => '…',
        0xbd => '‰',
        0xbf => '¿',
        0xc1 => '`',
        0xc2 => '´',
        0xc3 => 'ˆ',
        0xc4 => '˜',
        0xc5 => '¯',
        0xc6 => '˘',
        0xc7 => '˙',
        0xc8 => '¨',
        0xca => '˚',
        0xcb => '¸',
        0xcd => '˝',
        0xce => '˛',
        0xcf => 'ˇ',
        0xd0 => '—',
        0xe1 => 'Æ',
        0xe3 => 'ª',
        0xe8 => 'Ł',
        0xe9 => 'Ø',
        0xea => 'Œ',
        0xeb => 'º',
        0xf1 => 'æ',
        0xf5 => 'ı',
        0xf8 => 'ł',
        0xf9 => 'ø',
        0xfa => 'œ',
        0xfb => 'ß',
        _ => return None,
    };
    Some(c)
}

const NAMED_GLYPHS: &[(&str, &str)] = &[
    ("space", " "), ("exclam", "!"), ("quotedbl", "\""), ("numbersign", "#"),
    ("dollar", "$"), ("percent", "%"), ("ampersand", "&"), ("quotesingle", "'"),
    ("quoteright", "’"), ("quoteleft", "‘"), ("parenleft", "("), ("parenright", ")"),
    ("asterisk", "*"), ("plus", "+"), ("comma", ","), ("hyphen", "-"), ("minus", "−"),
    ("period", "."), ("slash", "/"), ("colon", ":"), ("semicolon", ";"), ("less", "<"),
    ("equal", "="), ("greater", ">"), ("question", "?"), ("at", "@"),
    ("bracketleft", "["), ("backslash", "\\"), ("bracketright", "]"),
    ("asciicircum", "^"), ("underscore", "_"), ("grave", "`"), ("braceleft", "{"),
    ("bar", "|"), ("braceright", "}"), ("asciitilde", "~"),
    ("zero", "0"), ("one", "1"), ("two", "2"), ("three", "3"), ("four", "4"),
    ("five", "5"), ("six", "6"), ("seven", "7"), ("eight", "8"), ("nine", "9"),
    ("fi", "fi"), ("fl", "fl"), ("ff", "ff"), ("ffi", "ffi"), ("ffl", "ffl"),
    ("endash", "–"), ("emdash", "—"), ("quotedblleft", "“"), ("quotedblright", "”"),
    ("quotesinglbase", "‚"), ("quotedblbase", "„"), ("bullet", "•"), ("ellipsis", "…"),
    ("dagger", "†"), ("daggerdbl", "‡"), ("perthousand", "‰"), ("guillemotleft", "«"),
    ("guillemotright", "»"), ("guilsinglleft", "‹"), ("guilsinglright", "›"),
    ("exclamdown", "¡"), ("questiondown", "¿"), ("cent", "¢"), ("sterling", "£"),
    ("yen", "¥"), ("florin", "ƒ"), ("section", "§"), ("paragraph", "¶"),
    ("currency", "¤"), ("fraction", "⁄"), ("periodcentered", "·"), ("degree", "°"),
    ("copyright", "©"), ("registered", "®"), ("trademark", "™"), ("plusminus", "±"),
    ("multiply", "×"), ("divide", "÷"), ("mu", "µ"), ("germandbls", "ß"),
    ("dotlessi", "ı"), ("AE", "Æ"), ("ae", "æ"), ("OE", "Œ"), ("oe", "œ"),
    ("Oslash", "Ø"), ("oslash", "ø"), ("Lslash", "Ł"), ("lslash", "ł"),
    ("ordfeminine", "ª"), ("ordmasculine", "º"), ("nbspace", " "), ("sfthyphen", "-"),
    ("Euro", "€"), ("euro", "€"), ("logicalnot", "¬"), ("brokenbar", "¦"),
    ("onehalf", "½"), ("onequarter", "¼"), ("threequarters", "¾"),
    ("onesuperior", "¹"), ("twosuperior", "²"), ("threesuperior", "³"),
    ("acute", "´"), ("dieresis", "¨"), ("macron", "¯"), ("cedilla", "¸"),
    ("circumflex", "ˆ"), ("tilde", "˜"), ("breve", "˘"), ("dotaccent", "˙"),
    ("ring", "˚"), ("hungarumlaut", "˝"), ("ogonek", "˛"), ("caron", "ˇ"),
    ("Eth", "Ð"), ("eth", "ð"), ("Thorn", "Þ"), ("thorn", "þ"),
    ("alpha", "α"), ("beta", "β"), ("gamma", "γ"), ("delta", "δ"), ("epsilon", "ε"),
    ("lambda", "λ"), ("sigma", "σ"), ("pi", "π"), ("theta", "θ"), ("omega", "ω"),
    ("Delta", "∆"), ("Omega", "Ω"), ("summation", "∑"), ("product", "∏"),
    ("integral", "∫"), ("infinity", "∞"), ("notequal", "≠"), ("lessequal", "≤"),
    ("greaterequal", "≥"), ("approxequal", "≈"), ("radical", "√"), ("partialdiff", "∂"),
];

const ACCENT_NAMES: [&str; 8] = [
    "acute", "grave", "circumflex", "dieresis", "tilde", "ring", "cedilla", "caron",
];

/// Maps a glyph name to text: direct names, `uniXXXX`, `uXXXX[XX]`,
/// accented Latin-1 letters, and suffixed variants like `a.sc` or `f_i`.
pub fn glyph_to_text(name: &str) -> Option<String> {
    let base = name.split('.').next().unwrap_or(name);
    if base.is_empty() {
        return None;
    }
    if base.contains('_') {
        let parts: Option<Vec<String>> = base.split('_').map(glyph_to_text).collect();
        return parts.map(|p| p.concat());
    }
    if base.chars().count() == 1 && base.chars().all(|c| c.is_ascii_alphabetic()) {
        return Some(base.to_string());
    }
    if let Some((_, t)) = NAMED_GLYPHS.iter().find(|(n, _)| *n == base) {
        return Some((*t).to_string());
    }
    if let Some(hex) = base.strip_prefix("uni") {
        if hex.len() >= 4 && hex.len() % 4 == 0 {
            let units: Option<Vec<u16>> = hex
                .as_bytes()
                .chunks(4)
                .map(|c| u16::from_str_radix(std::str::from_utf8(c).ok()?, 16).ok())
                .collect();
            if let Some(units) = units {
                let s: String = char::decode_utf16(units).filter_map(|r| r.ok()).collect();
                if !s.is_empty() {
                    return Some(s);
                }
            }
        }
    }
    if let Some(hex) = base.strip_prefix('u') {
        if (4..=6).contains(&hex.len()) {
            if let Some(c) = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32) {
                return Some(c.to_string());
            }
        }
    }
    // Accented letters: "eacute", "Udieresis", ...
    let mut chars = base.chars();
    let first = chars.next()?;
    let rest: String = chars.collect();
    if let Some(class) = ACCENT_NAMES.iter().position(|a| *a == rest) {
        return accented(first, class).map(|c| c.to_string());
    }
    None
}

fn accented(letter: char, class: usize) -> Option<char> {
    const TABLE: &[(char, &str)] = &[
        ('A', "ÁÀÂÄÃÅ"), ('a', "áàâäãå"), ('E', "ÉÈÊË"), ('e', "éèêë"),
        ('I', "ÍÌÎÏ"), ('i', "íìîï"), ('O', "ÓÒÔÖÕ"), ('o', "óòôöõ"),
        ('U', "ÚÙÛÜ"), ('u', "úùûü"), ('N', "Ñ"), ('n', "ñ"), ('C', "ÇČ"),
        ('c', "çč"), ('Y', "ÝŸ"), ('y', "ýÿ"), ('S', "Š"), ('s', "š"),
        ('Z', "Ž"), ('z', "ž"),
    ];
    let (_, options) = TABLE.iter().find(|(l, _)| *l == letter)?;
    options.chars().find(|c| accent_class(*c) == Some(class))
}

fn accent_class(c: char) -> Option<usize> {
    // 0 acute, 1 grave, 2 circumflex, 3 dieresis, 4 tilde, 5 ring, 6 cedilla, 7 caron
    match c {
        'Á' | 'á' | 'É' | 'é' | 'Í' | 'í' | 'Ó' | 'ó' | 'Ú' | 'ú' | 'Ý' | 'ý' => Some(0),
        'À' | 'à' | 'È' | 'è' | 'Ì' | 'ì' | 'Ò' | 'ò' | 'Ù' | 'ù' => Some(1),
        'Â' | 'â' | 'Ê' | 'ê' | 'Î' | 'î' | 'Ô' | 'ô' | 'Û' | 'û' => Some(2),
        'Ä' | 'ä' | 'Ë' | 'ë' | 'Ï' | 'ï' | 'Ö' | 'ö' | 'Ü' | 'ü' | 'Ÿ' | 'ÿ' => Some(3),
        'Ã' | 'ã' | 'Õ' | 'õ' | 'Ñ' | 'ñ' => Some(4),
        'Å' | 'å' => Some(5),
        'Ç' | 'ç' => Some(6),
        'Č' | 'č' | 'Š' | 'š' | 'Ž' | 'ž' => Some(7),
        _ => None,
    }
}
