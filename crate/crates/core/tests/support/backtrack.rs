//! A deliberately naive backtracking matcher for the pattern dialect, used
//! as a reference engine in tests. Case-insensitive; leftmost-first with
//! Perl-style priorities, so spans are comparable as well as presence.

#[derive(Debug, Clone)]
enum Node {
    Char(char),
    Any,
    Class { items: Vec<ClassItem>, negated: bool },
    Perl(PerlClass, bool),
    WordBoundary(bool),
    Start,
    End,
    Group(Box<Node>),
    Alt(Vec<Node>),
    Concat(Vec<Node>),
    Repeat { node: Box<Node>, min: usize, max: Option<usize>, greedy: bool },
}

#[derive(Debug, Clone, Copy)]
enum PerlClass {
    Word,
    Space,
    Digit,
}

#[derive(Debug, Clone)]
enum ClassItem {
    Range(char, char),
    Perl(PerlClass, bool),
}

pub struct Backtrack {
    root: Node,
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn perl(class: PerlClass, c: char) -> bool {
    match class {
        PerlClass::Word => is_word(c),
        PerlClass::Space => c.is_whitespace(),
        PerlClass::Digit => c.is_ascii_digit(),
    }
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

struct P<'a> {
    s: &'a [char],
    i: usize,
}

impl<'a> P<'a> {
    fn peek(&self) -> Option<char> {
        self.s.get(self.i).copied()
    }
    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }
    fn alt(&mut self) -> Result<Node, String> {
        let mut branches = vec![self.concat()?];
        while self.eat('|') {
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Node::Alt(branches) })
    }
    fn concat(&mut self) -> Result<Node, String> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            let atom = self.atom()?;
            items.push(self.quantifier(atom)?);
        }
        Ok(Node::Concat(items))
    }
    fn number(&mut self) -> Option<usize> {
        let start = self.i;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.i += 1;
        }
        (self.i > start).then(|| self.s[start..self.i].iter().collect::<String>().parse().unwrap())
    }
    fn quantifier(&mut self, atom: Node) -> Result<Node, String> {
        let (min, max) = match self.peek() {
            Some('*') => (0, None),
            Some('+') => (1, None),
            Some('?') => (0, Some(1)),
            Some('{') => {
                self.i += 1;
                let min = self.number().ok_or("bad repetition")?;
                let max = if self.eat(',') { self.number() } else { Some(min) };
                if !self.eat('}') {
                    return Err("unclosed repetition".into());
                }
                self.i -= 1;
                (min, max)
            }
            _ => return Ok(atom),
        };
        self.i += 1;
        let greedy = !self.eat('?');
        Ok(Node::Repeat { node: Box::new(atom), min, max, greedy })
    }
    fn escape(&mut self) -> Result<Node, String> {
        let c = self.peek().ok_or("trailing backslash")?;
        self.i += 1;
        Ok(match c {
            'w' => Node::Perl(PerlClass::Word, false),
            'W' => Node::Perl(PerlClass::Word, true),
            's' => Node::Perl(PerlClass::Space, false),
            'S' => Node::Perl(PerlClass::Space, true),
            'd' => Node::Perl(PerlClass::Digit, false),
            'D' => Node::Perl(PerlClass::Digit, true),
            'b' => Node::WordBoundary(true),
            'B' => Node::WordBoundary(false),
            'n' => Node::Char('\n'),
            't' => Node::Char('\t'),
            c if c.is_ascii_digit() => return Err("backreference".into()),
            c => Node::Char(c),
        })
    }
    fn atom(&mut self) -> Result<Node, String> {
        let c = self.peek().ok_or("unexpected end")?;
        self.i += 1;
        match c {
            '(' => {
                if self.eat('?')
                    && !self.eat(':') {
                        return Err("unsupported group".into());
                    }
                let inner = self.alt()?;
                if !self.eat(')') {
                    return Err("unclosed group".into());
                }
                Ok(Node::Group(Box::new(inner)))
            }
            '[' => self.class(),
            '\\' => self.escape(),
            '.' => Ok(Node::Any),
            '^' => Ok(Node::Start),
            '$' => Ok(Node::End),
            c => Ok(Node::Char(c)),
        }
    }
    fn class(&mut self) -> Result<Node, String> {
        let negated = self.eat('^');
        let mut items = Vec::new();
        let mut first = true;
        loop {
            let c = self.peek().ok_or("unclosed class")?;
            self.i += 1;
            if c == ']' && !first {
                break;
            }
            first = false;
            let lo = if c == '\\' {
                match self.escape()? {
                    Node::Perl(p, neg) => {
                        items.push(ClassItem::Perl(p, neg));
                        continue;
                    }
                    Node::Char(c) => c,
                    _ => return Err("bad class escape".into()),
                }
            } else {
                c
            };
            if self.peek() == Some('-') && self.s.get(self.i + 1).is_some_and(|&n| n != ']') {
                self.i += 1;
                let hi = self.peek().unwrap();
                self.i += 1;
                items.push(ClassItem::Range(lo, hi));
            } else {
                items.push(ClassItem::Range(lo, lo));
            }
        }
        Ok(Node::Class { items, negated })
    }
}

impl Backtrack {
    pub fn new(pattern: &str) -> Result<Self, String> {
        let chars: Vec<char> = pattern.chars().collect();
        let mut p = P { s: &chars, i: 0 };
        let root = p.alt()?;
        if p.i != chars.len() {
            return Err(format!("unexpected {:?} at {}", chars[p.i], p.i));
        }
        Ok(Backtrack { root })
    }

    /// Leftmost-first match as (start, end) byte offsets.
    pub fn find_at(&self, text: &str, from_byte: usize) -> Option<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let offsets: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let first = offsets.iter().position(|&o| o >= from_byte)?;
        let m = Matcher { t: &chars };
        for start in first..=chars.len() {
            let end = std::cell::Cell::new(None);
            if m.m(&self.root, start, &|p| {
                end.set(Some(p));
                true
            }) {
                return Some((offsets[start], offsets[end.get().unwrap()]));
            }
        }
        None
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.find_at(text, 0).is_some()
    }

    /// Non-overlapping matches, resuming at each match end.
    pub fn find_all(&self, text: &str) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        while at <= text.len() {
            match self.find_at(text, at) {
                Some((s, e)) if e > s => {
                    out.push((s, e));
                    at = e;
                }
                Some((s, _)) => {
                    at = s + text[s..].chars().next().map_or(1, char::len_utf8);
                }
                None => break,
            }
        }
        out
    }
}

struct Matcher<'t> {
    t: &'t [char],
}

impl<'t> Matcher<'t> {
    fn one(&self, node: &Node, c: char) -> bool {
        match node {
            Node::Char(x) => fold(*x) == fold(c),
            Node::Any => c != '\n',
            Node::Perl(p, neg) => perl(*p, c) != *neg,
            Node::Class { items, negated } => {
                let hit = items.iter().any(|it| match it {
                    ClassItem::Range(lo, hi) => {
                        let (l, h, f) = (fold(*lo), fold(*hi), fold(c));
                        (*lo..=*hi).contains(&c) || (l..=h).contains(&f)
                    }
                    ClassItem::Perl(p, neg) => perl(*p, c) != *neg,
                });
                hit != *negated
            }
            _ => unreachable!(),
        }
    }

    fn m(&self, node: &Node, pos: usize, k: &dyn Fn(usize) -> bool) -> bool {
        match node {
            Node::Char(_) | Node::Any | Node::Perl(..) | Node::Class { .. } => {
                pos < self.t.len() && self.one(node, self.t[pos]) && k(pos + 1)
            }
            Node::WordBoundary(want) => {
                let before = pos > 0 && is_word(self.t[pos - 1]);
                let after = pos < self.t.len() && is_word(self.t[pos]);
                ((before != after) == *want) && k(pos)
            }
            Node::Start => pos == 0 && k(pos),
            Node::End => pos == self.t.len() && k(pos),
            Node::Group(inner) => self.m(inner, pos, k),
            Node::Alt(branches) => branches.iter().any(|b| self.m(b, pos, k)),
            Node::Concat(items) => self.seq(items, pos, k),
            Node::Repeat { node, min, max, greedy } => self.rep(node, *min, *max, *greedy, 0, pos, k),
        }
    }

    fn seq(&self, items: &[Node], pos: usize, k: &dyn Fn(usize) -> bool) -> bool {
        match items.split_first() {
            None => k(pos),
            Some((head, rest)) => self.m(head, pos, &|p| self.seq(rest, p, k)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn rep(
        &self,
        node: &Node,
        min: usize,
        max: Option<usize>,
        greedy: bool,
        count: usize,
        pos: usize,
        k: &dyn Fn(usize) -> bool,
    ) -> bool {
        if count < min {
            return self.m(node, pos, &|p| self.rep(node, min, max, greedy, count + 1, p, k));
        }
        let can_more = max.is_none_or(|mx| count < mx);
        let more = || {
            can_more
                && self.m(node, pos, &|p| p != pos && self.rep(node, min, max, greedy, count + 1, p, k))
        };
        // Order matters: the continuation records the first success.
        #[allow(clippy::if_same_then_else)]
        if greedy {
            more() || k(pos)
        } else {
            k(pos) || more()
        }
    }
}
