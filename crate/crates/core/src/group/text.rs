//! Text grammar for descriptors and elements.
//!
//! Elements, per family:
//!
//! * trivial: `e`
//! * lattice: `(1,-2)`; a bare integer is accepted (and printed) when `d = 1`
//! * free: letters `a b c d f g ...` (the letter `e` is skipped) name `a_1, a_2, ...`,
//!   upper case is the inverse, `*` and whitespace are ignored, `e` alone is the
//!   identity. Input is freely reduced, so `aA` reads as `e`.
//! * lamplighter: `(position,{lamp,lamp})` with positions written as lattice elements
//! * product: `<left | right>`
//!
//! Descriptors: `trivial`, `Z^d`, `F_s`, `L(Z^d)`, `(left x right)`.

use std::collections::BTreeSet;
use std::str::FromStr;

use super::{GroupDescriptor, GroupElement};
use crate::error::{Error, Result};

const FREE_LETTERS: &[u8] = b"abcdfghijklmnopqrstuvwxyz";

fn letter_for(k: i32) -> char {
    let c = FREE_LETTERS[(k.unsigned_abs() - 1) as usize] as char;
    if k < 0 {
        c.to_ascii_uppercase()
    } else {
        c
    }
}

fn index_of_letter(c: char) -> Option<i32> {
    let lower = c.to_ascii_lowercase() as u8;
    let pos = FREE_LETTERS.iter().position(|&l| l == lower)? as i32 + 1;
    Some(if c.is_ascii_uppercase() { -pos } else { pos })
}

struct Cursor<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, what: &'static str) -> Self {
        Cursor {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            what,
        }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::parse(self.what, self.text, format!("{} at offset {}", reason.into(), self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn integer<T: FromStr>(&mut self) -> Result<T> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.bytes.get(self.pos), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.text[start..self.pos]
            .parse()
            .map_err(|_| self.err("expected an integer"))
    }

    fn finish(&mut self) -> Result<()> {
        if self.peek().is_some() {
            Err(self.err("trailing input"))
        } else {
            Ok(())
        }
    }
}

impl GroupDescriptor {
    pub fn parse_element(&self, text: &str) -> Result<GroupElement> {
        self.validate()?;
        let mut c = Cursor::new(text, "group element");
        let g = self.element_at(&mut c)?;
        c.finish()?;
        Ok(g)
    }

    fn element_at(&self, c: &mut Cursor<'_>) -> Result<GroupElement> {
        match self {
            GroupDescriptor::Trivial => {
                c.expect(b'e')?;
                Ok(GroupElement::Trivial)
            }
            GroupDescriptor::Lattice { dim } => Ok(GroupElement::Lattice(lattice_at(c, *dim)?)),
            GroupDescriptor::Free { rank } => free_at(c, *rank),
            GroupDescriptor::Lamplighter { dim } => {
                c.expect(b'(')?;
                let position = lattice_at(c, *dim)?;
                c.expect(b',')?;
                c.expect(b'{')?;
                let mut lamps = BTreeSet::new();
                if !c.eat(b'}') {
                    loop {
                        let lamp = lattice_at(c, *dim)?;
                        if !lamps.insert(lamp) {
                            return Err(c.err("repeated lamp"));
                        }
                        if c.eat(b'}') {
                            break;
                        }
                        c.expect(b',')?;
                    }
                }
                c.expect(b')')?;
                Ok(GroupElement::Lamplighter { position, lamps })
            }
            GroupDescriptor::Product { left, right } => {
                c.expect(b'<')?;
                let a = left.element_at(c)?;
                c.expect(b'|')?;
                let b = right.element_at(c)?;
                c.expect(b'>')?;
                Ok(GroupElement::pair(a, b))
            }
        }
    }

    pub fn format(&self, g: &GroupElement) -> String {
        let mut out = String::new();
        write_element(&mut out, g);
        out
    }
}

fn lattice_at(c: &mut Cursor<'_>, dim: usize) -> Result<Vec<i64>> {
    if dim == 1 && c.peek() != Some(b'(') {
        return Ok(vec![c.integer()?]);
    }
    c.expect(b'(')?;
    let mut v = Vec::with_capacity(dim);
    loop {
        v.push(c.integer()?);
        if c.eat(b')') {
            break;
        }
        c.expect(b',')?;
    }
    if v.len() != dim {
        return Err(c.err(format!("expected {dim} coordinates, found {}", v.len())));
    }
    Ok(v)
}

fn free_at(c: &mut Cursor<'_>, rank: usize) -> Result<GroupElement> {
    let mut letters = Vec::new();
    let mut any = false;
    loop {
        match c.peek() {
            Some(b'*') => c.pos += 1,
            Some(b'e') if !any => {
                c.pos += 1;
                return Ok(GroupElement::Free(Vec::new()));
            }
            Some(ch) if ch.is_ascii_alphabetic() && ch != b'e' && ch != b'E' => {
                let k = index_of_letter(ch as char).expect("alphabetic");
                if k.unsigned_abs() as usize > rank {
                    return Err(c.err(format!("letter '{}' outside rank {rank}", ch as char)));
                }
                letters.push(k);
                any = true;
                c.pos += 1;
            }
            _ => break,
        }
    }
    if !any {
        return Err(c.err("empty word"));
    }
    Ok(GroupElement::free_word(letters))
}

fn write_lattice(out: &mut String, v: &[i64]) {
    if v.len() == 1 {
        out.push_str(&v[0].to_string());
        return;
    }
    out.push('(');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&x.to_string());
    }
    out.push(')');
}

fn write_element(out: &mut String, g: &GroupElement) {
    match g {
        GroupElement::Trivial => out.push('e'),
        GroupElement::Lattice(v) => write_lattice(out, v),
        GroupElement::Free(w) if w.is_empty() => out.push('e'),
        GroupElement::Free(w) => out.extend(w.iter().map(|&k| letter_for(k))),
        GroupElement::Lamplighter { position, lamps } => {
            out.push('(');
            write_lattice(out, position);
            out.push_str(",{");
            for (i, l) in lamps.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_lattice(out, l);
            }
            out.push_str("})");
        }
        GroupElement::Product(a, b) => {
            out.push('<');
            write_element(out, a);
            out.push_str(" | ");
            write_element(out, b);
            out.push('>');
        }
    }
}

fn descriptor_at(c: &mut Cursor<'_>) -> Result<GroupDescriptor> {
    if c.eat_str("trivial") {
        return Ok(GroupDescriptor::Trivial);
    }
    if c.eat_str("Z^") {
        return Ok(GroupDescriptor::Lattice { dim: c.integer()? });
    }
    if c.eat_str("F_") {
        return Ok(GroupDescriptor::Free { rank: c.integer()? });
    }
    if c.eat_str("L(Z^") {
        let dim = c.integer()?;
        c.expect(b')')?;
        return Ok(GroupDescriptor::Lamplighter { dim });
    }
    if c.eat(b'(') {
        let left = descriptor_at(c)?;
        c.expect(b'x')?;
        let right = descriptor_at(c)?;
        c.expect(b')')?;
        return Ok(GroupDescriptor::product(left, right));
    }
    Err(c.err("unknown group family"))
}

impl FromStr for GroupDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Cursor::new(s, "group descriptor");
        let d = descriptor_at(&mut c)?;
        c.finish()?;
        d.validate()?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_round_trip() {
        let g = GroupDescriptor::free(2);
        let w = g.parse_element("a*B").unwrap();
        assert_eq!(w, GroupElement::free_word([1, -2]));
        assert_eq!(g.format(&w), "aB");
        assert_eq!(g.parse_element(&g.format(&w)).unwrap(), w);
    }

    #[test]
    fn cancellation_normalises() {
        let g = GroupDescriptor::free(2);
        assert_eq!(g.parse_element("aA").unwrap(), g.identity());
        assert_eq!(g.format(&g.identity()), "e");
        assert_eq!(g.parse_element("e").unwrap(), g.identity());
    }

    #[test]
    fn letters_skip_e() {
        let g = GroupDescriptor::free(5);
        assert_eq!(g.parse_element("f").unwrap(), GroupElement::free_word([5]));
        assert!(GroupDescriptor::free(2).parse_element("c").is_err());
    }

    #[test]
    fn lattice_round_trip() {
        let g = GroupDescriptor::lattice(2);
        let p = g.parse_element("(1,2)").unwrap();
        assert_eq!(p, GroupElement::lattice([1, 2]));
        assert_eq!(g.format(&p), "(1,2)");
        assert!(g.parse_element("(1)").is_err());
        let z = GroupDescriptor::lattice(1);
        assert_eq!(z.parse_element("-3").unwrap(), GroupElement::lattice([-3]));
        assert_eq!(z.parse_element("(-3)").unwrap(), GroupElement::lattice([-3]));
    }

    #[test]
    fn lamplighter_and_product() {
        let l = GroupDescriptor::lamplighter(1);
        let g = l.parse_element("(2,{0,1})").unwrap();
        assert_eq!(l.format(&g), "(2,{0,1})");
        let p = GroupDescriptor::product(GroupDescriptor::free(2), GroupDescriptor::lattice(1));
        let x = p.parse_element("<ab | -1>").unwrap();
        assert_eq!(p.format(&x), "<ab | -1>");
    }

    #[test]
    fn malformed_text() {
        let g = GroupDescriptor::lattice(2);
        assert!(matches!(g.parse_element("(1,"), Err(Error::Parse { .. })));
        assert!(GroupDescriptor::free(2).parse_element("").is_err());
        assert!(GroupDescriptor::free(2).parse_element("a b 7").is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        for text in ["Z^2", "F_3", "L(Z^1)", "(F_2 x Z^1)", "trivial", "((Z^1 x Z^1) x F_2)"] {
            let d: GroupDescriptor = text.parse().unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert!("F_0".parse::<GroupDescriptor>().is_err());
    }
}
