//! Minimal reader for the Python list literals PDNC stores inside CSV cells,
//! e.g. `['a', "b's"]` or `[[254, 284], [301, 335]]`.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PyValue {
    Str(String),
    Int(i64),
    List(Vec<PyValue>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyLitError {
    pub offset: usize,
    pub message: &'static str,
}

impl fmt::Display for PyLitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.offset)
    }
}

impl std::error::Error for PyLitError {}

pub fn parse(src: &str) -> Result<PyValue, PyLitError> {
    let mut p = Parser { src: src.as_bytes(), text: src, pos: 0 };
    p.skip_ws();
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing characters"));
    }
    Ok(v)
}

pub fn parse_str_list(src: &str) -> Result<Vec<String>, PyLitError> {
    match parse(src)? {
        PyValue::List(items) => items
            .into_iter()
            .map(|v| match v {
                PyValue::Str(s) => Ok(s),
                _ => Err(PyLitError { offset: 0, message: "expected a list of strings" }),
            })
            .collect(),
        _ => Err(PyLitError { offset: 0, message: "expected a list" }),
    }
}

pub fn parse_span_list(src: &str) -> Result<Vec<(usize, usize)>, PyLitError> {
    let bad = || PyLitError { offset: 0, message: "expected a list of [start, end] pairs" };
    match parse(src)? {
        PyValue::List(items) => items
            .into_iter()
            .map(|v| match v {
                PyValue::List(pair) => match pair.as_slice() {
                    [PyValue::Int(a), PyValue::Int(b)] if *a >= 0 && *b >= 0 => Ok((*a as usize, *b as usize)),
                    _ => Err(bad()),
                },
                _ => Err(bad()),
            })
            .collect(),
        _ => Err(bad()),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &'static str) -> PyLitError {
        PyLitError { offset: self.pos, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn value(&mut self) -> Result<PyValue, PyLitError> {
        match self.src.get(self.pos) {
            Some(b'[') | Some(b'(') => self.list(),
            Some(b'\'') | Some(b'"') => self.string().map(PyValue::Str),
            Some(c) if c.is_ascii_digit() || *c == b'-' => self.int(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn list(&mut self) -> Result<PyValue, PyLitError> {
        let close = if self.src[self.pos] == b'[' { b']' } else { b')' };
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.src.get(self.pos) {
                Some(c) if *c == close => {
                    self.pos += 1;
                    return Ok(PyValue::List(items));
                }
                None => return Err(self.err("unterminated list")),
                _ => {}
            }
            items.push(self.value()?);
            self.skip_ws();
            match self.src.get(self.pos) {
                Some(b',') => self.pos += 1,
                Some(c) if *c == close => {}
                _ => return Err(self.err("expected ',' or list end")),
            }
        }
    }

    fn int(&mut self) -> Result<PyValue, PyLitError> {
        let start = self.pos;
        if self.src[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.text[start..self.pos].parse().map(PyValue::Int).map_err(|_| PyLitError { offset: start, message: "invalid integer" })
    }

    fn string(&mut self) -> Result<String, PyLitError> {
        let quote = self.src[self.pos];
        self.pos += 1;
        let mut out = String::new();
        let mut run_start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c == quote {
                out.push_str(&self.text[run_start..self.pos]);
                self.pos += 1;
                return Ok(out);
            }
            if c == b'\\' {
                out.push_str(&self.text[run_start..self.pos]);
                let esc = *self.src.get(self.pos + 1).ok_or_else(|| self.err("dangling escape"))?;
                match esc {
                    b'n' => out.push('\n'),
                    b't' => out.push('\t'),
                    b'r' => out.push('\r'),
                    b'\\' | b'\'' | b'"' => out.push(esc as char),
                    _ => {
                        // Unknown escapes are kept verbatim, as Python does.
                        out.push('\\');
                        self.pos += 1;
                        run_start = self.pos;
                        continue;
                    }
                }
                self.pos += 2;
                run_start = self.pos;
                continue;
            }
            self.pos += 1;
        }
        Err(self.err("unterminated string"))
    }
}
