//! Plain-text `key = value` files grouped in `[section]` blocks.
//!
//! `#` starts a comment. Keys before the first section header belong to a
//! section with an empty name. Sections may repeat.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut sections = vec![Section {
        name: String::new(),
        line: 0,
        entries: Vec::new(),
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: format!("unterminated section header '{content}'"),
            })?;
            sections.push(Section {
                name: name.trim().to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected 'key = value', found '{content}'"),
        })?;
        sections.last_mut().unwrap().entries.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    if sections[0].entries.is_empty() {
        sections.remove(0);
    }
    Ok(sections)
}

impl Entry {
    fn err(&self, what: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("'{}' expects {what}, found '{}'", self.key, self.value),
        }
    }

    pub fn f64(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err("a number"))
    }

    pub fn usize(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.err("a non-negative integer"))
    }

    pub fn u64(&self) -> Result<u64> {
        self.value.parse().map_err(|_| self.err("a non-negative integer"))
    }

    pub fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.err("true or false")),
        }
    }

    pub fn vec3(&self) -> Result<[f64; 3]> {
        let parts: Vec<f64> = self
            .value
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err("three comma-separated numbers"))?;
        <[f64; 3]>::try_from(parts).map_err(|_| self.err("three comma-separated numbers"))
    }

    pub fn usize_list(&self) -> Result<Vec<usize>> {
        self.value
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err("a comma-separated list of integers"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let s = parse("seed = 3\n# note\n[plane]\norigin = 0, 1, 2 # inline\n[plane]\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].name, "");
        assert_eq!(s[1].entries[0].vec3().unwrap(), [0.0, 1.0, 2.0]);
        assert_eq!(s[1].entries[0].line, 4);
        assert!(s[2].entries.is_empty());
    }

    #[test]
    fn errors_carry_lines() {
        match parse("[a]\nnot a pair\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let s = parse("[a]\nx = 1,2\n").unwrap();
        assert!(matches!(s[0].entries[0].vec3(), Err(Error::Parse { line: 2, .. })));
    }
}
