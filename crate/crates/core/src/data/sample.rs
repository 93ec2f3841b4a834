use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, FileFormat};

/// Records (rows, keys, elements or lines) taken from the head of a file.
pub const HEAD_RECORDS: usize = 5;
/// Bytes kept per sampled value; longer values are cut and marked.
pub const VALUE_BUDGET: usize = 512;

const TRUNCATED: &str = "...<truncated>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSample {
    pub file: String,
    pub excerpt: String,
    pub record_count_sampled: usize,
}

impl HeadSample {
    pub fn is_empty(&self) -> bool {
        self.excerpt.trim().is_empty()
    }
}

/// Samples the head of the file at `path`.
pub fn sample_head(path: &Path, display: &str, format: FileFormat) -> Result<HeadSample, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let size = file.metadata().map(|m| m.len()).unwrap_or(0);
    sample_head_from(file, display, format, size).map_err(|message| DataError::Sample {
        path: path.to_path_buf(),
        message,
    })
}

/// Samples from any reader. Reads only as far as the sampled records plus
/// at most one value budget of buffering.
pub fn sample_head_from<R: Read>(reader: R, display: &str, format: FileFormat, size: u64) -> Result<HeadSample, String> {
    let mut r = BufReader::with_capacity(VALUE_BUDGET, reader);
    let (excerpt, n) = match format {
        FileFormat::Csv => sample_csv(&mut r)?,
        FileFormat::Json | FileFormat::Geojson => sample_json(&mut r)?,
        FileFormat::Pickle => (
            format!("binary serialized file of {size} bytes; contents are not deserialized"),
            0,
        ),
        FileFormat::SourceText | FileFormat::Other => sample_lines(&mut r)?,
    };
    Ok(HeadSample {
        file: display.into(),
        excerpt,
        record_count_sampled: n,
    })
}

fn clip(mut s: String) -> String {
    if s.len() > VALUE_BUDGET {
        let mut cut = VALUE_BUDGET;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
        s.push_str(TRUNCATED);
    }
    s
}

/// Reads one line, keeping at most the value budget of it.
fn read_line_bounded<R: BufRead>(r: &mut R) -> Result<Option<String>, String> {
    let mut kept = Vec::new();
    let mut any = false;
    let mut cut = false;
    loop {
        let buf = r.fill_buf().map_err(|e| e.to_string())?;
        if buf.is_empty() {
            break;
        }
        any = true;
        let (chunk, done) = match buf.iter().position(|&b| b == b'\n') {
            Some(i) => (&buf[..i], i + 1),
            None => (buf, buf.len()),
        };
        let room = VALUE_BUDGET.saturating_sub(kept.len());
        if chunk.len() > room {
            cut = true;
        }
        kept.extend_from_slice(&chunk[..chunk.len().min(room)]);
        let newline = done > chunk.len();
        r.consume(done);
        if newline {
            break;
        }
    }
    if !any {
        return Ok(None);
    }
    while kept.last() == Some(&b'\r') {
        kept.pop();
    }
    let mut s = String::from_utf8(kept).map_err(|_| "file is not valid UTF-8".to_string())?;
    if cut {
        s.push_str(TRUNCATED);
    }
    Ok(Some(s))
}

fn sample_lines<R: BufRead>(r: &mut R) -> Result<(String, usize), String> {
    let mut lines = Vec::new();
    while lines.len() < HEAD_RECORDS {
        match read_line_bounded(r)? {
            Some(l) => lines.push(l),
            None => break,
        }
    }
    Ok((lines.join("\n"), lines.len()))
}

fn sample_csv<R: BufRead>(r: &mut R) -> Result<(String, usize), String> {
    let header = read_line_bounded(r)?.ok_or("file is empty")?;
    let mut lines = vec![header];
    let mut rows = 0;
    while rows < HEAD_RECORDS {
        match read_line_bounded(r)? {
            Some(l) if l.trim().is_empty() => continue,
            Some(l) => {
                lines.push(l);
                rows += 1;
            }
            None => break,
        }
    }
    Ok((lines.join("\n"), rows))
}

struct Scanner<'a, R: BufRead> {
    r: &'a mut R,
}

impl<R: BufRead> Scanner<'_, R> {
    fn peek(&mut self) -> Result<Option<u8>, String> {
        Ok(self.r.fill_buf().map_err(|e| e.to_string())?.first().copied())
    }

    fn bump(&mut self) -> Result<Option<u8>, String> {
        let b = self.peek()?;
        if b.is_some() {
            self.r.consume(1);
        }
        Ok(b)
    }

    fn skip_ws(&mut self) -> Result<Option<u8>, String> {
        while let Some(b) = self.peek()? {
            if !b.is_ascii_whitespace() {
                return Ok(Some(b));
            }
            self.r.consume(1);
        }
        Ok(None)
    }

    fn expect_more(&mut self) -> Result<u8, String> {
        self.skip_ws()?.ok_or_else(|| "unexpected end of JSON".to_string())
    }

    /// Consumes one JSON value, keeping up to the value budget of its text.
    fn value(&mut self) -> Result<String, String> {
        let mut kept = Vec::new();
        let mut cut = false;
        let mut keep = |b: u8, kept: &mut Vec<u8>| {
            if kept.len() < VALUE_BUDGET {
                kept.push(b);
            } else {
                cut = true;
            }
        };
        let first = self.expect_more()?;
        match first {
            b'{' | b'[' | b'"' => {
                let mut depth = 0usize;
                let mut in_str = false;
                let mut esc = false;
                loop {
                    let b = self.bump()?.ok_or("unexpected end of JSON")?;
                    if !(b.is_ascii_whitespace() && !in_str && kept.last().is_some_and(u8::is_ascii_whitespace)) {
                        keep(if b == b'\n' && !in_str { b' ' } else { b }, &mut kept);
                    }
                    if in_str {
                        match b {
                            _ if esc => esc = false,
                            b'\\' => esc = true,
                            b'"' => {
                                in_str = false;
                                if depth == 0 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                        continue;
                    }
                    match b {
                        b'"' => in_str = true,
                        b'{' | b'[' => depth += 1,
                        b'}' | b']' => {
                            depth = depth.checked_sub(1).ok_or("unbalanced JSON")?;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                }
            }
            _ => {
                while let Some(b) = self.peek()? {
                    if matches!(b, b',' | b']' | b'}') || b.is_ascii_whitespace() {
                        break;
                    }
                    keep(b, &mut kept);
                    self.r.consume(1);
                }
            }
        }
        let mut s = String::from_utf8_lossy(&kept).into_owned();
        if cut {
            s.push_str(TRUNCATED);
        }
        Ok(s)
    }
}

fn sample_json<R: BufRead>(r: &mut R) -> Result<(String, usize), String> {
    let mut sc = Scanner { r };
    let open = sc.skip_ws()?.ok_or("file is empty")?;
    let (close, is_obj) = match open {
        b'{' => (b'}', true),
        b'[' => (b']', false),
        _ => return Ok((clip(sc.value()?), 1)),
    };
    sc.bump()?;
    let mut items = Vec::new();
    while items.len() < HEAD_RECORDS {
        if sc.expect_more()? == close {
            break;
        }
        let item = if is_obj {
            let key = sc.value()?;
            if sc.expect_more()? != b':' {
                return Err("expected ':' after object key".into());
            }
            sc.bump()?;
            format!("{key}: {}", sc.value()?)
        } else {
            sc.value()?
        };
        items.push(format!("  {item}"));
        match sc.expect_more()? {
            b',' => {
                sc.bump()?;
            }
            b if b == close => break,
            _ => return Err("expected ',' between JSON items".into()),
        }
    }
    let (o, c) = if is_obj { ("{", "}") } else { ("[", "]") };
    let more = if items.len() == HEAD_RECORDS && sc.expect_more().is_ok_and(|b| b != close) {
        "\n  ..."
    } else {
        ""
    };
    Ok((format!("{o}\n{}{more}\n{c}", items.join(",\n")), items.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;
    use std::rc::Rc;

    fn sample(format: FileFormat, body: &str) -> HeadSample {
        sample_head_from(body.as_bytes(), "f", format, body.len() as u64).unwrap()
    }

    #[test]
    fn csv_head() {
        let mut body = String::from("day,rate\n");
        for d in 0..100 {
            body.push_str(&format!("{d},0.{d}\n"));
        }
        let s = sample(FileFormat::Csv, &body);
        assert_eq!(s.record_count_sampled, 5);
        assert_eq!(s.excerpt, "day,rate\n0,0.0\n1,0.1\n2,0.2\n3,0.3\n4,0.4");
        let s = sample(FileFormat::Csv, "a\n1\n2\n3\n");
        assert_eq!(s.record_count_sampled, 3);
    }

    #[test]
    fn json_object_keys_in_order() {
        let body = r#"{"h": 1, "g": [1, 2], "f": {"x": "}"}, "e": "s", "d": null, "c": true, "b": 2, "a": 3}"#;
        let s = sample(FileFormat::Json, body);
        assert_eq!(s.record_count_sampled, 5);
        assert_eq!(
            s.excerpt,
            "{\n  \"h\": 1,\n  \"g\": [1, 2],\n  \"f\": {\"x\": \"}\"},\n  \"e\": \"s\",\n  \"d\": null\n  ...\n}"
        );
    }

    #[test]
    fn json_array_and_truncation() {
        let long = "x".repeat(2000);
        let body = format!("[\"{long}\", 2]");
        let s = sample(FileFormat::Json, &body);
        assert_eq!(s.record_count_sampled, 2);
        assert!(s.excerpt.contains(TRUNCATED));
        assert!(s.excerpt.len() < VALUE_BUDGET + 64);
        assert!(sample_head_from("{\"a\": ".as_bytes(), "f", FileFormat::Json, 6).is_err());
    }

    #[test]
    fn binary_files_are_described_not_read() {
        let s = sample(FileFormat::Pickle, "\u{80}junk");
        assert_eq!(s.record_count_sampled, 0);
        assert!(s.excerpt.contains("not deserialized"));
    }

    struct Counting<R> {
        inner: R,
        read: Rc<Cell<usize>>,
    }

    impl<R: Read> Read for Counting<R> {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            let n = self.inner.read(buf)?;
            self.read.set(self.read.get() + n);
            Ok(n)
        }
    }

    fn bytes_read(format: FileFormat, body: &[u8]) -> usize {
        let read = Rc::new(Cell::new(0));
        let r = Counting {
            inner: body,
            read: read.clone(),
        };
        sample_head_from(r, "f", format, body.len() as u64).unwrap();
        read.get()
    }

    #[test]
    fn reads_are_bounded() {
        let mut csv = String::from("a,b,c\n");
        let mut json = String::from("{");
        for i in 0..200_000 {
            csv.push_str(&format!("{i},{i},{i}\n"));
            json.push_str(&format!("\"k{i}\": [{i}, {i}],"));
        }
        json.push_str("\"end\": 0}");
        let csv_head: usize = csv.lines().take(HEAD_RECORDS + 1).map(|l| l.len() + 1).sum();
        assert!(bytes_read(FileFormat::Csv, csv.as_bytes()) <= csv_head + VALUE_BUDGET);
        let json_head = 1 + (0..HEAD_RECORDS).map(|i| format!("\"k{i}\": [{i}, {i}],").len()).sum::<usize>();
        assert!(bytes_read(FileFormat::Json, json.as_bytes()) <= json_head + VALUE_BUDGET);
    }
}
