//! One sequence per line, after a `{"classes": [...]}` header line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_labels, Dataset, Sequence};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    classes: Vec<String>,
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    read_jsonl(File::open(path)?, path)
}

/// Parses a dataset; `origin` only labels error messages.
pub fn read_jsonl(reader: impl Read, origin: &Path) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        msg,
    };
    let mut classes: Option<Vec<String>> = None;
    let mut sequences: Vec<Sequence> = Vec::new();
    let mut dim: Option<usize> = None;

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(class_names) = &classes else {
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| err(lineno, format!("expected {{\"classes\": [...]}} header: {e}")))?;
            if header.classes.is_empty() {
                return Err(err(lineno, "header lists no classes".into()));
            }
            classes = Some(header.classes);
            continue;
        };
        let seq: Sequence = serde_json::from_str(&line).map_err(|e| err(lineno, e.to_string()))?;
        seq.validate().map_err(|m| err(lineno, m))?;
        check_labels(&seq, class_names.len()).map_err(|m| err(lineno, m))?;
        match dim {
            None => dim = Some(seq.dim()),
            Some(d) if d != seq.dim() => {
                return Err(err(
                    lineno,
                    format!("frame dim {} differs from earlier sequences ({d})", seq.dim()),
                ))
            }
            Some(_) => {}
        }
        sequences.push(seq);
    }

    let classes = classes.ok_or_else(|| err(0, "no sequences".into()))?;
    if sequences.is_empty() {
        return Err(err(0, "no sequences".into()));
    }
    Dataset::new(classes, sequences)
}

pub fn save_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl(dataset: &Dataset, mut w: impl Write) -> Result<()> {
    let header = Header {
        classes: dataset.class_names.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).map_err(std::io::Error::from)?)?;
    for s in &dataset.sequences {
        writeln!(w, "{}", serde_json::to_string(s).map_err(std::io::Error::from)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SynthSpec, SynthTask};

    fn parse(text: &str) -> Result<Dataset> {
        read_jsonl(text.as_bytes(), Path::new("mem.jsonl"))
    }

    #[test]
    fn empty_file_has_no_sequences() {
        let e = parse("").unwrap_err().to_string();
        assert!(e.contains("no sequences"), "{e}");
        let e = parse("{\"classes\":[\"a\"]}\n").unwrap_err().to_string();
        assert!(e.contains("no sequences"), "{e}");
    }

    #[test]
    fn round_trip_is_exact() {
        let mut ds = gen_synthetic(&SynthSpec::new(SynthTask::Velocity, 2, 6, 5, 3, 0.3, 4)).unwrap();
        ds.sequences[1].frame_labels = Some(vec![1; 5]);
        ds.sequences[2].group = Some("g1".into());
        let mut buf = Vec::new();
        write_jsonl(&ds, &mut buf).unwrap();
        let back = read_jsonl(buf.as_slice(), Path::new("x")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn mixed_dims_rejected_at_line() {
        let text = "{\"classes\":[\"a\",\"b\"]}\n\
                    {\"id\":\"s0\",\"label\":0,\"frames\":[[1.0,2.0],[3.0,4.0]]}\n\
                    {\"id\":\"s1\",\"label\":1,\"frames\":[[1.0,2.0],[3.0]]}\n";
        match parse(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let text = "{\"classes\":[\"a\",\"b\"]}\n\
                    {\"id\":\"s0\",\"label\":0,\"frames\":[[1.0,2.0]]}\n\
                    {\"id\":\"s1\",\"label\":1,\"frames\":[[1.0,2.0,3.0]]}\n";
        match parse(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schema_violations_carry_line_numbers() {
        let cases = [
            ("{\"id\":\"s0\",\"label\":0,\"frames\":[[1.0]]}\n", 1),
            ("{\"classes\":[\"a\"]}\n{\"id\":\"s0\",\"label\":3,\"frames\":[[1.0]]}\n", 2),
            ("{\"classes\":[\"a\"]}\n{\"id\":\"s0\",\"label\":0,\"frames\":[]}\n", 2),
            ("{\"classes\":[\"a\"]}\n{\"id\":\"s0\",\"label\":0,\"frames\":[[1.0]],\"frame_labels\":[0,0]}\n", 2),
            ("{\"classes\":[\"a\"]}\n{\"id\":\"s0\",\"label\":0,\"frames\":[[1.0]],\"extra\":1}\n", 2),
            ("{\"classes\":[\"a\"]}\n{\"id\":\"s0\",\"label\":0,\"frames\":[[1.0]]}\nnot json\n", 3),
        ];
        for (text, want) in cases {
            match parse(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
