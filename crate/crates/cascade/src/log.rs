//! JSON-lines prediction logs.
//!
//! One record per line:
//!
//! ```text
//! classification: {"example_id": str, "gold": str?, "prediction": str, "probs": [f64], "labels": [str]}
//! seq2seq:        {"example_id": str, "gold": str?, "prediction": str, "tokens": [{"top": [[str, f64]]}]}
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use cascade_core::model::{
    AnswerMatch, ClassDistribution, ModelOutput, ModelRun, PredictionRecord, SizeTag, TokenDistribution,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Classification,
    Seq2Seq,
}

impl FromStr for Schema {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classification" => Ok(Schema::Classification),
            "seq2seq" => Ok(Schema::Seq2Seq),
            _ => Err(format!("unknown log schema {s:?} (classification or seq2seq)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenLine {
    pub top: Vec<(String, f64)>,
}

/// One log line as it appears on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLine {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLine>>,
}

impl LogLine {
    pub fn schema(&self) -> Option<Schema> {
        match (&self.probs, &self.tokens) {
            (Some(_), None) => Some(Schema::Classification),
            (None, Some(_)) => Some(Schema::Seq2Seq),
            _ => None,
        }
    }

    fn into_output(self, schema: Schema) -> std::result::Result<(String, String, Option<String>, ModelOutput), String> {
        let found = self.schema();
        if found != Some(schema) {
            return Err(match found {
                None => "record must carry exactly one of \"probs\" or \"tokens\"".to_string(),
                Some(other) => format!("expected a {schema:?} record, found {other:?}"),
            });
        }
        let output = match schema {
            Schema::Classification => {
                let probs = self.probs.expect("checked above");
                let dist = match self.labels {
                    Some(labels) => ClassDistribution::with_labels(probs, labels),
                    None => Err(cascade_core::Error::InvalidParameter(
                        "classification record needs \"labels\"".into(),
                    )),
                }
                .map_err(|e| e.to_string())?;
                ModelOutput::Class(dist)
            }
            Schema::Seq2Seq => {
                if self.labels.is_some() {
                    return Err("seq2seq record must not carry \"labels\"".into());
                }
                let tokens = self
                    .tokens
                    .expect("checked above")
                    .into_iter()
                    .enumerate()
                    .map(|(t, tok)| {
                        TokenDistribution::new(tok.top).map_err(|e| format!("token {t}: {e}"))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if tokens.is_empty() {
                    return Err("seq2seq record has no tokens".into());
                }
                ModelOutput::Tokens(tokens)
            }
        };
        Ok((self.example_id, self.prediction, self.gold, output))
    }

    pub fn from_record(record: &PredictionRecord) -> Self {
        let mut line = LogLine {
            example_id: record.example_id.clone(),
            gold: record.gold.clone(),
            prediction: record.prediction.clone(),
            probs: None,
            labels: None,
            tokens: None,
        };
        match &record.output {
            ModelOutput::Class(dist) => {
                line.probs = Some(dist.probs().to_vec());
                line.labels = Some(match dist.labels() {
                    Some(l) => l.to_vec(),
                    None => (0..dist.num_classes()).map(|i| i.to_string()).collect(),
                });
            }
            ModelOutput::Tokens(tokens) => {
                line.tokens = Some(
                    tokens
                        .iter()
                        .map(|t| TokenLine { top: t.top().to_vec() })
                        .collect(),
                );
            }
        }
        line
    }
}

/// How a log file is turned into a [`ModelRun`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// `None` takes the schema of the first record.
    pub schema: Option<Schema>,
    pub answer_match: AnswerMatch,
    /// Defaults to the file stem.
    pub model_id: Option<String>,
    pub size_tag: SizeTag,
    pub run_index: u32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            schema: None,
            answer_match: AnswerMatch::Exact,
            model_id: None,
            size_tag: SizeTag::Other,
            run_index: 0,
        }
    }
}

impl LoadOptions {
    pub fn with_schema(schema: Schema) -> Self {
        Self { schema: Some(schema), ..Self::default() }
    }
}

pub fn model_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Parses a prediction log into a run, validating every record.
pub fn load_prediction_log(path: &Path, options: &LoadOptions) -> Result<ModelRun> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut schema = options.schema;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let parsed: LogLine =
            serde_json::from_str(&line).map_err(|e| parse_err(format!("malformed record: {e}")))?;
        let schema = *schema.get_or_insert(
            parsed
                .schema()
                .ok_or_else(|| parse_err("record must carry exactly one of \"probs\" or \"tokens\"".into()))?,
        );
        let (id, prediction, gold, output) = parsed.into_output(schema).map_err(parse_err)?;
        if !seen.insert(id.clone()) {
            return Err(parse_err(format!("duplicate example_id {id:?}")));
        }
        records.push(PredictionRecord::with_match(id, prediction, gold, output, options.answer_match));
    }
    let model_id = options.model_id.clone().unwrap_or_else(|| model_id_from_path(path));
    Ok(ModelRun::new(model_id, options.size_tag, options.run_index, records)?)
}

/// Writes a run as a prediction log in ascending example_id order.
pub fn write_prediction_log(run: &ModelRun, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in run.records() {
        serde_json::to_writer(&mut out, &LogLine::from_record(record))
            .map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_classification_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "small.jsonl",
            r#"{"example_id":"a","gold":"pos","prediction":"pos","probs":[0.9,0.1],"labels":["pos","neg"]}
{"example_id":"b","gold":"pos","prediction":"neg","probs":[0.4,0.6],"labels":["pos","neg"]}
"#,
        );
        let run = load_prediction_log(&path, &LoadOptions::with_schema(Schema::Classification)).unwrap();
        assert_eq!(run.len(), 2);
        assert_eq!(run.model_id, "small");
        assert_eq!(run.get("a").unwrap().correct, Some(true));
        assert_eq!(run.get("b").unwrap().correct, Some(false));
    }

    #[test]
    fn rejects_unnormalized() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "bad.jsonl",
            r#"{"example_id":"a","prediction":"pos","probs":[0.5,0.3],"labels":["pos","neg"]}"#,
        );
        let err = load_prediction_log(&path, &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("distribution not normalized"), "{msg}");
        assert!(msg.contains(":1:"), "{msg}");
    }

    #[test]
    fn loads_seq2seq_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "seq.jsonl",
            r#"{"example_id":"q1","gold":"paris","prediction":"paris","tokens":[{"top":[["pa",0.8],["lo",0.1]]},{"top":[["ri",0.6],["n",0.3]]},{"top":[["s",0.9],["</s>",0.05]]}]}"#,
        );
        let run = load_prediction_log(&path, &LoadOptions::with_schema(Schema::Seq2Seq)).unwrap();
        assert_eq!(run.len(), 1);
        match &run.get("q1").unwrap().output {
            ModelOutput::Tokens(t) => assert_eq!(t.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "x.jsonl",
            "{\"example_id\":\"a\",\"prediction\":\"p\",\"probs\":[1.0,0.0],\"labels\":[\"p\",\"q\"]}\n\nnot json\n",
        );
        let err = load_prediction_log(&path, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_duplicates_and_schema_mixups() {
        let dir = tempfile::tempdir().unwrap();
        let line = r#"{"example_id":"a","prediction":"p","probs":[1.0,0.0],"labels":["p","q"]}"#;
        let dup = write(&dir, "dup.jsonl", &format!("{line}\n{line}\n"));
        let err = load_prediction_log(&dup, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(err.to_string().contains("duplicate"));

        let single = write(&dir, "one.jsonl", line);
        assert!(load_prediction_log(&single, &LoadOptions::with_schema(Schema::Seq2Seq)).is_err());
    }

    #[test]
    fn normalization_flag_changes_correctness() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "n.jsonl",
            r#"{"example_id":"a","gold":"The Louvre","prediction":"louvre","tokens":[{"top":[["l",0.9],["x",0.1]]}]}"#,
        );
        let exact = load_prediction_log(&path, &LoadOptions::default()).unwrap();
        assert_eq!(exact.get("a").unwrap().correct, Some(false));
        let opts = LoadOptions { answer_match: AnswerMatch::Normalized, ..LoadOptions::default() };
        let normalized = load_prediction_log(&path, &opts).unwrap();
        assert_eq!(normalized.get("a").unwrap().correct, Some(true));
    }
}
