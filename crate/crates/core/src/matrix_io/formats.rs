//! Text readers: svmlight/libsvm, MatrixMarket coordinate + label sidecar,
//! and dense CSV with the label in the first column.

use std::collections::HashSet;

use super::design::{DesignMatrix, Labels};
use super::DataError;

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, DataError> {
    let v: f64 = tok.parse().map_err(|_| DataError::Parse {
        line: Some(line),
        msg: format!("invalid {what} {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(DataError::Parse {
            line: Some(line),
            msg: format!("non-finite {what} {tok:?}"),
        });
    }
    Ok(v)
}

/// Parses svmlight text. Feature indices are 1-based on disk.
///
/// With `num_features = None` the column count is the largest index seen;
/// otherwise indices beyond `num_features` are a bounds error.
pub fn parse_svmlight(
    text: &str,
    num_features: Option<usize>,
) -> Result<(DesignMatrix, Labels), DataError> {
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut labels = Vec::new();
    let mut max_col = 0usize;
    let mut seen = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let label = parse_f64(toks.next().unwrap_or_default(), lineno, "label")?;
        let row = labels.len();
        labels.push(label);
        seen.clear();
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: Some(lineno),
                msg: format!("expected index:value, found {tok:?}"),
            })?;
            if idx == "qid" {
                continue;
            }
            let idx: usize = idx.parse().map_err(|_| DataError::Parse {
                line: Some(lineno),
                msg: format!("invalid feature index {idx:?}"),
            })?;
            if idx == 0 || num_features.is_some_and(|d| idx > d) {
                return Err(DataError::Bounds {
                    line: Some(lineno),
                    what: format!("feature index {idx} (indices are 1-based)"),
                });
            }
            let col = idx - 1;
            if !seen.insert(col) {
                return Err(DataError::Duplicate { row, col });
            }
            let val = parse_f64(val, lineno, "feature value")?;
            max_col = max_col.max(idx);
            entries.push((row, col, val));
        }
    }
    if labels.is_empty() {
        return Err(DataError::NoSamples);
    }
    let d = num_features.unwrap_or(max_col);
    let mut columns = vec![Vec::new(); d];
    for (i, j, v) in entries {
        columns[j].push((i, v));
    }
    Ok((
        DesignMatrix::from_columns(labels.len(), columns)?,
        Labels::new(labels),
    ))
}

/// Parses a MatrixMarket `coordinate` file (real, integer or pattern,
/// general symmetry) plus a sidecar with one label per line.
pub fn parse_matrix_market(
    matrix_text: &str,
    label_text: &str,
) -> Result<(DesignMatrix, Labels), DataError> {
    let mut lines = matrix_text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::NoSamples)?;
    let head: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if head.len() < 5 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
        return Err(DataError::Parse {
            line: Some(1),
            msg: "missing %%MatrixMarket matrix header".into(),
        });
    }
    if head[2] != "coordinate" {
        return Err(DataError::Parse {
            line: Some(1),
            msg: format!("unsupported layout {:?}", head[2]),
        });
    }
    let pattern = match head[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => {
            return Err(DataError::Parse {
                line: Some(1),
                msg: format!("unsupported field {other:?}"),
            })
        }
    };
    if head[4] != "general" {
        return Err(DataError::Parse {
            line: Some(1),
            msg: format!("unsupported symmetry {:?}", head[4]),
        });
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut count = 0usize;
    let mut seen = HashSet::new();
    for (lineno, raw) in lines {
        let lineno = lineno + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let bad = |msg: &str| DataError::Parse {
            line: Some(lineno),
            msg: msg.to_string(),
        };
        let parse_index = |t: &str| t.parse::<usize>().map_err(|_| bad("invalid index"));
        match size {
            None => {
                if toks.len() != 3 {
                    return Err(bad("expected size line `rows cols entries`"));
                }
                let (n, d, nnz) = (
                    parse_index(toks[0])?,
                    parse_index(toks[1])?,
                    parse_index(toks[2])?,
                );
                columns = vec![Vec::new(); d];
                size = Some((n, d, nnz));
            }
            Some((n, d, _)) => {
                let want = if pattern { 2 } else { 3 };
                if toks.len() != want {
                    return Err(bad("wrong number of fields in entry"));
                }
                let (i, j) = (parse_index(toks[0])?, parse_index(toks[1])?);
                if i == 0 || i > n || j == 0 || j > d {
                    return Err(DataError::Bounds {
                        line: Some(lineno),
                        what: format!("entry ({i}, {j}) outside {n} x {d} (1-based)"),
                    });
                }
                if !seen.insert((i, j)) {
                    return Err(DataError::Duplicate {
                        row: i - 1,
                        col: j - 1,
                    });
                }
                let v = if pattern {
                    1.0
                } else {
                    parse_f64(toks[2], lineno, "value")?
                };
                columns[j - 1].push((i - 1, v));
                count += 1;
            }
        }
    }
    let (n, _, nnz) = size.ok_or(DataError::NoSamples)?;
    if count != nnz {
        return Err(DataError::Parse {
            line: None,
            msg: format!("header declares {nnz} entries, found {count}"),
        });
    }
    if n == 0 {
        return Err(DataError::NoSamples);
    }
    let mut labels = Vec::with_capacity(n);
    for (lineno, raw) in label_text.lines().enumerate() {
        let body = raw.trim();
        if body.is_empty() {
            continue;
        }
        labels.push(parse_f64(body, lineno + 1, "label")?);
    }
    if labels.len() != n {
        return Err(DataError::Parse {
            line: None,
            msg: format!("label file has {} labels for {n} rows", labels.len()),
        });
    }
    Ok((DesignMatrix::from_columns(n, columns)?, Labels::new(labels)))
}

/// Parses dense CSV: `label,f1,...,fd` per line. A first line whose leading
/// field is not numeric is taken as a header and skipped.
pub fn parse_dense_csv(text: &str) -> Result<(DesignMatrix, Labels), DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let body = raw.trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if labels.is_empty() && width.is_none() && fields[0].parse::<f64>().is_err() {
            width = Some(fields.len());
            continue;
        }
        match width {
            Some(w) if w != fields.len() => {
                return Err(DataError::Parse {
                    line: Some(lineno),
                    msg: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            _ => width = Some(fields.len()),
        }
        labels.push(parse_f64(fields[0], lineno, "label")?);
        let row = fields[1..]
            .iter()
            .map(|f| parse_f64(f, lineno, "value"))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if labels.is_empty() {
        return Err(DataError::NoSamples);
    }
    Ok((DesignMatrix::from_dense_rows(&rows)?, Labels::new(labels)))
}

/// Writes svmlight text (1-based indices) for a matrix and its labels.
pub fn write_svmlight(m: &DesignMatrix, y: &Labels) -> String {
    let mut out = String::new();
    for (i, row) in m.rows().into_iter().enumerate() {
        out.push_str(&format!("{}", y.as_slice()[i]));
        for (j, v) in row {
            out.push_str(&format!(" {}:{}", j + 1, v));
        }
        out.push('\n');
    }
    out
}
