//! CSV ingestion for `fit`.

use std::path::Path;

use crate::CliError;

/// Reads the `x` column of a headed CSV file, or its first column when no
/// column is named `x`.
pub fn read_series(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Validation(format!("{}: no columns", path.display())));
    }
    let col = headers.iter().position(|h| h == "x").unwrap_or(0);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let field = rec.get(col).unwrap_or("");
        let v: f64 = field.parse().map_err(|_| {
            CliError::Validation(format!(
                "{}: row {} column {:?}: {field:?} is not a number",
                path.display(),
                i + 2,
                &headers[col]
            ))
        })?;
        if !v.is_finite() {
            return Err(CliError::Validation(format!(
                "{}: row {} holds a non-finite value",
                path.display(),
                i + 2
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_named_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "t,x,latent\n0,1.5,2\n1,-0.25,3\n").unwrap();
        assert_eq!(read_series(&p).unwrap(), vec![1.5, -0.25]);
        std::fs::write(&p, "value\n3\n4\n").unwrap();
        assert_eq!(read_series(&p).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "x\n1\nabc\n").unwrap();
        assert!(matches!(read_series(&p), Err(CliError::Validation(m)) if m.contains("row 3")));
        std::fs::write(&p, "x\n").unwrap();
        assert!(read_series(&p).is_err());
    }
}
