//! Plot-ready CSV renderings.

use crate::diagnostics::QqPoints;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_to_string;
use crate::model::{EmbeddingPair, Points};

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Schema(e.to_string())
}

/// Columns `type_label, role, coord_1..coord_m`; reception rows first.
pub fn embedding_csv(embedding: &EmbeddingPair, labels: &[String]) -> Result<String> {
    if labels.len() != embedding.n_types() {
        return Err(Error::Shape("label count differs from embedded types".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["type_label".to_string(), "role".to_string()];
    header.extend((1..=embedding.dim()).map(|d| format!("coord_{d}")));
    w.write_record(&header).map_err(csv_err)?;
    for (role, points) in [("reception", &embedding.reception), ("influence", &embedding.influence)] {
        for (k, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone(), role.to_string()];
            row.extend(points.point(k).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Reads coordinates for the types in `labels`. Accepts the layout written by
/// [`embedding_csv`], or `type_label, coord_1..coord_m` without a role column,
/// in which case each point serves as both reception and influence point.
pub fn load_embedding_csv(path: &Path, labels: &[String]) -> Result<EmbeddingPair> {
    let text = read_to_string(path)?;
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let has_role = headers.get(1) == Some("role");
    let first_coord = if has_role { 2 } else { 1 };
    let dim = headers.len().saturating_sub(first_coord);
    let coords_ok = (0..dim).all(|d| headers.get(first_coord + d) == Some(format!("coord_{}", d + 1).as_str()));
    if headers.get(0) != Some("type_label") || dim == 0 || !coords_ok {
        return Err(parse_err(1, "expected header `type_label[,role],coord_1,...`".into()));
    }
    let n = labels.len();
    let mut reception: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut influence: Vec<Option<Vec<f64>>> = vec![None; n];
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let k = labels
            .iter()
            .position(|l| l == &row[0])
            .ok_or_else(|| parse_err(line, format!("unknown type `{}`", &row[0])))?;
        let point = (first_coord..row.len())
            .map(|i| row[i].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| parse_err(line, "coordinates must be finite numbers".into()))?;
        let role = has_role.then(|| &row[1]);
        let targets: Vec<&mut Vec<Option<Vec<f64>>>> = match role {
            None => vec![&mut reception, &mut influence],
            Some("reception") => vec![&mut reception],
            Some("influence") => vec![&mut influence],
            Some(other) => return Err(parse_err(line, format!("unknown role `{other}`"))),
        };
        for slot in targets {
            if slot[k].replace(point.clone()).is_some() {
                return Err(parse_err(line, format!("type `{}` listed twice", &row[0])));
            }
        }
    }
    let collect = |slots: Vec<Option<Vec<f64>>>, role: &str| -> Result<Points> {
        let rows = slots
            .into_iter()
            .enumerate()
            .map(|(k, p)| p.ok_or_else(|| parse_err(0, format!("no {role} point for type `{}`", labels[k]))))
            .collect::<Result<Vec<_>>>()?;
        Points::from_rows(&rows, dim)
    };
    EmbeddingPair::new(collect(reception, "reception")?, collect(influence, "influence")?)
}

/// Columns `epoch, train_ll`.
pub fn learning_curve_csv(train_ll: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_ll"]).map_err(csv_err)?;
    for (i, ll) in train_ll.iter().enumerate() {
        w.write_record([i.to_string(), ll.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

/// Columns `empirical, theoretical`.
pub fn qq_csv(points: &QqPoints) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["empirical", "theoretical"]).map_err(csv_err)?;
    for (e, t) in points {
        w.write_record([e.to_string(), t.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Points;

    #[test]
    fn embedding_layout() {
        let e = EmbeddingPair::new(
            Points::from_rows(&[vec![0.5, 1.0], vec![2.0, -1.0]], 2).unwrap(),
            Points::from_rows(&[vec![0.0, 0.25], vec![3.0, 4.0]], 2).unwrap(),
        )
        .unwrap();
        let text = embedding_csv(&e, &["a".into(), "b".into()]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "type_label,role,coord_1,coord_2");
        assert_eq!(lines[1], "a,reception,0.5,1");
        assert_eq!(lines[4], "b,influence,3,4");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn embedding_reads_back() {
        let e = EmbeddingPair::new(
            Points::from_rows(&[vec![0.1, 1.0 / 3.0], vec![2.0, -1.0]], 2).unwrap(),
            Points::from_rows(&[vec![0.0, 0.25], vec![3.0, 4.0]], 2).unwrap(),
        )
        .unwrap();
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        std::fs::write(&path, embedding_csv(&e, &labels).unwrap()).unwrap();
        assert_eq!(load_embedding_csv(&path, &labels).unwrap(), e);

        std::fs::write(&path, "type_label,coord_1\nb,2\na,1\n").unwrap();
        let geo = load_embedding_csv(&path, &labels).unwrap();
        assert_eq!(geo.reception.rows(), vec![vec![1.0], vec![2.0]]);
        assert_eq!(geo.influence, geo.reception);

        std::fs::write(&path, "type_label,coord_1\na,1\n").unwrap();
        assert!(load_embedding_csv(&path, &labels)
            .unwrap_err()
            .to_string()
            .contains("`b`"));
        std::fs::write(&path, "type_label,coord_1\na,1\nc,2\n").unwrap();
        assert!(matches!(
            load_embedding_csv(&path, &labels),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn curve_and_qq_layout() {
        assert_eq!(
            learning_curve_csv(&[-3.5, -2.0]).unwrap(),
            "epoch,train_ll\n0,-3.5\n1,-2\n"
        );
        assert_eq!(qq_csv(&vec![(0.1, 0.2)]).unwrap(), "empirical,theoretical\n0.1,0.2\n");
    }
}
