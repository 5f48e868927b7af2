use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::WeightedPointSet;

/// Reads one point per row. A header row is detected by a non-numeric first
/// field; if its first column is named `weight`, that column holds weights.
pub fn read_points_csv(path: &Path) -> Result<WeightedPointSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut weighted = false;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                weighted = rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("weight"));
                continue;
            }
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {line}: `{f}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if weighted {
            let (w, p) = vals.split_first().ok_or_else(|| Error::Parse(format!("line {line}: empty row")))?;
            weights.push(*w);
            points.push(p.to_vec());
        } else {
            weights.push(1.0);
            points.push(vals);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let dim = points[0].len();
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
        return Err(Error::Parse(format!("row {} has {} coordinates, expected {dim}", i + 1, p.len())));
    }
    WeightedPointSet::new(points, weights)
}

/// Writes `weight,x0,x1,…` with a header row.
pub fn write_points_csv(path: &Path, set: &WeightedPointSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["weight".to_string()];
    header.extend((0..set.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (p, wt) in set.iter() {
        let mut row = vec![format!("{wt:?}")];
        row.extend(p.iter().map(|x| format!("{x:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn plain_rows() {
        let dir = tempfile::tempdir().unwrap();
        let set = read_points_csv(&write(&dir, "a.csv", "1,2\n3.5,-4\n")).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.point(1), &[3.5, -4.0]);
        assert_eq!(set.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn weight_header() {
        let dir = tempfile::tempdir().unwrap();
        let set = read_points_csv(&write(&dir, "b.csv", "weight,x,y\n2,1,1\n0.5,0,3\n")).unwrap();
        assert_eq!(set.weights(), &[2.0, 0.5]);
        assert_eq!(set.point(1), &[0.0, 3.0]);
        let set = read_points_csv(&write(&dir, "c.csv", "x,y\n2,1\n")).unwrap();
        assert_eq!(set.point(0), &[2.0, 1.0]);
    }

    #[test]
    fn bad_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_points_csv(&write(&dir, "d.csv", "1,2\n3\n")).is_err());
        assert!(read_points_csv(&write(&dir, "e.csv", "1,2\n3,x\n")).is_err());
        assert!(read_points_csv(&write(&dir, "f.csv", "x,y\n")).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let set = WeightedPointSet::new(vec![vec![0.1, 1.0 / 3.0], vec![-2e-9, 7.0]], vec![1.25, 3.0 / 7.0]).unwrap();
        let p = dir.path().join("out.csv");
        write_points_csv(&p, &set).unwrap();
        assert_eq!(read_points_csv(&p).unwrap(), set);
    }
}
