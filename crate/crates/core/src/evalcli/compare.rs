//! Error-accumulation curves of several models side by side.

use std::path::Path;

use super::metrics::error_accumulation;
use super::svg::line_chart;
use crate::binio::write_atomic;
use crate::csvout::{float, Csv};
use crate::error::{Error, Result};
use crate::meshgraph::GraphSequence;
use crate::model::Predictor;

pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_SVG: &str = "compare.svg";

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// Unique column labels (a repeated tag gets `_2`, `_3`, ...).
    pub labels: Vec<String>,
    pub curves: Vec<Vec<f64>>,
}

fn unique_labels(tags: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(tags.len());
    for t in tags {
        let mut label = t.clone();
        let mut n = 1;
        while out.contains(&label) {
            n += 1;
            label = format!("{t}_{n}");
        }
        out.push(label);
    }
    out
}

pub fn compare_models(models: &[(String, &dyn Predictor)], samples: &[GraphSequence]) -> Result<Comparison> {
    if models.is_empty() {
        return Err(Error::InvalidInput("nothing to compare".into()));
    }
    let tags: Vec<String> = models.iter().map(|(t, _)| t.clone()).collect();
    let curves = models
        .iter()
        .map(|(_, m)| error_accumulation(*m, samples))
        .collect::<Result<_>>()?;
    Ok(Comparison {
        labels: unique_labels(&tags),
        curves,
    })
}

impl Comparison {
    pub fn to_csv(&self) -> Result<Csv> {
        let mut header = vec!["step".to_string()];
        header.extend(self.labels.iter().cloned());
        let mut csv = Csv::new(&header);
        let steps = self.curves.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..steps {
            let mut row = vec![i.to_string()];
            row.extend(self.curves.iter().map(|c| c.get(i).map_or("nan".into(), |&v| float(v))));
            csv.row(&row)?;
        }
        Ok(csv)
    }

    pub fn to_svg(&self) -> String {
        let series: Vec<(String, Vec<f64>)> =
            self.labels.iter().cloned().zip(self.curves.iter().cloned()).collect();
        line_chart("Error accumulation", "time step", "mean Euclidean error (mm)", &series)
    }

    /// Writes `compare.csv` and `compare.svg` under `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        self.to_csv()?.write(&out_dir.join(COMPARE_CSV))?;
        write_atomic(&out_dir.join(COMPARE_SVG), self.to_svg().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgraph::EdgeIndex;
    use crate::model::{GroundTruthStub, ZeroPredictor};

    fn seq() -> GraphSequence {
        let p0 = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let p1 = vec![[0.0, 0.0, 0.0], [1.0, 0.0, -0.5], [0.0, 1.0, -0.25]];
        GraphSequence {
            positions: vec![p0, p1],
            edges: EdgeIndex::new(vec![0, 1, 2], vec![1, 2, 0]).unwrap(),
            fixed: vec![true, false, false],
        }
    }

    #[test]
    fn identical_models_identical_columns() {
        let z: &dyn Predictor = &ZeroPredictor;
        let s: &dyn Predictor = &GroundTruthStub;
        let c = compare_models(&[("zero".into(), z), ("zero".into(), z), ("stub".into(), s)], &[seq()]).unwrap();
        assert_eq!(c.labels, vec!["zero", "zero_2", "stub"]);
        assert_eq!(c.curves[0], c.curves[1]);
        assert!(c.curves[2].iter().all(|v| *v == 0.0));
        let text = c.to_csv().unwrap().as_str().to_string();
        assert!(text.starts_with("step,zero,zero_2,stub\n0,"));
        assert_eq!(text.lines().count(), 3);
        assert!(c.to_svg().contains("zero_2"));
    }
}
