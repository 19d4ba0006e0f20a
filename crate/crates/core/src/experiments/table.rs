//! CSV emitters. Reference lines start with `#` and are documentation only.

use std::io::Write;

use super::protocols::{AblationRow, MismatchReport, UpperBoundReport};
use crate::error::Result;
use crate::metrics::{ApSweep, ConfusionMatrix, MacroMetrics};
use crate::scene::Taxonomy;

fn annotate<W: Write>(w: &mut W, lines: &[&str]) -> Result<()> {
    for l in lines {
        writeln!(w, "# {l}")?;
    }
    Ok(())
}

fn finish<W: Write>(mut csv: csv::Writer<W>) -> Result<()> {
    csv.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], mut w: W) -> Result<()> {
    annotate(&mut w, &["reference (non-normative, full-scale street-view corpus): layout+bi M-F1 81.37"])?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["encoder", "cell", "architecture", "status", "runs", "m_p", "m_r", "m_f1", "m_f1_sd", "error"])?;
    for r in rows {
        let s = r.summary.as_ref();
        csv.write_record([
            r.encoder.name().to_string(),
            r.cell.name().to_string(),
            r.architecture.name().to_string(),
            if r.failure.is_none() { "ok" } else { "failed" }.to_string(),
            s.map(|s| s.runs.to_string()).unwrap_or_default(),
            opt(s.map(|s| s.precision)),
            opt(s.map(|s| s.recall)),
            opt(s.map(|s| s.f1)),
            opt(s.map(|s| s.f1_sd)),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    finish(csv)
}

/// Rows are true land uses, columns predictions.
pub fn write_confusion_csv<W: Write>(cm: &ConfusionMatrix, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let name = |i: usize| Taxonomy::LANDUSES.get(i).map(|s| s.to_string()).unwrap_or_else(|| i.to_string());
    let mut header = vec!["true\\pred".to_string()];
    header.extend((0..cm.classes()).map(name));
    csv.write_record(&header)?;
    for (i, row) in cm.counts.iter().enumerate() {
        let mut rec = vec![name(i)];
        rec.extend(row.iter().map(|c| c.to_string()));
        csv.write_record(&rec)?;
    }
    finish(csv)
}

/// One row per metric.
pub fn write_metrics_csv<W: Write>(m: &MacroMetrics, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["metric", "value"])?;
    csv.write_record(["macro_precision", &m.precision.to_string()])?;
    csv.write_record(["macro_recall", &m.recall.to_string()])?;
    csv.write_record(["macro_f1", &m.f1.to_string()])?;
    csv.write_record(["mean_class_f1", &m.mean_class_f1.to_string()])?;
    for (i, c) in m.per_class.iter().enumerate() {
        let n = Taxonomy::LANDUSES.get(i).map(|s| s.to_string()).unwrap_or_else(|| i.to_string());
        csv.write_record([format!("precision[{n}]"), c.precision.to_string()])?;
        csv.write_record([format!("recall[{n}]"), c.recall.to_string()])?;
        csv.write_record([format!("f1[{n}]"), c.f1.to_string()])?;
    }
    finish(csv)
}

pub fn write_mismatch_csv<W: Write>(report: &MismatchReport, mut w: W) -> Result<()> {
    annotate(
        &mut w,
        &[
            "reference (non-normative): co-occurrence trained on ground truth 74.58 vs trained on detector output 81.00 M-F1",
            &format!("direction_holds={}", report.direction_holds),
        ],
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["train_on", "test_on", "runs", "m_p", "m_r", "m_f1", "m_f1_sd"])?;
    for c in &report.cells {
        let s = &c.summary;
        csv.write_record([
            c.train_on.to_string(),
            c.test_on.to_string(),
            s.runs.to_string(),
            s.precision.to_string(),
            s.recall.to_string(),
            s.f1.to_string(),
            s.f1_sd.to_string(),
        ])?;
    }
    finish(csv)
}

pub fn write_upper_csv<W: Write>(report: &UpperBoundReport, mut w: W) -> Result<()> {
    annotate(&mut w, &["reference (non-normative): perfect-detector upper limit M-F1 93.82"])?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["row", "m_p", "m_r", "m_f1"])?;
    for r in &report.rows {
        csv.write_record([r.name.to_string(), r.precision.to_string(), r.recall.to_string(), r.f1.to_string()])?;
    }
    finish(csv)
}

/// One row per building category plus a `mean` row; one column per IoU
/// threshold plus the .50:.95 mean. Empty cells mark categories without
/// ground truth.
pub fn write_ap_csv<W: Write>(sweep: &ApSweep, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["category".to_string()];
    header.extend(sweep.columns.iter().map(|(t, _)| format!("ap@{t}")));
    header.push("ap@.50:.95".to_string());
    csv.write_record(&header)?;
    for (c, name) in Taxonomy::BUILDINGS.iter().enumerate() {
        let vals: Vec<Option<f64>> = sweep.columns.iter().map(|(_, r)| r.per_category[c]).collect();
        let mut rec = vec![name.to_string()];
        rec.extend(vals.iter().map(|v| opt(*v)));
        let tail = &vals[1..];
        rec.push(if tail.iter().all(Option::is_some) {
            (tail.iter().flatten().sum::<f64>() / tail.len() as f64).to_string()
        } else {
            String::new()
        });
        csv.write_record(&rec)?;
    }
    let mut rec = vec!["mean".to_string()];
    rec.extend(sweep.columns.iter().map(|(_, r)| r.mean.to_string()));
    rec.push(sweep.mean_50_95.to_string());
    csv.write_record(&rec)?;
    finish(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{confusion, macro_metrics};

    #[test]
    fn metrics_rows() {
        let cm = confusion(&[0, 1, 2, 3], &[0, 1, 2, 3], 4).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&macro_metrics(&cm), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("metric,value\nmacro_precision,1\n"));
        assert_eq!(s.lines().count(), 1 + 4 + 12);
    }

    #[test]
    fn confusion_layout() {
        let cm = confusion(&[1, 1], &[0, 1], 4).unwrap();
        let mut buf = Vec::new();
        write_confusion_csv(&cm, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().nth(1).unwrap(), "commercial,0,1,0,0");
    }
}
