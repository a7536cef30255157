//! Lineage, Decrease, and series artifacts over a set of campaign logs.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use dgfdist_core::lineage::{
    decrease_distribution, first_poc, first_poc_tick, lineage, lineage_histogram, lineage_series,
    DecreaseReport, LineageRecord,
};
use dgfdist_core::CampaignLog;

use crate::fsutil::write_atomic;

#[derive(Clone, Debug)]
pub struct AnalysisSummary {
    pub logs: usize,
    pub pocs: usize,
    pub lineages: Vec<(String, LineageRecord)>,
    pub decrease: DecreaseReport,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Computes every analysis artifact for `logs` (labelled) and writes them to
/// `out_dir`.
pub fn analyze_logs(logs: &[(String, CampaignLog)], out_dir: &Path) -> Result<AnalysisSummary> {
    let mut lineage_csv = String::from("log,poc_id,tte,length,chain\n");
    let mut decrease_csv = String::from("log,tick,parent_id,parent_distance,child_distance,decrease\n");
    let mut series = String::from("log\ttick\tid\tdistance\tis_ancestor\n");
    let mut lineages = Vec::new();
    let mut reports = Vec::new();

    for (label, log) in logs {
        let record = match first_poc(log) {
            Some(id) => Some(lineage(log, id).map_err(|e| anyhow::anyhow!("{label}: {e}"))?),
            None => None,
        };
        if let Some(rec) = &record {
            let chain: Vec<String> = rec.chain.iter().map(|a| a.id.to_string()).collect();
            let _ = writeln!(
                lineage_csv,
                "{label},{},{},{},{}",
                rec.poc_id,
                first_poc_tick(log).unwrap_or_default(),
                rec.length(),
                chain.join(">")
            );
        }
        for p in lineage_series(log, record.as_ref()) {
            let _ = writeln!(
                series,
                "{label}\t{}\t{}\t{}\t{}",
                p.tick,
                p.id,
                opt_f64(p.distance),
                u8::from(p.is_ancestor)
            );
        }
        let report = decrease_distribution(log);
        for s in &report.samples {
            let _ = writeln!(
                decrease_csv,
                "{label},{},{},{},{},{}",
                s.tick, s.parent_id, s.parent_distance, s.child_distance, s.decrease
            );
        }
        reports.push(report);
        if let Some(rec) = record {
            lineages.push((label.clone(), rec));
        }
    }

    let decrease = DecreaseReport::merge(reports);
    let mut cactus = String::from("rank\tdecrease\n");
    for (i, d) in decrease.cactus().iter().enumerate() {
        let _ = writeln!(cactus, "{}\t{d}", i + 1);
    }
    let mut hist = String::from("length\tcount\n");
    for (len, n) in lineage_histogram(lineages.iter().map(|(_, r)| r)) {
        let _ = writeln!(hist, "{len}\t{n}");
    }
    let summary = format!(
        "samples,skipped,mean,median\n{},{},{},{}\n",
        decrease.samples.len(),
        decrease.skipped,
        opt_f64(decrease.mean),
        opt_f64(decrease.median)
    );

    for (name, body) in [
        ("lineage.csv", &lineage_csv),
        ("lineage_hist.tsv", &hist),
        ("lineage_series.tsv", &series),
        ("decrease.csv", &decrease_csv),
        ("decrease_summary.csv", &summary),
        ("decrease_cactus.tsv", &cactus),
    ] {
        write_atomic(&out_dir.join(name), body.as_bytes())?;
    }

    Ok(AnalysisSummary {
        logs: logs.len(),
        pocs: lineages.len(),
        lineages,
        decrease,
    })
}
