//! Markdown and CSV renderings of the ranking artifacts.

use std::fmt::Write as _;
use std::path::Path;

use super::{
    effects_from_scores, gains, hall_of_fame, ranking_table, ComparisonRow, EffectDelta, Gains, HallOfFameEntry,
    RankingRow, Stat, COMPARISON_COLUMNS,
};
use crate::error::Result;
use crate::runner::{write_atomic, Dataset};

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn cell(s: &Stat) -> String {
    format!("{:.2} ({:.2})", s.mean, s.std)
}

fn bold_if(text: String, flag: bool) -> String {
    if flag {
        format!("**{text}**")
    } else {
        text
    }
}

pub fn ranking_csv(rows: &[RankingRow]) -> String {
    to_csv(
        &[
            "fid", "dim", "single_best_id", "single_best_mean", "single_best_std", "avg_best_id", "avg_best_mean",
            "avg_best_std", "all_mean", "all_std", "single_beats_avg", "avg_beats_all",
        ],
        rows.iter().map(|r| {
            vec![
                r.fid.to_string(),
                r.dim.to_string(),
                r.single_best.config_id.clone(),
                r.single_best.stat.mean.to_string(),
                r.single_best.stat.std.to_string(),
                r.avg_best.config_id.clone(),
                r.avg_best.stat.mean.to_string(),
                r.avg_best.stat.std.to_string(),
                r.all.mean.to_string(),
                r.all.std.to_string(),
                r.single_beats_avg.to_string(),
                r.avg_beats_all.to_string(),
            ]
        }),
    )
}

pub fn summary_csv(rows: &[(usize, Gains)]) -> String {
    to_csv(
        &["dim", "avg_performance", "gain_avg_best", "gain_single_best"],
        rows.iter().map(|(d, g)| {
            vec![d.to_string(), g.avg_performance.to_string(), g.gain_avg_best.to_string(), g.gain_single_best.to_string()]
        }),
    )
}

pub fn effects_csv(rows: &[EffectDelta]) -> String {
    to_csv(
        &["config_id", "module", "option", "delta"],
        rows.iter().map(|e| {
            vec![
                e.config_id.clone(),
                e.module.clone(),
                e.option.clone(),
                e.delta.map_or_else(|| super::NOT_ESTIMABLE.to_string(), |d| d.to_string()),
            ]
        }),
    )
}

pub fn hall_of_fame_csv(entries: &[(usize, HallOfFameEntry)], names: &[String]) -> String {
    let mut header = vec!["dim", "rank", "config_id", "score"];
    header.extend(names.iter().map(String::as_str));
    to_csv(
        &header,
        entries.iter().map(|(dim, e)| {
            let mut row = vec![dim.to_string(), e.rank.to_string(), e.config_id.clone(), e.score.to_string()];
            row.extend(e.values.iter().cloned());
            row
        }),
    )
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut header = vec!["fid".to_string(), "dim".to_string()];
    for c in COMPARISON_COLUMNS {
        for h in ["a_mean", "a_std", "b_mean", "b_std", "better"] {
            header.push(format!("{c}_{h}"));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    to_csv(
        &header,
        rows.iter().map(|r| {
            let mut row = vec![r.fid.to_string(), r.dim.to_string()];
            for k in 0..3 {
                row.extend([
                    r.a[k].mean.to_string(),
                    r.a[k].std.to_string(),
                    r.b[k].mean.to_string(),
                    r.b[k].std.to_string(),
                    r.winner[k].as_str().to_string(),
                ]);
            }
            row
        }),
    )
}

pub fn comparison_markdown(rows: &[ComparisonRow], label_a: &str, label_b: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| fid | dim | single-best {label_a} | single-best {label_b} | avg-best {label_a} | avg-best {label_b} | all {label_a} | all {label_b} |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for r in rows {
        let _ = write!(s, "| f{} | {} |", r.fid, r.dim);
        for k in 0..3 {
            let w = r.winner[k];
            let _ = write!(
                s,
                " {} | {} |",
                bold_if(cell(&r.a[k]), w == super::Winner::A),
                bold_if(cell(&r.b[k]), w == super::Winner::B)
            );
        }
        s.push('\n');
    }
    s
}

/// Every ranking artifact of a dataset: one Markdown document plus CSV files.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub markdown: String,
    /// `(file name, contents)` pairs.
    pub files: Vec<(String, String)>,
}

impl Report {
    /// Builds rankings, gains, avg-best effects and the top-`k` hall of fame
    /// for every dimension of `dataset`.
    pub fn build(dataset: &Dataset, k: usize) -> Result<Self> {
        let mut md = String::new();
        let _ = writeln!(md, "# Ranking report: {}\n", dataset.family);
        let failed = dataset.failed_count();
        let _ = writeln!(md, "{} runs, {} failed and excluded.\n", dataset.records.len(), failed);
        let (mut ranking, mut summary, mut effects, mut hof) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for dim in dataset.dims() {
            let rows = ranking_table(dataset, dim)?;
            let g = gains(dataset, dim)?;
            let _ = writeln!(md, "## d = {dim}\n");
            let _ = writeln!(md, "| fid | single-best | avg-best | all |");
            let _ = writeln!(md, "|---|---|---|---|");
            for r in &rows {
                let _ = writeln!(
                    md,
                    "| f{} | {} | {} | {} |",
                    r.fid,
                    bold_if(cell(&r.single_best.stat), r.single_beats_avg),
                    bold_if(cell(&r.avg_best.stat), r.avg_beats_all),
                    cell(&r.all)
                );
            }
            let _ = writeln!(
                md,
                "\nAverage performance {:.3}, gain avg-best {:.3}, gain single-best {:.3}.\n",
                g.avg_performance, g.gain_avg_best, g.gain_single_best
            );
            let entries = hall_of_fame(dataset, dim, k)?;
            if let Some(best) = entries.first() {
                let _ = writeln!(md, "### Hall of fame\n");
                let _ = writeln!(md, "| rank | config | score | {} |", dataset.param_names.join(" | "));
                let _ = writeln!(md, "|---|---|---|{}", "---|".repeat(dataset.param_names.len()));
                for e in &entries {
                    let opts: Vec<String> = e.effects.iter().map(|d| format!("{} ({})", d.option, d.display_delta())).collect();
                    let _ = writeln!(md, "| {} | `{}` | {:.3} | {} |", e.rank, e.config_id, e.score, opts.join(" | "));
                }
                md.push('\n');
                let scores = super::across_fid_means(dataset, dim);
                effects.extend(effects_from_scores(&dataset.param_names, &super::config_values(dataset), &scores, &best.config_id)?);
            }
            hof.extend(entries.into_iter().map(|e| (dim, e)));
            ranking.extend(rows);
            summary.push((dim, g));
        }
        Ok(Report {
            markdown: md,
            files: vec![
                ("ranking.csv".into(), ranking_csv(&ranking)),
                ("summary.csv".into(), summary_csv(&summary)),
                ("effects.csv".into(), effects_csv(&effects)),
                ("hall_of_fame.csv".into(), hall_of_fame_csv(&hof, &dataset.param_names)),
            ],
        })
    }

    /// Writes `report.md` and the CSV files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.md"), self.markdown.as_bytes())?;
        for (name, body) in &self.files {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }
}
