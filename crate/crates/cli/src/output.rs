//! Report, CSV, data-file and gnuplot-script output.

use crate::pipelines::Outcome;
use anyhow::{Context, Result};
use hypodecay::analyze::{series_csv, NormSeries};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(())
}

/// Two-column `t value` data file.
fn dat(series: &NormSeries) -> String {
    let mut s = format!("# {}\n", series.label);
    for (t, v) in series.times.iter().zip(&series.values) {
        let _ = writeln!(s, "{t:.17e} {v:.17e}");
    }
    s
}

/// Log-log plot of every series, one curve per data file.
fn gnuplot(stem: &str, series: &[NormSeries], files: &[String]) -> String {
    let mut s = format!(
        "set terminal pngcairo size 900,600\nset output '{stem}.png'\nset logscale xy\nset xlabel 't'\nset key outside\n"
    );
    let curves: Vec<String> = series
        .iter()
        .zip(files)
        .map(|(se, f)| format!("'{f}' using 1:2 with linespoints title '{}'", se.label.replace('\'', "")))
        .collect();
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}

/// Writes `<stem>.json`, `<stem>.csv`, one `<stem>-<k>.dat` per series and `<stem>.gp`.
pub fn write_all(dir: &Path, stem: &str, outcome: &Outcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = vec![];
    write(dir.join(format!("{stem}.json")), &outcome.report.to_json(), &mut written)?;
    for (name, json) in &outcome.artifacts {
        write(dir.join(format!("{stem}.{name}.json")), json, &mut written)?;
    }
    if outcome.series.is_empty() {
        return Ok(written);
    }
    write(dir.join(format!("{stem}.csv")), &series_csv(&outcome.series), &mut written)?;
    let mut files = vec![];
    for (k, se) in outcome.series.iter().enumerate() {
        let name = format!("{stem}-{k}.dat");
        write(dir.join(&name), &dat(se), &mut written)?;
        files.push(name);
    }
    write(dir.join(format!("{stem}.gp")), &gnuplot(stem, &outcome.series, &files), &mut written)?;
    Ok(written)
}
