//! Report persistence: a JSON summary, a CSV of every curve and a gnuplot
//! script that plots the CSV.

use std::fs;
use std::path::{Path, PathBuf};

use chnu::experiments::{Check, ExperimentReport, NormCurve, Verdict};
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const CURVE_COLUMNS: [&str; 7] = ["experiment", "label", "n", "omega", "m", "t", "value"];

/// Paths written by [`write_report`]; `None` for formats not requested.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportFiles {
    pub summary: Option<PathBuf>,
    pub curves: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

/// Worst verdict over a run.
pub fn overall(reports: &[ExperimentReport]) -> Verdict {
    reports
        .iter()
        .map(ExperimentReport::overall)
        .fold(Verdict::Pass, |acc, v| match (acc, v) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Invalidated, _) | (_, Verdict::Invalidated) => Verdict::Invalidated,
            _ => Verdict::Pass,
        })
}

/// JSON number, or a string for values JSON cannot hold.
fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn check_json(experiment: &str, c: &Check) -> Value {
    json!({
        "experiment": experiment,
        "name": c.name,
        "value": number(c.value),
        "relation": c.relation.symbol(),
        "threshold": number(c.threshold),
        "verdict": c.verdict.to_string(),
    })
}

pub fn summary_json(reports: &[ExperimentReport], cfg: &RunConfig) -> Value {
    let mut echo = Map::new();
    echo.insert("config_hash".into(), json!(cfg.hash()));
    echo.insert(
        "resolved".into(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    for r in reports {
        let pairs: Map<String, Value> = r
            .config
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        echo.insert(r.experiment.clone(), Value::Object(pairs));
    }
    let mut premises = Vec::new();
    let mut conclusions = Vec::new();
    let mut constants = Vec::new();
    let mut fits = Vec::new();
    let mut notes = Vec::new();
    let mut verdicts = Map::new();
    for r in reports {
        premises.extend(r.premises.iter().map(|c| check_json(&r.experiment, c)));
        conclusions.extend(r.conclusions.iter().map(|c| check_json(&r.experiment, c)));
        constants.extend(
            r.constants
                .iter()
                .map(|(k, v)| json!({"experiment": r.experiment, "name": k, "value": number(*v)})),
        );
        fits.extend(r.fits.iter().map(|f| {
            json!({
                "experiment": r.experiment,
                "label": f.label,
                "n": f.n,
                "slope": number(f.fit.slope),
                "horizon": number(f.fit.horizon),
                "residual": number(f.fit.residual),
            })
        }));
        notes.extend(
            r.notes
                .iter()
                .map(|n| json!({"experiment": r.experiment, "note": n})),
        );
        verdicts.insert(r.experiment.clone(), json!(r.overall().to_string()));
    }
    verdicts.insert("overall".into(), json!(overall(reports).to_string()));
    json!({
        "config_echo": echo,
        "premises": premises,
        "conclusions": conclusions,
        "constants": constants,
        "fits": fits,
        "notes": notes,
        "verdicts": verdicts,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Writes the curve table. `f64` values use the shortest decimal form that
/// parses back to the same bits.
pub fn write_curves<W: std::io::Write>(out: W, reports: &[ExperimentReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_COLUMNS)?;
    for r in reports {
        for c in &r.curves {
            for (t, v) in c.times.iter().zip(&c.values) {
                w.write_record([
                    r.experiment.clone(),
                    c.label.clone(),
                    opt(c.n),
                    opt(c.omega),
                    opt(c.m),
                    t.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve table back as `(experiment, curve)` pairs in file order.
pub fn read_curves(path: &Path) -> Result<Vec<(String, NormCurve)>, CliError> {
    let bad = |message: String| CliError::Schema {
        path: path.display().to_string(),
        message,
    };
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::MissingFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CURVE_COLUMNS) {
        return Err(bad(format!("expected columns {}", CURVE_COLUMNS.join(","))));
    }
    let mut out: Vec<(String, NormCurve)> = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let parse_opt = |i: usize| -> Result<Option<f64>, CliError> {
            match field(i) {
                "" => Ok(None),
                s => s
                    .parse()
                    .map(Some)
                    .map_err(|_| bad(format!("row {}: bad {} {s:?}", line + 2, CURVE_COLUMNS[i]))),
            }
        };
        let num = |i: usize| -> Result<f64, CliError> {
            field(i).parse().map_err(|_| {
                bad(format!(
                    "row {}: bad {} {:?}",
                    line + 2,
                    CURVE_COLUMNS[i],
                    field(i)
                ))
            })
        };
        let experiment = field(0).to_string();
        let label = field(1).to_string();
        let n = parse_opt(2)?.map(|v| v as i32);
        let omega = parse_opt(3)?.map(|v| v as u8);
        let m = parse_opt(4)?;
        let (t, v) = (num(5)?, num(6)?);
        let same = out.last().is_some_and(|(e, c)| {
            *e == experiment
                && c.label == label
                && c.n == n
                && c.omega == omega
                && c.m.map(f64::to_bits) == m.map(f64::to_bits)
        });
        if same {
            let c = &mut out.last_mut().expect("checked above").1;
            c.times.push(t);
            c.values.push(v);
        } else {
            let mut c = NormCurve::new(label, vec![t], vec![v]);
            c.n = n;
            c.omega = omega;
            c.m = m;
            out.push((experiment, c));
        }
    }
    Ok(out)
}

/// gnuplot script drawing every curve of the table next to it.
pub fn plot_script(stem: &str, csv_name: &str, reports: &[ExperimentReport]) -> String {
    let mut s = format!(
        "# gnuplot {csv_name}\nset datafile separator \",\"\nset terminal pngcairo size 1200,800\n\
         set output \"{stem}.png\"\nset xlabel \"t\"\nset ylabel \"norm\"\nset key outside right\n"
    );
    let mut series = Vec::new();
    for r in reports {
        for c in &r.curves {
            let mut cond = format!(
                "strcol(1) eq \"{}\" && strcol(2) eq \"{}\"",
                r.experiment, c.label
            );
            let mut title = format!("{} {}", r.experiment, c.label);
            if let Some(n) = c.n {
                cond.push_str(&format!(" && strcol(3) eq \"{n}\""));
                title.push_str(&format!(" n={n}"));
            }
            if let Some(o) = c.omega {
                cond.push_str(&format!(" && strcol(4) eq \"{o}\""));
                title.push_str(&format!(" omega={o}"));
            }
            if let Some(m) = c.m {
                cond.push_str(&format!(" && strcol(5) eq \"{m}\""));
                title.push_str(&format!(" m={m}"));
            }
            series.push(format!(
                "\"{csv_name}\" every ::1 using 6:(({cond}) ? $7 : 1/0) with lines title \"{}\"",
                title.replace('"', "'")
            ));
        }
    }
    if series.is_empty() {
        s.push_str("print \"no curves\"\n");
    } else {
        s.push_str("plot ");
        s.push_str(&series.join(", \\\n     "));
        s.push('\n');
    }
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the requested formats to `cfg.output_dir()` under
/// `{experiment}_seed{seed}_{hash12}`.
pub fn write_report(
    reports: &[ExperimentReport],
    cfg: &RunConfig,
) -> Result<ReportFiles, CliError> {
    write_report_named(reports, cfg, &cfg.stem())
}

pub fn write_report_named(
    reports: &[ExperimentReport],
    cfg: &RunConfig,
    stem: &str,
) -> Result<ReportFiles, CliError> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(|source| CliError::Output {
        path: dir.clone(),
        source,
    })?;
    let mut files = ReportFiles::default();
    let csv_name = format!("{stem}_curves.csv");
    for format in &cfg.output.formats {
        match format {
            Format::Summary => {
                let path = dir.join(format!("{stem}_summary.json"));
                let mut text = serde_json::to_string_pretty(&summary_json(reports, cfg))
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                text.push('\n');
                write_file(&path, text.as_bytes())?;
                files.summary = Some(path);
            }
            Format::Curves => {
                let path = dir.join(&csv_name);
                let mut buf = Vec::new();
                write_curves(&mut buf, reports).map_err(|e| CliError::Internal(e.to_string()))?;
                write_file(&path, &buf)?;
                files.curves = Some(path);
            }
            Format::Plot => {
                let path = dir.join(format!("{stem}_plot.gp"));
                write_file(&path, plot_script(stem, &csv_name, reports).as_bytes())?;
                files.plot = Some(path);
            }
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chnu::experiments::{fit_slope, LabeledFit};

    fn sample() -> ExperimentReport {
        let times: Vec<f64> = (0..=10).map(|i| 0.025 * i as f64).collect();
        let mut r = ExperimentReport::new("demo");
        for n in [4, 5] {
            let values = times
                .iter()
                .map(|t| 0.1 * t / 3.0 + 1e-17 * n as f64)
                .collect();
            let c = NormCurve::new("d", times.clone(), values)
                .with_n(n)
                .with_omega(1)
                .with_m(0.1 + 0.2);
            let fit = fit_slope(&c, 0.25).unwrap();
            r.fits.push(LabeledFit {
                label: "d".into(),
                n: Some(n),
                fit,
            });
            r.curves.push(c);
        }
        r.curves.push(NormCurve::new(
            "bare",
            vec![0.0, 1.0],
            vec![f64::INFINITY, -0.0],
        ));
        r.conclusions
            .push(Check::at_least("slope", r.fits[0].fit.slope, 0.01));
        r.finalize()
    }

    #[test]
    fn curves_round_trip_exactly_and_refit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let r = sample();
        let mut buf = Vec::new();
        write_curves(&mut buf, std::slice::from_ref(&r)).unwrap();
        fs::write(&path, buf).unwrap();
        let back = read_curves(&path).unwrap();
        assert_eq!(back.len(), r.curves.len());
        for ((exp, c), orig) in back.iter().zip(&r.curves) {
            assert_eq!(exp, "demo");
            assert_eq!(c, orig);
            assert!(c
                .values
                .iter()
                .zip(&orig.values)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        for f in &r.fits {
            let c = &back
                .iter()
                .find(|(_, c)| c.label == f.label && c.n == f.n)
                .unwrap()
                .1;
            assert_eq!(fit_slope(c, 0.25).unwrap(), f.fit);
        }
    }

    #[test]
    fn empty_report_gives_valid_summary() {
        let r = ExperimentReport::new("empty").finalize();
        let cfg = RunConfig::default();
        let v = summary_json(std::slice::from_ref(&r), &cfg);
        assert_eq!(v["verdicts"]["overall"], "PASS");
        assert_eq!(v["premises"].as_array().unwrap().len(), 0);
        let mut buf = Vec::new();
        write_curves(&mut buf, &[r]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,label,n,omega,m,t,value\n"
        );
    }

    #[test]
    fn non_finite_values_survive_the_summary() {
        let mut r = ExperimentReport::new("x");
        r.constant("c", f64::INFINITY);
        let v = summary_json(&[r], &RunConfig::default());
        assert_eq!(v["constants"][0]["value"], "inf");
    }

    #[test]
    fn plot_script_only_reads_its_table() {
        let s = plot_script("stem", "stem_curves.csv", &[sample()]);
        let quoted: Vec<&str> = s
            .split('"')
            .skip(1)
            .step_by(2)
            .filter(|q| q.ends_with(".csv") || q.ends_with(".png") || q.ends_with(".json"))
            .collect();
        assert!(
            quoted
                .iter()
                .all(|q| *q == "stem_curves.csv" || *q == "stem.png"),
            "{quoted:?}"
        );
    }
}
