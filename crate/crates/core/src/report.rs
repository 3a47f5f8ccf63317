//! Deterministic CSV/JSON emission.
//!
//! Reals are written in their shortest round-trip decimal form (never more
//! than 17 significant digits), JSON object keys are sorted and every line
//! ends in a bare LF, so identical inputs give identical bytes everywhere.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::catalog::CatalogFunction;
use crate::counterexample::EscapeStats;
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidParameter(format!("unknown format `{s}`"))),
        }
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // Value's map is ordered by key, so routing through it sorts every object.
    let value: Value = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn coord_headers(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |i| format!("{prefix}{i}"))
}

/// Columns `k,t,x_0..x_{d-1},f,subgrad_norm`. The last row's norm is
/// d(0, ∂f(x_K)) since no step is taken from it.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let f: &CatalogFunction = &traj.function;
    let mut out = csv_writer(w);
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend(coord_headers("x_", f.dim()));
    header.extend(["f".to_string(), "subgrad_norm".to_string()]);
    out.write_record(&header)?;
    for (k, p) in traj.points.iter().enumerate() {
        let norm = match traj.chosen_subgradients.get(k) {
            Some(s) => s.norm(),
            None => f.subdifferential(p, 0.0)?.minimal_norm_element().norm(),
        };
        let mut row = vec![k.to_string(), format_real(k as f64 * traj.alpha)];
        row.extend(p.iter().map(|&c| format_real(c)));
        row.push(format_real(f.evaluate(p)?));
        row.push(format_real(norm));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `t,x_0..x_{d-1},f,min_norm_subgrad`.
pub fn write_flow_csv<W: Write>(sol: &FlowSolution, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(coord_headers("x_", sol.function.dim()));
    header.extend(["f".to_string(), "min_norm_subgrad".to_string()]);
    out.write_record(&header)?;
    for j in 0..sol.times.len() {
        let mut row = vec![format_real(sol.times[j])];
        row.extend(sol.states[j].iter().map(|&c| format_real(c)));
        row.push(format_real(sol.f_values[j]));
        row.push(format_real(sol.min_norm_subgrads[j].norm()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-sample escape outcomes: `sample,x0_0,x0_1,on_s,exit_index` (empty when no exit).
pub fn write_escape_samples_csv<W: Write>(stats: &EscapeStats, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["sample", "x0_0", "x0_1", "on_s", "exit_index"])?;
    for o in &stats.outcomes {
        out.write_record([
            o.index.to_string(),
            format_real(o.x0[0]),
            format_real(o.x0[1]),
            o.on_null_set.to_string(),
            o.exit_index.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Anything the CLI can write to disk.
pub trait Reportable: Serialize {
    fn write_csv(&self, _w: &mut dyn Write) -> Result<()> {
        Err(Error::InvalidParameter(
            "this result has no CSV form".into(),
        ))
    }
}

impl Reportable for Trajectory {
    fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        write_trajectory_csv(self, w)
    }
}

impl Reportable for FlowSolution {
    fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        write_flow_csv(self, w)
    }
}

impl Reportable for EscapeStats {
    fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        write_escape_samples_csv(self, w)
    }
}

impl Reportable for Value {}
impl Reportable for Vector {}
impl Reportable for crate::prober::ProbeReport {}
impl Reportable for crate::prober::BoundReport {}
impl Reportable for crate::flow::DeviationReport {}
impl<T: Serialize> Reportable for Vec<T> {}

pub fn render<R: Reportable + ?Sized>(result: &R, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => Ok(to_json_string(result)?.into_bytes()),
        Format::Csv => {
            let mut buf = Vec::new();
            result.write_csv(&mut buf)?;
            Ok(buf)
        }
    }
}

pub fn write_report<R: Reportable + ?Sized>(result: &R, path: &Path, format: Format) -> Result<()> {
    let bytes = render(result, format)?;
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::FunctionId;
    use crate::engine::{run, RunOptions};

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.0), "0.0");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(0.30000000000000004), "0.30000000000000004");
        assert_eq!(format_real(1e100), "1e100");
        for v in [std::f64::consts::PI, -1.0 / 3.0, 1e-300, 123456789.0123] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s
                .trim_start_matches('-')
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(char::is_ascii_digit)
                .collect::<String>();
            assert!(digits.trim_start_matches('0').len() <= 17, "{s}");
        }
    }

    #[test]
    fn quad_two_step_csv() {
        let f = CatalogFunction::new(FunctionId::Quad, 1).unwrap();
        let t = run(&f, &Vector::from(1.0), &RunOptions::new(0.1, 2)).unwrap();
        let csv = String::from_utf8(render(&t, Format::Csv).unwrap()).unwrap();
        assert_eq!(
            csv,
            "k,t,x_0,f,subgrad_norm\n\
             0,0.0,1.0,0.5,1.0\n\
             1,0.1,0.9,0.405,0.9\n\
             2,0.2,0.81,0.32805000000000006,0.81\n"
        );
    }

    #[test]
    fn zero_step_csv_has_one_row() {
        let f = CatalogFunction::new(FunctionId::Quad, 1).unwrap();
        let t = run(&f, &Vector::from(1.0), &RunOptions::new(0.1, 0)).unwrap();
        let csv = String::from_utf8(render(&t, Format::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn json_keys_sorted() {
        let v = serde_json::json!({"zeta": 1, "alpha": {"b": 2, "a": 1}});
        let s = to_json_string(&v).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.ends_with("}\n") && !s.contains('\r'));
    }

    #[test]
    fn same_result_same_bytes() {
        let f = CatalogFunction::new(FunctionId::Cross, 2).unwrap();
        let t = run(&f, &Vector::from([1.0, 0.1]), &RunOptions::new(0.1, 50)).unwrap();
        let dir = std::env::temp_dir().join(format!("nsdyn-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
        write_report(&t, &a, Format::Csv).unwrap();
        write_report(&t.replay().unwrap(), &b, Format::Csv).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_unsupported_for_reports() {
        let v = serde_json::json!({"a": 1});
        assert!(render(&v, Format::Csv).is_err());
    }
}
