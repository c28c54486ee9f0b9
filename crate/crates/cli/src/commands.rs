use std::fs;

use serde_json::{json, Value};
use wavepart::config::{resolve, ExperimentConfig};
use wavepart::dists::{JointWavePdf, WavePdf};
use wavepart::gridfock::run_oracle;
use wavepart::info::{maximize_mi_wc, mi_map, mutual_info_cc, mutual_info_wc, MapGrid};
use wavepart::model::DetectorParams;
use wavepart::sampler::{sample_cc_single, sample_w_single, sample_wc_single, sample_ww_single, SampleBatch};
use wavepart::Error;

use crate::output::{to_json, Cell, Format, Sink, Table};
use crate::{Cli, CliError, Command, Figure, SampleMode};

const FIG2_S: [f64; 5] = [0.0, 0.2, 0.5, 0.7, 1.0];
const FIG3_S: [f64; 4] = [0.0, 0.2, 0.5, 0.7];

pub fn run(cli: Cli) -> Result<(), CliError> {
    let sink = Sink {
        out: cli.out.clone(),
        command_line: std::env::args().collect(),
    };
    match cli.command {
        Command::Params { config } => {
            let format = cli.format.unwrap_or(Format::Json);
            let text = fs::read_to_string(&config)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let report = resolve(&cfg)?;
            let content = match format {
                Format::Json => to_json(&report),
                Format::Csv => {
                    let mut t = Table::new(&["detector", "mode", "sigma", "s_re", "s_im", "P"]);
                    for (i, d) in report.detectors.iter().enumerate() {
                        let opt = |v: Option<f64>| Cell::Float(v.unwrap_or(f64::NAN));
                        t.push(vec![
                            Cell::Int(i as i64 + 1),
                            Cell::Text(format!("{:?}", d.mode).to_lowercase()),
                            opt(d.sigma),
                            opt(d.s.map(|s| s.re)),
                            opt(d.s.map(|s| s.im)),
                            Cell::Float(d.p),
                        ]);
                    }
                    t.render(Format::Csv)
                }
            };
            let params = json!({ "config": serde_json::to_value(&cfg).unwrap_or(Value::Null) });
            sink.emit("params", "params", format, &content, params, None)?;
            report.constraints.into_result()?;
            Ok(())
        }
        Command::Figure { which, sigma, s, points } => {
            let format = cli.format.unwrap_or(Format::Csv);
            let (stem, table, params) = figure(which, sigma, s, points)?;
            sink.emit("figure", stem, format, &table.render(format), params, None)
        }
        Command::Sample {
            mode,
            n,
            sigma,
            s,
            s2,
            p,
            p2,
        } => {
            let format = cli.format.unwrap_or(Format::Csv);
            let seed = cli.seed;
            let (batch, params) = match mode {
                SampleMode::W => (
                    sample_w_single(n, sigma, s, seed)?,
                    json!({ "mode": "w", "n": n, "sigma": sigma, "s": s }),
                ),
                SampleMode::Ww => {
                    let s2 = s2.unwrap_or(s);
                    let dets = [DetectorParams::real(sigma, s, 0.0)?, DetectorParams::real(sigma, s2, 0.0)?];
                    (
                        sample_ww_single(n, &dets, seed)?,
                        json!({ "mode": "ww", "n": n, "sigma": sigma, "s": [s, s2] }),
                    )
                }
                SampleMode::Cc => {
                    let p2 = p2.unwrap_or(p);
                    (
                        sample_cc_single(n, p, p2, seed)?,
                        json!({ "mode": "cc", "n": n, "P": [p, p2] }),
                    )
                }
                SampleMode::Wc => (
                    sample_wc_single(n, sigma, s, p, seed)?,
                    json!({ "mode": "wc", "n": n, "sigma": sigma, "s": s, "P": p }),
                ),
            };
            let content = render_batch(&batch, format);
            sink.emit("sample", "sample", format, &content, params, Some(seed))
        }
        Command::Mi { s, p, p2, maximize } => {
            let format = cli.format.unwrap_or(Format::Json);
            if maximize {
                let m = maximize_mi_wc()?;
                let mut t = Table::new(&["s", "P", "I", "I_over_ln2", "on_boundary"]);
                t.push(vec![
                    Cell::Float(m.s),
                    Cell::Float(m.p),
                    Cell::Float(m.value),
                    Cell::Float(m.value / std::f64::consts::LN_2),
                    Cell::Bool(m.on_boundary),
                ]);
                let content = match format {
                    Format::Json => to_json(&m),
                    Format::Csv => t.render(Format::Csv),
                };
                return sink.emit("mi", "mi_max", format, &content, json!({ "maximize": true }), None);
            }
            let p = p.ok_or_else(|| CliError::Usage("mi needs --P (with --s or --P2) or --maximize".into()))?;
            let (table, params) = match (s, p2) {
                (Some(s), None) => {
                    let mut t = Table::new(&["s", "P", "I"]);
                    t.push(vec![Cell::Float(s), Cell::Float(p), Cell::Float(mutual_info_wc(s, p)?)]);
                    (t, json!({ "s": s, "P": p }))
                }
                (None, Some(p2)) => {
                    let mut t = Table::new(&["P1", "P2", "I"]);
                    t.push(vec![Cell::Float(p), Cell::Float(p2), Cell::Float(mutual_info_cc(p, p2)?)]);
                    (t, json!({ "P1": p, "P2": p2 }))
                }
                _ => return Err(CliError::Usage("give either --s (wave-count) or --P2 (count-count)".into())),
            };
            let content = match format {
                Format::Json => {
                    let rows: Value = serde_json::from_str(&table.render(Format::Json)).expect("valid json");
                    to_json(&rows[0])
                }
                Format::Csv => table.render(Format::Csv),
            };
            sink.emit("mi", "mi", format, &content, params, None)
        }
        Command::Oracle { g, nmax } => {
            let format = cli.format.unwrap_or(Format::Json);
            let report = run_oracle(g, nmax)?;
            let content = match format {
                Format::Json => to_json(&report),
                Format::Csv => {
                    let mut t = Table::new(&["check", "deviation", "threshold", "pass"]);
                    for c in &report.checks {
                        t.push(vec![
                            Cell::Text(c.name.clone()),
                            Cell::Float(c.deviation),
                            Cell::Float(c.threshold),
                            Cell::Bool(c.pass),
                        ]);
                    }
                    t.render(Format::Csv)
                }
            };
            sink.emit("oracle", "oracle", format, &content, json!({ "G": g, "nmax": nmax }), None)?;
            if report.all_pass {
                Ok(())
            } else {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                Err(CliError::Failed(format!("oracle checks failed: {}", failed.join("; "))))
            }
        }
    }
}

fn render_batch(batch: &SampleBatch, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            batch.write_csv(&mut buf).expect("writing to memory");
            String::from_utf8(buf).expect("ascii csv")
        }
        Format::Json => {
            let columns: serde_json::Map<String, Value> = batch
                .layout
                .columns()
                .into_iter()
                .zip(&batch.columns)
                .enumerate()
                .map(|(i, (name, col))| {
                    let values: Vec<Value> = if batch.layout.is_count_column(i) {
                        col.iter().map(|&v| Value::from(v as u8)).collect()
                    } else {
                        col.iter().map(|&v| Value::from(v)).collect()
                    };
                    (name, Value::Array(values))
                })
                .collect();
            to_json(&json!({ "seed": batch.seed, "count": batch.count, "columns": columns }))
        }
    }
}

fn grid_point(i: usize, n: usize) -> f64 {
    // -4 + 8 i/(n-1); exact at the endpoints and at ±1 when 8 | n-1.
    -4.0 + (8 * i) as f64 / (n - 1) as f64
}

fn figure(
    which: Figure,
    sigma: f64,
    s_values: Option<Vec<f64>>,
    points: Option<usize>,
) -> Result<(&'static str, Table, Value), CliError> {
    match which {
        Figure::Fig2 => {
            let s_values = s_values.unwrap_or_else(|| FIG2_S.to_vec());
            let n = points.unwrap_or(401);
            if n < 2 {
                return Err(CliError::Usage("fig2 needs at least two points".into()));
            }
            let mut t = Table::new(&["w", "s", "density"]);
            for &s in &s_values {
                let pdf = WavePdf::single(sigma, s)?;
                for i in 0..n {
                    let w = sigma * grid_point(i, n);
                    t.push(vec![Cell::Float(w), Cell::Float(s), Cell::Float(pdf.density(w))]);
                }
            }
            Ok(("fig2", t, json!({ "figure": "fig2", "sigma": sigma, "s": s_values, "points": n })))
        }
        Figure::Fig3 => {
            let s_values = s_values.unwrap_or_else(|| FIG3_S.to_vec());
            let limit = std::f64::consts::FRAC_1_SQRT_2;
            if let Some(&bad) = s_values.iter().find(|&&s| s.abs() > limit + 1e-12) {
                return Err(Error::Domain(format!(
                    "fig3 needs s <= 1/sqrt(2) so that 2 s^2 <= 1, got {bad}"
                ))
                .into());
            }
            let n = points.unwrap_or(81);
            if n < 2 {
                return Err(CliError::Usage("fig3 needs at least two points".into()));
            }
            let mut t = Table::new(&["s", "w1", "w2", "density"]);
            for &s in &s_values {
                let pdf = JointWavePdf::symmetric(sigma, s)?;
                for i in 0..n {
                    let w1 = sigma * grid_point(i, n);
                    for j in 0..n {
                        let w2 = sigma * grid_point(j, n);
                        t.push(vec![
                            Cell::Float(s),
                            Cell::Float(w1),
                            Cell::Float(w2),
                            Cell::Float(pdf.density(&[w1, w2])?),
                        ]);
                    }
                }
            }
            Ok(("fig3", t, json!({ "figure": "fig3", "sigma": sigma, "s": s_values, "points": n })))
        }
        Figure::Fig4 => {
            if s_values.is_some() {
                return Err(CliError::Usage("fig4 covers the whole (s, P) square; --s does not apply".into()));
            }
            let n = points.unwrap_or(101);
            let grid = MapGrid {
                n_s: n,
                n_p: n,
                ..MapGrid::default()
            };
            let mut t = Table::new(&["s", "P", "I", "feasible"]);
            for cell in mi_map(&grid)? {
                t.push(vec![
                    Cell::Float(cell.s),
                    Cell::Float(cell.p),
                    Cell::Float(cell.mi),
                    Cell::Bool(cell.feasible),
                ]);
            }
            Ok(("fig4", t, json!({ "figure": "fig4", "grid": grid })))
        }
    }
}
