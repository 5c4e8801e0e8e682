//! Grid evaluations behind each subcommand. Points are evaluated in
//! parallel and collected in grid order (delta major, buffer minor).

use anyhow::Result;
use ehstore::dist::DEFAULT_TAIL_SECTIONS;
use ehstore::perf::{metrics, optimal_delta, Metrics, OutageModel};
use ehstore::scalar::to_f64;
use ehstore::sim::{distribution_distance, simulate, Estimate, SimConfig, SimResult};
use ehstore::{
    finite_approx, finite_exact, infinite_pdf, BufferSize, BufferSpec, EffectiveParams, Error, Wide,
};
use rayon::prelude::*;

use crate::config::{to_microwatts, Resolved, SimRun};
use crate::table::{fmt, num, Table};

pub const ANALYZE_COLUMNS: [&str; 15] = [
    "delta_tilde",
    "buffer_l",
    "m_eff_uW",
    "p_root",
    "d_root",
    "atom_exact",
    "atom_approx",
    "p_trans",
    "aer",
    "p_out_channel",
    "p_out_total",
    "status",
    "m_uW",
    "c_approx",
    "p_trans_approx",
];

/// Closed-form quantities of one grid point.
#[derive(Debug, Clone, Default)]
pub struct Point {
    pub delta: f64,
    pub buffer: Option<BufferSize>,
    pub eff: Option<EffectiveParams>,
    pub p_root: Option<f64>,
    pub d_root: Option<f64>,
    pub atom_exact: Option<f64>,
    pub atom_approx: Option<f64>,
    pub c_approx: Option<f64>,
    pub p_trans_approx: Option<f64>,
    pub metrics: Option<Metrics>,
    pub status: String,
}

impl Point {
    fn cells(&self) -> Vec<String> {
        let m = self.metrics;
        vec![
            num(self.delta),
            self.buffer.map(|b| b.label()).unwrap_or_default(),
            fmt(self.eff.map(|e| to_microwatts(e.m_eff))),
            fmt(self.p_root),
            fmt(self.d_root),
            fmt(self.atom_exact),
            fmt(self.atom_approx),
            fmt(m.map(|m| m.p_trans)),
            fmt(m.map(|m| m.aer)),
            fmt(m.map(|m| m.p_out_channel)),
            fmt(m.map(|m| m.p_out_total)),
            self.status.clone(),
            fmt(self.eff.map(|e| to_microwatts(e.tx_power))),
            fmt(self.c_approx),
            fmt(self.p_trans_approx),
        ]
    }
}

fn status_of(e: &Error) -> String {
    match e {
        Error::NoStationaryDistribution { .. } => "no_stationary_distribution".into(),
        Error::NumericInstability { .. } => "numeric_instability".into(),
        other => format!("error: {other}"),
    }
}

pub fn evaluate(cfg: &Resolved, delta: f64, buffer: BufferSize) -> Point {
    let mut point = Point { delta, buffer: Some(buffer), status: "ok".into(), ..Default::default() };
    let eff = match EffectiveParams::from_delta(delta, cfg.harvest_mean_eff, &cfg.imperfections) {
        Ok(e) => e,
        Err(e) => {
            point.status = status_of(&e);
            return point;
        }
    };
    point.eff = Some(eff);
    if eff.delta > 1.0 {
        point.p_root = infinite_pdf::<f64>(&eff).ok().map(|d| d.p);
    }
    let buf = match buffer.resolve(&eff) {
        Ok(b) => b,
        Err(e) => {
            point.status = status_of(&e);
            return point;
        }
    };
    match buf {
        BufferSpec::Infinite => {
            if eff.delta <= 1.0 {
                point.status = "no_stationary_distribution".into();
            }
        }
        BufferSpec::Finite { sections, .. } => {
            match finite_exact::<Wide>(&eff, &buf) {
                Ok(d) => point.atom_exact = Some(to_f64(d.atom)),
                Err(e) => {
                    point.status = status_of(&e);
                    return point;
                }
            }
            if sections >= 3 {
                match finite_approx::<Wide>(&eff, &buf, DEFAULT_TAIL_SECTIONS) {
                    Ok(a) => {
                        point.d_root = Some(to_f64(a.d));
                        point.atom_approx = Some(to_f64(a.atom));
                        point.c_approx = Some(to_f64(a.c));
                        point.p_trans_approx = Some(to_f64(a.transmission_probability()));
                    }
                    Err(Error::NumericInstability { .. }) => point.status = "approx_unstable".into(),
                    Err(e) => point.status = format!("approx {}", status_of(&e)),
                }
            }
        }
    }
    match metrics(&eff, buffer, &cfg.link) {
        Ok(m) => point.metrics = Some(m),
        Err(e) => point.status = status_of(&e),
    }
    point
}

fn grid(cfg: &Resolved) -> Vec<(f64, BufferSize)> {
    cfg.deltas.iter().flat_map(|&d| cfg.buffers.iter().map(move |&b| (d, b))).collect()
}

pub fn analyze(cfg: &Resolved) -> Table {
    let points: Vec<Point> = grid(cfg).into_par_iter().map(|(d, b)| evaluate(cfg, d, b)).collect();
    let mut table = Table::new("analyze.v1", ANALYZE_COLUMNS.to_vec());
    for p in &points {
        table.push(p.cells(), None);
    }
    table
}

const SIM_COLUMNS: [&str; 17] = [
    "p_trans_sim",
    "p_trans_ci",
    "atom_sim",
    "atom_ci",
    "aer_sim",
    "aer_ci",
    "p_out_channel_sim",
    "p_out_channel_ci",
    "p_out_total_sim",
    "p_out_total_ci",
    "p_trans_agree",
    "atom_agree",
    "aer_agree",
    "p_out_channel_agree",
    "p_out_total_agree",
    "sup_cdf",
    "non_stationary",
];

fn flag(est: &Estimate, reference: Option<f64>) -> String {
    match reference {
        Some(r) if est.agrees(r) => "within".into(),
        Some(_) => "outside".into(),
        None => String::new(),
    }
}

struct Simulated {
    point: Point,
    result: Option<SimResult>,
    sup_cdf: Option<f64>,
    error: Option<String>,
}

fn simulate_point(cfg: &Resolved, run: &SimRun, index: usize, delta: f64, buffer: BufferSize) -> Simulated {
    let point = evaluate(cfg, delta, buffer);
    let Some(eff) = point.eff else {
        return Simulated { point, result: None, sup_cdf: None, error: None };
    };
    let outcome = (|| -> Result<(SimResult, Option<f64>)> {
        let buf = buffer.resolve(&eff)?;
        // point i of the grid uses seed + i; replication r of it uses stream r
        let seed = run.seed.wrapping_add(index as u64);
        let mut sim_cfg = SimConfig::with_total_slots(run.slots, run.replications, seed, &buf, eff.delta)?;
        if let Some(w) = run.warmup_slots {
            sim_cfg.n_slots = sim_cfg.n_slots - sim_cfg.warmup_slots + w;
            sim_cfg.warmup_slots = w;
        }
        sim_cfg.histogram_bins = run.histogram_bins;
        sim_cfg.error_counting = run.counting();
        let result = simulate(&eff, &buf, &cfg.link, &sim_cfg)?;
        let sup = match buf {
            BufferSpec::Finite { .. } => {
                let d = finite_exact::<Wide>(&eff, &buf)?;
                Some(distribution_distance(&result, &d.dist)?.sup_cdf)
            }
            BufferSpec::Infinite if eff.delta > 1.0 => {
                let d = infinite_pdf::<f64>(&eff)?;
                Some(distribution_distance(&result, &d.dist)?.sup_cdf)
            }
            BufferSpec::Infinite => None,
        };
        Ok((result, sup))
    })();
    match outcome {
        Ok((result, sup_cdf)) => Simulated { point, result: Some(result), sup_cdf, error: None },
        Err(e) => Simulated { point, result: None, sup_cdf: None, error: Some(format!("{e}")) },
    }
}

/// Analyze columns followed by the simulated estimates, their confidence
/// radii and agreement flags.
pub fn simulate_grid(cfg: &Resolved, run: &SimRun) -> Result<Table> {
    if run.slots == 0 {
        return Err(Error::Config("the simulation needs a positive number of slots".into()).into());
    }
    let pts = grid(cfg);
    let sims: Vec<Simulated> =
        pts.into_par_iter().enumerate().map(|(i, (d, b))| simulate_point(cfg, run, i, d, b)).collect();
    let mut columns = ANALYZE_COLUMNS.to_vec();
    columns.extend(SIM_COLUMNS);
    let mut table = Table::new("simulate.v1", columns);
    for s in &sims {
        let mut row = s.point.cells();
        if let Some(e) = &s.error {
            row[11] = format!("sim error: {e}");
        }
        let m = s.point.metrics;
        match &s.result {
            Some(r) => {
                let est = [r.p_trans, r.atom_freq, r.aer, r.channel_outage, r.total_outage];
                for e in &est {
                    row.push(num(e.value));
                    row.push(num(e.ci_radius));
                }
                let atom_ref = match s.point.buffer {
                    Some(BufferSize::Sections(_)) => s.point.atom_exact,
                    _ => Some(0.0),
                };
                row.push(flag(&r.p_trans, m.map(|m| m.p_trans)));
                row.push(flag(&r.atom_freq, atom_ref));
                row.push(flag(&r.aer, m.map(|m| m.aer)));
                row.push(flag(&r.channel_outage, m.map(|m| m.p_out_channel)));
                row.push(flag(&r.total_outage, m.map(|m| m.p_out_total)));
                row.push(fmt(s.sup_cdf));
                row.push(r.non_stationary.to_string());
            }
            None => row.extend(std::iter::repeat(String::new()).take(SIM_COLUMNS.len())),
        }
        table.push(row, s.result.as_ref().map(SimResult::to_json));
    }
    Ok(table)
}

/// Histograms of a simulate table's JSON attachments, one CSV per point.
pub fn histogram_files(table: &Table) -> Vec<(String, String)> {
    table
        .rows
        .iter()
        .zip(&table.attachments)
        .filter_map(|(row, att)| {
            let h = att.as_ref()?.get("histogram")?;
            let edges: Vec<f64> = h["edges"].as_array()?.iter().filter_map(|v| v.as_str()?.parse().ok()).collect();
            let masses: Vec<f64> = h["masses"].as_array()?.iter().filter_map(|v| v.as_str()?.parse().ok()).collect();
            let mut csv = String::from("bin_center,mass\n");
            for (w, m) in edges.windows(2).zip(&masses) {
                csv.push_str(&format!("{},{}\n", num(0.5 * (w[0] + w[1])), num(*m)));
            }
            Some((format!("hist_d{}_l{}.csv", row[0], row[1]), csv))
        })
        .collect()
}

/// The second one-dimensional sweep: buffer size at each configured delta.
pub fn sweep_buffers(cfg: &Resolved, max_sections: u32) -> Table {
    let mut sizes: Vec<BufferSize> = (2..=max_sections).map(BufferSize::Sections).collect();
    sizes.push(BufferSize::Infinite);
    let pts: Vec<(f64, BufferSize)> = cfg.deltas.iter().flat_map(|&d| sizes.iter().map(move |&b| (d, b))).collect();
    let points: Vec<Point> = pts.into_par_iter().map(|(d, b)| evaluate(cfg, d, b)).collect();
    let mut table = Table::new(
        "sweep.v1",
        vec!["delta_tilde", "buffer_l", "capacity_uJ", "atom_exact", "p_trans", "p_out_total", "status"],
    );
    for p in &points {
        let capacity = match (p.buffer, p.eff) {
            (Some(BufferSize::Sections(l)), Some(e)) => Some(to_microwatts(l as f64 * e.m_eff)),
            _ => None,
        };
        table.push(
            vec![
                num(p.delta),
                p.buffer.map(|b| b.label()).unwrap_or_default(),
                fmt(capacity),
                fmt(p.atom_exact),
                fmt(p.metrics.map(|m| m.p_trans)),
                fmt(p.metrics.map(|m| m.p_out_total)),
                p.status.clone(),
            ],
            None,
        );
    }
    table
}

pub fn optimize(cfg: &Resolved) -> Table {
    let results: Vec<(BufferSize, Result<(ehstore::Optimum, EffectiveParams, Metrics)>)> = cfg
        .buffers
        .par_iter()
        .map(|&b| {
            let model = OutageModel {
                buffer: b,
                link: cfg.link,
                imperfections: cfg.imperfections,
                harvest_mean_eff: cfg.harvest_mean_eff,
            };
            let r = (|| -> Result<_> {
                let opt = optimal_delta(&model, &cfg.deltas)?;
                let eff = model.effective(opt.delta)?;
                let m = metrics(&eff, b, &cfg.link)?;
                Ok((opt, eff, m))
            })();
            (b, r)
        })
        .collect();
    let mut table = Table::new(
        "optimize.v1",
        vec!["buffer_l", "delta_star", "m_uW", "m_eff_uW", "p_out_total", "p_trans", "regime", "status"],
    );
    for (b, r) in &results {
        let row = match r {
            Ok((opt, eff, m)) => vec![
                b.label(),
                num(opt.delta),
                num(to_microwatts(eff.tx_power)),
                num(to_microwatts(eff.m_eff)),
                num(opt.outage),
                num(m.p_trans),
                if opt.high_outage { "high_outage" } else { "normal" }.into(),
                "ok".into(),
            ],
            Err(e) => {
                let mut row = vec![b.label()];
                row.extend(std::iter::repeat(String::new()).take(6));
                row.push(format!("error: {e}"));
                row
            }
        };
        table.push(row, None);
    }
    table
}

/// Whether the optimal draws grow with the buffer; only meaningful outside
/// the high-outage regime.
pub fn optimum_note(table: &Table) -> Option<String> {
    let rows: Vec<&Vec<String>> = table.rows.iter().filter(|r| r[7] == "ok").collect();
    if rows.iter().any(|r| r[6] == "high_outage") {
        return Some("high-outage regime (total outage > 0.5): no monotonicity in the buffer size is expected".into());
    }
    let mut finite: Vec<(u32, f64)> = rows
        .iter()
        .filter_map(|r| Some((r[0].parse::<u32>().ok()?, r[1].parse::<f64>().ok()?)))
        .collect();
    finite.sort_by_key(|p| p.0);
    let increasing = finite.windows(2).all(|w| w[0].1 <= w[1].1);
    Some(format!("optimal delta non-decreasing in buffer size: {increasing}"))
}
