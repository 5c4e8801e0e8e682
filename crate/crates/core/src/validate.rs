//! Self-check suite: special-function identities, normalization, integral
//! residuals, approximation error bounds, the large-buffer limit and, unless
//! running fast, Monte Carlo agreement at a pinned seed.

use serde::Serialize;

use crate::dist::{
    approx_error, asymptotic_infinite_limit_check, finite_approx, finite_exact, infinite_pdf, integral_residual,
    sample_points,
};
use crate::error::Result;
use crate::perf::{aer, channel_outage, total_outage, LinkParams};
use crate::scalar::{lit, to_f64, Wide};
use crate::sim::{distribution_distance, simulate, SimConfig, DEFAULT_REPLICATIONS};
use crate::special::{lambert_w, r_series, upper_incomplete_gamma_int, BranchIndex};
use crate::storage::{BufferSpec, EffectiveParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Skip the Monte Carlo checks.
    pub fast: bool,
    pub seed: u64,
    /// Multiply the atom, and with it every section, of the distributions
    /// under test by this factor. Anything but 1 must make checks fail.
    pub atom_factor: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { fast: false, seed: 1, atom_factor: 1.0 }
    }
}

const MC_SLOTS: u64 = 2_000_000;

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

fn from_result(name: &str, r: Result<Check>) -> Check {
    r.unwrap_or_else(|e| check(name, false, format!("error: {e}")))
}

fn unit(delta: f64) -> Result<EffectiveParams> {
    EffectiveParams::ideal(1.0, 1.0 / delta)
}

fn special_functions() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for z in [-0.36, -0.2, -0.01, 0.5, 3.0, 100.0] {
        let w: f64 = lambert_w(BranchIndex::Principal, z)?;
        worst = worst.max((w * w.exp() - z).abs() / z.abs());
    }
    for z in [-0.36, -0.2, -0.01] {
        let w: f64 = lambert_w(BranchIndex::Lower, z)?;
        worst = worst.max((w * w.exp() - z).abs() / z.abs());
    }
    // Gamma(n+1, x) = n Gamma(n, x) + x^n e^{-x}
    for n in 1..8u32 {
        for x in [-3.0, 0.5, 4.0] {
            let lhs: f64 = upper_incomplete_gamma_int(n + 1, x)?;
            let rhs = n as f64 * upper_incomplete_gamma_int::<f64>(n, x)? + x.powi(n as i32) * (-x).exp();
            worst = worst.max((lhs - rhs).abs() / lhs.abs());
        }
    }
    // R(y, 0) = 1 and R(y, 1) = 1 + (y+1) delta e^{-delta}
    let r1: f64 = r_series(-2.5, 1, 0.8);
    worst = worst.max((r1 - (1.0 - 1.5 * 0.8 * (-0.8f64).exp())).abs());
    worst = worst.max((r_series::<f64>(-2.5, 0, 0.8) - 1.0).abs());
    Ok(check("special functions", worst < 1e-12, format!("worst identity gap {worst:.2e}")))
}

fn normalization(factor: f64) -> Result<Check> {
    let f: Wide = lit(factor);
    let mut worst: f64 = 0.0;
    for delta in [0.5, 0.8, 0.965, 1.0, 1.2] {
        let eff = unit(delta)?;
        for l in [2u32, 3, 4, 7, 20] {
            let buf = BufferSpec::finite(l, &eff)?;
            let exact = finite_exact::<Wide>(&eff, &buf)?;
            worst = worst.max(to_f64(num_traits::Float::abs(exact.dist.scaled(f).total_mass() - lit::<Wide>(1.0))));
            if l >= 3 {
                let approx = finite_approx::<Wide>(&eff, &buf, 2)?;
                worst = worst.max(to_f64(num_traits::Float::abs(approx.dist.scaled(f).total_mass() - lit::<Wide>(1.0))));
            }
        }
    }
    Ok(check("normalization", worst <= 1e-9, format!("max |mass - 1| = {worst:.2e}")))
}

fn residuals(factor: f64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for delta in [0.5, 0.965, 1.2, 2.0] {
        let eff = unit(delta)?;
        for l in [2u32, 3, 4, 7] {
            let d = finite_exact::<f64>(&eff, &BufferSpec::finite(l, &eff)?)?.dist.scaled(factor);
            worst = worst.max(integral_residual(&d, &sample_points(&d, 200)).sup);
        }
    }
    for delta in [1.25, 2.0] {
        let d = infinite_pdf::<f64>(&unit(delta)?)?.dist;
        worst = worst.max(integral_residual(&d, &sample_points(&d, 200)).sup);
    }
    Ok(check("integral residuals", worst <= 1e-7, format!("sup residual {worst:.2e}")))
}

fn error_bounds() -> Result<Check> {
    let mut worst = [0.0f64; 2];
    let mut gap: f64 = 0.0;
    for (i, l) in [3u32, 4].into_iter().enumerate() {
        for j in 0..=30 {
            let delta = 0.5 + 0.1 * j as f64;
            let eff = unit(delta)?;
            let buf = BufferSpec::finite(l, &eff)?;
            let exact = finite_exact::<f64>(&eff, &buf)?;
            let approx = finite_approx::<f64>(&eff, &buf, 2)?;
            for k in 1..=50 {
                let x = k as f64 / 50.0;
                let e = approx_error(x, &eff, &buf, 2)?;
                gap = gap.max((e - (exact.head(x) - approx.head(x))).abs());
                worst[i] = worst[i].max((e / exact.head(x)).abs());
            }
        }
    }
    Ok(check(
        "approximation error bounds",
        worst[0] <= 0.083 && worst[1] <= 0.0164 && gap <= 1e-10,
        format!("max |e/g| {:.4} (l=3), {:.5} (l=4), formula gap {gap:.1e}", worst[0], worst[1]),
    ))
}

fn asymptotics() -> Result<Check> {
    let sups = asymptotic_infinite_limit_check(1.2, &[4, 8, 16, 32])?;
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let eff = unit(1.2)?;
    let exact = finite_exact::<Wide>(&eff, &BufferSpec::finite(40, &eff)?)?;
    let gap = (to_f64(exact.transmission_probability()) - 1.0 / 1.2).abs();
    Ok(check(
        "large-buffer limit",
        decreasing && gap <= 1e-3,
        format!("head gaps decreasing: {decreasing}, |P_trans(40) - 1/delta| = {gap:.1e}"),
    ))
}

fn monte_carlo(seed: u64, factor: f64) -> Result<Check> {
    let eff = unit(0.965)?;
    let buf = BufferSpec::finite(4, &eff)?;
    let link = LinkParams::from_snr(288.4, 1.0, 1.0, 2.0, 2.1)?;
    let exact = finite_exact::<Wide>(&eff, &buf)?;
    let dist = exact.dist.scaled(lit(factor));
    let atom = to_f64(dist.atom());
    let p_trans = to_f64(lit::<Wide>(1.0) - dist.density_mass(lit::<Wide>(0.0), lit::<Wide>(1.0)));
    let cfg = SimConfig::with_total_slots(MC_SLOTS, DEFAULT_REPLICATIONS, seed, &buf, eff.delta)?;
    let r = simulate(&eff, &buf, &link, &cfg)?;
    let dd = distribution_distance(&r, &dist)?;
    // Kolmogorov scale of the sample, widened for correlated slots and binning
    let cdf_bound = 3.0 * 0.5 / (r.slots_counted as f64).sqrt() + 1e-3;
    let u = eff.ul_ratio();
    let total = total_outage(p_trans, channel_outage(&link, u));
    let flags = [
        r.p_trans.agrees(p_trans),
        r.atom_freq.agrees(atom),
        r.aer.agrees(aer(&link, u)),
        r.total_outage.agrees(total),
        dd.sup_cdf <= cdf_bound,
    ];
    Ok(check(
        "Monte Carlo agreement",
        flags.iter().all(|&f| f),
        format!(
            "P_trans {:.5} vs {p_trans:.5}, atom {:.5} vs {atom:.5}, sup-cdf {:.1e} (bound {cdf_bound:.1e})",
            r.p_trans.value, r.atom_freq.value, dd.sup_cdf
        ),
    ))
}

pub fn run(opts: &ValidateOptions) -> Vec<Check> {
    let mut checks = vec![
        from_result("special functions", special_functions()),
        from_result("normalization", normalization(opts.atom_factor)),
        from_result("integral residuals", residuals(opts.atom_factor)),
        from_result("approximation error bounds", error_bounds()),
        from_result("large-buffer limit", asymptotics()),
    ];
    if !opts.fast {
        checks.push(from_result("Monte Carlo agreement", monte_carlo(opts.seed, opts.atom_factor)));
    }
    checks
}
