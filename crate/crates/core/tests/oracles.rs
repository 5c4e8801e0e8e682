//! Closed forms against independently computed references: a backward
//! construction of the finite-buffer density from its delay ODE, exact
//! rational sums, and direct quadrature of the defining integrals.

use ehstore::perf::{aer, db_to_linear, LinkParams};
use ehstore::scalar::Scalar;
use ehstore::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            rule.iter().map(|(x, w)| w * f(lo + 0.5 * h * (x + 1.0))).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Chebyshev interpolant on [a, b] from values at the Chebyshev points.
struct Cheb {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Cheb {
    fn points(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let t = (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * t
            })
            .collect()
    }

    fn build(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let nodes = Self::points(a, b, n);
        let values = nodes.iter().map(|&x| f(x)).collect();
        Cheb { a, b, nodes, values }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            let d = x - self.nodes[j];
            if d == 0.0 {
                return self.values[j];
            }
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 } * if j % 2 == 0 { 1.0 } else { -1.0 };
            num += w * self.values[j] / d;
            den += w / d;
        }
        num / den
    }
}

/// Density sections and atom built backwards from the full-buffer section,
/// by integrating `g_n' + rate g_n = rate g_{n-1}(x + M)` (and `g' = rate
/// g(x + M)` below the draw), then normalizing.
fn backward_construction(delta: f64, l: usize) -> (Vec<Cheb>, f64) {
    let (m, rate) = (1.0, delta);
    let k = l as f64 * m;
    let rule = gauss_legendre(24);
    let n_pts = 40;
    // unnormalized, atom = 1
    let mut sections: Vec<Cheb> = vec![Cheb::build(k - m, k, n_pts, |x| rate * (-rate * (x - k)).exp())];
    for n in 1..l - 1 {
        let (lo, hi) = (k - (n + 1) as f64 * m, k - n as f64 * m);
        let prev = &sections[n - 1];
        let right = if n == 1 { prev.eval(hi) - rate } else { prev.eval(hi) };
        let g = Cheb::build(lo, hi, n_pts, |x| {
            let forced = integrate(&|t| (-rate * (x - t)).exp() * prev.eval(t + m), x, hi, 4, &rule);
            (-rate * (x - hi)).exp() * right - rate * forced
        });
        sections.push(g);
    }
    let prev = &sections[l - 2];
    let head = Cheb::build(0.0, m, n_pts, |x| rate * integrate(&|t| prev.eval(t + m), 0.0, x, 4, &rule));
    sections.push(head);
    let mass: f64 = 1.0 + sections.iter().map(|s| integrate(&|x| s.eval(x), s.a, s.b, 8, &rule)).sum::<f64>();
    for s in &mut sections {
        for v in &mut s.values {
            *v /= mass;
        }
    }
    (sections, 1.0 / mass)
}

#[test]
fn exact_density_matches_backward_construction() {
    for (delta, l) in [(0.5, 3), (0.965, 4), (1.2, 4), (2.0, 5), (0.8, 7)] {
        let eff = EffectiveParams::ideal(1.0, 1.0 / delta).unwrap();
        let exact = finite_exact::<f64>(&eff, &BufferSpec::finite(l as u32, &eff).unwrap()).unwrap();
        let (sections, atom) = backward_construction(delta, l);
        assert!((exact.atom - atom).abs() < 1e-9 * atom, "delta {delta} l {l}: {} vs {atom}", exact.atom);
        let peak = sections.iter().flat_map(|s| s.values.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        for s in &sections {
            for i in 0..=20 {
                let x = s.a + (s.b - s.a) * (0.001 + 0.998 * i as f64 / 20.0);
                let got = exact.dist.pdf(x).unwrap();
                assert!((got - s.eval(x)).abs() < 1e-8 * peak, "delta {delta} l {l} x {x}: {got} vs {}", s.eval(x));
            }
        }
        // the construction closes: the head meets the next section at M
        let head = sections.last().unwrap();
        let above = &sections[l - 2];
        assert!((head.eval(1.0) - above.eval(1.0)).abs() < 1e-8 * peak);
    }
}

fn decimal_to_rational(s: &str) -> BigRational {
    let (mantissa, exp) = s.split_once(['e', 'E']).map(|(a, b)| (a, b.parse::<i64>().unwrap())).unwrap_or((s, 0));
    let negative = mantissa.starts_with('-');
    let digits = mantissa.trim_start_matches(['-', '+']);
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let n: BigInt = format!("{int}{frac}").parse().unwrap();
    let scale = exp - frac.len() as i64;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(n);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    if negative {
        -r
    } else {
        r
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    let s = 60usize;
    let scaled = (r * BigRational::from_integer(num_traits::pow(BigInt::from(10), s))).round().to_integer();
    scaled.to_string().parse::<f64>().unwrap() / 1e60
}

/// `R(y, l)` summed exactly over the rationals for the given `z = delta e^{-delta}`.
fn r_series_rational(y: &BigRational, l: usize, z: &BigRational) -> (BigRational, BigRational) {
    let mut sum = BigRational::zero();
    let mut magnitude = BigRational::zero();
    let mut fact = BigRational::one();
    for q in 0..=l {
        if q > 0 {
            fact *= BigRational::from_integer(BigInt::from(q));
        }
        let base = y + BigRational::from_integer(BigInt::from(q));
        let term = num_traits::pow(base * z, q) / &fact;
        magnitude += if term < BigRational::zero() { -term.clone() } else { term.clone() };
        sum += term;
    }
    (sum, magnitude)
}

#[test]
fn r_series_matches_rational_sum() {
    for (y, l, delta) in [(-3.0, 2, 0.5), (-4.0, 3, 1.2), (-7.0, 6, 0.965), (-12.0, 11, 2.0), (-20.0, 19, 0.8), (-2.5, 24, 1.5), (0.25, 10, 3.0)] {
        let yr = decimal_to_rational(&(y as f64).to_decimal());
        // z rounded to each precision, then summed exactly
        let z64 = delta * (-delta as f64).exp();
        let (exact, mag) = r_series_rational(&yr, l, &decimal_to_rational(&z64.to_decimal()));
        let got = r_series::<f64>(y, l, delta);
        let tol = 1e-13 * rational_to_f64(&mag);
        assert!((got - rational_to_f64(&exact)).abs() <= tol, "R({y},{l},{delta}) = {got}");

        let dw: Wide = scalar::lit(delta);
        let zw = dw * num_traits::Float::exp(-dw);
        let (exact_w, mag_w) = r_series_rational(&yr, l, &decimal_to_rational(&zw.to_decimal()));
        let got_w = r_series::<Wide>(scalar::lit(y), l, dw);
        let diff = decimal_to_rational(&got_w.to_decimal()) - exact_w;
        let rel = rational_to_f64(&diff).abs() / rational_to_f64(&mag_w);
        assert!(rel < 1e-28, "Wide R({y},{l},{delta}): {rel:e}");
    }
    assert!((r_series::<f64>(-3.0, 2, 0.5) - 0.439454).abs() < 5e-7);
}

#[test]
fn incomplete_gamma_matches_quadrature() {
    let rule = gauss_legendre(30);
    for n in 1..=8u32 {
        for x in [-6.0f64, -2.5, -0.3, 0.0, 0.7, 3.0, 9.0] {
            let f = |t: f64| t.powi(n as i32 - 1) * (-t).exp();
            let upper = x.max(0.0) + 80.0;
            let reference = integrate(&f, x, upper, 200, &rule);
            let got = upper_incomplete_gamma_int::<f64>(n, x).unwrap();
            assert!((got - reference).abs() <= 1e-12 * reference.abs().max(1e-300), "Gamma({n},{x}): {got} vs {reference}");
        }
    }
    assert!(upper_incomplete_gamma_int::<f64>(0, 1.0).is_err());
}

#[test]
fn aer_matches_quadrature_of_its_integral() {
    let rule = gauss_legendre(30);
    let q = |v: f64| 0.5 * libm::erfc(v / std::f64::consts::SQRT_2);
    let mut checked = 0;
    for snr_db in [0.0, 10.0, 24.6, 40.0, 60.0] {
        for u in [0.1, 0.5, 0.965, 1.5] {
            let link = LinkParams::from_snr(db_to_linear(snr_db), 1.0, 1.0, 2.0, 2.1).unwrap();
            let c = link.mod_b * link.snr_bar * u;
            // h = s^2 removes the square-root kink at the origin
            let f = |s: f64| link.mod_a * q((c * s * s).sqrt()) * (-s * s).exp() * 2.0 * s;
            let cutoff = (80.0 / (1.0 + 0.5 * c)).sqrt();
            let reference = integrate(&f, 0.0, cutoff, 64, &rule);
            let got = aer(&link, u);
            assert!((got - reference).abs() <= 1e-10 * reference, "snr {snr_db} dB, u {u}: {got} vs {reference}");
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn infinite_buffer_head_matches_its_delay_equation() {
    // below the draw the density satisfies g'(x) = rate g(x + M), g(0) = 0
    for delta in [1.1, 1.25, 2.0] {
        let eff = EffectiveParams::ideal(1.0, 1.0 / delta).unwrap();
        let d = infinite_pdf::<f64>(&eff).unwrap();
        let rule = gauss_legendre(24);
        for i in 1..=10 {
            let x = i as f64 / 10.0;
            let rhs = delta * integrate(&|t| d.dist.pdf(t + 1.0).unwrap(), 0.0, x, 4, &rule);
            assert!((d.head(x) - rhs).abs() < 1e-12, "delta {delta} x {x}");
        }
    }
}
