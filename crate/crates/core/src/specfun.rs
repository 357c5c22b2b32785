//! Special-function kernels used by the coverage formulas.
//!
//! Everything here is a pure function of its arguments. The hypergeometric
//! routine only has to cover `0 <= z < 1`, which is where every coverage
//! formula evaluates it.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("{function}: argument {value} outside the domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("{function}: series did not converge within {max_terms} terms")]
    NonConvergence {
        function: &'static str,
        max_terms: usize,
    },
}

/// Truncation control for power-series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl SeriesTolerance {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self, SpecfunError> {
        if !(rel_tol > 0.0) {
            return Err(SpecfunError::Domain {
                function: "SeriesTolerance",
                value: rel_tol,
                expected: "rel_tol > 0",
            });
        }
        if max_terms == 0 {
            return Err(SpecfunError::Domain {
                function: "SeriesTolerance",
                value: 0.0,
                expected: "max_terms >= 1",
            });
        }
        Ok(Self { rel_tol, max_terms })
    }
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_terms: 500,
        }
    }
}

// Lanczos approximation, g = 671/128, 14 coefficients (full double precision
// for x > 0).
const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_1;
const LANCZOS_COEF: [f64; 14] = [
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_76e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_88e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_23e-5,
];
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ZETA_TERMS: usize = 40;
// Radius around x = 1 and x = 2 where the Taylor expansion is used, so the
// result keeps full relative accuracy near the two zeros of ln Γ.
const ROOT_RADIUS: f64 = 0.25;

/// ζ(k) for k = 2..=ZETA_TERMS+1, by Euler–Maclaurin summation.
fn zeta_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        const N: usize = 64;
        let n = N as f64;
        (2..=ZETA_TERMS + 1)
            .map(|k| {
                let kf = k as f64;
                // sum from the smallest terms up
                let head: f64 = (1..N).rev().map(|j| (j as f64).powf(-kf)).sum();
                let mut tail = n.powf(1.0 - kf) / (kf - 1.0) + 0.5 * n.powf(-kf);
                // B2/2!, B4/4!, B6/6!, B8/8!
                let bern = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30_240.0, -1.0 / 1_209_600.0];
                let mut rising = kf;
                let mut power = n.powf(-kf - 1.0);
                for (j, b) in bern.iter().enumerate() {
                    tail += b * rising * power;
                    let jj = 2.0 * j as f64;
                    rising *= (kf + jj + 1.0) * (kf + jj + 2.0);
                    power /= n * n;
                }
                head + tail
            })
            .collect()
    })
}

/// ln Γ(1 + e) for |e| small, from the ζ-series of ln Γ.
fn log_gamma_1p(e: f64) -> f64 {
    let zeta = zeta_table();
    let mut acc = 0.0;
    // (-e)^k, starting at k = 1
    let mut power = -e;
    for (i, z) in zeta.iter().enumerate() {
        power *= -e;
        let k = (i + 2) as f64;
        acc += z * power / k;
    }
    -EULER_GAMMA * e + acc
}

fn log_gamma_lanczos(x: f64) -> f64 {
    let tmp = x + LANCZOS_G;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS_COEF {
        y += 1.0;
        ser += c / y;
    }
    tmp + (SQRT_2PI * ser / x).ln()
}

/// Natural logarithm of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, SpecfunError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecfunError::Domain {
            function: "log_gamma",
            value: x,
            expected: "finite x > 0",
        });
    }
    if (x - 1.0).abs() < ROOT_RADIUS {
        return Ok(log_gamma_1p(x - 1.0));
    }
    if (x - 2.0).abs() < ROOT_RADIUS {
        let e = x - 2.0;
        return Ok(log_gamma_1p(e) + e.ln_1p());
    }
    Ok(log_gamma_lanczos(x))
}

/// Γ(x) for `x > 0`, through [`log_gamma`].
pub fn gamma(x: f64) -> Result<f64, SpecfunError> {
    log_gamma(x).map(f64::exp)
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) on `0 <= z < 1` by its
/// defining power series.
///
/// The series is summed until a geometric estimate of the remaining tail falls
/// below `rel_tol` times the running sum. A terminating series
/// (`a` or `b` a non-positive integer) returns as soon as a term is exactly
/// zero.
pub fn gauss_2f1(
    a: f64,
    b: f64,
    c: f64,
    z: f64,
    tol: &SeriesTolerance,
) -> Result<f64, SpecfunError> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(SpecfunError::Domain {
            function: "gauss_2f1",
            value: c,
            expected: "c > 0",
        });
    }
    if !(0.0..1.0).contains(&z) {
        return Err(SpecfunError::Domain {
            function: "gauss_2f1",
            value: z,
            expected: "0 <= z < 1",
        });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(SpecfunError::Domain {
            function: "gauss_2f1",
            value: if a.is_finite() { b } else { a },
            expected: "finite a and b",
        });
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }

    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..tol.max_terms {
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        term *= ratio;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // geometric tail estimate; the term ratio tends to z
        let next = ((a + kf + 1.0) * (b + kf + 1.0) / ((c + kf + 1.0) * (kf + 2.0)) * z).abs();
        let q = next.max(z);
        if q < 1.0 && term.abs() * q / (1.0 - q) <= tol.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(SpecfunError::NonConvergence {
        function: "gauss_2f1",
        max_terms: tol.max_terms,
    })
}

/// C(α) = 2π² csc(2π/α) / α, the constant in the Laplace transform of the
/// interference from a Rayleigh-faded planar PPP.
pub fn interference_constant(alpha: f64) -> Result<f64, SpecfunError> {
    if !(alpha > 2.0) || !alpha.is_finite() {
        return Err(SpecfunError::Domain {
            function: "interference_constant",
            value: alpha,
            expected: "finite alpha > 2",
        });
    }
    Ok(2.0 * PI * PI / ((2.0 * PI / alpha).sin() * alpha))
}
